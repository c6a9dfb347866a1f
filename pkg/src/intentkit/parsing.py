"""Extract utterances from keyword-delimited LLM output.

A candidate is the text strictly between a speaker keyword and the next
end keyword. Text outside keyword pairs (preambles, numbering, apologies)
is ignored. Parsing is total: pathological input yields an empty report,
never an exception.
"""
from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field

logger = logging.getLogger(__name__)

_LIST_MARKER = re.compile(r"^(?:\d+\.|-)\s*")


def normalize_utterance(text: str) -> str:
    """Trim and collapse whitespace; strip one leading list marker.

    Markers are "<digits>." or "-". Case and punctuation are preserved.
    """
    collapsed = " ".join(text.split())
    return _LIST_MARKER.sub("", collapsed, count=1)


@dataclass
class ParseReport:
    """Accepted utterances plus accounting for every dropped candidate."""

    accepted: list[str] = field(default_factory=list)
    dropped_incomplete: int = 0
    dropped_empty: int = 0
    dropped_duplicate_within_block: int = 0

    def total_candidates(self) -> int:
        return (
            len(self.accepted)
            + self.dropped_incomplete
            + self.dropped_empty
            + self.dropped_duplicate_within_block
        )


def parse_block(raw: str, speaker_keyword: str, end_keyword: str) -> ParseReport:
    """Scan ``raw`` for speaker/end keyword pairs and report the candidates.

    Keyword matching is exact and case-sensitive. A speaker keyword with no
    following end keyword opens an incomplete candidate; an end keyword with
    no preceding speaker keyword is ignored. A further speaker keyword inside
    an open candidate is kept as literal text (and logged), it does not
    restart the candidate.
    """
    if not speaker_keyword or not end_keyword:
        raise ValueError("keywords must be non-empty")
    if speaker_keyword == end_keyword:
        raise ValueError("speaker and end keywords must be distinct")

    report = ParseReport()
    seen: set[str] = set()
    pos = 0
    while True:
        start = raw.find(speaker_keyword, pos)
        if start < 0:
            break
        body_start = start + len(speaker_keyword)
        end = raw.find(end_keyword, body_start)
        if end < 0:
            report.dropped_incomplete += 1
            break
        candidate = raw[body_start:end]
        pos = end + len(end_keyword)
        if speaker_keyword in candidate:
            logger.warning(
                "speaker keyword inside open candidate treated as literal text: %r",
                candidate,
            )
        text = normalize_utterance(candidate)
        if not text:
            report.dropped_empty += 1
        elif text in seen:
            report.dropped_duplicate_within_block += 1
        else:
            seen.add(text)
            report.accepted.append(text)
    return report
