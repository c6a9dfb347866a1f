"""Interactive terminal review of generated utterances, with a replayable log.

Every decision is appended to a line-delimited JSON log as soon as it is
made, so a session can be interrupted and resumed: rerunning against the
same dataset continues at the first undecided item. Replaying the log with
``apply_log`` reproduces the session output exactly.
"""
from __future__ import annotations

import datetime as _dt
import json
import sys
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Sequence, TextIO

from .corpus import Dataset, IntentLabel, LABELS, Status, Utterance, parse_label
from .errors import DataFormatError

ACTIONS = ("accept", "reject", "relabel")

# Shortcut reject reasons offered in the prompt; free text is also fine.
REJECT_REASONS = {"g": "grammar", "n": "nonsense", "w": "wrong-command"}

_HEADER_TYPE = "curation-session"


@dataclass(frozen=True)
class CurationDecision:
    utterance_index: int
    action: str
    new_label: IntentLabel | None = None
    reason: str | None = None
    reviewer: str = ""
    timestamp: str = ""

    def __post_init__(self) -> None:
        if self.action not in ACTIONS:
            raise ValueError(f"unknown action {self.action!r}")
        if self.action == "relabel" and self.new_label is None:
            raise ValueError("relabel decisions need a new_label")
        if self.action != "relabel" and self.new_label is not None:
            raise ValueError("new_label is only valid for relabel decisions")

    def to_record(self) -> dict:
        return {
            "utterance_index": self.utterance_index,
            "action": self.action,
            "new_label": self.new_label.value if self.new_label else None,
            "reason": self.reason,
            "reviewer": self.reviewer,
            "timestamp": self.timestamp,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "CurationDecision":
        new_label = rec.get("new_label")
        return cls(
            utterance_index=rec["utterance_index"],
            action=rec["action"],
            new_label=parse_label(new_label) if new_label else None,
            reason=rec.get("reason"),
            reviewer=rec.get("reviewer", ""),
            timestamp=rec.get("timestamp", ""),
        )


def apply_log(dataset: Dataset, log: Sequence[CurationDecision]) -> Dataset:
    """Pure replay of a decision log against a dataset.

    Rejected items are dropped, relabeled items carry the old label in the
    audit field, undecided items stay raw.
    """
    decisions: dict[int, CurationDecision] = {}
    for decision in log:
        if not 0 <= decision.utterance_index < len(dataset.items):
            raise ValueError(
                f"decision index {decision.utterance_index} out of range for "
                f"{len(dataset.items)} items"
            )
        decisions[decision.utterance_index] = decision

    items: list[Utterance] = []
    for idx, item in enumerate(dataset.items):
        decision = decisions.get(idx)
        if decision is None:
            items.append(item)
        elif decision.action == "accept":
            items.append(replace(item, status=Status.ACCEPTED))
        elif decision.action == "reject":
            continue
        else:
            if decision.new_label is item.label:
                raise ValueError(
                    f"relabel to the same label {item.label.value!r} at index {idx} is invalid"
                )
            items.append(replace(
                item, label=decision.new_label,
                status=Status.RELABELED, original_label=item.label,
            ))
    return Dataset(name=dataset.name, items=tuple(items))


# --------------------------------------------------------------------------
# Log file I/O


def _read_log_file(path: Path) -> tuple[dict | None, list[CurationDecision]]:
    header = None
    decisions: list[CurationDecision] = []
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataFormatError(f"{path}: bad log line {lineno}: {exc}") from None
            if rec.get("type") == _HEADER_TYPE:
                header = rec
            else:
                try:
                    decisions.append(CurationDecision.from_record(rec))
                except (KeyError, ValueError) as exc:
                    raise DataFormatError(f"{path}: bad decision at line {lineno}: {exc}") from None
    return header, decisions


def load_decision_log(path: str | Path) -> list[CurationDecision]:
    _, decisions = _read_log_file(Path(path))
    return decisions


def _check_header(header: dict, dataset: Dataset, path: Path) -> None:
    if header.get("items") != len(dataset.items) or header.get("sha256") != dataset.fingerprint():
        raise DataFormatError(
            f"refusing to resume: log {path} was recorded against a different dataset "
            f"(item count or content hash mismatch)"
        )


# --------------------------------------------------------------------------
# Interactive session

_PROMPT = "[a]ccept [r]eject [l]abel [s]kip [q]uit > "


def _default_ask(prompt: str) -> str:
    return input(prompt)


def _render_item(index: int, total: int, item: Utterance, accepted_by_label: dict,
                 out: TextIO) -> None:
    tally = " ".join(f"{label.value}:{count}" for label, count in accepted_by_label.items() if count)
    print(f"[{index + 1}/{total}] label={item.label.value} source={item.source or '-'}"
          + (f"  (accepted {tally})" if tally else ""), file=out)
    print(f"  {item.text}", file=out)


def _ask_label(ask: Callable[[str], str], current: IntentLabel, out: TextIO) -> IntentLabel | None:
    choices = " ".join(f"{i + 1}={label.value}" for i, label in enumerate(LABELS))
    raw = ask(f"new label ({choices}) > ").strip()
    if not raw:
        return None
    if raw.isdigit() and 1 <= int(raw) <= len(LABELS):
        label = LABELS[int(raw) - 1]
    else:
        try:
            label = parse_label(raw)
        except DataFormatError:
            print(f"  unknown label {raw!r}", file=out)
            return None
    if label is current:
        print(f"  item already has label {current.value!r}", file=out)
        return None
    return label


def review_session(
    dataset: Dataset,
    log_path: str | Path,
    reviewer: str = "",
    ask: Callable[[str], str] | None = None,
    out: TextIO | None = None,
    auto_accept: bool = False,
) -> tuple[Dataset, list[CurationDecision]]:
    """Review undecided items one by one; returns (curated dataset, full log).

    The log file is created (with a dataset fingerprint header) on first
    use and appended per decision; resuming against a mismatched dataset is
    refused. ``auto_accept`` records an accept for every undecided item
    without prompting.
    """
    ask = ask or _default_ask
    out = out if out is not None else sys.stderr
    log_path = Path(log_path)

    decisions: list[CurationDecision] = []
    if log_path.exists() and log_path.stat().st_size > 0:
        header, decisions = _read_log_file(log_path)
        if header is None:
            raise DataFormatError(f"log {log_path} has no session header")
        _check_header(header, dataset, log_path)
    else:
        header = {"type": _HEADER_TYPE, "items": len(dataset.items),
                  "sha256": dataset.fingerprint()}
        with log_path.open("w", encoding="utf-8") as fh:
            fh.write(json.dumps(header, ensure_ascii=False) + "\n")

    decided = {d.utterance_index for d in decisions}
    accepted_by_label = {label: 0 for label in LABELS}
    for decision in decisions:
        if decision.action == "accept":
            accepted_by_label[dataset.items[decision.utterance_index].label] += 1

    def record(decision: CurationDecision) -> None:
        decisions.append(decision)
        with log_path.open("a", encoding="utf-8") as fh:
            fh.write(json.dumps(decision.to_record(), ensure_ascii=False) + "\n")
            fh.flush()

    def now() -> str:
        return _dt.datetime.now(_dt.timezone.utc).isoformat()

    total = len(dataset.items)
    for index, item in enumerate(dataset.items):
        if index in decided:
            continue
        if auto_accept:
            record(CurationDecision(index, "accept", reviewer=reviewer, timestamp=now()))
            continue
        _render_item(index, total, item, accepted_by_label, out)
        quitting = False
        while True:
            key = ask(_PROMPT).strip()[:1].lower()
            if key == "a":
                record(CurationDecision(index, "accept", reviewer=reviewer, timestamp=now()))
                accepted_by_label[item.label] += 1
                break
            if key == "r":
                raw = ask("reason (g=grammar n=nonsense w=wrong-command, free text, empty=none) > ").strip()
                reason = REJECT_REASONS.get(raw.lower(), raw) or None
                record(CurationDecision(index, "reject", reason=reason,
                                        reviewer=reviewer, timestamp=now()))
                break
            if key == "l":
                label = _ask_label(ask, item.label, out)
                if label is None:
                    continue
                record(CurationDecision(index, "relabel", new_label=label,
                                        reviewer=reviewer, timestamp=now()))
                break
            if key == "s":
                break
            if key == "q":
                quitting = True
                break
            print("  press one of: a r l s q", file=out)
        if quitting:
            break

    return apply_log(dataset, decisions), decisions
