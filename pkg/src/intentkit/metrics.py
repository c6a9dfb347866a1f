"""Accuracy, confusion matrices, WER/CER and mean/std aggregation.

The edit-distance kernel is the compiled extension when it was built,
otherwise the pure-Python twin; both implement the identical DP and
tie-break order, so results never depend on which one is loaded.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Hashable, Iterable, Sequence

from .corpus import LABELS, IntentLabel
from ._editdist_py import edit_ops as _edit_ops_py

try:
    from ._editdist import edit_ops as _edit_ops_native

    EDITDIST_BACKEND = "native"
    _edit_ops_impl = _edit_ops_native
except ImportError:  # extension not built; pure Python does the same work
    EDITDIST_BACKEND = "python"
    _edit_ops_impl = _edit_ops_py


def editdist_backends() -> dict:
    """Available kernel implementations, keyed by name (for benchmarks/tests)."""
    backends = {"python": _edit_ops_py}
    if EDITDIST_BACKEND == "native":
        backends["native"] = _edit_ops_impl
    return backends


def edit_ops(ref: Sequence[Hashable], hyp: Sequence[Hashable]) -> tuple[int, int, int]:
    """(substitutions, insertions, deletions) transforming ref into hyp."""
    ids: dict[Hashable, int] = {}
    enc_ref = [ids.setdefault(t, len(ids)) for t in ref]
    enc_hyp = [ids.setdefault(t, len(ids)) for t in hyp]
    return _edit_ops_impl(enc_ref, enc_hyp)


# --------------------------------------------------------------------------
# Text normalization for error rates


@dataclass(frozen=True)
class TextNorm:
    """Named normalization policy applied before WER/CER.

    Error-rate numbers shift materially with the normalization choice, so
    the policy name is recorded in every ErrorRate.
    """

    policy: str = "fold-strip-v1"
    strip_chars: str = '.,!?;:"«»'

    def apply(self, text: str) -> str:
        table = str.maketrans("", "", self.strip_chars)
        return " ".join(text.translate(table).split()).casefold()

    def words(self, text: str) -> list[str]:
        normalized = self.apply(text)
        return normalized.split() if normalized else []

    def chars(self, text: str) -> list[str]:
        # Unicode scalar values of the normalized text, spaces included.
        return list(self.apply(text))


DEFAULT_NORM = TextNorm()


@dataclass(frozen=True)
class ErrorRate:
    """Edit-operation counts over a reference, as a rate (may exceed 1)."""

    rate: float
    substitutions: int
    insertions: int
    deletions: int
    ref_len: int
    norm: str = DEFAULT_NORM.policy

    @property
    def edits(self) -> int:
        return self.substitutions + self.insertions + self.deletions


def _error_rate(ref_units: Sequence, hyp_units: Sequence, norm: TextNorm) -> ErrorRate:
    s, i, d = edit_ops(ref_units, hyp_units)
    return ErrorRate(
        rate=(s + i + d) / len(ref_units),
        substitutions=s,
        insertions=i,
        deletions=d,
        ref_len=len(ref_units),
        norm=norm.policy,
    )


def word_error_rate(reference: str, hypothesis: str, norm: TextNorm = DEFAULT_NORM) -> ErrorRate:
    """Token-level Levenshtein rate; reference must normalize to >= 1 token."""
    ref = norm.words(reference)
    if not ref:
        raise ValueError("reference normalizes to zero tokens")
    return _error_rate(ref, norm.words(hypothesis), norm)


def char_error_rate(reference: str, hypothesis: str, norm: TextNorm = DEFAULT_NORM) -> ErrorRate:
    """Character-level Levenshtein rate over the normalized strings."""
    ref = norm.chars(reference)
    if not ref:
        raise ValueError("reference normalizes to zero characters")
    return _error_rate(ref, norm.chars(hypothesis), norm)


def corpus_error_rates(
    pairs: Iterable[tuple[str, str]], norm: TextNorm = DEFAULT_NORM
) -> tuple[ErrorRate, ErrorRate]:
    """Corpus-level (WER, CER): total edit operations over total reference length.

    This is not the mean of per-utterance rates.
    """
    totals = {"w": [0, 0, 0, 0], "c": [0, 0, 0, 0]}  # s, i, d, ref_len
    n = 0
    for reference, hypothesis in pairs:
        n += 1
        for key, units in (("w", norm.words), ("c", norm.chars)):
            ref, hyp = units(reference), units(hypothesis)
            s, i, d = edit_ops(ref, hyp)
            acc = totals[key]
            acc[0] += s
            acc[1] += i
            acc[2] += d
            acc[3] += len(ref)
    if n == 0:
        raise ValueError("no reference/hypothesis pairs")
    if totals["w"][3] == 0:
        raise ValueError("references normalize to zero tokens")
    out = []
    for key in ("w", "c"):
        s, i, d, ref_len = totals[key]
        out.append(ErrorRate(rate=(s + i + d) / ref_len, substitutions=s,
                             insertions=i, deletions=d, ref_len=ref_len, norm=norm.policy))
    return out[0], out[1]


# --------------------------------------------------------------------------
# Classification metrics


def accuracy(predictions: Sequence[IntentLabel], golds: Sequence[IntentLabel]) -> float:
    if len(predictions) != len(golds):
        raise ValueError(f"length mismatch: {len(predictions)} predictions vs {len(golds)} golds")
    if not golds:
        raise ValueError("cannot compute accuracy of an empty sequence")
    return sum(p == g for p, g in zip(predictions, golds)) / len(golds)


@dataclass(frozen=True)
class ConfusionMatrix:
    """6x6 counts, rows = gold label, columns = predicted, canonical order."""

    counts: tuple[tuple[int, ...], ...]

    @property
    def labels(self) -> tuple[IntentLabel, ...]:
        return LABELS

    def total(self) -> int:
        return sum(sum(row) for row in self.counts)

    def trace(self) -> int:
        return sum(self.counts[i][i] for i in range(len(LABELS)))

    def row_sums(self) -> tuple[int, ...]:
        return tuple(sum(row) for row in self.counts)

    def add(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        return ConfusionMatrix(tuple(
            tuple(a + b for a, b in zip(ra, rb))
            for ra, rb in zip(self.counts, other.counts)
        ))

    @classmethod
    def zeros(cls) -> "ConfusionMatrix":
        k = len(LABELS)
        return cls(tuple(tuple(0 for _ in range(k)) for _ in range(k)))


def confusion(predictions: Sequence[IntentLabel], golds: Sequence[IntentLabel]) -> ConfusionMatrix:
    if len(predictions) != len(golds):
        raise ValueError(f"length mismatch: {len(predictions)} predictions vs {len(golds)} golds")
    index = {label: i for i, label in enumerate(LABELS)}
    k = len(LABELS)
    counts = [[0] * k for _ in range(k)]
    for pred, gold in zip(predictions, golds):
        counts[index[gold]][index[pred]] += 1
    return ConfusionMatrix(tuple(tuple(row) for row in counts))


# --------------------------------------------------------------------------
# Aggregation

AGGREGATION_MODES = ("per_epoch_checkpoints", "per_run_finals")


@dataclass(frozen=True)
class AggregateScore:
    """Mean and sample standard deviation of a score list."""

    mean: float
    std: float
    n: int
    mode: str

    def formatted(self) -> str:
        """Two-decimal percent cell, e.g. '95.59±0.90'."""
        return f"{self.mean * 100:.2f}±{self.std * 100:.2f}"


def aggregate(values: Sequence[float], mode: str = "per_run_finals") -> AggregateScore:
    """Arithmetic mean with Bessel-corrected std (0 when n == 1)."""
    if not values:
        raise ValueError("cannot aggregate an empty sequence")
    if mode not in AGGREGATION_MODES:
        raise ValueError(f"unknown aggregation mode {mode!r}")
    n = len(values)
    mean = sum(values) / n
    std = math.sqrt(sum((v - mean) ** 2 for v in values) / (n - 1)) if n > 1 else 0.0
    return AggregateScore(mean=mean, std=std, n=n, mode=mode)
