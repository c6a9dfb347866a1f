"""Domain types for labeled utterances plus persistence, dedup and splitting.

Datasets are immutable after construction; every operation here is a pure
function of its inputs and safe to call concurrently.
"""
from __future__ import annotations

import enum
import hashlib
import json
import random
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

from .errors import DataFormatError


class IntentLabel(enum.Enum):
    """The six intent classes, in canonical report order."""

    HELP = "help"
    LIGHT_ON = "light_on"
    LIGHT_OFF = "light_off"
    ROLL_UP = "roll_up"
    ROLL_DOWN = "roll_down"
    NO_COMMAND = "no_command"


#: Canonical label order used by every matrix, report and classifier head.
LABELS: tuple[IntentLabel, ...] = tuple(IntentLabel)

_LABEL_BY_VALUE = {label.value: label for label in LABELS}


def parse_label(value: str) -> IntentLabel:
    """Map a label string to its enum value; anything else is an error."""
    try:
        return _LABEL_BY_VALUE[value]
    except KeyError:
        valid = ", ".join(sorted(_LABEL_BY_VALUE))
        raise DataFormatError(f"unknown label {value!r} (expected one of: {valid})") from None


class Status(enum.Enum):
    RAW = "raw"
    ACCEPTED = "accepted"
    REJECTED = "rejected"
    RELABELED = "relabeled"


def fold_key(text: str) -> str:
    """Dedup key: trim, collapse whitespace runs to one space, case-fold."""
    return " ".join(text.split()).casefold()


@dataclass(frozen=True)
class Utterance:
    """One labeled text sample with generation provenance."""

    text: str
    label: IntentLabel
    source: str = ""
    prompt_id: str = ""
    seed: int | None = None
    status: Status = Status.RAW
    original_label: IntentLabel | None = None

    def __post_init__(self) -> None:
        if not fold_key(self.text):
            raise ValueError("utterance text is empty after normalization")
        if self.seed is not None and self.seed < 0:
            raise ValueError("seed must be non-negative or absent")
        if self.status is Status.RELABELED and self.original_label is None:
            raise ValueError("relabeled utterance must carry its original label")
        if self.status is not Status.RELABELED and self.original_label is not None:
            raise ValueError("original_label is only valid on relabeled utterances")


@dataclass(frozen=True)
class Dataset:
    """Named, ordered collection of utterances."""

    name: str
    items: tuple[Utterance, ...] = ()

    def __len__(self) -> int:
        return len(self.items)

    def __iter__(self):
        return iter(self.items)

    def texts(self) -> list[str]:
        return [u.text for u in self.items]

    def labels(self) -> list[IntentLabel]:
        return [u.label for u in self.items]

    def label_counts(self) -> dict[IntentLabel, int]:
        counts = {label: 0 for label in LABELS}
        for u in self.items:
            counts[u.label] += 1
        return counts

    def fingerprint(self) -> str:
        """Content hash over (text, label) pairs, order-sensitive."""
        h = hashlib.sha256()
        for u in self.items:
            h.update(u.text.encode("utf-8"))
            h.update(b"\x1f")
            h.update(u.label.value.encode("ascii"))
            h.update(b"\x1e")
        return h.hexdigest()


@dataclass(frozen=True)
class SplitBundle:
    """Train/val/test partition of a dataset."""

    train: Dataset
    val: Dataset
    test: Dataset
    ratios: tuple[float, float, float]
    seed: int

    def parts(self) -> tuple[Dataset, Dataset, Dataset]:
        return self.train, self.val, self.test


# Fixed serialization key order; unknown keys are ignored on read and
# never written, so save -> load -> save is byte-stable.
_RECORD_KEYS = ("text", "label", "source", "prompt_id", "seed", "status", "original_label")


def _to_record(u: Utterance) -> dict:
    return {
        "text": u.text,
        "label": u.label.value,
        "source": u.source,
        "prompt_id": u.prompt_id,
        "seed": u.seed,
        "status": u.status.value,
        "original_label": u.original_label.value if u.original_label else None,
    }


def _from_record(rec: dict) -> Utterance:
    missing = [k for k in ("text", "label") if k not in rec]
    if missing:
        raise DataFormatError(f"record is missing required key(s): {', '.join(missing)}")
    original = rec.get("original_label")
    return Utterance(
        text=rec["text"],
        label=parse_label(rec["label"]),
        source=rec.get("source", "") or "",
        prompt_id=rec.get("prompt_id", "") or "",
        seed=rec.get("seed"),
        status=Status(rec.get("status", "raw")),
        original_label=parse_label(original) if original else None,
    )


def load_dataset(path: str | Path, name: str | None = None) -> Dataset:
    """Read a line-delimited JSON dataset file.

    Raises DataFormatError naming the offending line for malformed JSON,
    missing keys or unknown labels.
    """
    path = Path(path)
    items: list[Utterance] = []
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                items.append(_from_record(rec))
            except DataFormatError as exc:
                raise DataFormatError(f"{path}: {exc} at line {lineno}") from None
            except (json.JSONDecodeError, ValueError, TypeError) as exc:
                raise DataFormatError(f"{path}: malformed record at line {lineno}: {exc}") from None
    return Dataset(name=name if name is not None else path.stem, items=tuple(items))


def save_dataset(dataset: Dataset, path: str | Path) -> None:
    """Write one JSON record per line, preserving item order.

    Field order and formatting are fixed, so saving the same dataset twice
    yields byte-identical files.
    """
    path = Path(path)
    try:
        with path.open("w", encoding="utf-8") as fh:
            for u in dataset.items:
                fh.write(json.dumps(_to_record(u), ensure_ascii=False))
                fh.write("\n")
    except OSError as exc:
        raise DataFormatError(f"cannot write dataset to {path}: {exc}") from exc


def dedup(dataset: Dataset) -> Dataset:
    """Drop repeated (folded text, label) pairs, keeping first occurrences."""
    seen: set[tuple[str, IntentLabel]] = set()
    kept: list[Utterance] = []
    for u in dataset.items:
        key = (fold_key(u.text), u.label)
        if key not in seen:
            seen.add(key)
            kept.append(u)
    return Dataset(name=dataset.name, items=tuple(kept))


def merge(datasets: Sequence[Dataset], name: str) -> Dataset:
    """Concatenate then dedup; per-item source fields are preserved."""
    items: list[Utterance] = []
    for ds in datasets:
        items.extend(ds.items)
    return dedup(Dataset(name=name, items=tuple(items)))


def stratified_split(
    dataset: Dataset,
    ratios: tuple[float, float, float] = (0.7, 0.2, 0.1),
    seed: int = 0,
) -> SplitBundle:
    """Deterministic per-label split.

    Each label's items are shuffled with the given seed and partitioned so
    every part matches its ratio within one item. Remainder items go to
    train first, then val. When all three ratios are nonzero, every present
    label needs at least 3 items.
    """
    if len(ratios) != 3 or any(r < 0 for r in ratios):
        raise ValueError("ratios must be three non-negative fractions")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must sum to 1, got {sum(ratios)}")

    by_label: dict[IntentLabel, list[int]] = {}
    for idx, u in enumerate(dataset.items):
        by_label.setdefault(u.label, []).append(idx)

    all_nonzero = all(r > 0 for r in ratios)
    rng = random.Random(seed)
    part_indices: tuple[list[int], list[int], list[int]] = ([], [], [])
    for label in LABELS:  # fixed iteration order keeps rng consumption stable
        indices = by_label.get(label)
        if not indices:
            continue
        n = len(indices)
        if all_nonzero and n < 3:
            raise ValueError(f"label {label.value!r} has only {n} item(s); need at least 3 to split")
        shuffled = indices[:]
        rng.shuffle(shuffled)
        counts = [int(n * r) for r in ratios]
        for extra in range(n - sum(counts)):
            counts[extra] += 1  # remainder: train first, then val
        pos = 0
        for part, count in zip(part_indices, counts):
            part.extend(shuffled[pos:pos + count])
            pos += count

    parts = []
    for suffix, indices in zip(("train", "val", "test"), part_indices):
        ordered = sorted(indices)
        parts.append(Dataset(name=f"{dataset.name}:{suffix}", items=tuple(dataset.items[i] for i in ordered)))
    return SplitBundle(train=parts[0], val=parts[1], test=parts[2], ratios=tuple(ratios), seed=seed)
