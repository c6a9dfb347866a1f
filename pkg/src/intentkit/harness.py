"""Cross-dataset experiment orchestration, speech round-trip and reports.

A plan names train and test datasets; every train set is split 70-20-10,
heads are trained over several seeded runs, and each checkpoint (or each
run's final head, depending on the aggregation mode) is scored on every
test set. Off-diagonal cells evaluate the named test set in full; when the
test set is the train set itself, its held-out 10% split is used instead.
The optional "Combined" row merges all train sets before splitting, and
the "Combined" column merges the per-set held-out test splits, so no cell
ever evaluates items its row trained on.
"""
from __future__ import annotations

import datetime as _dt
import hashlib
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import requests

from .classify import ClassifierHead, HeadConfig, predict_batch, train_head
from .corpus import Dataset, IntentLabel, LABELS, merge, parse_label, stratified_split
from .embed import EmbeddingProvider
from .errors import DataFormatError, NetworkError
from .metrics import (AGGREGATION_MODES, AggregateScore, ConfusionMatrix, TextNorm,
                      DEFAULT_NORM, aggregate, confusion, corpus_error_rates, ErrorRate)

logger = logging.getLogger(__name__)

COMBINED_NAME = "Combined"
REPORT_FORMAT = "intentkit-report/1"


@dataclass
class ExperimentPlan:
    train_sets: dict[str, Dataset]
    test_sets: dict[str, Dataset]
    provider: EmbeddingProvider
    head_config: HeadConfig = field(default_factory=HeadConfig)
    runs: int = 5
    aggregation_mode: str = "per_epoch_checkpoints"
    split_seed: int = 0
    split_ratios: tuple[float, float, float] = (0.7, 0.2, 0.1)
    add_combined: bool = False

    def __post_init__(self) -> None:
        if self.runs < 1:
            raise ValueError("runs must be >= 1")
        if self.aggregation_mode not in AGGREGATION_MODES:
            raise ValueError(f"aggregation_mode must be one of {AGGREGATION_MODES}")
        if not self.train_sets:
            raise ValueError("plan needs at least one train set")
        reserved = COMBINED_NAME
        if self.add_combined and (reserved in self.train_sets or reserved in self.test_sets):
            raise ValueError(f"{reserved!r} is reserved when add_combined is set")

    def fingerprint(self) -> str:
        """Stable hash of everything that determines the result matrix."""
        h = hashlib.sha256()
        for name in sorted(self.train_sets):
            h.update(name.encode("utf-8"))
            h.update(self.train_sets[name].fingerprint().encode("ascii"))
        for name in sorted(self.test_sets):
            h.update(name.encode("utf-8"))
            h.update(self.test_sets[name].fingerprint().encode("ascii"))
        cfg = self.head_config
        h.update(json.dumps([
            self.runs, self.aggregation_mode, self.split_seed, self.split_ratios,
            self.add_combined, self.provider.provider_id,
            cfg.learning_rate, cfg.dropout, cfg.epochs, cfg.batch_size,
            cfg.seed, cfg.hidden_dim, cfg.num_classes,
        ]).encode("ascii"))
        return h.hexdigest()


@dataclass
class ResultMatrix:
    train_names: tuple[str, ...]
    test_names: tuple[str, ...]
    cells: dict[tuple[str, str], AggregateScore]
    confusions: dict[tuple[str, str], ConfusionMatrix]
    aggregation_mode: str
    errors: dict[tuple[str, str], str] = field(default_factory=dict)
    evaluation_policy: str = "full test sets off-diagonal; row's held-out split on the diagonal"

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ResultMatrix):
            return NotImplemented
        return (self.train_names == other.train_names
                and self.test_names == other.test_names
                and self.cells == other.cells
                and self.confusions == other.confusions
                and self.aggregation_mode == other.aggregation_mode
                and self.errors == other.errors)


def cross_eval(plan: ExperimentPlan) -> ResultMatrix:
    """Train x test accuracy matrix with mean/std cells and summed confusions.

    Each row trains ``plan.runs`` heads with seeds seed+0..seed+runs-1. A
    failed row is recorded in ``errors`` and other rows proceed.
    """
    train_sets = dict(plan.train_sets)
    test_sets = dict(plan.test_sets)
    splits = {}
    if plan.add_combined:
        train_sets[COMBINED_NAME] = merge(list(plan.train_sets.values()), COMBINED_NAME)
    for name, dataset in train_sets.items():
        splits[name] = stratified_split(dataset, plan.split_ratios, seed=plan.split_seed)
    if plan.add_combined:
        test_sets[COMBINED_NAME] = merge(
            [splits[name].test for name in plan.train_sets], COMBINED_NAME)

    train_names = tuple(train_sets)
    test_names = tuple(test_sets)

    embedded: dict[str, tuple] = {}

    def embed_eval_set(key: str, dataset: Dataset):
        if key not in embedded:
            embedded[key] = (plan.provider.embed_batch(dataset.texts()), dataset.labels())
        return embedded[key]

    cells: dict[tuple[str, str], AggregateScore] = {}
    confusions: dict[tuple[str, str], ConfusionMatrix] = {}
    errors: dict[tuple[str, str], str] = {}

    for tr_name in train_names:
        split = splits[tr_name]
        try:
            checkpoint_sets = []
            for run in range(plan.runs):
                config = HeadConfig(
                    learning_rate=plan.head_config.learning_rate,
                    dropout=plan.head_config.dropout,
                    epochs=plan.head_config.epochs,
                    batch_size=plan.head_config.batch_size,
                    seed=plan.head_config.seed + run,
                    hidden_dim=plan.head_config.hidden_dim,
                    num_classes=plan.head_config.num_classes,
                )
                checkpoint_sets.append(train_head(split.train, split.val, plan.provider, config))
        except (ValueError, DataFormatError) as exc:
            message = f"training failed for {tr_name!r}: {exc}"
            logger.error("%s", message)
            for te_name in test_names:
                errors[(tr_name, te_name)] = message
            continue

        if plan.aggregation_mode == "per_epoch_checkpoints":
            heads = [c.head for cs in checkpoint_sets for c in cs.checkpoints]
        else:
            heads = [cs.final for cs in checkpoint_sets]

        for te_name in test_names:
            if te_name == tr_name:
                eval_set = split.test
                features, golds = (plan.provider.embed_batch(eval_set.texts()), eval_set.labels())
            else:
                eval_set = test_sets[te_name]
                features, golds = embed_eval_set(te_name, eval_set)
            if not golds:
                errors[(tr_name, te_name)] = f"test set {te_name!r} is empty"
                continue
            scores = []
            summed = ConfusionMatrix.zeros()
            for head in heads:
                predictions, _ = predict_batch(head, features)
                scores.append(sum(p == g for p, g in zip(predictions, golds)) / len(golds))
                summed = summed.add(confusion(predictions, golds))
            cells[(tr_name, te_name)] = aggregate(scores, plan.aggregation_mode)
            confusions[(tr_name, te_name)] = summed

    return ResultMatrix(
        train_names=train_names, test_names=test_names,
        cells=cells, confusions=confusions,
        aggregation_mode=plan.aggregation_mode, errors=errors,
    )


# --------------------------------------------------------------------------
# Speech round-trip through external TTS/ASR services


@dataclass(frozen=True)
class ManifestEntry:
    utt_id: str
    path: str
    speaker: str
    text: str
    label: IntentLabel
    ok: bool = True
    error: str | None = None


@dataclass
class AudioManifest:
    entries: list[ManifestEntry]

    def valid_entries(self) -> list[ManifestEntry]:
        return [e for e in self.entries if e.ok]

    def __post_init__(self) -> None:
        ids = [e.utt_id for e in self.entries]
        if len(set(ids)) != len(ids):
            raise ValueError("manifest ids must be unique")


def save_manifest(manifest: AudioManifest, path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for e in manifest.entries:
            fh.write(json.dumps({
                "utt_id": e.utt_id, "path": e.path, "speaker": e.speaker,
                "text": e.text, "label": e.label.value, "ok": e.ok, "error": e.error,
            }, ensure_ascii=False) + "\n")


def load_manifest(path: str | Path) -> AudioManifest:
    entries = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                entries.append(ManifestEntry(
                    utt_id=rec["utt_id"], path=rec["path"], speaker=rec["speaker"],
                    text=rec["text"], label=parse_label(rec["label"]),
                    ok=rec.get("ok", True), error=rec.get("error"),
                ))
            except (json.JSONDecodeError, KeyError) as exc:
                raise DataFormatError(f"{path}: bad manifest line {lineno}: {exc}") from None
    return AudioManifest(entries=entries)


def synthesize_speech(
    dataset: Dataset,
    speakers: Sequence[str],
    tts_endpoint: str,
    out_dir: str | Path,
    language: str = "de",
    timeout: float = 120.0,
    max_in_flight: int = 2,
    session: requests.Session | None = None,
) -> AudioManifest:
    """Synthesize every utterance once, speakers assigned round-robin.

    Per-item synthesis failures are recorded in the manifest and the run
    continues. Reference text is preserved verbatim in the manifest.
    """
    if not speakers:
        raise ValueError("need at least one speaker reference")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    session = session or requests.Session()

    def synth_one(work: tuple[int, str]) -> ManifestEntry:
        index, speaker = work
        item = dataset.items[index]
        utt_id = f"utt-{index:06d}"
        path = out_dir / f"{utt_id}.wav"
        try:
            resp = session.post(
                tts_endpoint,
                json={"text": item.text, "speaker_ref": speaker, "language": language},
                timeout=timeout,
            )
            if resp.status_code != 200:
                raise NetworkError(f"status {resp.status_code}: {resp.text[:200]}")
            path.write_bytes(resp.content)
        except (requests.RequestException, NetworkError, OSError) as exc:
            logger.warning("synthesis failed for %s: %s", utt_id, exc)
            return ManifestEntry(utt_id=utt_id, path=str(path), speaker=speaker,
                                 text=item.text, label=item.label, ok=False, error=str(exc))
        return ManifestEntry(utt_id=utt_id, path=str(path), speaker=speaker,
                             text=item.text, label=item.label)

    work = [(i, speakers[i % len(speakers)]) for i in range(len(dataset.items))]
    with ThreadPoolExecutor(max_workers=max(1, max_in_flight)) as pool:
        entries = list(pool.map(synth_one, work))
    return AudioManifest(entries=entries)


@dataclass
class TranscriptionResult:
    transcripts: dict[str, str]
    failures: dict[str, str] = field(default_factory=dict)


def transcribe(
    manifest: AudioManifest,
    asr_endpoint: str,
    attempts: int = 3,
    timeout: float = 120.0,
    max_in_flight: int = 2,
    session: requests.Session | None = None,
) -> TranscriptionResult:
    """One transcript per valid manifest entry (multipart upload -> {"text"}).

    Transport failures are retried per item; items that still fail are
    recorded. If every item fails the endpoint is treated as unreachable.
    """
    session = session or requests.Session()
    valid = manifest.valid_entries()

    def asr_one(entry: ManifestEntry) -> tuple[str, str | None, str | None]:
        audio = Path(entry.path).read_bytes()
        last = None
        for attempt in range(1, attempts + 1):
            try:
                resp = session.post(
                    asr_endpoint,
                    files={"file": (Path(entry.path).name, audio, "audio/wav")},
                    timeout=timeout,
                )
                if resp.status_code != 200:
                    last = f"status {resp.status_code}: {resp.text[:200]}"
                    continue
                text = resp.json().get("text")
                if not isinstance(text, str):
                    return entry.utt_id, None, "response carries no 'text' field"
                logger.info("transcribed %s (%d chars)", entry.utt_id, len(text))
                return entry.utt_id, text, None
            except requests.RequestException as exc:
                last = str(exc)
                logger.warning("asr attempt %d/%d for %s failed: %s",
                               attempt, attempts, entry.utt_id, exc)
            except OSError as exc:
                return entry.utt_id, None, str(exc)
        return entry.utt_id, None, last

    with ThreadPoolExecutor(max_workers=max(1, max_in_flight)) as pool:
        results = list(pool.map(asr_one, valid))

    transcripts = {utt_id: text for utt_id, text, _ in results if text is not None}
    failures = {utt_id: err for utt_id, text, err in results if text is None}
    if valid and not transcripts:
        raise NetworkError(
            f"asr endpoint {asr_endpoint} failed for all {len(valid)} items "
            f"after {attempts} attempts each"
        )
    return TranscriptionResult(transcripts=transcripts, failures=failures)


@dataclass(frozen=True)
class SpeechEvalResult:
    accuracy: float
    wer: ErrorRate
    cer: ErrorRate
    confusion: ConfusionMatrix
    n: int


def speech_eval(
    manifest: AudioManifest,
    transcripts: Mapping[str, str] | TranscriptionResult,
    head: ClassifierHead,
    provider: EmbeddingProvider,
    norm: TextNorm = DEFAULT_NORM,
) -> SpeechEvalResult:
    """Classify transcripts and score them against the manifest.

    WER/CER are corpus-level: total edit operations over total reference
    length, not a mean of per-utterance rates.
    """
    if isinstance(transcripts, TranscriptionResult):
        transcripts = transcripts.transcripts
    entries = manifest.valid_entries()
    if not entries:
        raise ValueError("manifest has no valid entries")
    missing = [e.utt_id for e in entries if e.utt_id not in transcripts]
    if missing:
        raise DataFormatError(f"transcripts missing for ids: {', '.join(missing[:5])}"
                              + ("..." if len(missing) > 5 else ""))

    hyps = [transcripts[e.utt_id] for e in entries]
    golds = [e.label for e in entries]
    features = provider.embed_batch(hyps)
    predictions, _ = predict_batch(head, features)
    acc = sum(p == g for p, g in zip(predictions, golds)) / len(golds)
    wer, cer = corpus_error_rates(((e.text, h) for e, h in zip(entries, hyps)), norm)
    return SpeechEvalResult(accuracy=acc, wer=wer, cer=cer,
                            confusion=confusion(predictions, golds), n=len(entries))


# --------------------------------------------------------------------------
# Report emission


def _cell_key(train: str, test: str) -> str:
    return f"{train}||{test}"


def matrix_to_json_dict(matrix: ResultMatrix) -> dict:
    return {
        "format": REPORT_FORMAT,
        "aggregation_mode": matrix.aggregation_mode,
        "evaluation_policy": matrix.evaluation_policy,
        "train_names": list(matrix.train_names),
        "test_names": list(matrix.test_names),
        "cells": {
            _cell_key(tr, te): {"mean": score.mean, "std": score.std,
                                "n": score.n, "mode": score.mode}
            for (tr, te), score in sorted(matrix.cells.items())
        },
        "confusions": {
            _cell_key(tr, te): [list(row) for row in cm.counts]
            for (tr, te), cm in sorted(matrix.confusions.items())
        },
        "errors": {_cell_key(tr, te): msg for (tr, te), msg in sorted(matrix.errors.items())},
        "labels": [label.value for label in LABELS],
    }


def matrix_from_json_dict(payload: dict) -> ResultMatrix:
    if payload.get("format") != REPORT_FORMAT:
        raise DataFormatError(f"unexpected report format {payload.get('format')!r}")

    def split_key(key: str) -> tuple[str, str]:
        train, _, test = key.partition("||")
        return train, test

    return ResultMatrix(
        train_names=tuple(payload["train_names"]),
        test_names=tuple(payload["test_names"]),
        cells={
            split_key(k): AggregateScore(mean=v["mean"], std=v["std"], n=v["n"], mode=v["mode"])
            for k, v in payload["cells"].items()
        },
        confusions={
            split_key(k): ConfusionMatrix(tuple(tuple(row) for row in rows))
            for k, rows in payload["confusions"].items()
        },
        aggregation_mode=payload["aggregation_mode"],
        errors={split_key(k): v for k, v in payload.get("errors", {}).items()},
        evaluation_policy=payload.get("evaluation_policy", ""),
    )


def load_report(path: str | Path) -> ResultMatrix:
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise DataFormatError(f"cannot read report {path}: {exc}") from exc
    return matrix_from_json_dict(payload)


def _format_cell(matrix: ResultMatrix, train: str, test: str) -> str:
    if (train, test) in matrix.cells:
        return matrix.cells[(train, test)].formatted()
    if (train, test) in matrix.errors:
        return "error"
    return ""


def emit_report(
    matrix: ResultMatrix,
    out_dir: str | Path,
    formats: set[str] = frozenset({"csv", "json", "markdown"}),
) -> dict[str, Path]:
    """Write the matrix under ``out_dir``; returns format -> path.

    CSV cells are two-decimal percent "mean±std"; JSON carries full
    precision plus confusion counts and round-trips to an equal matrix.
    Output bytes depend only on the matrix contents.
    """
    unknown = set(formats) - {"csv", "json", "markdown"}
    if unknown:
        raise ValueError(f"unknown report formats: {sorted(unknown)}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: dict[str, Path] = {}

    if "json" in formats:
        path = out_dir / "report.json"
        path.write_text(
            json.dumps(matrix_to_json_dict(matrix), ensure_ascii=False, indent=1, sort_keys=True),
            encoding="utf-8",
        )
        written["json"] = path

    if "csv" in formats:
        path = out_dir / "report.csv"
        lines = ["train/test," + ",".join(matrix.test_names)]
        for tr in matrix.train_names:
            lines.append(tr + "," + ",".join(
                _format_cell(matrix, tr, te) for te in matrix.test_names))
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        written["csv"] = path

        conf_path = out_dir / "confusions.csv"
        header = "train,test,gold," + ",".join(label.value for label in LABELS)
        lines = [header]
        for (tr, te), cm in sorted(matrix.confusions.items()):
            for label, row in zip(LABELS, cm.counts):
                lines.append(f"{tr},{te},{label.value}," + ",".join(str(c) for c in row))
        conf_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        written["confusions_csv"] = conf_path

    if "markdown" in formats:
        path = out_dir / "report.md"
        lines = [
            f"# Cross-evaluation ({matrix.aggregation_mode})",
            "",
            "| train \\ test | " + " | ".join(matrix.test_names) + " |",
            "|" + "---|" * (len(matrix.test_names) + 1),
        ]
        for tr in matrix.train_names:
            lines.append("| " + tr + " | " + " | ".join(
                _format_cell(matrix, tr, te) for te in matrix.test_names) + " |")
        lines += ["", f"Evaluation policy: {matrix.evaluation_policy}", ""]
        path.write_text("\n".join(lines), encoding="utf-8")
        written["markdown"] = path

    return written


def run_directory(base: str | Path, plan: ExperimentPlan) -> Path:
    """Create reports/<plan-hash>-<timestamp>/ under ``base``."""
    stamp = _dt.datetime.now().strftime("%Y%m%d-%H%M%S")
    path = Path(base) / f"{plan.fingerprint()[:8]}-{stamp}"
    path.mkdir(parents=True, exist_ok=True)
    return path
