"""Command-line entry point: one binary, subcommand per pipeline stage.

Exit codes: 0 ok, 2 usage, 3 config, 4 network, 5 data format,
6 generation budget exhausted. Logs go to stderr, data to files or stdout.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

from . import classify, config as config_mod, curate, harness, metrics, parsing, promptgen
from .corpus import (Dataset, IntentLabel, LABELS, load_dataset, merge, parse_label,
                     save_dataset, stratified_split)
from .embed import HashedBowProvider, RemoteEmbeddingProvider
from .errors import BudgetExhaustedError, ConfigError, DataFormatError, ToolkitError, UsageError

logger = logging.getLogger("intentkit")


def _provider_from_args(args, cfg) -> object:
    kind = args.provider or cfg.get("embedding.kind")
    dim = args.dim or cfg.get("embedding.dim")
    if kind == "hashed_bow":
        return HashedBowProvider(dim=dim)
    if kind == "remote":
        url = args.embed_endpoint or cfg.get("endpoints.embed")
        if not url:
            raise ConfigError("remote embedding provider needs endpoints.embed or --embed-endpoint")
        return RemoteEmbeddingProvider(url=url, dim=dim)
    raise ConfigError(f"unknown embedding provider kind {kind!r}")


def _head_config(cfg, seed: int | None = None) -> classify.HeadConfig:
    return classify.HeadConfig(
        learning_rate=cfg.get("training.learning_rate"),
        dropout=cfg.get("training.dropout"),
        epochs=cfg.get("training.epochs"),
        batch_size=cfg.get("training.batch_size"),
        seed=cfg.get("training.seed") if seed is None else seed,
        hidden_dim=cfg.get("training.hidden_dim"),
    )


def _parse_labels(raw: str) -> list[IntentLabel]:
    if raw == "all":
        return list(LABELS)
    return [parse_label(part.strip()) for part in raw.split(",") if part.strip()]


def _overrides_from_args(args) -> dict:
    mapping = {
        "endpoint": "endpoints.llm",
        "tts_endpoint": "endpoints.tts",
        "asr_endpoint": "endpoints.asr",
        "embed_endpoint": "endpoints.embed",
        "model": "generation.model",
        "adapter": "generation.adapter",
        "source": "generation.source",
        "calls_per_variant": "generation.calls_per_variant",
        "epochs": "training.epochs",
        "learning_rate": "training.learning_rate",
        "batch_size": "training.batch_size",
        "dropout": "training.dropout",
        "runs": "eval.runs",
        "aggregation": "eval.aggregation",
    }
    overrides = {}
    for attr, key in mapping.items():
        value = getattr(args, attr, None)
        if value is not None:
            overrides[key] = value
    return overrides


def _load_cfg(args) -> config_mod.RunConfig:
    return config_mod.load_config(file_path=args.config, overrides=_overrides_from_args(args))


# --------------------------------------------------------------------------
# Subcommand implementations


def cmd_generate(args) -> int:
    cfg = _load_cfg(args)
    labels = _parse_labels(args.labels)
    if not labels:
        raise UsageError("no labels selected")
    quota = args.quota or math.ceil(cfg.get("generation.quota_total") / len(LABELS))

    if args.seed is not None:
        seed = args.seed
    else:
        seed = promptgen.draw_seed(promptgen.campaign_rng(cfg.get("generation.campaign_init")))
    logger.info("campaign seed: %d", seed)

    params = promptgen.GenerationParams(
        seed=seed,
        model=cfg.get("generation.model"),
        endpoint_url=cfg.get("endpoints.llm"),
        max_tokens=cfg.get("generation.max_tokens"),
        timeout=cfg.get("generation.timeout"),
        adapter=cfg.get("generation.adapter"),
    )

    if args.dry_run:
        for label in labels:
            for template in promptgen.variants_for(label):
                print(f"## prompt {template.variant_id}")
                print(template.body)
                print(f"## request body ({params.endpoint_url or 'no endpoint configured'})")
                print(json.dumps(promptgen.build_request_body(params, template),
                                 ensure_ascii=False, indent=2))
                print()
        return 0

    if not params.endpoint_url:
        raise ConfigError("no chat endpoint configured (endpoints.llm or --endpoint)")

    audit = promptgen.AuditLog(args.audit) if args.audit else None
    dataset, results = promptgen.generate_dataset(
        quotas={label: quota for label in labels},
        params=params,
        source=cfg.get("generation.source") or None,
        calls_per_variant=cfg.get("generation.calls_per_variant"),
        audit=audit,
        parallel_labels=args.parallel_labels,
    )
    save_dataset(dataset, args.out)
    logger.info("wrote %d items to %s", len(dataset), args.out)
    exhausted = [w for r in results for w in r.warnings]
    if exhausted:
        raise BudgetExhaustedError("; ".join(exhausted))
    return 0


def cmd_parse(args) -> int:
    raw = Path(args.input).read_text(encoding="utf-8")
    report = parsing.parse_block(raw, args.speaker_keyword, args.end_keyword)
    label = parse_label(args.label)
    items = []
    from .corpus import Utterance

    for text in report.accepted:
        if args.speaker_keyword in text or args.end_keyword in text:
            logger.warning("skipping candidate containing a keyword: %r", text)
            continue
        items.append(Utterance(text=text, label=label, source=args.source,
                               prompt_id=args.prompt_id, seed=args.seed))
    save_dataset(Dataset(name=Path(args.out).stem, items=tuple(items)), args.out)
    logger.info(
        "accepted %d / dropped %d incomplete, %d empty, %d duplicate",
        len(report.accepted), report.dropped_incomplete,
        report.dropped_empty, report.dropped_duplicate_within_block,
    )
    return 0


def cmd_curate(args) -> int:
    dataset = load_dataset(args.data)
    curated, decisions = curate.review_session(
        dataset, args.log, reviewer=args.reviewer, auto_accept=args.auto_accept,
    )
    save_dataset(curated, args.out)
    logger.info("wrote %d items (%d decisions) to %s", len(curated), len(decisions), args.out)
    return 0


def cmd_split(args) -> int:
    cfg = _load_cfg(args)
    dataset = load_dataset(args.data)
    ratios = tuple(float(p) for p in args.ratios.split(",")) if args.ratios else cfg.ratios()
    if len(ratios) != 3:
        raise UsageError("--ratios needs three comma-separated fractions")
    seed = args.seed if args.seed is not None else cfg.get("split.seed")
    bundle = stratified_split(dataset, ratios, seed=seed)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for part_name, part in zip(("train", "val", "test"), bundle.parts()):
        save_dataset(part, out_dir / f"{part_name}.jsonl")
    logger.info("split %d items into %d/%d/%d under %s", len(dataset),
                len(bundle.train), len(bundle.val), len(bundle.test), out_dir)
    return 0


def cmd_train(args) -> int:
    cfg = _load_cfg(args)
    head_config = _head_config(cfg, seed=args.seed)
    if args.kind == "cn2":
        if not args.features or not args.manifest:
            raise UsageError("cn2 training needs --features and --manifest")
        manifest = harness.load_manifest(args.manifest)
        sidecar = classify.load_feature_sidecar(args.features)
        entries = [e for e in manifest.valid_entries() if e.utt_id in sidecar]
        if not entries:
            raise DataFormatError("no manifest entries with features")
        features = [sidecar[e.utt_id] for e in entries]
        labels = [e.label for e in entries]
        checkpoints = classify.train_baseline_cn2(features, labels, head_config)
    else:
        train_set = load_dataset(args.train)
        val_set = load_dataset(args.val) if args.val else Dataset(name="val", items=())
        provider = _provider_from_args(args, cfg)
        checkpoints = classify.train_head(train_set, val_set, provider, head_config)

    classify.save_head(checkpoints.final, args.out, config=head_config)
    history = [
        {"epoch": c.epoch, "val_accuracy": c.val_accuracy, "train_loss": c.train_loss}
        for c in checkpoints.checkpoints
    ]
    Path(str(args.out) + ".history.json").write_text(
        json.dumps(history, indent=1), encoding="utf-8")
    for item in history:
        logger.info("epoch %d: train_loss=%.4f val_accuracy=%s",
                    item["epoch"], item["train_loss"],
                    "n/a" if item["val_accuracy"] is None else f"{item['val_accuracy']:.4f}")
    logger.info("wrote head to %s", args.out)
    return 0


def cmd_eval(args) -> int:
    cfg = _load_cfg(args)
    head = classify.load_head(args.head)
    provider = _provider_from_args(args, cfg)
    if args.manifest:
        if not args.transcripts:
            raise UsageError("speech evaluation needs --transcripts")
        manifest = harness.load_manifest(args.manifest)
        transcripts = json.loads(Path(args.transcripts).read_text(encoding="utf-8"))
        result = harness.speech_eval(manifest, transcripts, head, provider)
        print(f"accuracy {result.accuracy:.4f} over {result.n} items")
        print(f"WER {result.wer.rate * 100:.2f}% CER {result.cer.rate * 100:.2f}%")
        payload = {
            "accuracy": result.accuracy, "n": result.n,
            "wer": result.wer.rate, "cer": result.cer.rate,
            "norm": result.wer.norm,
            "confusion": [list(r) for r in result.confusion.counts],
        }
    else:
        dataset = load_dataset(args.data)
        features = provider.embed_batch(dataset.texts())
        predictions, _ = classify.predict_batch(head, features)
        acc = metrics.accuracy(predictions, dataset.labels())
        cm = metrics.confusion(predictions, dataset.labels())
        print(f"accuracy {acc:.4f} over {len(dataset)} items")
        payload = {"accuracy": acc, "n": len(dataset),
                   "confusion": [list(r) for r in cm.counts]}
    if args.json:
        Path(args.json).write_text(json.dumps(payload, indent=1), encoding="utf-8")
    return 0


def _load_plan(path: Path, cfg) -> harness.ExperimentPlan:
    try:
        import tomllib
    except ModuleNotFoundError:
        import tomli as tomllib
    try:
        with path.open("rb") as fh:
            doc = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read plan {path}: {exc}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"cannot parse plan {path}: {exc}") from None

    if "train_sets" not in doc or not doc["train_sets"]:
        raise ConfigError(f"plan {path} needs a [train_sets] table")
    base = path.parent

    def load_sets(table: dict) -> dict[str, Dataset]:
        return {name: load_dataset(base / rel, name=name) for name, rel in table.items()}

    train_sets = load_sets(doc["train_sets"])
    test_sets = load_sets(doc["test_sets"]) if doc.get("test_sets") else dict(train_sets)

    plan_tbl = doc.get("plan", {})
    head_tbl = doc.get("head", {})
    provider_tbl = doc.get("provider", {})

    head_config = classify.HeadConfig(
        learning_rate=head_tbl.get("learning_rate", cfg.get("training.learning_rate")),
        dropout=head_tbl.get("dropout", cfg.get("training.dropout")),
        epochs=head_tbl.get("epochs", cfg.get("training.epochs")),
        batch_size=head_tbl.get("batch_size", cfg.get("training.batch_size")),
        seed=head_tbl.get("seed", cfg.get("training.seed")),
        hidden_dim=head_tbl.get("hidden_dim", cfg.get("training.hidden_dim")),
    )
    kind = provider_tbl.get("kind", cfg.get("embedding.kind"))
    dim = provider_tbl.get("dim", cfg.get("embedding.dim"))
    if kind == "hashed_bow":
        provider = HashedBowProvider(dim=dim)
    elif kind == "remote":
        url = provider_tbl.get("url", cfg.get("endpoints.embed"))
        if not url:
            raise ConfigError("remote provider in plan needs a url")
        provider = RemoteEmbeddingProvider(url=url, dim=dim)
    else:
        raise ConfigError(f"unknown provider kind {kind!r} in plan")

    return harness.ExperimentPlan(
        train_sets=train_sets,
        test_sets=test_sets,
        provider=provider,
        head_config=head_config,
        runs=plan_tbl.get("runs", cfg.get("eval.runs")),
        aggregation_mode=plan_tbl.get("aggregation", cfg.get("eval.aggregation")),
        split_seed=plan_tbl.get("split_seed", cfg.get("split.seed")),
        add_combined=plan_tbl.get("add_combined", False),
    )


def cmd_cross_eval(args) -> int:
    cfg = _load_cfg(args)
    plan = _load_plan(Path(args.plan), cfg)
    matrix = harness.cross_eval(plan)
    out_dir = Path(args.out_dir) if args.out_dir else harness.run_directory("reports", plan)
    formats = set(args.formats.split(",")) if args.formats else {"csv", "json", "markdown"}
    written = harness.emit_report(matrix, out_dir, formats)
    for fmt, file_path in sorted(written.items()):
        logger.info("wrote %s report: %s", fmt, file_path)
    print(out_dir)
    if matrix.errors:
        for (tr, te), message in sorted(matrix.errors.items()):
            logger.error("cell (%s, %s): %s", tr, te, message)
        return 1
    return 0


def cmd_synth(args) -> int:
    cfg = _load_cfg(args)
    endpoint = cfg.get("endpoints.tts")
    if not endpoint:
        raise ConfigError("no synthesis endpoint configured (endpoints.tts or --tts-endpoint)")
    dataset = load_dataset(args.data)
    speakers = [s.strip() for s in args.speakers.split(",") if s.strip()]
    manifest = harness.synthesize_speech(
        dataset, speakers, endpoint, args.out_dir,
        language=cfg.get("speech.language"),
        max_in_flight=cfg.get("speech.max_in_flight"),
    )
    manifest_path = Path(args.out_dir) / "manifest.jsonl"
    harness.save_manifest(manifest, manifest_path)
    failures = [e for e in manifest.entries if not e.ok]
    logger.info("synthesized %d/%d items; manifest: %s",
                len(manifest.entries) - len(failures), len(manifest.entries), manifest_path)
    return 0


def cmd_transcribe(args) -> int:
    cfg = _load_cfg(args)
    endpoint = cfg.get("endpoints.asr")
    if not endpoint:
        raise ConfigError("no recognition endpoint configured (endpoints.asr or --asr-endpoint)")
    manifest = harness.load_manifest(args.manifest)
    result = harness.transcribe(manifest, endpoint,
                                max_in_flight=cfg.get("speech.max_in_flight"))
    Path(args.out).write_text(
        json.dumps(result.transcripts, ensure_ascii=False, indent=1, sort_keys=True),
        encoding="utf-8")
    if result.failures:
        logger.warning("%d item(s) failed: %s", len(result.failures),
                       ", ".join(sorted(result.failures)))
    logger.info("wrote %d transcripts to %s", len(result.transcripts), args.out)
    return 0


def cmd_wer(args) -> int:
    try:
        refs = Path(args.ref).read_text(encoding="utf-8").splitlines()
        hyps = Path(args.hyp).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise DataFormatError(str(exc)) from None
    refs = [line for line in refs if line.strip()]
    hyps_all = [line for line in hyps]
    if len(hyps_all) < len(refs):
        hyps_all += [""] * (len(refs) - len(hyps_all))
    try:
        wer, cer = metrics.corpus_error_rates(zip(refs, hyps_all[:len(refs)]))
    except ValueError as exc:
        raise DataFormatError(str(exc)) from None
    print(f"WER {wer.rate * 100:.2f}% CER {cer.rate * 100:.2f}%")
    return 0


def cmd_report(args) -> int:
    matrix = harness.load_report(args.matrix)
    formats = set(args.formats.split(",")) if args.formats else {"csv", "markdown"}
    written = harness.emit_report(matrix, args.out_dir, formats)
    for fmt, file_path in sorted(written.items()):
        logger.info("wrote %s report: %s", fmt, file_path)
    return 0


def cmd_pipeline(args) -> int:
    cfg = _load_cfg(args)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    args.out = out_dir / "raw.jsonl"
    args.audit = args.audit or str(out_dir / "audit.jsonl")
    args.dry_run = False
    exhausted = None
    try:
        cmd_generate(args)
    except BudgetExhaustedError as exc:
        exhausted = exc

    raw = load_dataset(out_dir / "raw.jsonl")
    if len(raw) == 0:
        raise DataFormatError("generation produced no usable items")

    curated, _ = curate.review_session(
        raw, out_dir / "decisions.jsonl",
        reviewer=args.reviewer, auto_accept=args.auto_accept,
    )
    save_dataset(curated, out_dir / "curated.jsonl")

    bundle = stratified_split(curated, cfg.ratios(), seed=cfg.get("split.seed"))
    for part_name, part in zip(("train", "val", "test"), bundle.parts()):
        save_dataset(part, out_dir / f"{part_name}.jsonl")

    provider = _provider_from_args(args, cfg)
    checkpoints = classify.train_head(bundle.train, bundle.val, provider, _head_config(cfg))
    classify.save_head(checkpoints.final, out_dir / "head.json", config=_head_config(cfg))

    features = provider.embed_batch(bundle.test.texts())
    predictions, _ = classify.predict_batch(checkpoints.final, features)
    acc = metrics.accuracy(predictions, bundle.test.labels())
    cm = metrics.confusion(predictions, bundle.test.labels())
    (out_dir / "eval.json").write_text(json.dumps({
        "accuracy": acc, "n": len(bundle.test),
        "confusion": [list(r) for r in cm.counts],
    }, indent=1), encoding="utf-8")
    print(f"test accuracy {acc:.4f} over {len(bundle.test)} items ({out_dir})")
    if exhausted is not None:
        raise exhausted
    return 0


def cmd_config(args) -> int:
    cfg = _load_cfg(args)
    print(config_mod.show(cfg))
    return 0


# --------------------------------------------------------------------------
# Argument parsing


def _add_provider_flags(sub) -> None:
    sub.add_argument("--provider", choices=("hashed_bow", "remote"),
                     help="embedding provider kind")
    sub.add_argument("--dim", type=int, help="embedding dimension")
    sub.add_argument("--embed-endpoint", help="remote embedding endpoint URL")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="intentkit",
        description="Generate, curate, train on and evaluate German intent datasets.",
    )
    parser.add_argument("-C", "--config", help="TOML config file")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="fill per-label quotas from a chat endpoint")
    p.add_argument("--labels", default="all", help="comma-separated labels or 'all'")
    p.add_argument("--quota", type=int, help="items per label (default: quota_total/6)")
    p.add_argument("--endpoint", help="chat-completions endpoint URL")
    p.add_argument("--model", help="model name")
    p.add_argument("--adapter", choices=promptgen.ADAPTERS, help="request body flavor")
    p.add_argument("--source", help="source tag for generated items")
    p.add_argument("--seed", type=int, help="campaign seed (default: drawn from campaign rng)")
    p.add_argument("--calls-per-variant", type=int, help="call budget per prompt variant")
    p.add_argument("--audit", help="append raw completions to this JSONL file")
    p.add_argument("--parallel-labels", action="store_true",
                   help="run label quotas concurrently")
    p.add_argument("--dry-run", action="store_true",
                   help="print rendered prompts and request bodies, send nothing")
    p.add_argument("--out", required=True, help="output dataset JSONL")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("parse", help="extract utterances from a raw completion dump")
    p.add_argument("input", help="file with raw LLM output")
    p.add_argument("--label", required=True)
    p.add_argument("--source", default="")
    p.add_argument("--prompt-id", default="")
    p.add_argument("--seed", type=int)
    p.add_argument("--speaker-keyword", default=promptgen.SPEAKER_KEYWORD)
    p.add_argument("--end-keyword", default=promptgen.END_KEYWORD)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_parse)

    p = sub.add_parser("curate", help="interactive review with a resumable decision log")
    p.add_argument("--data", required=True, help="dataset JSONL to review")
    p.add_argument("--log", required=True, help="decision log path (created or resumed)")
    p.add_argument("--out", required=True, help="curated dataset JSONL")
    p.add_argument("--reviewer", default="")
    p.add_argument("--auto-accept", action="store_true", help="accept every undecided item")
    p.set_defaults(func=cmd_curate)

    p = sub.add_parser("split", help="deterministic stratified train/val/test split")
    p.add_argument("data", help="dataset JSONL")
    p.add_argument("--ratios", help="three comma-separated fractions (default 0.7,0.2,0.1)")
    p.add_argument("--seed", type=int)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("train", help="train a classifier head")
    p.add_argument("--kind", choices=("cn1", "cn2"), default="cn1")
    p.add_argument("--train", help="training dataset JSONL (cn1)")
    p.add_argument("--val", help="validation dataset JSONL (cn1)")
    p.add_argument("--features", help="feature sidecar JSONL (cn2)")
    p.add_argument("--manifest", help="audio manifest aligning features to labels (cn2)")
    p.add_argument("--seed", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--learning-rate", type=float, dest="learning_rate")
    p.add_argument("--batch-size", type=int, dest="batch_size")
    p.add_argument("--dropout", type=float)
    _add_provider_flags(p)
    p.add_argument("--out", required=True, help="head checkpoint path")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a head on text or transcripts")
    p.add_argument("--head", required=True)
    p.add_argument("--data", help="dataset JSONL (text evaluation)")
    p.add_argument("--manifest", help="audio manifest (speech evaluation)")
    p.add_argument("--transcripts", help="JSON mapping id -> transcript")
    _add_provider_flags(p)
    p.add_argument("--json", help="write metrics to this file")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("cross-eval", help="train x test accuracy matrix from a plan")
    p.add_argument("--plan", required=True, help="plan TOML")
    p.add_argument("--out-dir", help="report directory (default: reports/<hash>-<stamp>)")
    p.add_argument("--formats", help="comma-separated: csv,json,markdown")
    p.add_argument("--runs", type=int)
    p.add_argument("--aggregation", choices=metrics.AGGREGATION_MODES)
    p.set_defaults(func=cmd_cross_eval)

    p = sub.add_parser("synth", help="synthesize speech for every utterance")
    p.add_argument("--data", required=True)
    p.add_argument("--speakers", required=True, help="comma-separated speaker reference ids")
    p.add_argument("--tts-endpoint", dest="tts_endpoint")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("transcribe", help="transcribe a synthesized manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--asr-endpoint", dest="asr_endpoint")
    p.add_argument("--out", required=True, help="transcripts JSON path")
    p.set_defaults(func=cmd_transcribe)

    p = sub.add_parser("wer", help="word/character error rate between two text files")
    p.add_argument("--ref", required=True)
    p.add_argument("--hyp", required=True)
    p.set_defaults(func=cmd_wer)

    p = sub.add_parser("report", help="re-render a JSON result matrix")
    p.add_argument("--matrix", required=True, help="report.json from cross-eval")
    p.add_argument("--formats", help="comma-separated: csv,json,markdown")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("pipeline", help="generate -> curate -> split -> train -> eval")
    p.add_argument("--labels", default="all")
    p.add_argument("--quota", type=int)
    p.add_argument("--endpoint")
    p.add_argument("--model")
    p.add_argument("--adapter", choices=promptgen.ADAPTERS)
    p.add_argument("--source")
    p.add_argument("--seed", type=int)
    p.add_argument("--calls-per-variant", type=int)
    p.add_argument("--audit")
    p.add_argument("--parallel-labels", action="store_true")
    p.add_argument("--reviewer", default="")
    p.add_argument("--auto-accept", action="store_true",
                   help="skip interactive curation, accept everything")
    _add_provider_flags(p)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("config", help="inspect the merged configuration")
    p.add_argument("action", choices=("show",))
    p.set_defaults(func=cmd_config)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except ToolkitError as exc:
        print(f"error: {exc.category}: {exc}", file=sys.stderr)
        return exc.exit_code
    except ValueError as exc:
        print(f"error: usage: {exc}", file=sys.stderr)
        return UsageError.exit_code
    except KeyboardInterrupt:
        print("error: interrupted", file=sys.stderr)
        return 130


if __name__ == "__main__":
    sys.exit(main())
