"""Layered run configuration: flags over environment over file over defaults.

Every effective value stays traceable to its source; ``intentkit config
show`` prints the merged view. The file format is TOML with flat sections;
any key may also be set through INTENTKIT_<KEY> environment variables
(dots replaced by underscores) or the matching CLI flag.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .errors import ConfigError

# key -> (type, default, help)
SCHEMA: dict[str, tuple[type, Any, str]] = {
    "endpoints.llm": (str, "", "chat-completions endpoint URL"),
    "endpoints.tts": (str, "", "speech synthesis endpoint URL"),
    "endpoints.asr": (str, "", "speech recognition endpoint URL"),
    "endpoints.embed": (str, "", "remote embedding endpoint URL"),
    "generation.model": (str, "leolm", "model name sent with every request"),
    "generation.adapter": (str, "extended", "request body flavor: extended|options|strict"),
    "generation.source": (str, "", "source tag stored on generated items (default: model)"),
    "generation.quota_total": (int, 2500, "total samples per campaign, split evenly per label"),
    "generation.campaign_init": (int, 0, "initializer for the campaign seed rng"),
    "generation.calls_per_variant": (int, 50, "call budget per prompt variant"),
    "generation.max_tokens": (int, 1024, "completion token limit"),
    "generation.timeout": (float, 120.0, "request timeout in seconds"),
    "embedding.kind": (str, "hashed_bow", "embedding provider: hashed_bow|remote"),
    "embedding.dim": (int, 256, "embedding dimension"),
    "split.seed": (int, 0, "split shuffle seed"),
    "split.ratios": (str, "0.7,0.2,0.1", "train,val,test fractions"),
    "training.learning_rate": (float, 3e-4, "head learning rate"),
    "training.dropout": (float, 0.1, "input dropout fraction"),
    "training.epochs": (int, 5, "training epochs"),
    "training.batch_size": (int, 32, "mini-batch size"),
    "training.seed": (int, 0, "training seed"),
    "training.hidden_dim": (int, 256, "hidden width of the two-layer head"),
    "eval.runs": (int, 5, "training runs per cross-eval row"),
    "eval.aggregation": (str, "per_epoch_checkpoints",
                         "score aggregation: per_epoch_checkpoints|per_run_finals"),
    "speech.language": (str, "de", "language tag sent to the synthesis endpoint"),
    "speech.max_in_flight": (int, 2, "bound on concurrent TTS/ASR requests"),
}

ENV_PREFIX = "INTENTKIT_"


def _env_name(key: str) -> str:
    return ENV_PREFIX + key.replace(".", "_").upper()


@dataclass(frozen=True)
class Setting:
    value: Any
    source: str  # "flag" | "env" | "file" | "default"


class RunConfig:
    """Merged view over all configuration layers."""

    def __init__(self, settings: dict[str, Setting]) -> None:
        self._settings = settings

    def get(self, key: str) -> Any:
        return self._settings[key].value

    def source(self, key: str) -> str:
        return self._settings[key].source

    def items(self):
        return self._settings.items()

    def ratios(self) -> tuple[float, float, float]:
        raw = str(self.get("split.ratios"))
        try:
            parts = tuple(float(p) for p in raw.split(","))
        except ValueError:
            raise ConfigError(f"split.ratios must be three comma-separated fractions, got {raw!r}")
        if len(parts) != 3 or any(p < 0 for p in parts) or not math.isclose(sum(parts), 1.0):
            raise ConfigError(f"split.ratios must be three non-negative fractions summing to 1, got {raw!r}")
        return parts


def _coerce(key: str, raw: Any, expected: type) -> Any:
    try:
        if expected is bool and isinstance(raw, str):
            return raw.lower() in ("1", "true", "yes", "on")
        return expected(raw)
    except (TypeError, ValueError):
        raise ConfigError(f"config key {key!r} expects {expected.__name__}, got {raw!r}") from None


def _flatten(table: Mapping[str, Any], prefix: str = "") -> dict[str, Any]:
    flat: dict[str, Any] = {}
    for name, value in table.items():
        key = f"{prefix}{name}"
        if isinstance(value, Mapping):
            flat.update(_flatten(value, key + "."))
        else:
            flat[key] = value
    return flat


def load_config(
    file_path: str | Path | None = None,
    env: Mapping[str, str] | None = None,
    overrides: Mapping[str, Any] | None = None,
) -> RunConfig:
    """Merge defaults, an optional TOML file, the environment and flag overrides."""
    env = os.environ if env is None else env
    overrides = overrides or {}

    file_values: dict[str, Any] = {}
    if file_path:
        path = Path(file_path)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        try:
            with path.open("rb") as fh:
                file_values = _flatten(tomllib.load(fh))
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"cannot parse {path}: {exc}") from None
        unknown = set(file_values) - set(SCHEMA)
        if unknown:
            raise ConfigError(f"unknown config key(s) in {path}: {', '.join(sorted(unknown))}")

    settings: dict[str, Setting] = {}
    for key, (expected, default, _) in SCHEMA.items():
        if key in overrides and overrides[key] is not None:
            settings[key] = Setting(_coerce(key, overrides[key], expected), "flag")
        elif _env_name(key) in env:
            settings[key] = Setting(_coerce(key, env[_env_name(key)], expected), "env")
        elif key in file_values:
            settings[key] = Setting(_coerce(key, file_values[key], expected), "file")
        else:
            settings[key] = Setting(default, "default")
    return RunConfig(settings)


def show(config: RunConfig) -> str:
    lines = []
    for key in SCHEMA:
        setting = config._settings[key]
        lines.append(f"{key} = {setting.value!r}  ({setting.source})")
    return "\n".join(lines)
