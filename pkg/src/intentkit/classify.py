"""Classification heads over frozen sentence embeddings.

Two head shapes: a one-layer softmax ("cn1") trained on provider
embeddings, and a two-layer rectifier network ("cn2") for features that
arrive from an external encoder. Training is plain mini-batch Adam in
float64, bit-deterministic for a fixed seed: weight init, the per-epoch
shuffle and the dropout mask stream are all derived from the run seed.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .corpus import LABELS, Dataset, IntentLabel
from .embed import EmbeddingProvider, EmbeddingVector
from .errors import DataFormatError

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8

CHECKPOINT_FORMAT = "intentkit-head/1"


@dataclass(frozen=True)
class HeadConfig:
    learning_rate: float = 3e-4
    dropout: float = 0.1
    epochs: int = 5
    batch_size: int = 32
    seed: int = 0
    hidden_dim: int = 256  # cn2 only
    num_classes: int = 6

    def __post_init__(self) -> None:
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if not 0 <= self.dropout < 1:
            raise ValueError("dropout must be a fraction in [0, 1)")
        if self.epochs < 1 or self.batch_size < 1 or self.hidden_dim < 1:
            raise ValueError("epochs, batch_size and hidden_dim must be positive")


@dataclass(frozen=True)
class ClassifierHead:
    """Trained parameters plus the provenance needed to use them safely."""

    kind: str  # "cn1" | "cn2"
    weights: tuple[np.ndarray, ...]  # cn1: (W, b); cn2: (W1, b1, W2, b2)
    provider_id: str
    label_order: tuple[IntentLabel, ...] = LABELS

    def __post_init__(self) -> None:
        if self.kind not in ("cn1", "cn2"):
            raise ValueError(f"unknown head kind {self.kind!r}")
        if any(not np.all(np.isfinite(w)) for w in self.weights):
            raise ValueError("head parameters contain non-finite values")

    @property
    def dim(self) -> int:
        return self.weights[0].shape[0]

    @property
    def num_classes(self) -> int:
        return self.weights[-1].shape[0]

    def copy(self) -> "ClassifierHead":
        return replace(self, weights=tuple(w.copy() for w in self.weights))


@dataclass(frozen=True)
class Checkpoint:
    epoch: int
    head: ClassifierHead
    val_accuracy: float | None
    train_loss: float


@dataclass(frozen=True)
class CheckpointSet:
    checkpoints: tuple[Checkpoint, ...]
    config: HeadConfig

    @property
    def final(self) -> ClassifierHead:
        return self.checkpoints[-1].head

    @property
    def heads(self) -> list[ClassifierHead]:
        return [c.head for c in self.checkpoints]


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=-1, keepdims=True)


def _forward(head: ClassifierHead, x: np.ndarray) -> np.ndarray:
    """Class probabilities for a batch of feature rows (dropout disabled)."""
    if head.kind == "cn1":
        w, b = head.weights
        return _softmax(x @ w + b)
    w1, b1, w2, b2 = head.weights
    hidden = np.maximum(x @ w1 + b1, 0.0)
    return _softmax(hidden @ w2 + b2)


def _loss_and_grads(head: ClassifierHead, x: np.ndarray, y: np.ndarray):
    """Mean cross-entropy and analytic gradients for each parameter."""
    n = x.shape[0]
    if head.kind == "cn1":
        w, b = head.weights
        probs = _softmax(x @ w + b)
        delta = probs.copy()
        delta[np.arange(n), y] -= 1.0
        delta /= n
        grads = (x.T @ delta, delta.sum(axis=0))
    else:
        w1, b1, w2, b2 = head.weights
        pre = x @ w1 + b1
        hidden = np.maximum(pre, 0.0)
        probs = _softmax(hidden @ w2 + b2)
        delta = probs.copy()
        delta[np.arange(n), y] -= 1.0
        delta /= n
        d_hidden = (delta @ w2.T) * (pre > 0)
        grads = (x.T @ d_hidden, d_hidden.sum(axis=0), hidden.T @ delta, delta.sum(axis=0))
    loss = float(-np.log(np.clip(probs[np.arange(n), y], 1e-300, None)).mean())
    return loss, grads


def _init_head(kind: str, dim: int, config: HeadConfig, provider_id: str,
               label_order: tuple[IntentLabel, ...]) -> ClassifierHead:
    rng = np.random.default_rng([config.seed, 0])
    k = config.num_classes
    if kind == "cn1":
        w = rng.uniform(-1.0, 1.0, size=(dim, k)) / np.sqrt(dim)
        weights = (w, np.zeros(k))
    else:
        w1 = rng.uniform(-1.0, 1.0, size=(dim, config.hidden_dim)) / np.sqrt(dim)
        w2 = rng.uniform(-1.0, 1.0, size=(config.hidden_dim, k)) / np.sqrt(config.hidden_dim)
        weights = (w1, np.zeros(config.hidden_dim), w2, np.zeros(k))
    return ClassifierHead(kind=kind, weights=weights, provider_id=provider_id,
                          label_order=label_order)


def _as_matrix(features: Sequence[EmbeddingVector] | np.ndarray) -> np.ndarray:
    if isinstance(features, np.ndarray):
        x = np.asarray(features, dtype=np.float64)
    else:
        dims = {f.dim for f in features}
        if len(dims) > 1:
            raise ValueError(f"inconsistent feature dimensions: {sorted(dims)}")
        x = np.array([f.values for f in features], dtype=np.float64)
    if x.ndim != 2:
        raise ValueError("features must form a 2-D matrix")
    return x


def _label_indices(labels: Sequence[IntentLabel],
                   label_order: tuple[IntentLabel, ...]) -> np.ndarray:
    index = {label: i for i, label in enumerate(label_order)}
    return np.array([index[label] for label in labels], dtype=np.int64)


def train_on_features(
    features: Sequence[EmbeddingVector] | np.ndarray,
    labels: Sequence[IntentLabel],
    config: HeadConfig,
    kind: str = "cn1",
    provider_id: str = "raw-features",
    val_features: Sequence[EmbeddingVector] | np.ndarray | None = None,
    val_labels: Sequence[IntentLabel] | None = None,
    label_order: tuple[IntentLabel, ...] = LABELS,
) -> CheckpointSet:
    """Mini-batch Adam over a feature matrix; one checkpoint per epoch.

    Inverted dropout is applied to the input features during training only.
    At least two distinct labels must be present.
    """
    x = _as_matrix(features)
    if x.shape[0] == 0:
        raise ValueError("training set is empty")
    if len(labels) != x.shape[0]:
        raise ValueError("feature/label count mismatch")
    if len(set(labels)) < 2:
        raise ValueError("training requires at least two distinct labels")
    y = _label_indices(labels, label_order)

    x_val = y_val = None
    if val_features is not None and val_labels is not None and len(val_labels) > 0:
        x_val = _as_matrix(val_features)
        y_val = _label_indices(val_labels, label_order)

    head = _init_head(kind, x.shape[1], config, provider_id, label_order)
    params = [w.copy() for w in head.weights]
    m_state = [np.zeros_like(w) for w in params]
    v_state = [np.zeros_like(w) for w in params]
    step = 0
    n = x.shape[0]
    keep = 1.0 - config.dropout

    checkpoints: list[Checkpoint] = []
    for epoch in range(1, config.epochs + 1):
        order = np.random.default_rng([config.seed, 1, epoch]).permutation(n)
        drop_rng = np.random.default_rng([config.seed, 2, epoch])
        epoch_loss = 0.0
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            xb = x[idx]
            if config.dropout > 0:
                mask = (drop_rng.random(xb.shape) < keep).astype(np.float64) / keep
                xb = xb * mask
            current = replace(head, weights=tuple(params))
            loss, grads = _loss_and_grads(current, xb, y[idx])
            epoch_loss += loss * len(idx)
            step += 1
            for p, g, m, v in zip(params, grads, m_state, v_state):
                m *= ADAM_BETA1
                m += (1 - ADAM_BETA1) * g
                v *= ADAM_BETA2
                v += (1 - ADAM_BETA2) * g * g
                m_hat = m / (1 - ADAM_BETA1 ** step)
                v_hat = v / (1 - ADAM_BETA2 ** step)
                p -= config.learning_rate * m_hat / (np.sqrt(v_hat) + ADAM_EPS)
        snapshot = replace(head, weights=tuple(w.copy() for w in params))
        val_acc = None
        if x_val is not None:
            val_acc = float((_forward(snapshot, x_val).argmax(axis=1) == y_val).mean())
        checkpoints.append(Checkpoint(epoch=epoch, head=snapshot,
                                      val_accuracy=val_acc, train_loss=epoch_loss / n))
    return CheckpointSet(checkpoints=tuple(checkpoints), config=config)


def train_head(
    train: Dataset,
    val: Dataset,
    provider: EmbeddingProvider,
    config: HeadConfig,
) -> CheckpointSet:
    """Train the one-layer head on provider embeddings of a labeled dataset.

    All six labels must be present in the training set.
    """
    if len(train) == 0:
        raise ValueError("training dataset is empty")
    missing = [label.value for label, count in train.label_counts().items() if count == 0]
    if missing:
        raise ValueError(f"training dataset is missing label(s): {', '.join(missing)}")
    x = provider.embed_batch(train.texts())
    x_val = provider.embed_batch(val.texts()) if len(val) else None
    return train_on_features(
        x, train.labels(), config,
        kind="cn1", provider_id=provider.provider_id,
        val_features=x_val, val_labels=val.labels() if len(val) else None,
    )


def train_baseline_cn2(
    features: Sequence[EmbeddingVector] | np.ndarray,
    labels: Sequence[IntentLabel],
    config: HeadConfig,
    provider_id: str = "encoder-features",
    val_features: Sequence[EmbeddingVector] | np.ndarray | None = None,
    val_labels: Sequence[IntentLabel] | None = None,
) -> CheckpointSet:
    """Two-layer baseline over externally supplied feature vectors."""
    return train_on_features(
        features, labels, config, kind="cn2", provider_id=provider_id,
        val_features=val_features, val_labels=val_labels,
    )


def predict(head: ClassifierHead, embedding: EmbeddingVector) -> tuple[IntentLabel, list[float]]:
    """Argmax label and probability vector; ties break to the lowest index."""
    if embedding.dim != head.dim:
        raise ValueError(f"embedding dim {embedding.dim} != head dim {head.dim}")
    probs = _forward(head, np.array([embedding.values], dtype=np.float64))[0]
    return head.label_order[int(probs.argmax())], [float(p) for p in probs]


def predict_batch(head: ClassifierHead, features: Sequence[EmbeddingVector] | np.ndarray
                  ) -> tuple[list[IntentLabel], np.ndarray]:
    x = _as_matrix(features)
    if x.shape[1] != head.dim:
        raise ValueError(f"feature dim {x.shape[1]} != head dim {head.dim}")
    probs = _forward(head, x)
    return [head.label_order[i] for i in probs.argmax(axis=1)], probs


def evaluate(head: ClassifierHead, features, labels: Sequence[IntentLabel]) -> float:
    predictions, _ = predict_batch(head, features)
    return sum(p == g for p, g in zip(predictions, labels)) / len(labels)


def grad_check(
    head: ClassifierHead,
    features: Sequence[EmbeddingVector] | np.ndarray,
    labels: Sequence[IntentLabel],
    n_coords: int = 50,
    step: float = 1e-5,
    seed: int = 0,
) -> float:
    """Max relative error between analytic and central-difference gradients.

    Checks a random subset of at least ``n_coords`` parameter coordinates
    (dropout disabled, as in every inference path).
    """
    x = _as_matrix(features)
    if x.shape[0] == 0:
        raise ValueError("gradient check needs a non-empty batch")
    y = _label_indices(labels, head.label_order)
    _, grads = _loss_and_grads(head, x, y)

    rng = np.random.default_rng(seed)
    worst = 0.0
    sizes = [w.size for w in head.weights]
    total = sum(sizes)
    chosen = rng.choice(total, size=min(n_coords, total), replace=False)
    flat_grads = np.concatenate([g.ravel() for g in grads])
    for flat_index in chosen:
        probe = [w.copy() for w in head.weights]
        tensor_index = 0
        offset = int(flat_index)
        while offset >= sizes[tensor_index]:
            offset -= sizes[tensor_index]
            tensor_index += 1
        flat = probe[tensor_index].ravel()
        original = flat[offset]
        flat[offset] = original + step
        loss_plus, _ = _loss_and_grads(replace(head, weights=tuple(probe)), x, y)
        flat[offset] = original - step
        loss_minus, _ = _loss_and_grads(replace(head, weights=tuple(probe)), x, y)
        flat[offset] = original
        numeric = (loss_plus - loss_minus) / (2 * step)
        analytic = float(flat_grads[flat_index])
        err = abs(analytic - numeric) / max(abs(analytic) + abs(numeric), 1e-8)
        worst = max(worst, err)
    return worst


def analytic_gradient_norm(head: ClassifierHead, features, labels: Sequence[IntentLabel]) -> float:
    x = _as_matrix(features)
    y = _label_indices(labels, head.label_order)
    _, grads = _loss_and_grads(head, x, y)
    return float(np.sqrt(sum(float((g * g).sum()) for g in grads)))


def load_feature_sidecar(path: str | Path) -> dict[str, np.ndarray]:
    """Read a feature sidecar: one JSON record {"id", "vector": [...]} per line."""
    features: dict[str, np.ndarray] = {}
    try:
        with Path(path).open("r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    rec = json.loads(line)
                    features[rec["id"]] = np.asarray(rec["vector"], dtype=np.float64)
                except (json.JSONDecodeError, KeyError, TypeError) as exc:
                    raise DataFormatError(f"{path}: bad feature record at line {lineno}: {exc}") from None
    except OSError as exc:
        raise DataFormatError(f"cannot read feature sidecar {path}: {exc}") from exc
    return features


# --------------------------------------------------------------------------
# Checkpoint persistence

_ARRAY_NAMES = {"cn1": ("W", "b"), "cn2": ("W1", "b1", "W2", "b2")}


def save_head(head: ClassifierHead, path: str | Path, config: HeadConfig | None = None) -> None:
    """Write a versioned JSON container; floats round-trip exactly."""
    payload = {
        "format": CHECKPOINT_FORMAT,
        "kind": head.kind,
        "provider_id": head.provider_id,
        "label_order": [label.value for label in head.label_order],
        "config": None if config is None else {
            "learning_rate": config.learning_rate,
            "dropout": config.dropout,
            "epochs": config.epochs,
            "batch_size": config.batch_size,
            "seed": config.seed,
            "hidden_dim": config.hidden_dim,
            "num_classes": config.num_classes,
            "optimizer": f"adam(b1={ADAM_BETA1},b2={ADAM_BETA2},eps={ADAM_EPS})",
        },
        "arrays": {
            name: w.tolist()
            for name, w in zip(_ARRAY_NAMES[head.kind], head.weights)
        },
    }
    Path(path).write_text(json.dumps(payload, ensure_ascii=False, indent=1), encoding="utf-8")


def load_head(path: str | Path) -> ClassifierHead:
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise DataFormatError(f"cannot read checkpoint {path}: {exc}") from exc
    if payload.get("format") != CHECKPOINT_FORMAT:
        raise DataFormatError(
            f"checkpoint {path} has format {payload.get('format')!r}, expected {CHECKPOINT_FORMAT!r}"
        )
    kind = payload["kind"]
    from .corpus import parse_label

    weights = tuple(
        np.array(payload["arrays"][name], dtype=np.float64)
        for name in _ARRAY_NAMES[kind]
    )
    return ClassifierHead(
        kind=kind,
        weights=weights,
        provider_id=payload["provider_id"],
        label_order=tuple(parse_label(v) for v in payload["label_order"]),
    )
