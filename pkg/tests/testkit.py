"""Shared test fixtures: oracles, synthetic corpora and hand-built heads."""
from __future__ import annotations

import random

import numpy as np

from intentkit.classify import ClassifierHead
from intentkit.corpus import Dataset, IntentLabel, LABELS, Status, Utterance
from intentkit.embed import bow_bucket


def oracle_edit_distance(a, b) -> int:
    """Exhaustive branch-and-bound search over edit scripts.

    Independent of the production DP: explores match/substitute, delete and
    insert moves recursively, pruning only on the admissible length-difference
    bound. Practical for sequences up to length ~10.
    """
    la, lb = len(a), len(b)
    best = [max(la, lb)]  # cost of aligning position-wise and padding the tail

    def go(i: int, j: int, cost: int) -> None:
        lower = cost + abs((la - i) - (lb - j))
        if lower >= best[0]:
            return
        if i == la or j == lb:
            best[0] = cost + (la - i) + (lb - j)
            return
        go(i + 1, j + 1, cost + (a[i] != b[j]))
        go(i + 1, j, cost + 1)
        go(i, j + 1, cost + 1)

    go(0, 0, 0)
    return best[0]


def utt(text: str, label: IntentLabel = IntentLabel.HELP, **kwargs) -> Utterance:
    kwargs.setdefault("source", "test")
    return Utterance(text=text, label=label, **kwargs)


def dataset(*items: Utterance, name: str = "test") -> Dataset:
    return Dataset(name=name, items=tuple(items))


def random_dataset(rng: random.Random, n: int, name: str = "rand") -> Dataset:
    """Random utterances with unique texts (construction-ready, pre-dedup)."""
    items = []
    for i in range(n):
        label = rng.choice(LABELS)
        words = [f"wort{rng.randrange(50)}" for _ in range(rng.randrange(1, 6))]
        items.append(Utterance(
            text=f"{' '.join(words)} nr{i}", label=label,
            source=rng.choice(("leolm", "llama3", "chatgpt")),
            seed=rng.randrange(100) if rng.random() < 0.8 else None,
        ))
    return Dataset(name=name, items=tuple(items))


# ---------------------------------------------------------------------------
# Synthetic training corpora over the hashed bag-of-words embedder


def collision_free_words(groups: dict[str, int], dim: int) -> dict[str, list[str]]:
    """Per-group word lists whose hash buckets are globally distinct.

    Distinct buckets keep the embedded classes linearly separable (shared
    buckets would mix class evidence).
    """
    used: set[int] = set()
    pools: dict[str, list[str]] = {}
    for group, count in groups.items():
        words = []
        i = 0
        while len(words) < count:
            word = f"{group}w{i}"
            i += 1
            bucket = bow_bucket(word, dim)
            if bucket not in used:
                used.add(bucket)
                words.append(word)
        pools[group] = words
    return pools


def separable_corpus(
    items_per_class: int = 100,
    dim: int = 256,
    pool_size: int = 40,
    words_low: int = 32,
    words_high: int = 40,
    seed: int = 12345,
    name: str = "separable",
) -> Dataset:
    """Six-class keyword corpus; items carry many class-specific tokens.

    Word-rich items give the head enough per-step logit movement to fit the
    corpus within the default five-epoch budget.
    """
    pools = collision_free_words({label.value: pool_size for label in LABELS}, dim)
    rng = random.Random(seed)
    items = []
    for label in LABELS:
        pool = pools[label.value]
        for i in range(items_per_class):
            k = rng.randint(words_low, min(words_high, len(pool)))
            words = rng.sample(pool, k)
            items.append(Utterance(text=" ".join(words) + f" nr{i}",
                                   label=label, source="synthetic"))
    return Dataset(name=name, items=tuple(items))


def generator_corpora(
    items_per_class: int = 60,
    dim: int = 256,
    generators: tuple[str, ...] = ("alpha", "beta", "gamma"),
    seed: int = 777,
) -> dict[str, Dataset]:
    """Corpora with controlled vocabulary overlap across generators.

    Every class has a core vocabulary shared by all generators plus
    generator-specific words, so in-domain evaluation beats transfer."""
    groups = {}
    for label in LABELS:
        groups[f"core-{label.value}"] = 10
        for gen in generators:
            groups[f"{gen}-{label.value}"] = 8
    pools = collision_free_words(groups, dim)

    rng = random.Random(seed)
    corpora = {}
    for gen in generators:
        items = []
        for label in LABELS:
            core = pools[f"core-{label.value}"]
            own = pools[f"{gen}-{label.value}"]
            for i in range(items_per_class):
                words = rng.sample(core, rng.randint(7, 10)) + rng.sample(own, rng.randint(6, 8))
                rng.shuffle(words)
                items.append(Utterance(text=" ".join(words) + f" nr{i}",
                                       label=label, source=gen))
        corpora[gen] = Dataset(name=gen, items=tuple(items))
    return corpora


CLASS_KEYWORDS = {
    IntentLabel.HELP: "hilfe",
    IntentLabel.LIGHT_ON: "einschalten",
    IntentLabel.LIGHT_OFF: "ausschalten",
    IntentLabel.ROLL_UP: "hochfahren",
    IntentLabel.ROLL_DOWN: "runterfahren",
    IntentLabel.NO_COMMAND: "wetter",
}


def keyword_routing_head(dim: int = 256, gain: float = 10.0) -> ClassifierHead:
    """Hand-built head that routes each class keyword's bucket to its class."""
    w = np.zeros((dim, len(LABELS)))
    for idx, label in enumerate(LABELS):
        w[bow_bucket(CLASS_KEYWORDS[label], dim), idx] = gain
    return ClassifierHead(kind="cn1", weights=(w, np.zeros(len(LABELS))),
                          provider_id=f"hashed_bow/fnv1a64/{dim}")


def keyword_speech_dataset(per_class: int = 5, name: str = "speech") -> Dataset:
    """Three-word utterances with the class keyword never in first position."""
    items = []
    for label in LABELS:
        kw = CLASS_KEYWORDS[label]
        for i in range(per_class):
            items.append(Utterance(text=f"bitte {kw} nummer{i}", label=label, source="synthetic"))
    return Dataset(name=name, items=tuple(items))


def xor_features(per_cluster: int = 100, jitter: float = 0.05, seed: int = 42):
    """Two-class XOR clusters in 2-D; not linearly separable."""
    rng = np.random.default_rng(seed)
    xs, ys = [], []
    for sx in (-1.0, 1.0):
        for sy in (-1.0, 1.0):
            label = IntentLabel.HELP if sx * sy > 0 else IntentLabel.LIGHT_ON
            for _ in range(per_cluster):
                xs.append([sx + jitter * rng.standard_normal(),
                           sy + jitter * rng.standard_normal()])
                ys.append(label)
    return np.array(xs), ys


def scripted_ask(answers):
    """ask() callable fed from a list; runs 'q' once the script is spent."""
    iterator = iter(answers)

    def ask(_prompt: str) -> str:
        return next(iterator, "q")

    return ask
