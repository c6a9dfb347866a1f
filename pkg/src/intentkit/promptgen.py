"""Prompt catalog and the chat-completion generation loop.

The catalog holds the built-in German prompts, one or more variants per
label. Each prompt announces a speaker keyword before every utterance and
an end keyword after it; the parser downstream relies on exactly those
markers. Completions are fetched over an OpenAI-style chat endpoint, with
adapter variants for servers that take the extended sampling parameters
in an "options" object or not at all.
"""
from __future__ import annotations

import datetime as _dt
import itertools
import json
import logging
import os
import random
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

import requests

from .corpus import Dataset, IntentLabel, Status, Utterance, dedup, fold_key, merge
from .errors import DataFormatError, NetworkError
from .parsing import parse_block

logger = logging.getLogger(__name__)

SPEAKER_KEYWORD = "Ältere_Person:"
END_KEYWORD = "NÄCHSTES"

#: Environment variable holding the endpoint API key. Secrets travel only
#: through the environment; the key is never logged or written to audit files.
API_KEY_ENV = "INTENTKIT_API_KEY"

SEED_RANGE_BITS = 35

ADAPTERS = ("extended", "options", "strict")


@dataclass(frozen=True)
class PromptTemplate:
    label: IntentLabel
    variant_id: str
    body: str
    speaker_keyword: str = SPEAKER_KEYWORD
    end_keyword: str = END_KEYWORD
    batch_size_requested: int = 10

    def __post_init__(self) -> None:
        if self.speaker_keyword not in self.body or self.end_keyword not in self.body:
            raise ValueError(
                f"prompt {self.variant_id!r} must announce both keywords in its body"
            )


_HELP_FULL = (
    "Generieren Sie 10 verschiedene Sprachbefehle, mit denen ein älterer Mensch seinen "
    "KI-Assistenten in gefährlichen Situationen um Hilfe bitten kann, ohne jedes Mal explizit "
    "um Hilfe zu bitten. Verwenden Sie verschiedene Sätze und unterschiedliche "
    "Gesundheitssituationen. Sie müssen vor jeder Äußerung die Anweisung 'Ältere_Person:' als "
    "Sprechername einfügen und 'NÄCHSTES' am Ende jeder Äußerung, um das Ende der Äußerung zu "
    "kennzeichnen. Geben Sie die angeforderten Sätze genau in der beschriebenen Struktur aus, "
    "geben Sie nichts anderes aus."
)

_HELP_SHORT = (
    "Generieren Sie 10 verschiedene sehr kurze Sprachbefehle, mit denen eine ältere Person "
    "ihren KI-Assistenten in gefährlichen Situationen um Hilfe bitten kann, ohne jedes Mal "
    "explizit um Hilfe zu bitten. Verwenden Sie verschiedene, kurze Sätze, die aus ein bis zwei "
    "Wörtern bestehen und verschiedene Gesundheitssituationen beschreiben. Fügen Sie vor jeder "
    "Äußerung die Anweisung 'Ältere_Person:' als Sprechername ein und am Ende jeder Äußerung "
    "'NÄCHSTES', um das Ende der Äußerung zu markieren. Geben Sie die geforderten Sätze genau "
    "in der beschriebenen Struktur aus, geben Sie nichts anderes aus."
)

_ROLL_UP = (
    "Generieren Sie 10 verschiedene Sprachbefehle für eine ältere Person, die ihren "
    "KI-Assistenten bittet, die Rollläden hochzufahren. Verwenden Sie verschiedene Sätze und "
    "unterschiedliche Ausdrücke. Sie müssen vor jeder Äußerung die Anweisung ‘Ältere_Person:‘ "
    "als Sprechername einfügen und ‘NÄCHSTES‘ am Ende jeder Äußerung, um das Ende der Äußerung "
    "zu kennzeichnen. Geben Sie die angeforderten Sätze genau in der beschriebenen Struktur "
    "aus, geben Sie nichts anderes aus."
)

_ROLL_DOWN = (
    "Generieren Sie 10 verschiedene Sprachbefehle für eine ältere Person, die ihren "
    "KI-Assistenten bittet, die Rollläden herunterzufahren. Verwenden Sie verschiedene Sätze "
    "und unterschiedliche Ausdrücke. Sie müssen vor jeder Äußerung die Anweisung "
    "'Ältere_Person:' als Sprechername einfügen und 'NÄCHSTES' am Ende jeder Äußerung, um das "
    "Ende der Äußerung zu kennzeichnen. Geben Sie die angeforderten Sätze genau in der "
    "beschriebenen Struktur aus, geben Sie nichts anderes aus."
)

_LIGHT_ON = (
    "Generieren Sie 10 verschiedene Sprachbefehle für eine ältere Person, die ihren "
    "KI-Assistenten bittet, das Licht einzuschalten. Verwenden Sie verschiedene Sätze und "
    "unterschiedliche Ausdrücke. Sie müssen vor jeder Äußerung die Anweisung 'Ältere_Person:' "
    "als Sprechername einfügen und 'NÄCHSTES' am Ende jeder Äußerung, um das Ende der Äußerung "
    "zu kennzeichnen. Geben Sie die angeforderten Sätze genau in der beschriebenen Struktur "
    "aus, geben Sie nichts anderes aus."
)

_LIGHT_OFF = (
    "Generieren Sie 10 verschiedene Sprachbefehle für eine ältere Person, die ihren "
    "KI-Assistenten bittet, das Licht auszuschalten. Verwenden Sie verschiedene Sätze und "
    "unterschiedliche Ausdrücke. Sie müssen vor jeder Äußerung die Anweisung 'Ältere_Person:' "
    "als Sprechername einfügen und 'NÄCHSTES' am Ende jeder Äußerung, um das Ende der Äußerung "
    "zu kennzeichnen. Geben Sie die angeforderten Sätze genau in der beschriebenen Struktur "
    "aus, geben Sie nichts anderes aus."
)

_NO_COMMAND_HELP_FP = (
    "Generieren Sie 10 Sätze von einer älteren Person, die von einer Spracherkennung "
    "fälschlicherweise als 'Bitte um Hilfe' klassifiziert werden können, aber in Wirklichkeit "
    "als 'kein Befehl' für einen KI-Assistenten verwendet werden. Der Assistent benutzt dafür "
    "eine Keyword Detection. Verwenden Sie verschiedene Sätze und verschiedene Ausdrücke. Sie "
    "müssen vor jeder Äußerung als Sprechernamen die Anweisung 'Ältere_Person:' und am Ende "
    "jeder Äußerung 'NÄCHSTES' einfügen, um das Ende der Äußerung anzuzeigen. Ein paar "
    "Beispiele: Ältere_Person: Kannst du mir bitte helfen, mein Handy zu finden? NÄCHSTES "
    "Ältere_Person: Mein Sohn hat mir gestern mit dem Garten geholfen. NÄCHSTES Ältere_Person: "
    "Manchmal muss ich um Hilfe bitten. NÄCHSTES Ältere_Person: Diese neuen Geräte sind ohne "
    "Hilfe gar nicht zu bedienen. NÄCHSTES Ältere_Person: Früher konnte ich alles alleine, "
    "ohne um Hilfe zu bitten. NÄCHSTES"
)

_NO_COMMAND_ROLL_FP = (
    "Generieren Sie 10 Sätze von einer älteren Person, die von einer Spracherkennung "
    "fälschlicherweise als 'Rollläden hoch- oder runterfahren' klassifiziert werden können, "
    "aber in Wirklichkeit als 'kein Befehl' für einen KI-Assistenten verwendet werden. Der "
    "Assistent benutzt dafür eine Keyword Detection. Verwenden Sie verschiedene Sätze und "
    "verschiedene Ausdrücke. Sie müssen vor jeder Äußerung als Sprechernamen die Anweisung "
    "'Ältere_Person:' und am Ende jeder Äußerung 'NÄCHSTES' einfügen, um das Ende der Äußerung "
    "anzuzeigen. Ein paar Beispiele: Ältere_Person: Mein Assistent fährt die Rollläden jeden "
    "Abend pünktlich um 18:00 herunter. NÄCHSTES Ältere_Person: Im Sommer habe ich die "
    "Jalousien gerne den ganzen Tag unten. NÄCHSTES Ältere_Person: Es ist sehr praktisch, dass "
    "mein Sprachassistent die Rollläden steuern kann. NÄCHSTES Ältere_Person: Meine Rollläden "
    "sind beim letzten Sturm kaputtgegangen. NÄCHSTES Ältere_Person: Sobald meine Jalousien "
    "oben sind, kann ich meinen Tag beginnen. NÄCHSTES"
)

_NO_COMMAND_LIGHT_FP = (
    "Generieren Sie 10 Sätze von einer älteren Person, die von einer Spracherkennung "
    "fälschlicherweise als 'Licht ein- oder ausschalten' klassifiziert werden können, aber in "
    "Wirklichkeit als 'kein Befehl' für einen KI-Assistenten verwendet werden. Der Assistent "
    "benutzt dafür eine Keyword Detection. Verwenden Sie verschiedene Sätze und verschiedene "
    "Ausdrücke. Sie müssen vor jeder Äußerung als Sprechernamen die Anweisung 'Ältere_Person:' "
    "und am Ende jeder Äußerung 'NÄCHSTES' einfügen, um das Ende der Äußerung anzuzeigen. Ein "
    "paar Beispiele: Ältere_Person: Mein Assistent schaltet mir jeden morgen die Lichter an. "
    "NÄCHSTES Ältere_Person: Gestern hatten wir schon sehr früh kein Licht mehr im Raum. "
    "NÄCHSTES Ältere_Person: Die Tatsache, dass mein Sprachassistent das Licht an- und "
    "ausschalten kann ist sehr praktisch. NÄCHSTES Ältere_Person: Da ist mir ein Licht "
    "aufgegangen. NÄCHSTES Ältere_Person: Manchmal ist es hier ziemlich dunkel ohne Licht. "
    "NÄCHSTES"
)

_CATALOG = (
    PromptTemplate(IntentLabel.HELP, "help/full", _HELP_FULL),
    PromptTemplate(IntentLabel.HELP, "help/short", _HELP_SHORT),
    PromptTemplate(IntentLabel.LIGHT_ON, "light_on/std", _LIGHT_ON),
    PromptTemplate(IntentLabel.LIGHT_OFF, "light_off/std", _LIGHT_OFF),
    PromptTemplate(IntentLabel.ROLL_UP, "roll_up/std", _ROLL_UP),
    PromptTemplate(IntentLabel.ROLL_DOWN, "roll_down/std", _ROLL_DOWN),
    PromptTemplate(IntentLabel.NO_COMMAND, "no_command/help_fp", _NO_COMMAND_HELP_FP),
    PromptTemplate(IntentLabel.NO_COMMAND, "no_command/roll_fp", _NO_COMMAND_ROLL_FP),
    PromptTemplate(IntentLabel.NO_COMMAND, "no_command/light_fp", _NO_COMMAND_LIGHT_FP),
)


def catalog() -> tuple[PromptTemplate, ...]:
    """All built-in prompt templates, keyed by label/variant."""
    return _CATALOG


def variants_for(label: IntentLabel) -> list[PromptTemplate]:
    return [t for t in _CATALOG if t.label is label]


def template_by_id(variant_id: str) -> PromptTemplate:
    for t in _CATALOG:
        if t.variant_id == variant_id:
            return t
    raise KeyError(f"no prompt variant {variant_id!r}")


# --------------------------------------------------------------------------
# Generation parameters and seeds


@dataclass(frozen=True)
class GenerationParams:
    """Sampling controls plus endpoint settings for one generation campaign.

    The sampling defaults are the fixed recipe for local model servers:
    top_p 1, top_k 10000, repetition penalty 1, typical_p 0.995,
    temperature 0.7. The seed stays fixed for the whole campaign.
    """

    seed: int
    model: str
    endpoint_url: str
    top_p: float = 1.0
    top_k: int = 10000
    repetition_penalty: float = 1.0
    typical_p: float = 0.995
    temperature: float = 0.7
    max_tokens: int = 1024
    timeout: float = 120.0
    adapter: str = "extended"

    def __post_init__(self) -> None:
        if self.adapter not in ADAPTERS:
            raise ValueError(f"adapter must be one of {ADAPTERS}, got {self.adapter!r}")
        if self.top_k < 1 or self.max_tokens < 1:
            raise ValueError("top_k and max_tokens must be positive")
        if self.repetition_penalty <= 0 or self.temperature < 0:
            raise ValueError("repetition_penalty must be positive, temperature non-negative")


def campaign_rng(initializer: int = 0) -> random.Random:
    """RNG for drawing campaign seeds; the first campaign ever starts at 0."""
    return random.Random(initializer)


def draw_seed(rng: random.Random) -> int:
    """Draw a campaign seed strictly inside (0, 2**35)."""
    return rng.randrange(1, 1 << SEED_RANGE_BITS)


@dataclass(frozen=True)
class RawCompletion:
    """One completion captured verbatim, pre-parsing, for audit and replay."""

    prompt_id: str
    seed: int
    text: str
    model: str
    timestamp: str

    def to_record(self) -> dict:
        return {
            "prompt_id": self.prompt_id,
            "seed": self.seed,
            "text": self.text,
            "model": self.model,
            "timestamp": self.timestamp,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "RawCompletion":
        return cls(
            prompt_id=rec["prompt_id"],
            seed=rec["seed"],
            text=rec["text"],
            model=rec["model"],
            timestamp=rec.get("timestamp", ""),
        )


class AuditLog:
    """Append-only JSONL log of raw completions; appends are serialized."""

    def __init__(self, path: str | Path) -> None:
        self.path = Path(path)
        self._lock = threading.Lock()

    def append(self, completion: RawCompletion) -> None:
        line = json.dumps(completion.to_record(), ensure_ascii=False)
        with self._lock:
            with self.path.open("a", encoding="utf-8") as fh:
                fh.write(line + "\n")

    def read(self) -> list[RawCompletion]:
        if not self.path.exists():
            return []
        records = []
        with self.path.open("r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    records.append(RawCompletion.from_record(json.loads(line)))
                except (json.JSONDecodeError, KeyError) as exc:
                    raise DataFormatError(f"{self.path}: bad audit record at line {lineno}: {exc}")
        return records


# --------------------------------------------------------------------------
# Wire client


def build_request_body(params: GenerationParams, prompt: PromptTemplate) -> dict:
    """Serialize the request for the configured endpoint flavor.

    "extended" sends all sampling parameters top-level; "options" nests
    top_k/typical_p/repetition_penalty in an options object; "strict"
    omits parameters hosted endpoints do not accept (logged, since those
    generations are not fully reproducible).
    """
    body = {
        "model": params.model,
        "messages": [{"role": "user", "content": prompt.body}],
        "temperature": params.temperature,
        "top_p": params.top_p,
        "seed": params.seed,
        "max_tokens": params.max_tokens,
    }
    extras = {
        "top_k": params.top_k,
        "typical_p": params.typical_p,
        "repetition_penalty": params.repetition_penalty,
    }
    if params.adapter == "extended":
        body.update(extras)
    elif params.adapter == "options":
        body["options"] = extras
    else:
        logger.info(
            "adapter 'strict': omitting %s for endpoint %s",
            ", ".join(sorted(extras)), params.endpoint_url,
        )
    return body


def _extract_text(payload: dict) -> str:
    # OpenAI-style first, then the flatter shapes local servers use.
    try:
        return payload["choices"][0]["message"]["content"]
    except (KeyError, IndexError, TypeError):
        pass
    message = payload.get("message")
    if isinstance(message, dict) and isinstance(message.get("content"), str):
        return message["content"]
    if isinstance(payload.get("response"), str):
        return payload["response"]
    raise DataFormatError(f"cannot find completion text in response keys {sorted(payload)}")


def chat_complete(
    params: GenerationParams,
    prompt: PromptTemplate,
    session: requests.Session | None = None,
    max_attempts: int = 3,
    backoff: float = 0.5,
    audit: AuditLog | None = None,
) -> RawCompletion:
    """POST one chat completion and capture the text verbatim.

    Transport failures and 5xx responses are retried up to ``max_attempts``
    times; other non-success statuses fail immediately with the response
    body. The API key, when set in the environment, travels only in the
    Authorization header.
    """
    session = session or requests.Session()
    body = build_request_body(params, prompt)
    headers = {"Content-Type": "application/json"}
    api_key = os.environ.get(API_KEY_ENV)
    if api_key:
        headers["Authorization"] = f"Bearer {api_key}"

    last_error = None
    for attempt in range(1, max_attempts + 1):
        try:
            resp = session.post(
                params.endpoint_url,
                data=json.dumps(body, ensure_ascii=False).encode("utf-8"),
                headers=headers,
                timeout=params.timeout,
            )
        except requests.RequestException as exc:
            last_error = f"transport failure: {exc}"
            logger.warning("attempt %d/%d against %s failed: %s",
                           attempt, max_attempts, params.endpoint_url, exc)
            if attempt < max_attempts:
                time.sleep(backoff * attempt)
            continue
        if resp.status_code >= 500:
            last_error = f"status {resp.status_code}: {resp.text[:500]}"
            logger.warning("attempt %d/%d: endpoint %s returned %d",
                           attempt, max_attempts, params.endpoint_url, resp.status_code)
            if attempt < max_attempts:
                time.sleep(backoff * attempt)
            continue
        if resp.status_code != 200:
            raise NetworkError(
                f"endpoint {params.endpoint_url} returned {resp.status_code}: {resp.text[:500]}"
            )
        try:
            payload = resp.json()
        except ValueError as exc:
            raise DataFormatError(f"endpoint returned non-JSON body: {exc}") from exc
        completion = RawCompletion(
            prompt_id=prompt.variant_id,
            seed=params.seed,
            text=_extract_text(payload),
            model=params.model,
            timestamp=_dt.datetime.now(_dt.timezone.utc).isoformat(),
        )
        if audit is not None:
            audit.append(completion)
        return completion
    raise NetworkError(
        f"endpoint {params.endpoint_url} failed after {max_attempts} attempts ({last_error})"
    )


# --------------------------------------------------------------------------
# Quota refill loop


@dataclass
class GenerationResult:
    """Corpus produced for one label, plus loop accounting."""

    dataset: Dataset
    calls: int
    exhausted: bool
    warnings: list[str] = field(default_factory=list)


def _accept_candidates(
    texts: Iterable[str],
    template: PromptTemplate,
    label: IntentLabel,
    source: str,
    seed: int,
    seen: set,
    items: list[Utterance],
) -> int:
    added = 0
    for text in texts:
        if template.speaker_keyword in text or template.end_keyword in text:
            logger.warning("dropping parsed candidate containing a keyword: %r", text)
            continue
        key = (fold_key(text), label)
        if key in seen:
            continue
        seen.add(key)
        items.append(Utterance(
            text=text, label=label, source=source,
            prompt_id=template.variant_id, seed=seed, status=Status.RAW,
        ))
        added += 1
    return added


def generate_label_corpus(
    label: IntentLabel,
    quota: int,
    params: GenerationParams,
    source: str | None = None,
    calls_per_variant: int = 50,
    session: requests.Session | None = None,
    audit: AuditLog | None = None,
    complete: Callable[..., RawCompletion] = chat_complete,
) -> GenerationResult:
    """Fill a per-label quota by cycling the label's prompt variants.

    Each call runs completion -> parse -> dedup against everything already
    accepted. The loop stops once the quota is met or the per-variant call
    budget is exhausted; exhaustion returns the partial corpus with a
    warning rather than raising.
    """
    if quota < 1:
        raise ValueError("quota must be positive")
    templates = variants_for(label)
    if not templates:
        raise ValueError(f"no prompt variants for label {label.value!r}")
    budget = calls_per_variant * len(templates)
    src = source or params.model

    seen: set = set()
    items: list[Utterance] = []
    calls = 0
    for template in itertools.cycle(templates):
        if len(items) >= quota or calls >= budget:
            break
        completion = complete(params, template, session=session, audit=audit)
        calls += 1
        report = parse_block(completion.text, template.speaker_keyword, template.end_keyword)
        _accept_candidates(report.accepted, template, label, src, params.seed, seen, items)

    dataset = Dataset(name=f"{src}/{label.value}", items=tuple(items))
    exhausted = len(items) < quota
    warnings = []
    if exhausted:
        warnings.append(
            f"budget exhausted for label {label.value!r}: "
            f"{len(items)}/{quota} items after {calls} calls"
        )
        logger.warning("%s", warnings[-1])
    return GenerationResult(dataset=dataset, calls=calls, exhausted=exhausted, warnings=warnings)


def generate_dataset(
    quotas: dict[IntentLabel, int],
    params: GenerationParams,
    name: str | None = None,
    source: str | None = None,
    calls_per_variant: int = 50,
    audit: AuditLog | None = None,
    parallel_labels: bool = False,
    complete: Callable[..., RawCompletion] = chat_complete,
) -> tuple[Dataset, list[GenerationResult]]:
    """Run the quota loop for several labels; optionally in parallel.

    Within one label, calls stay sequential so dedup-driven quota
    accounting is deterministic.
    """
    def run(label: IntentLabel) -> GenerationResult:
        return generate_label_corpus(
            label, quotas[label], params, source=source,
            calls_per_variant=calls_per_variant,
            session=requests.Session(), audit=audit, complete=complete,
        )

    labels = [label for label in IntentLabel if label in quotas]
    if parallel_labels and len(labels) > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=len(labels)) as pool:
            results = list(pool.map(run, labels))
    else:
        results = [run(label) for label in labels]
    combined = merge([r.dataset for r in results], name or (source or params.model))
    return combined, results


def replay_audit(records: Sequence[RawCompletion], source: str | None = None) -> Dataset:
    """Rebuild the parsed, deduplicated dataset from recorded completions.

    Replaying the same records always yields a byte-identical dataset.
    """
    items: list[Utterance] = []
    seen: set = set()
    for rec in records:
        template = template_by_id(rec.prompt_id)
        report = parse_block(rec.text, template.speaker_keyword, template.end_keyword)
        _accept_candidates(report.accepted, template, template.label,
                           source or rec.model, rec.seed, seen, items)
    return Dataset(name=f"{source or 'replay'}", items=tuple(items))
