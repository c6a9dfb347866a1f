"""intentkit: German intent-recognition dataset toolkit.

Generates labeled command utterances from LLM chat endpoints, curates and
persists them, trains softmax heads over frozen sentence embeddings, and
runs cross-dataset text and speech evaluations (accuracy matrices,
confusion matrices, WER/CER).
"""

__version__ = "0.1.0"

from .corpus import Dataset, IntentLabel, Utterance  # noqa: F401
