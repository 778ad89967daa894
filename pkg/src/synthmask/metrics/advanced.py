"""Word-frequency entropy, lexicon subjectivity, and pseudo-perplexity."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

from ..errors import BackendError
from ..features import tokenize_words


@dataclass(frozen=True)
class AdvancedScores:
    pseudo_perplexity: float | None
    entropy_bits: float
    subjectivity: float


@lru_cache(maxsize=1)
def load_subjectivity_lexicon() -> dict[str, float]:
    data = resources.files("synthmask.data").joinpath("subjectivity.tsv").read_text("utf-8")
    lexicon = {}
    for line in data.splitlines():
        if line.strip():
            word, value = line.split("\t")
            lexicon[word] = float(value)
    return lexicon


def _word_tokens(text: str) -> list[str]:
    return [
        t.text.lower() for t in tokenize_words(text) if any(ch.isalnum() for ch in t.text)
    ]


def entropy_bits(text: str) -> float:
    """Shannon entropy of the word-frequency distribution, in bits."""
    counts = Counter(_word_tokens(text))
    total = sum(counts.values())
    if total == 0:
        return 0.0
    return -sum((c / total) * math.log2(c / total) for c in counts.values()) + 0.0


def subjectivity(text: str, lexicon: dict[str, float] | None = None) -> float:
    """Mean lexicon subjectivity over matched words; 0.0 with no matches."""
    table = load_subjectivity_lexicon() if lexicon is None else lexicon
    values = [table[w] for w in _word_tokens(text) if w in table]
    return sum(values) / len(values) if values else 0.0


def advanced_suite(text: str, backend=None) -> AdvancedScores:
    ppl = None
    if backend is not None:
        try:
            ppl = math.exp(backend.pseudo_log_likelihood(text))
        except (BackendError, ValueError):
            ppl = None
    return AdvancedScores(
        pseudo_perplexity=ppl,
        entropy_bits=entropy_bits(text),
        subjectivity=subjectivity(text),
    )
