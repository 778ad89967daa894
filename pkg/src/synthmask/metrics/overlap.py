"""Literal-overlap similarity: ROUGE-1/2/L and METEOR.

Both metrics tokenize with the featurizer word tokenizer, lowercased,
so `[MASK]` sentinels in baseline texts stay single tokens and score
zero overlap against real words.
"""

from __future__ import annotations

import warnings
from collections import Counter

from ..features import tokenize_words

METEOR_ALPHA = 0.9
METEOR_BETA = 3.0
METEOR_GAMMA = 0.5

_STEM_SUFFIXES = ("ing", "ies", "ed", "es", "s", "ly")


def metric_tokens(text: str) -> list[str]:
    return [t.text.lower() for t in tokenize_words(text)]


def _f1(p: float, r: float) -> float:
    return 2 * p * r / (p + r) if p + r > 0 else 0.0


def _ngrams(tokens: list[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def _lcs_length(a: list[str], b: list[str]) -> int:
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b, start=1):
            cur.append(prev[j - 1] + 1 if x == y else max(prev[j], cur[j - 1]))
        prev = cur
    return prev[-1]


def rouge(candidate: str, reference: str, variant) -> tuple[float, float, float]:
    """(precision, recall, f1) as percentages; variant 1, 2, or "L"."""
    cand = metric_tokens(candidate)
    ref = metric_tokens(reference)
    if not ref:
        warnings.warn("rouge called with an empty reference; scoring 0")
        return (0.0, 0.0, 0.0)
    if cand == ref and (variant == "L" or len(cand) >= int(variant)):
        # exact: full n-gram overlap / LCS = length (empty-overlap cases fall through)
        return (100.0, 100.0, 100.0)
    if variant in (1, 2):
        n = int(variant)
        cand_grams = _ngrams(cand, n)
        ref_grams = _ngrams(ref, n)
        overlap = sum((cand_grams & ref_grams).values())
        p = overlap / max(sum(cand_grams.values()), 1) if cand_grams else 0.0
        r = overlap / sum(ref_grams.values()) if ref_grams else 0.0
    elif variant == "L":
        lcs = _lcs_length(cand, ref)
        p = lcs / len(cand) if cand else 0.0
        r = lcs / len(ref)
    else:
        raise ValueError(f"unknown ROUGE variant {variant!r}")
    return (100.0 * p, 100.0 * r, 100.0 * _f1(p, r))


def stem(word: str) -> str:
    """Minimal suffix-stripping stemmer used by METEOR's second stage."""
    for suffix in _STEM_SUFFIXES:
        if word.endswith(suffix) and len(word) - len(suffix) >= 3:
            return word[: -len(suffix)]
    return word


def _align(cand: list[str], ref: list[str]) -> list[tuple[int, int]]:
    """Greedy one-to-one alignment: exact matches first, then stem matches.

    Each candidate token takes the earliest unmatched reference token,
    scanning left to right.
    """
    pairs: list[tuple[int, int]] = []
    used_ref: set[int] = set()
    matched_cand: set[int] = set()
    for stage in ("exact", "stem"):
        for i, word in enumerate(cand):
            if i in matched_cand:
                continue
            key = word if stage == "exact" else stem(word)
            for j, ref_word in enumerate(ref):
                if j in used_ref:
                    continue
                other = ref_word if stage == "exact" else stem(ref_word)
                if key == other:
                    pairs.append((i, j))
                    used_ref.add(j)
                    matched_cand.add(i)
                    break
    return sorted(pairs)


def _chunk_count(pairs: list[tuple[int, int]]) -> int:
    chunks = 0
    prev = None
    for i, j in pairs:
        if prev is None or i != prev[0] + 1 or j != prev[1] + 1:
            chunks += 1
        prev = (i, j)
    return chunks


def meteor(
    candidate: str,
    reference: str,
    alpha: float = METEOR_ALPHA,
    beta: float = METEOR_BETA,
    gamma: float = METEOR_GAMMA,
) -> float:
    """Harmonic-mean alignment score with a fragmentation penalty, in [0, 1].

    Matching is exact + stem only (no synonym dictionary); the chunk
    penalty is gamma * (chunks / matches) ** beta.
    """
    cand = metric_tokens(candidate)
    ref = metric_tokens(reference)
    if not cand or not ref:
        return 0.0
    pairs = _align(cand, ref)
    m = len(pairs)
    if m == 0:
        return 0.0
    precision = m / len(cand)
    recall = m / len(ref)
    fmean = precision * recall / (alpha * precision + (1 - alpha) * recall)
    penalty = gamma * (_chunk_count(pairs) / m) ** beta
    return fmean * (1 - penalty)
