"""Post-processing: fill PHI placeholder blanks and correct misspellings.

Spelling correction is dictionary-driven (Damerau-Levenshtein with a
frequency tiebreak) and never touches protected tokens (entities,
structure, special patterns, privacy hits, numbers), because a
general dictionary happily "corrects" clinical vocabulary.
"""

from __future__ import annotations

import re
import warnings
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

from .backends import FillMaskQuery, PredictionBackend
from .errors import BackendError
from .features import MASK_SENTINEL, TokenRecord
from .generation import classify_prediction

_BLANK_RUN_RE = re.compile(r"_{3,}")


@dataclass
class SpellDictionary:
    """Lowercased word -> frequency table with a bounded edit distance."""

    frequencies: dict[str, int]
    max_edit_distance: int = 2

    def __post_init__(self):
        if not self.frequencies:
            raise ValueError("spelling dictionary is empty")
        if any(count <= 0 for count in self.frequencies.values()):
            raise ValueError("dictionary frequencies must be positive")

    @classmethod
    def load(cls, path: str | Path | None = None, max_edit_distance: int = 2) -> "SpellDictionary":
        """Read a word<TAB>count file; None loads the bundled dictionary."""
        if path is None:
            data = resources.files("synthmask.data").joinpath("wordfreq.tsv").read_text("utf-8")
        else:
            data = Path(path).read_text("utf-8")
        freqs: dict[str, int] = {}
        for line in data.splitlines():
            if not line.strip():
                continue
            word, count = line.split("\t")
            freqs[word.lower()] = int(count)
        return cls(frequencies=freqs, max_edit_distance=max_edit_distance)

    def add_protected_vocabulary(self, words: Iterable[str], count: int = 1) -> None:
        """Register corpus surfaces (entity names etc.) as known words."""
        for word in words:
            for piece in word.split():
                key = piece.lower()
                if key and key not in self.frequencies:
                    self.frequencies[key] = count

    def __contains__(self, word: str) -> bool:
        return word.lower() in self.frequencies

    def best_correction(self, word: str) -> str | None:
        """Closest dictionary word within the distance bound.

        Rank by (distance asc, frequency desc, word asc); None when
        nothing is within reach.
        """
        target = word.lower()
        cap = self.max_edit_distance
        best: tuple[int, int, str] | None = None
        for candidate, freq in self.frequencies.items():
            if abs(len(candidate) - len(target)) > cap:
                continue
            dist = damerau_levenshtein(target, candidate, cap)
            if dist > cap:
                continue
            key = (dist, -freq, candidate)
            if best is None or key < best:
                best = key
        return best[2] if best else None


def damerau_levenshtein(a: str, b: str, cap: int | None = None) -> int:
    """Edit distance with adjacent transpositions (optimal string alignment).

    With ``cap`` the result saturates at cap+1 once no cheaper path exists.
    """
    if a == b:
        return 0
    if not a:
        return len(b)
    if not b:
        return len(a)
    big = len(a) + len(b)
    prev2: list[int] = []
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        cur = [i]
        for j, cb in enumerate(b, start=1):
            cost = 0 if ca == cb else 1
            value = min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + cost)
            if i > 1 and j > 1 and ca == b[j - 2] and a[i - 2] == cb:
                value = min(value, prev2[j - 2] + 1)
            cur.append(value)
        if cap is not None and min(cur) > cap:
            return cap + 1
        prev2, prev = prev, cur
    return prev[-1]


def _match_case(original: str, replacement: str) -> str:
    if original.isupper() and len(original) > 1:
        return replacement.upper()
    if original[:1].isupper():
        return replacement.capitalize()
    return replacement


def is_protected(token: TokenRecord) -> bool:
    return (
        token.is_entity
        or token.is_structure
        or token.is_special
        or token.is_privacy
        or token.is_number
        or token.is_phi_placeholder
    )


def correct_spelling(
    tokens: Sequence[TokenRecord],
    protected_flags: Sequence[bool] | None,
    dictionary: SpellDictionary,
) -> list[TokenRecord]:
    """Replace unknown alphabetic unprotected tokens with their best correction.

    Token count never changes; tokens without a candidate stay as-is.
    ``protected_flags`` overrides the flag-derived protection when given.
    """
    out: list[TokenRecord] = []
    for pos, token in enumerate(tokens):
        protected = protected_flags[pos] if protected_flags is not None else is_protected(token)
        text = token.text
        if protected or not text.isalpha() or text in dictionary:
            out.append(token)
            continue
        correction = dictionary.best_correction(text)
        if correction is None or correction == text.lower():
            out.append(token)
        else:
            out.append(replace(token, text=_match_case(text, correction)))
    return out


def fill_blanks(text: str, backend: PredictionBackend, top_k: int = 5) -> str:
    """Replace each maximal run of >=3 underscores via one fill-mask call.

    The first valid candidate (falling through up to ``top_k`` ranks)
    substitutes the run; runs with no valid candidate stay unchanged.
    On transport failure the text comes back untouched with a warning.
    """
    runs = list(_BLANK_RUN_RE.finditer(text))
    if not runs:
        return text
    masked = _BLANK_RUN_RE.sub(MASK_SENTINEL, text)
    query = FillMaskQuery(
        text=masked,
        top_k=top_k,
        slot_hints=tuple(m.group() for m in runs),
    )
    try:
        result = backend.fill_mask(query)
    except BackendError as exc:
        warnings.warn(f"fill_blanks backend failure, text left unchanged: {exc}")
        return text

    chosen: list[str | None] = []
    for candidates in result.masks:
        pick = None
        for candidate in candidates[:top_k]:
            if classify_prediction(candidate.token)[0]:
                pick = candidate.token
                break
        chosen.append(pick)

    out = text
    for m, pick in zip(reversed(runs), reversed(chosen)):
        if pick is not None:
            out = out[: m.start()] + pick + out[m.end() :]
    return out
