"""SMOG, Flesch Reading Ease, and Flesch-Kincaid Grade Level.

Syllables come from a vowel-group heuristic with a silent-e rule and a
one-syllable floor; words are the tokenizer's tokens that contain at
least one alphanumeric character (so numbers count as one-syllable
words and detached punctuation does not count at all).
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

from ..features import tokenize_words
from ..sentences import split_sentences

_VOWEL_GROUP_RE = re.compile(r"[aeiouy]+")


@dataclass(frozen=True)
class ReadabilityScores:
    smog: float | None
    flesch_reading_ease: float | None
    fk_grade: float | None


def count_syllables(word: str) -> int:
    letters = "".join(ch for ch in word.lower() if ch.isalpha())
    if not letters:
        return 1 if any(ch.isalnum() for ch in word) else 0
    groups = len(_VOWEL_GROUP_RE.findall(letters))
    if groups > 1 and letters.endswith("e") and not letters.endswith("le"):
        groups -= 1
    return max(groups, 1)


def readability_suite(text: str) -> ReadabilityScores:
    """All three scores, or nulls when there are no words or sentences."""
    words = [t.text for t in tokenize_words(text) if any(ch.isalnum() for ch in t.text)]
    n_sentences = len(split_sentences(text))
    if not words or n_sentences == 0:
        return ReadabilityScores(None, None, None)
    n_words = len(words)
    syllables = sum(count_syllables(w) for w in words)
    polysyllables = sum(1 for w in words if count_syllables(w) >= 3)

    words_per_sentence = n_words / n_sentences
    syllables_per_word = syllables / n_words
    fre = 206.835 - 1.015 * words_per_sentence - 84.6 * syllables_per_word
    fkg = 0.39 * words_per_sentence + 11.8 * syllables_per_word - 15.59
    smog = 1.0430 * math.sqrt(polysyllables * 30 / n_sentences) + 3.1291
    return ReadabilityScores(smog=smog, flesch_reading_ease=fre, fk_grade=fkg)
