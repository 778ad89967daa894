"""Deterministic rule-based sentence segmentation.

Boundaries fall after ``.``, ``?``, ``!`` followed by whitespace and an
uppercase letter or digit, at blank lines, and around structure-header
lines (which are always their own sentence). An abbreviation guard list
suppresses splits after forms like "Dr." or dosage abbreviations.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable

from .features import _STRUCTURE_RE

# Entries are lowercased with trailing dots stripped; interior dots stay
# ("e.g" guards "e.g."). Clinical dosage abbreviations are deliberately
# not in the default list; callers with dosage-heavy text pass their own.
DEFAULT_ABBREVIATIONS = frozenset(
    {"dr", "mr", "mrs", "ms", "prof", "st", "jr", "sr", "vs", "e.g", "i.e", "fig", "dept", "approx"}
)

_TERMINATOR_RE = re.compile(r"[.?!]+")
_BLANK_LINE_RE = re.compile(r"\n[ \t]*\n")
_WORD_BEFORE_RE = re.compile(r"[A-Za-z][A-Za-z.']*$")


@dataclass(frozen=True)
class SentenceSpan:
    """A trimmed sentence slice: [start, end) into the letter text."""

    start: int
    end: int
    text: str


def _normalize_guard(guard: Iterable[str]) -> frozenset[str]:
    return frozenset(entry.lower().rstrip(".") for entry in guard)


def split_sentences(text: str, guard: Iterable[str] | None = None) -> list[SentenceSpan]:
    """Segment a letter into ordered, non-overlapping sentence spans.

    The spans cover every non-whitespace character of the input; empty
    text yields an empty list.
    """
    if not text.strip():
        return []
    guard_set = DEFAULT_ABBREVIATIONS if guard is None else _normalize_guard(guard)

    cuts: set[int] = set()

    for m in _BLANK_LINE_RE.finditer(text):
        cuts.add(m.start())

    # structure headers own their line: cut before and after it
    for m in _STRUCTURE_RE.finditer(text):
        line_start = text.rfind("\n", 0, m.start()) + 1
        line_end = text.find("\n", m.end())
        cuts.add(line_start)
        if line_end != -1:
            cuts.add(line_end)

    for m in _TERMINATOR_RE.finditer(text):
        after = m.end()
        j = after
        while j < len(text) and text[j].isspace():
            j += 1
        if j == after or j >= len(text):
            continue
        if not (text[j].isupper() or text[j].isdigit()):
            continue
        if text[m.end() - 1] == ".":
            word = _WORD_BEFORE_RE.search(text, 0, m.start())
            if word and word.group().lower().rstrip(".") in guard_set:
                continue
        cuts.add(after)

    spans: list[SentenceSpan] = []
    positions = sorted(cuts | {0, len(text)})
    for seg_start, seg_end in zip(positions, positions[1:]):
        segment = text[seg_start:seg_end]
        stripped = segment.strip()
        if not stripped:
            continue
        lead = len(segment) - len(segment.lstrip())
        start = seg_start + lead
        spans.append(SentenceSpan(start=start, end=start + len(stripped), text=stripped))
    return spans
