"""Load and join the letters and annotations files.

The corpus is two CSV files (RFC-4180 quoting, UTF-8):

* ``letters.csv`` with header ``note_id,text``
* ``annotations.csv`` with header ``note_id,start,end,concept_id``

Offsets count Unicode characters, not bytes, so slicing annotated spans
out of the letter text stays well-defined for non-ASCII input.
"""

from __future__ import annotations

import csv
import io
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, TextIO

from .errors import DuplicateKeyError, OrphanAnnotationWarning, SchemaError, SpanValidationError

LETTER_COLUMNS = ("note_id", "text")
ANNOTATION_COLUMNS = ("note_id", "start", "end", "concept_id")


@dataclass(frozen=True)
class LetterRecord:
    """One clinical letter, keyed by its unique note_id."""

    note_id: str
    text: str


@dataclass(frozen=True, order=True)
class EntitySpan:
    """A manually annotated entity: [start, end) character offsets into the letter."""

    note_id: str
    start: int
    end: int
    concept_id: str

    def surface(self, text: str) -> str:
        return text[self.start : self.end]


@dataclass(frozen=True)
class AnnotatedLetter:
    """A letter joined with its entity spans, sorted by start offset."""

    letter: LetterRecord
    entities: tuple[EntitySpan, ...] = field(default_factory=tuple)

    @property
    def note_id(self) -> str:
        return self.letter.note_id

    @property
    def text(self) -> str:
        return self.letter.text


def _open_csv(source: str | Path | TextIO) -> TextIO:
    if isinstance(source, (str, Path)):
        return open(source, newline="", encoding="utf-8")
    return source


def _reader(source: str | Path | TextIO, required: tuple[str, ...]) -> tuple[csv.DictReader, TextIO]:
    handle = _open_csv(source)
    reader = csv.DictReader(handle)
    if reader.fieldnames is None:
        raise SchemaError(f"empty input, expected header {','.join(required)}")
    missing = [col for col in required if col not in reader.fieldnames]
    if missing:
        raise SchemaError(f"missing column(s): {', '.join(missing)}")
    return reader, handle


def load_letters(source: str | Path | TextIO) -> list[LetterRecord]:
    """Read letters.csv. Text is preserved byte-for-byte, embedded newlines included.

    Raises SchemaError for a bad header and DuplicateKeyError when a
    note_id repeats.
    """
    reader, handle = _reader(source, LETTER_COLUMNS)
    close = isinstance(source, (str, Path))
    letters: list[LetterRecord] = []
    seen: set[str] = set()
    try:
        for row_no, row in enumerate(reader, start=2):
            note_id = row["note_id"]
            text = row["text"]
            if note_id is None or note_id == "":
                raise SchemaError(f"row {row_no}: empty note_id")
            if text is None or text == "":
                raise SchemaError(f"row {row_no}: empty text for note_id {note_id!r}")
            if note_id in seen:
                raise DuplicateKeyError(note_id)
            seen.add(note_id)
            letters.append(LetterRecord(note_id=note_id, text=text))
    finally:
        if close:
            handle.close()
    return letters


def load_annotations(source: str | Path | TextIO) -> list[EntitySpan]:
    """Read annotations.csv in file order.

    Offsets must parse as non-negative integers; a bad cell raises
    SchemaError naming the row. Span semantics (start < end, in bounds)
    are checked later, at merge time.
    """
    reader, handle = _reader(source, ANNOTATION_COLUMNS)
    close = isinstance(source, (str, Path))
    spans: list[EntitySpan] = []
    try:
        for row_no, row in enumerate(reader, start=2):
            try:
                start = int(row["start"])
                end = int(row["end"])
            except (TypeError, ValueError):
                raise SchemaError(
                    f"row {row_no}: start/end must be integers, "
                    f"got {row['start']!r}/{row['end']!r}"
                ) from None
            if start < 0 or end < 0:
                raise SchemaError(f"row {row_no}: negative offset {start}/{end}")
            spans.append(
                EntitySpan(note_id=row["note_id"], start=start, end=end, concept_id=row["concept_id"])
            )
    finally:
        if close:
            handle.close()
    return spans


def merge_and_validate(
    letters: Iterable[LetterRecord], annotations: Iterable[EntitySpan]
) -> list[AnnotatedLetter]:
    """Join letters with their spans; sort spans by start offset.

    * A span outside its letter's bounds (or empty, start >= end) is
      collected into a single SpanValidationError listing every offender.
    * An annotation whose note_id has no letter emits an
      OrphanAnnotationWarning and is dropped; the join is not required
      to be total.
    * Overlapping spans are allowed and all preserved.

    The merge is loss-free: accepted spans + orphan warnings + bounds
    violations account for every input annotation.
    """
    letters = list(letters)
    by_id: dict[str, LetterRecord] = {rec.note_id: rec for rec in letters}
    grouped: dict[str, list[EntitySpan]] = {rec.note_id: [] for rec in letters}
    violations: list[tuple[str, int, int, str]] = []

    for span in annotations:
        letter = by_id.get(span.note_id)
        if letter is None:
            warnings.warn(OrphanAnnotationWarning(span))
            continue
        if span.start >= span.end:
            violations.append((span.note_id, span.start, span.end, "empty span"))
            continue
        if span.end > len(letter.text):
            violations.append((span.note_id, span.start, span.end, "out of bounds"))
            continue
        grouped[span.note_id].append(span)

    if violations:
        raise SpanValidationError(violations)

    merged = []
    for rec in letters:
        spans = sorted(grouped[rec.note_id], key=lambda s: (s.start, s.end))
        merged.append(AnnotatedLetter(letter=rec, entities=tuple(spans)))
    return merged


def load_corpus(
    letters_path: str | Path, annotations_path: str | Path
) -> list[AnnotatedLetter]:
    """Convenience: load both files and merge."""
    return merge_and_validate(load_letters(letters_path), load_annotations(annotations_path))


def write_letters(records: Iterable[LetterRecord], target: str | Path | TextIO) -> None:
    """Write records in the letters.csv schema (used for synthetic output)."""
    handle: TextIO
    if isinstance(target, (str, Path)):
        handle = open(target, "w", newline="", encoding="utf-8")
        close = True
    else:
        handle, close = target, False
    try:
        writer = csv.writer(handle)
        writer.writerow(LETTER_COLUMNS)
        for rec in records:
            writer.writerow([rec.note_id, rec.text])
    finally:
        if close:
            handle.close()


def letters_from_string(data: str) -> list[LetterRecord]:
    """Parse letters.csv content given as a string (handy in tests)."""
    return load_letters(io.StringIO(data, newline=""))
