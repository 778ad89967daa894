"""Word tokenization and token-level feature labelling.

Every token that later enters mask planning carries the flags computed
here: document structure, annotated/recognized entities, privacy hits,
special clinical patterns, stopwords, punctuation, numbers, and PHI
placeholders (runs of three or more underscores).

Feature spans are character intervals over the *letter* text; tokens are
labelled purely by character overlap, so moving a feature span moves
exactly the flags of the tokens it covers.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from functools import lru_cache
from importlib import resources
from typing import Callable, Iterable, Sequence

from sklearn.base import BaseEstimator, TransformerMixin

MASK_SENTINEL = "[MASK]"

# Punctuation that detaches into single-char tokens at word boundaries.
# Slashes and hyphens intentionally stay attached ("w/", "COVID-19").
DETACH_PUNCT = frozenset('.,:;!?()[]{}"\'')

COARSE_POS_TAGS = (
    "NOUN", "PROPN", "VERB", "AUX", "ADJ", "ADV",
    "ADP", "DET", "PRON", "NUM", "PUNCT", "OTHER",
)

# Named tagsets for the masking strategies: "nouns" include proper nouns,
# "verbs" include auxiliaries.
POS_GROUPS = {
    "noun": frozenset({"NOUN", "PROPN"}),
    "verb": frozenset({"VERB", "AUX"}),
    "adj": frozenset({"ADJ"}),
    "adv": frozenset({"ADV"}),
}

_PTB_COARSE = {
    "NN": "NOUN", "NNS": "NOUN", "NNP": "PROPN", "NNPS": "PROPN",
    "VB": "VERB", "VBD": "VERB", "VBG": "VERB", "VBN": "VERB",
    "VBP": "VERB", "VBZ": "VERB", "MD": "AUX",
    "JJ": "ADJ", "JJR": "ADJ", "JJS": "ADJ",
    "RB": "ADV", "RBR": "ADV", "RBS": "ADV",
    "IN": "ADP", "DT": "DET",
    "PRP": "PRON", "PRP$": "PRON", "WP": "PRON", "WP$": "PRON",
    "CD": "NUM",
}


def coarse_pos(tag: str) -> str:
    """Map a UD or PTB tag onto the coarse tagset used by mask planning."""
    tag = tag.upper()
    if tag in COARSE_POS_TAGS:
        return tag
    return _PTB_COARSE.get(tag, "OTHER")


@dataclass(frozen=True)
class TokenRecord:
    """A word token with its chunk position, letter offsets, and feature flags.

    Flag compatibility: several flags may co-occur (an annotated entity
    can also be a recognized medical term), with one normalization:
    ``is_privacy`` is suppressed on tokens that are punctuation, PHI
    placeholders, structure, or special patterns, because those
    preservation rules outrank the mask-the-privacy rule.
    """

    index: int
    text: str
    start: int
    end: int
    is_structure: bool = False
    is_entity: bool = False
    is_privacy: bool = False
    is_special: bool = False
    is_stopword: bool = False
    is_punct: bool = False
    is_number: bool = False
    is_phi_placeholder: bool = False
    pos: str = "UNK"


@dataclass(frozen=True)
class PrivacySpan:
    start: int
    end: int
    kind: str  # PERSON, DATE, LOC, PHONE, POSTCODE, EMAIL


@dataclass(frozen=True)
class FeatureSpanSet:
    """All feature intervals detected over one letter."""

    structure: tuple[tuple[int, int], ...] = ()
    privacy: tuple[PrivacySpan, ...] = ()
    medterm: tuple[tuple[int, int], ...] = ()
    special: tuple[tuple[int, int], ...] = ()


_NUMBER_RE = re.compile(r"^\d+([.,]\d+)?$")
_PHI_RUN_RE = re.compile(r"_{3,}")
_FIELD_RE = re.compile(r"\S+")

# A line (or line prefix) that starts with a capital and reaches a colon
# within 61 characters is a structure header; the cap keeps a colon in
# running prose from swallowing the paragraph.
_STRUCTURE_RE = re.compile(r"^[A-Z][A-Za-z0-9 ()/\-]{0,60}:", re.MULTILINE)

_UNIT = r"(?:mg|mL|mcg|g|units)"
_NUM = r"\d+(?:\.\d+)?"
_SPECIAL_RES = (
    re.compile(rf"[<>^]\s?{_NUM}\s?{_UNIT}\b", re.IGNORECASE),
    re.compile(rf"{_NUM}\s?{_UNIT}(?:\s?/\s?{_NUM}\s?{_UNIT})?\b", re.IGNORECASE),
    re.compile(r"#\*?\d+"),
    re.compile(r"\b(?:b\.i\.d\.?|t\.i\.d\.?|q\.d\.?|p\.r\.n\.?)", re.IGNORECASE),
)

_MONTH = (
    r"(?:January|February|March|April|May|June|July|August|September|"
    r"October|November|December|Jan|Feb|Mar|Apr|Jun|Jul|Aug|Sept|Sep|Oct|Nov|Dec)"
)
_PRIVACY_RES = (
    ("EMAIL", re.compile(r"\S+@\S+\.\S+")),
    ("POSTCODE", re.compile(r"\b[A-Z]{1,2}\d[A-Z\d]? ?\d[A-Z]{2}\b")),
    ("DATE", re.compile(r"\b\d{1,2}[/-]\d{1,2}[/-]\d{2,4}\b")),
    ("DATE", re.compile(rf"\b{_MONTH}\.?\s+\d{{1,2}}(?:st|nd|rd|th)?,?\s+\d{{2,4}}\b")),
    ("DATE", re.compile(rf"\b\d{{1,2}}\s+{_MONTH}\.?,?\s+\d{{2,4}}\b")),
    ("PHONE", re.compile(r"\+\d{1,3}[-. ]?\(?\d{2,5}\)?[-. ]?\d{3,4}[-. ]?\d{2,4}\b")),
    ("PHONE", re.compile(r"\(?\b\d{3}\)?[-. ]\d{3}[-. ]\d{4}\b")),
    ("PHONE", re.compile(r"\b0\d{2,4}[ -]\d{3,4}[ -]?\d{3,4}\b")),
    ("PHONE", re.compile(r"\b\d{10,11}\b")),
)


@lru_cache(maxsize=1)
def load_stopwords() -> frozenset[str]:
    """The bundled 179-word English stopword list, lowercased."""
    data = resources.files("synthmask.data").joinpath("stopwords.txt").read_text("utf-8")
    return frozenset(line.strip() for line in data.splitlines() if line.strip())


def _merge_intervals(spans: Iterable[tuple[int, int]]) -> tuple[tuple[int, int], ...]:
    merged: list[list[int]] = []
    for start, end in sorted(spans):
        if merged and start <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], end)
        else:
            merged.append([start, end])
    return tuple((s, e) for s, e in merged)


def detect_structure(letter_text: str) -> tuple[tuple[int, int], ...]:
    """Header spans: the header words and their colon, one per matching line."""
    return tuple(m.span() for m in _STRUCTURE_RE.finditer(letter_text))


def detect_special_patterns(letter_text: str) -> tuple[tuple[int, int], ...]:
    """Dosage, comparator, count-marker, and schedule-notation spans.

    Overlapping hits (a comparator necessarily contains a dosage) are
    merged into maximal intervals.
    """
    hits: list[tuple[int, int]] = []
    for pattern in _SPECIAL_RES:
        hits.extend(m.span() for m in pattern.finditer(letter_text))
    return _merge_intervals(hits)


def detect_privacy(
    letter_text: str,
    ner_spans: Iterable[tuple[int, int, str]] = (),
    extra_patterns: Iterable[tuple[str, str]] = (),
) -> tuple[PrivacySpan, ...]:
    """Union of regex hits and model NER spans, overlaps merged.

    ``ner_spans`` come from the prediction backend's annotate layer
    (PERSON/DATE/LOC); when no backend is configured the rule hits still
    apply. The shipped regex inventory is a documented starting set;
    ``extra_patterns`` takes additional (kind, regex) pairs. On overlap,
    the span starting first (longest at a tie) keeps its kind.
    """
    patterns = list(_PRIVACY_RES) + [(k, re.compile(p)) for k, p in extra_patterns]
    hits: list[PrivacySpan] = []
    for kind, pattern in patterns:
        hits.extend(PrivacySpan(m.start(), m.end(), kind) for m in pattern.finditer(letter_text))
    for start, end, label in ner_spans:
        hits.append(PrivacySpan(int(start), int(end), str(label).upper()))

    hits.sort(key=lambda s: (s.start, -s.end))
    merged: list[PrivacySpan] = []
    for span in hits:
        if merged and span.start < merged[-1].end:
            if span.end > merged[-1].end:
                merged[-1] = replace(merged[-1], end=span.end)
        else:
            merged.append(span)
    return tuple(merged)


def _overlaps(start: int, end: int, spans: Iterable[tuple[int, int]]) -> bool:
    return any(start < b and a < end for a, b in spans)


def tokenize_words(text: str, base_offset: int = 0) -> list[TokenRecord]:
    """Split text into word tokens with exact character offsets.

    Whitespace separates fields; within a field, `[MASK]` sentinels and
    runs of >=3 underscores are atomic, and leading/trailing punctuation
    detaches into single-char tokens, except where the character sits
    inside a special-pattern span ("b.i.d." keeps its dots), while
    interior punctuation stays attached ("w/", "0.4", "don't").
    """
    special = detect_special_patterns(text)
    tokens: list[TokenRecord] = []

    def emit(seg_start: int, seg_end: int) -> None:
        tokens.append(
            TokenRecord(
                index=len(tokens),
                text=text[seg_start:seg_end],
                start=base_offset + seg_start,
                end=base_offset + seg_end,
            )
        )

    def detachable(pos: int) -> bool:
        return text[pos] in DETACH_PUNCT and not _overlaps(pos, pos + 1, special)

    def emit_segment(seg_start: int, seg_end: int) -> None:
        # strip detachable punctuation off both ends, then emit the core
        left = seg_start
        while left < seg_end and detachable(left):
            emit(left, left + 1)
            left += 1
        right = seg_end
        trailing: list[int] = []
        while right > left and detachable(right - 1):
            trailing.append(right - 1)
            right -= 1
        if right > left:
            emit(left, right)
        for pos in reversed(trailing):
            emit(pos, pos + 1)

    for m in _FIELD_RE.finditer(text):
        cursor = m.start()
        atoms = [
            (a.start(), a.end())
            for a in re.finditer(rf"\[MASK\]|_{{3,}}", text[m.start() : m.end()])
        ]
        for rel_start, rel_end in atoms:
            a_start, a_end = m.start() + rel_start, m.start() + rel_end
            if a_start > cursor:
                emit_segment(cursor, a_start)
            emit(a_start, a_end)
            cursor = a_end
        if cursor < m.end():
            emit_segment(cursor, m.end())
    return tokens


def _is_punct_text(text: str) -> bool:
    return bool(text) and not any(ch.isalnum() for ch in text)


def label_tokens(
    tokens: Sequence[TokenRecord],
    entity_spans: Iterable[tuple[int, int]] = (),
    feature_spans: FeatureSpanSet | None = None,
    pos_tags: Iterable[tuple[int, int, str]] = (),
    stopword_set: frozenset[str] | None = None,
) -> list[TokenRecord]:
    """Set every flag by character overlap with the feature spans.

    ``entity_spans`` are the annotated entities; medterm spans from the
    feature set also count as entities. POS tags are joined by overlap
    too, so a misaligned tag list degrades to "UNK" instead of failing.
    """
    feats = feature_spans or FeatureSpanSet()
    stopwords = load_stopwords() if stopword_set is None else stopword_set
    entity_ivs = [(int(s), int(e)) for s, e in entity_spans]
    entity_ivs += list(feats.medterm)
    privacy_ivs = [(p.start, p.end) for p in feats.privacy]
    pos_ivs = [(int(s), int(e), coarse_pos(tag)) for s, e, tag in pos_tags]

    labelled = []
    for tok in tokens:
        is_phi = _PHI_RUN_RE.fullmatch(tok.text) is not None
        is_punct = _is_punct_text(tok.text) and not is_phi
        is_structure = _overlaps(tok.start, tok.end, feats.structure)
        is_special = _overlaps(tok.start, tok.end, feats.special)
        is_entity = _overlaps(tok.start, tok.end, entity_ivs)
        is_privacy = (
            _overlaps(tok.start, tok.end, privacy_ivs)
            and not (is_punct or is_phi or is_structure or is_special)
        )
        pos = "UNK"
        for s, e, tag in pos_ivs:
            if tok.start < e and s < tok.end:
                pos = tag
                break
        labelled.append(
            replace(
                tok,
                is_structure=is_structure,
                is_entity=is_entity,
                is_privacy=is_privacy,
                is_special=is_special,
                is_stopword=tok.text.lower() in stopwords,
                is_punct=is_punct,
                is_number=_NUMBER_RE.fullmatch(tok.text) is not None,
                is_phi_placeholder=is_phi,
                pos=pos,
            )
        )
    return labelled


def extract_features(letter_text: str, backend=None) -> FeatureSpanSet:
    """Run all detectors over a letter, pulling NER layers from the backend when present.

    Without a backend the rule-based features still apply; model layers
    (privacy NER, medterm) come back empty.
    """
    ner_spans: list[tuple[int, int, str]] = []
    medterm: list[tuple[int, int]] = []
    if backend is not None:
        layers = [l for l in ("ner", "medterm") if backend.supports_layer(l)]
        if layers:
            result = backend.annotate(letter_text, layers)
            for span in result.spans:
                if span.layer == "ner":
                    ner_spans.append((span.start, span.end, span.label))
                elif span.layer == "medterm":
                    medterm.append((span.start, span.end))
    return FeatureSpanSet(
        structure=detect_structure(letter_text),
        privacy=detect_privacy(letter_text, ner_spans),
        medterm=_merge_intervals(medterm),
        special=detect_special_patterns(letter_text),
    )


def pos_tags_for(letter_text: str, backend=None) -> tuple[tuple[int, int, str], ...]:
    """POS spans from the backend's pos layer; empty (all-UNK) without one."""
    if backend is None or not backend.supports_layer("pos"):
        return ()
    result = backend.annotate(letter_text, ["pos"])
    return tuple((s.start, s.end, s.label) for s in result.spans if s.layer == "pos")


def token_count(text: str) -> int:
    """Word-token count under the featurizer tokenizer (the chunker's budget unit)."""
    return len(tokenize_words(text))


@dataclass(frozen=True)
class FeaturizedChunk:
    """One chunk with its fully labelled tokens (offsets in letter coordinates)."""

    note_id: str
    chunk_index: int
    start: int
    end: int
    text: str
    tokens: tuple[TokenRecord, ...]


@dataclass(frozen=True)
class FeaturizedLetter:
    note_id: str
    text: str
    chunks: tuple[FeaturizedChunk, ...]


class TokenFeaturizer(BaseEstimator, TransformerMixin):
    """Labels chunk tokens with the mask-eligibility feature set.

    Accepts the chunked letters produced by :class:`synthmask.chunking.Chunker`
    and returns :class:`FeaturizedLetter` records. Stateless; ``fit`` only
    validates parameters.

    Parameters
    ----------
    backend : prediction backend or None
        Source for POS tags and model NER/medterm spans. None keeps the
        rule-based features and tags everything "UNK".
    stopwords : frozenset[str] or None
        Override for the bundled stopword list.
    """

    def __init__(self, backend=None, stopwords=None):
        self.backend = backend
        self.stopwords = stopwords

    def fit(self, X, y=None):
        return self

    def transform(self, X):
        out = []
        for chunked in X:
            letter = chunked.letter
            feats = extract_features(letter.text, self.backend)
            tags = pos_tags_for(letter.text, self.backend)
            entity_ivs = [(e.start, e.end) for e in chunked.entities]
            chunks = []
            for chunk in chunked.chunks:
                tokens = tokenize_words(chunk.text, base_offset=chunk.start)
                tokens = label_tokens(
                    tokens,
                    entity_spans=entity_ivs,
                    feature_spans=feats,
                    pos_tags=tags,
                    stopword_set=self.stopwords,
                )
                chunks.append(
                    FeaturizedChunk(
                        note_id=chunk.note_id,
                        chunk_index=chunk.chunk_index,
                        start=chunk.start,
                        end=chunk.end,
                        text=chunk.text,
                        tokens=tuple(tokens),
                    )
                )
            out.append(
                FeaturizedLetter(note_id=letter.note_id, text=letter.text, chunks=tuple(chunks))
            )
        return out
