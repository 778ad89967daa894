"""Render masked chunks, infill them through a backend, and reassemble letters.

Substitution is offset surgery on the original letter text: each masked
token's character span is replaced by the predicted word, so whitespace,
punctuation adjacency, and every frozen token survive byte-for-byte.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

from sklearn.base import BaseEstimator, TransformerMixin

from .backends import FillMaskQuery, PredictionBackend
from .corpus import AnnotatedLetter, LetterRecord
from .chunking import Chunker
from .errors import AssemblyError, BackendError
from .features import MASK_SENTINEL, TokenFeaturizer
from .masking import MaskPlanner, PlannedChunk, PlannedLetter

_UNKNOWN_TOKENS = frozenset({"[UNK]", "<unk>", "[unk]", "<UNK>"})


@dataclass(frozen=True)
class MaskedChunk:
    """A chunk rendered with sentinels; slots pair token indices with originals."""

    note_id: str
    chunk_index: int
    masked_text: str
    slots: tuple[tuple[int, str], ...]  # (token_index, original_text)


@dataclass(frozen=True)
class SlotPrediction:
    token_index: int
    original: str
    predicted: str
    score: float
    valid: bool
    invalid_reason: str = ""


@dataclass(frozen=True)
class ChunkPredictions:
    chunk_index: int
    slots: tuple[SlotPrediction, ...]


@dataclass(frozen=True)
class SyntheticLetter:
    note_id: str
    text: str
    chunk_predictions: tuple[ChunkPredictions, ...]
    duration_ms: float

    @property
    def invalid_rate(self) -> float:
        total = sum(len(c.slots) for c in self.chunk_predictions)
        if total == 0:
            return 0.0
        invalid = sum(1 for c in self.chunk_predictions for s in c.slots if not s.valid)
        return invalid / total


def render_masked(planned: PlannedChunk) -> MaskedChunk:
    """Replace each masked token span with the sentinel, in order."""
    chunk = planned.chunk
    masked = set(planned.plan.masked)
    parts: list[str] = []
    slots: list[tuple[int, str]] = []
    cursor = chunk.start
    for tok in chunk.tokens:
        if tok.index in masked:
            parts.append(chunk.text[cursor - chunk.start : tok.start - chunk.start])
            parts.append(MASK_SENTINEL)
            slots.append((tok.index, tok.text))
            cursor = tok.end
    parts.append(chunk.text[cursor - chunk.start :])
    return MaskedChunk(
        note_id=chunk.note_id,
        chunk_index=chunk.chunk_index,
        masked_text="".join(parts),
        slots=tuple(slots),
    )


def classify_prediction(candidate_token: str) -> tuple[bool, str]:
    """(valid, reason). Invalid: empty/whitespace, all punctuation,
    sub-word continuation fragments, or the unknown-token symbol."""
    if not candidate_token or candidate_token.strip() == "":
        return False, "empty"
    if candidate_token in _UNKNOWN_TOKENS:
        return False, "unknown-token"
    if candidate_token.startswith("##"):
        return False, "subword"
    if all(not ch.isalnum() for ch in candidate_token):
        return False, "punctuation"
    return True, ""


def _sample_rank(seed: int, slot: int, n_candidates: int) -> int:
    from hashlib import blake2b

    digest = blake2b(f"sample|{seed}|{slot}".encode(), digest_size=8).digest()
    return int.from_bytes(digest, "big") % n_candidates


def infill_chunk(
    masked: MaskedChunk,
    backend: PredictionBackend,
    top_k: int = 5,
    retry_invalid: int = 0,
    sample_top_k: int = 0,
    sample_seed: int = 0,
) -> ChunkPredictions:
    """Query the backend once for all sentinels and pick per-slot predictions.

    Top-1 greedy by default; with retry_invalid > 0 an invalid top
    candidate falls through to the next valid one within that many
    extra ranks. Invalid picks are kept (and counted), not filtered.
    With sample_top_k > 0 the pick is a seeded draw from the top-k list
    instead of rank 1 (deterministic per seed, off in acceptance runs).
    """
    if not masked.slots:
        return ChunkPredictions(chunk_index=masked.chunk_index, slots=())
    query = FillMaskQuery(
        text=masked.masked_text,
        top_k=max(top_k, retry_invalid + 1, sample_top_k),
        slot_hints=tuple(original for _, original in masked.slots),
    )
    result = backend.fill_mask(query)
    if len(result.masks) != len(masked.slots):
        raise AssemblyError(
            f"chunk {masked.chunk_index}: backend answered {len(result.masks)} "
            f"sentinel(s), expected {len(masked.slots)}"
        )
    slots = []
    for slot_no, ((token_index, original), candidates) in enumerate(
        zip(masked.slots, result.masks)
    ):
        if not candidates:
            # degenerate backend answer; keep token counts intact and flag it
            slots.append(
                SlotPrediction(token_index, original, "[UNK]", 0.0, False, "no-candidates")
            )
            continue
        if sample_top_k > 0:
            rank = _sample_rank(sample_seed, slot_no, min(sample_top_k, len(candidates)))
            pick = candidates[rank]
        else:
            pick = candidates[0]
        valid, reason = classify_prediction(pick.token)
        if not valid and retry_invalid > 0:
            for alternative in candidates[1 : retry_invalid + 1]:
                alt_valid, _ = classify_prediction(alternative.token)
                if alt_valid:
                    pick, valid, reason = alternative, True, ""
                    break
        slots.append(
            SlotPrediction(
                token_index=token_index,
                original=original,
                predicted=pick.token,
                score=pick.score,
                valid=valid,
                invalid_reason=reason,
            )
        )
    return ChunkPredictions(chunk_index=masked.chunk_index, slots=tuple(slots))


def reassemble_letter(
    planned: PlannedLetter, predictions: Sequence[ChunkPredictions], duration_ms: float = 0.0
) -> SyntheticLetter:
    """Splice predictions back into the letter at their token offsets.

    Chunks must all be present; frozen text between and around slots is
    taken verbatim from the original letter.
    """
    by_index = {p.chunk_index: p for p in predictions}
    expected = [c.chunk.chunk_index for c in planned.chunks]
    missing = [i for i in expected if i not in by_index]
    if missing:
        raise AssemblyError(f"letter {planned.note_id}: missing chunk(s) {missing}")

    replacements: list[tuple[int, int, str]] = []
    for planned_chunk in planned.chunks:
        tokens = {t.index: t for t in planned_chunk.chunk.tokens}
        for slot in by_index[planned_chunk.chunk.chunk_index].slots:
            tok = tokens[slot.token_index]
            replacements.append((tok.start, tok.end, slot.predicted))

    text = planned.text
    for start, end, predicted in sorted(replacements, reverse=True):
        text = text[:start] + predicted + text[end:]
    return SyntheticLetter(
        note_id=planned.note_id,
        text=text,
        chunk_predictions=tuple(sorted(by_index.values(), key=lambda p: p.chunk_index)),
        duration_ms=duration_ms,
    )


@dataclass(frozen=True)
class GenerationRecord:
    """One letter's outcome plus the report-row fields."""

    planned: PlannedLetter
    masked_text: str
    synthetic: SyntheticLetter
    requested_ratio: float | tuple[float, ...]
    eligible_ratio: float
    actual_ratio: float

    def report_row(self) -> dict:
        ratio = self.requested_ratio
        return {
            "note_id": self.planned.note_id,
            "strategy": self.planned.strategy,
            "requested_ratio": list(ratio) if isinstance(ratio, tuple) else ratio,
            "eligible_ratio": round(self.eligible_ratio, 6),
            "actual_ratio": round(self.actual_ratio, 6),
            "invalid_rate": round(self.synthetic.invalid_rate, 6),
            "duration_ms": round(self.synthetic.duration_ms, 3),
        }


def render_masked_letter(planned: PlannedLetter) -> str:
    """The whole letter with sentinels in place (the evaluation baseline text)."""
    replacements: list[tuple[int, int, str]] = []
    for planned_chunk in planned.chunks:
        masked = set(planned_chunk.plan.masked)
        for tok in planned_chunk.chunk.tokens:
            if tok.index in masked:
                replacements.append((tok.start, tok.end, MASK_SENTINEL))
    text = planned.text
    for start, end, sentinel in sorted(replacements, reverse=True):
        text = text[:start] + sentinel + text[end:]
    return text


def generate_letter(
    planned: PlannedLetter,
    backend: PredictionBackend,
    top_k: int = 5,
    retry_invalid: int = 0,
    sample_top_k: int = 0,
) -> GenerationRecord:
    started = time.perf_counter()
    predictions = []
    for planned_chunk in planned.chunks:
        masked = render_masked(planned_chunk)
        try:
            predictions.append(
                infill_chunk(
                    masked,
                    backend,
                    top_k=top_k,
                    retry_invalid=retry_invalid,
                    sample_top_k=sample_top_k,
                    sample_seed=planned_chunk.plan.seed,
                )
            )
        except BackendError as exc:
            raise AssemblyError(
                f"letter {planned.note_id}: chunk {planned_chunk.chunk.chunk_index} failed: {exc}"
            ) from exc
    duration_ms = (time.perf_counter() - started) * 1000.0
    synthetic = reassemble_letter(planned, predictions, duration_ms=duration_ms)

    n_tokens = sum(len(c.chunk.tokens) for c in planned.chunks)
    n_eligible = sum(len(c.eligibility.eligible) for c in planned.chunks)
    masked_all = sum(len(c.plan.masked) for c in planned.chunks)
    masked_eligible = sum(
        len(set(c.plan.masked) & set(c.eligibility.eligible)) for c in planned.chunks
    )
    first = planned.chunks[0].plan.requested_ratio if planned.chunks else 0.0
    return GenerationRecord(
        planned=planned,
        masked_text=render_masked_letter(planned),
        synthetic=synthetic,
        requested_ratio=first,
        eligible_ratio=masked_eligible / n_eligible if n_eligible else 0.0,
        actual_ratio=masked_all / n_tokens if n_tokens else 0.0,
    )


def generate_corpus(
    corpus: Sequence[AnnotatedLetter],
    backend: PredictionBackend,
    strategy: str = "random:0.4",
    seed: int = 0,
    max_lines: int = 40,
    max_tokens: int = 256,
    top_k: int = 5,
    retry_invalid: int = 0,
    sample_top_k: int = 0,
    jobs: int = 1,
    featurizer_backend: PredictionBackend | None = None,
) -> list[GenerationRecord]:
    """End-to-end: chunk, featurize, plan, infill, reassemble.

    Letters are independent jobs; chunk order within a letter is
    preserved regardless of parallelism.
    """
    chunker = Chunker(max_lines=max_lines, max_tokens=max_tokens)
    featurizer = TokenFeaturizer(backend=featurizer_backend)
    planner = MaskPlanner(strategy=strategy, seed=seed)
    planned = planner.fit(None).transform(
        featurizer.transform(chunker.fit(corpus).transform(corpus))
    )
    if jobs <= 1:
        return [generate_letter(p, backend, top_k, retry_invalid, sample_top_k) for p in planned]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(
            pool.map(
                lambda p: generate_letter(p, backend, top_k, retry_invalid, sample_top_k), planned
            )
        )


class SyntheticLetterGenerator(BaseEstimator, TransformerMixin):
    """The full pipeline as one transformer: annotated letters in, synthetic letters out.

    ``transform`` returns LetterRecord objects mirroring the input
    schema; the per-letter generation records from the last transform
    are kept on ``records_`` for reporting.
    """

    def __init__(
        self,
        backend=None,
        strategy="random:0.4",
        seed=0,
        max_lines=40,
        max_tokens=256,
        top_k=5,
        retry_invalid=0,
        jobs=1,
    ):
        self.backend = backend
        self.strategy = strategy
        self.seed = seed
        self.max_lines = max_lines
        self.max_tokens = max_tokens
        self.top_k = top_k
        self.retry_invalid = retry_invalid
        self.jobs = jobs

    def fit(self, X, y=None):
        if self.backend is None:
            raise ValueError("SyntheticLetterGenerator needs a prediction backend")
        return self

    def transform(self, X):
        self.fit(X)
        self.records_ = generate_corpus(
            X,
            self.backend,
            strategy=self.strategy,
            seed=self.seed,
            max_lines=self.max_lines,
            max_tokens=self.max_tokens,
            top_k=self.top_k,
            retry_invalid=self.retry_invalid,
            jobs=self.jobs,
        )
        return [
            LetterRecord(note_id=r.planned.note_id, text=r.synthetic.text) for r in self.records_
        ]
