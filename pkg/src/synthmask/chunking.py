"""Variable-length chunking under sentence-count and token budgets.

A chunk accumulates whole sentences until adding the next one would
exceed ``max_lines`` sentences or ``max_tokens`` word tokens; a single
sentence over the token budget is split at word boundaries instead.
Chunk boundaries avoid cutting through annotated entity spans whenever
the budgets allow it, so entity offsets survive chunking.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

from sklearn.base import BaseEstimator, TransformerMixin

from .corpus import AnnotatedLetter, EntitySpan, LetterRecord
from .features import token_count, tokenize_words
from .sentences import SentenceSpan, split_sentences


@dataclass(frozen=True)
class ChunkConfig:
    """Budgets per chunk: sentences (max_lines) and word tokens (max_tokens)."""

    max_lines: int = 40
    max_tokens: int = 256

    def __post_init__(self):
        if self.max_lines < 1:
            raise ValueError(f"max_lines must be >= 1, got {self.max_lines}")
        if self.max_tokens < 8:
            raise ValueError(f"max_tokens must be >= 8, got {self.max_tokens}")


@dataclass(frozen=True)
class Chunk:
    """A contiguous slice of the letter: [start, end) character offsets.

    ``sentences`` is the [first, last) range of contained sentence
    indices; ``piece`` numbers the fragments of an oversize sentence
    (None for whole-sentence chunks).
    """

    note_id: str
    chunk_index: int
    sentences: tuple[int, int]
    piece: int | None
    start: int
    end: int
    token_count: int
    text: str


@dataclass(frozen=True)
class TuningRow:
    max_lines: int
    average_tokens_per_chunk: float
    chunk_count: int


@dataclass(frozen=True)
class TuningReport:
    rows: tuple[TuningRow, ...]
    chosen_max_lines: int


def split_oversize(
    sentence: str,
    max_tokens: int,
    *,
    base_offset: int = 0,
    entity_spans: Iterable[tuple[int, int]] = (),
) -> list[tuple[int, int, int]]:
    """Split one over-budget sentence into (start, end, token_count) pieces.

    Cuts fall at word-token starts, greedily filling each piece to
    max_tokens; concatenating the pieces reproduces the sentence exactly.
    A cut that would land inside an entity moves back to the entity's
    first token when that leaves a non-empty piece.
    """
    tokens = tokenize_words(sentence, base_offset=base_offset)
    assert tokens, "split_oversize called on an empty sentence"
    entities = [(int(s), int(e)) for s, e in entity_spans]

    pieces: list[tuple[int, int, int]] = []
    piece_first = 0  # token index opening the current piece
    n = len(tokens)
    while piece_first < n:
        cut = min(piece_first + max_tokens, n)
        if cut < n:
            gap_lo, gap_hi = tokens[cut - 1].end, tokens[cut].start
            for e_start, e_end in entities:
                if e_start < gap_hi and e_end > gap_lo:
                    first_inside = next(
                        (i for i in range(piece_first, cut) if tokens[i].end > e_start),
                        cut,
                    )
                    if first_inside > piece_first:
                        cut = first_inside
                    break
        char_start = tokens[piece_first].start if piece_first else base_offset
        char_end = tokens[cut].start if cut < n else base_offset + len(sentence)
        pieces.append((char_start, char_end, cut - piece_first))
        piece_first = cut
    return pieces


def build_chunks(
    letter_text: str,
    sentences: Sequence[SentenceSpan],
    config: ChunkConfig,
    *,
    note_id: str = "",
    token_counter: Callable[[str], int] | None = None,
    entity_spans: Iterable[tuple[int, int]] = (),
) -> list[Chunk]:
    """Greedy accumulation of sentences into chunks under both budgets."""
    counter = token_counter or token_count
    counts = [counter(s.text) for s in sentences]
    entities = [(int(s), int(e)) for s, e in entity_spans]

    groups: list[dict] = []  # {"sents": [...]} or {"pieces": (i, [...])}
    cur: list[int] = []

    def close():
        if cur:
            groups.append({"sents": list(cur)})
            cur.clear()

    def bridging_entity(last_idx: int, next_idx: int):
        for e_start, e_end in entities:
            if e_start < sentences[last_idx].end and e_end > sentences[next_idx].start:
                return e_start, e_end
        return None

    i = 0
    while i < len(sentences):
        if counts[i] > config.max_tokens:
            close()
            sent = sentences[i]
            pieces = split_oversize(
                sent.text,
                config.max_tokens,
                base_offset=sent.start,
                entity_spans=entities,
            )
            groups.append({"pieces": (i, pieces)})
            i += 1
            continue
        if not cur:
            cur.append(i)
            i += 1
            continue
        if len(cur) < config.max_lines and sum(counts[j] for j in cur) + counts[i] <= config.max_tokens:
            cur.append(i)
            i += 1
            continue
        # chunk must close before sentence i; keep entities whole if the
        # trailing sentences fit into the next chunk together with i
        entity = bridging_entity(cur[-1], i)
        if entity is not None:
            e_start = entity[0]
            k_pos = next(
                (p for p, j in enumerate(cur) if sentences[j].end > e_start), len(cur)
            )
            moved = cur[k_pos:]
            if 0 < k_pos and moved:
                moved_tokens = sum(counts[j] for j in moved)
                if len(moved) + 1 <= config.max_lines and moved_tokens + counts[i] <= config.max_tokens:
                    del cur[k_pos:]
                    close()
                    cur.extend(moved)
                    continue  # retry sentence i against the moved group
        close()
        cur.append(i)
        i += 1
    close()

    chunks: list[Chunk] = []
    for group in groups:
        if "sents" in group:
            idxs = group["sents"]
            start = sentences[idxs[0]].start
            end = sentences[idxs[-1]].end
            chunks.append(
                Chunk(
                    note_id=note_id,
                    chunk_index=len(chunks),
                    sentences=(idxs[0], idxs[-1] + 1),
                    piece=None,
                    start=start,
                    end=end,
                    token_count=sum(counts[j] for j in idxs),
                    text=letter_text[start:end],
                )
            )
        else:
            sent_idx, pieces = group["pieces"]
            for p, (start, end, n_tokens) in enumerate(pieces):
                chunks.append(
                    Chunk(
                        note_id=note_id,
                        chunk_index=len(chunks),
                        sentences=(sent_idx, sent_idx + 1),
                        piece=p,
                        start=start,
                        end=end,
                        token_count=n_tokens,
                        text=letter_text[start:end],
                    )
                )
    return chunks


def chunk_letter(
    annotated: AnnotatedLetter,
    config: ChunkConfig,
    guard: Iterable[str] | None = None,
) -> list[Chunk]:
    sents = split_sentences(annotated.text, guard=guard)
    return build_chunks(
        annotated.text,
        sents,
        config,
        note_id=annotated.note_id,
        entity_spans=[(e.start, e.end) for e in annotated.entities],
    )


def _corpus_average(corpus: Sequence[AnnotatedLetter], config: ChunkConfig) -> tuple[float, int]:
    """(average tokens per chunk, chunk count); aggregation is sum/count."""
    total_tokens = 0
    total_chunks = 0
    for annotated in corpus:
        for chunk in chunk_letter(annotated, config):
            total_tokens += chunk.token_count
            total_chunks += 1
    if total_chunks == 0:
        raise ValueError("corpus produced no chunks")
    return total_tokens / total_chunks, total_chunks


def tune_max_lines(
    corpus: Sequence[AnnotatedLetter],
    config_base: ChunkConfig | None = None,
    coarse_step: int = 10,
    fine_step: int = 1,
    plateau_epsilon: float = 0.5,
) -> TuningReport:
    """Sweep max_lines until average tokens per chunk stops growing.

    Coarse sweep by ``coarse_step`` until the step-to-step gain drops
    below ``plateau_epsilon``, then a fine sweep inside the interval
    where the plateau was entered; the chosen value is the smallest
    max_lines whose average sits within epsilon of the plateau average.
    """
    if not corpus:
        raise ValueError("tune_max_lines requires a non-empty corpus")
    base = config_base or ChunkConfig()
    if coarse_step < 1 or fine_step < 1:
        raise ValueError("steps must be >= 1")

    cache: dict[int, tuple[float, int]] = {}

    def averages(lines: int) -> tuple[float, int]:
        if lines not in cache:
            cache[lines] = _corpus_average(
                corpus, ChunkConfig(max_lines=lines, max_tokens=base.max_tokens)
            )
        return cache[lines]

    max_sentences = max(len(split_sentences(a.text)) for a in corpus)
    asymptote, _ = averages(max(max_sentences, 1))

    first_avg, _ = averages(coarse_step)
    if asymptote - first_avg <= plateau_epsilon:
        # line budget never binds at the first coarse point
        rows = (TuningRow(coarse_step, *averages(coarse_step)),)
        return TuningReport(rows=rows, chosen_max_lines=coarse_step)

    coarse = [coarse_step]
    while True:
        nxt = coarse[-1] + coarse_step
        coarse.append(nxt)
        gain = averages(nxt)[0] - averages(coarse[-2])[0]
        if gain < plateau_epsilon or nxt > max_sentences + coarse_step:
            break
    plateau_avg = averages(coarse[-1])[0]

    # earliest coarse point already on the plateau
    entered = next(c for c in coarse if plateau_avg - averages(c)[0] <= plateau_epsilon)
    low = entered - coarse_step
    chosen = entered
    probe = max(low + fine_step, 1)
    while probe < entered:
        if plateau_avg - averages(probe)[0] <= plateau_epsilon:
            chosen = probe
            break
        probe += fine_step

    evaluated = sorted(cache)
    rows = tuple(TuningRow(lines, *cache[lines]) for lines in evaluated)
    return TuningReport(rows=rows, chosen_max_lines=chosen)


@dataclass(frozen=True)
class ChunkedLetter:
    letter: LetterRecord
    entities: tuple[EntitySpan, ...]
    sentences: tuple[SentenceSpan, ...]
    chunks: tuple[Chunk, ...]


class Chunker(BaseEstimator, TransformerMixin):
    """Splits annotated letters into sentence spans and budgeted chunks.

    With ``auto_tune=True``, :meth:`fit` runs the max_lines sweep on the
    training corpus and transform uses the chosen value (exposed as
    ``max_lines_`` with the full ``tuning_report_``).
    """

    def __init__(
        self,
        max_lines=40,
        max_tokens=256,
        auto_tune=False,
        coarse_step=10,
        fine_step=1,
        plateau_epsilon=0.5,
    ):
        self.max_lines = max_lines
        self.max_tokens = max_tokens
        self.auto_tune = auto_tune
        self.coarse_step = coarse_step
        self.fine_step = fine_step
        self.plateau_epsilon = plateau_epsilon

    def fit(self, X, y=None):
        if self.auto_tune:
            report = tune_max_lines(
                X,
                ChunkConfig(max_lines=self.max_lines, max_tokens=self.max_tokens),
                coarse_step=self.coarse_step,
                fine_step=self.fine_step,
                plateau_epsilon=self.plateau_epsilon,
            )
            self.tuning_report_ = report
            self.max_lines_ = report.chosen_max_lines
        else:
            self.max_lines_ = self.max_lines
        return self

    def transform(self, X):
        lines = getattr(self, "max_lines_", self.max_lines)
        config = ChunkConfig(max_lines=lines, max_tokens=self.max_tokens)
        out = []
        for annotated in X:
            sents = split_sentences(annotated.text)
            chunks = build_chunks(
                annotated.text,
                sents,
                config,
                note_id=annotated.note_id,
                entity_spans=[(e.start, e.end) for e in annotated.entities],
            )
            out.append(
                ChunkedLetter(
                    letter=annotated.letter,
                    entities=annotated.entities,
                    sentences=tuple(sents),
                    chunks=tuple(chunks),
                )
            )
        return out
