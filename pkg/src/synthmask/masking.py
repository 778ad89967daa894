"""Mask eligibility and mask-plan construction.

Eligibility encodes the preservation principles as set exclusions:
annotated entities, structure headers, special patterns, punctuation,
PHI placeholders, and non-private numbers are frozen; privacy tokens
are forced into every plan; everything else is eligible.

Sampling is nested-prefix: one deterministic permutation of the pool per
(strategy, seed), with ratio r taking the first floor(r*|pool|+0.5)
entries. Sweeping the ratio therefore grows the masked set monotonically,
and plans are reproducible across platforms and library versions (the
permutation comes from a keyed hash, not a PRNG stream).
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from hashlib import blake2b
from typing import Iterable, Sequence

from sklearn.base import BaseEstimator, TransformerMixin

from .features import POS_GROUPS, FeaturizedChunk, FeaturizedLetter, TokenRecord


def _hash64(*parts) -> int:
    h = blake2b(digest_size=8)
    for part in parts:
        h.update(str(part).encode("utf-8"))
        h.update(b"\x1f")
    return int.from_bytes(h.digest(), "big")


def derive_seed(corpus_seed: int, note_id: str, chunk_index: int) -> int:
    """Per-chunk seed: corpus seed XOR hash of (note_id, chunk_index)."""
    return (corpus_seed ^ _hash64(note_id, chunk_index)) & (2**64 - 1)


def _permutation(pool: Sequence[int], seed: int) -> list[int]:
    return sorted(pool, key=lambda i: (blake2b(f"{seed}:{i}".encode(), digest_size=8).digest(), i))


@dataclass(frozen=True)
class EligibilitySet:
    eligible: tuple[int, ...]
    forced: tuple[int, ...]
    frozen: tuple[int, ...]


@dataclass(frozen=True)
class StrategyFilter:
    """Pool filter for one masking strategy component."""

    kind: str  # random | pos | stopwords
    tagset: frozenset[str] = frozenset()
    tagset_name: str = ""

    def pool(self, tokens: Sequence[TokenRecord], eligible: Iterable[int]) -> list[int]:
        if self.kind == "random":
            return list(eligible)
        if self.kind == "pos":
            return [i for i in eligible if tokens[i].pos in self.tagset]
        if self.kind == "stopwords":
            return [i for i in eligible if tokens[i].is_stopword]
        raise ValueError(f"unknown strategy kind {self.kind!r}")

    def label(self) -> str:
        if self.kind == "pos":
            return f"pos:{self.tagset_name}"
        return self.kind


@dataclass(frozen=True)
class MaskPlan:
    strategy: str
    requested_ratio: float | tuple[float, ...]
    seed: int
    masked: tuple[int, ...]
    eligible_ratio: float
    actual_ratio: float
    note: str = ""


def compute_eligibility(tokens: Sequence[TokenRecord]) -> EligibilitySet:
    """Partition token indices into frozen / forced / eligible."""
    frozen = []
    forced = []
    eligible = []
    for tok in tokens:
        preserved = (
            tok.is_entity
            or tok.is_structure
            or tok.is_special
            or tok.is_punct
            or tok.is_phi_placeholder
            or (tok.is_number and not tok.is_privacy)
        )
        if tok.is_privacy and not tok.is_entity:
            forced.append(tok.index)
        elif preserved:
            frozen.append(tok.index)
        else:
            eligible.append(tok.index)
    return EligibilitySet(tuple(eligible), tuple(forced), tuple(frozen))


def mask_count(ratio: float, pool_size: int) -> int:
    """Round-half-up share of the pool."""
    return math.floor(ratio * pool_size + 0.5)


def _ratios(masked: set[int], eligibility: EligibilitySet, n_tokens: int) -> tuple[float, float]:
    eligible = set(eligibility.eligible)
    eligible_ratio = len(masked & eligible) / len(eligible) if eligible else 0.0
    return eligible_ratio, len(masked) / n_tokens


def plan_mask(
    tokens: Sequence[TokenRecord],
    eligibility: EligibilitySet,
    strategy: StrategyFilter,
    ratio: float,
    seed: int,
) -> MaskPlan:
    """Draw floor(ratio*|pool|+0.5) indices from the strategy's pool, plus all forced."""
    if not 0.0 <= ratio <= 1.0:
        raise ValueError(f"ratio must be in [0, 1], got {ratio}")
    if not tokens:
        raise ValueError("plan_mask on an empty token list")
    pool = strategy.pool(tokens, eligibility.eligible)
    note = ""
    if not pool and ratio > 0:
        note = "degenerate pool"
    k = mask_count(ratio, len(pool))
    drawn = _permutation(pool, seed)[:k]
    masked = set(drawn) | set(eligibility.forced)
    eligible_ratio, actual_ratio = _ratios(masked, eligibility, len(tokens))
    return MaskPlan(
        strategy=f"{strategy.label()}:{ratio:g}",
        requested_ratio=ratio,
        seed=seed,
        masked=tuple(sorted(masked)),
        eligible_ratio=eligible_ratio,
        actual_ratio=actual_ratio,
        note=note,
    )


def plan_hybrid(
    tokens: Sequence[TokenRecord],
    eligibility: EligibilitySet,
    components: Sequence[tuple[StrategyFilter, float]],
    seed: int,
) -> MaskPlan:
    """Union of per-component draws; overlapping picks count once.

    Component i draws with seed XOR i, so single-component hybrids are
    identical to plan_mask with the same seed.
    """
    if not components:
        raise ValueError("hybrid strategy needs at least one component")
    masked: set[int] = set(eligibility.forced)
    labels = []
    for idx, (strategy, ratio) in enumerate(components):
        part = plan_mask(tokens, eligibility, strategy, ratio, seed ^ idx)
        masked.update(part.masked)
        labels.append(f"{strategy.label()}:{ratio:g}")
    eligible_ratio, actual_ratio = _ratios(masked, eligibility, len(tokens))
    return MaskPlan(
        strategy="hybrid:(" + ",".join(labels) + ")" if len(components) > 1 else labels[0],
        requested_ratio=tuple(r for _, r in components),
        seed=seed,
        masked=tuple(sorted(masked)),
        eligible_ratio=eligible_ratio,
        actual_ratio=actual_ratio,
    )


def plan_for(
    tokens: Sequence[TokenRecord],
    eligibility: EligibilitySet,
    components: Sequence[tuple[StrategyFilter, float]],
    seed: int,
) -> MaskPlan:
    if len(components) == 1:
        return plan_mask(tokens, eligibility, components[0][0], components[0][1], seed)
    return plan_hybrid(tokens, eligibility, components, seed)


def measure_ratios(plan: MaskPlan, tokens: Sequence[TokenRecord]) -> tuple[float, float]:
    """Recompute (eligible_ratio, actual_ratio) from the sets; never trust stored values."""
    if not tokens:
        raise ValueError("measure_ratios on zero tokens (empty chunk upstream)")
    eligibility = compute_eligibility(tokens)
    return _ratios(set(plan.masked), eligibility, len(tokens))


# --- strategy spec grammar -------------------------------------------------
#
#   random:0.4    pos:noun:0.8    stopwords:0.6
#   hybrid:(pos:noun:0.5,stopwords:0.5)
#
# and, for sweeps, a ratio range "0.0..1.0:0.1" in place of the ratio.

_SWEEP_RE = re.compile(
    r":(?P<lo>\d+(?:\.\d+)?)\.\.(?P<hi>\d+(?:\.\d+)?):(?P<step>\d+(?:\.\d+)?)$"
)


def _parse_ratio(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise ValueError(f"bad ratio {text!r} in strategy spec") from None
    if not 0.0 <= value <= 1.0:
        raise ValueError(f"ratio {value} outside [0, 1]")
    return value


def _parse_component(text: str) -> tuple[StrategyFilter, float]:
    parts = text.strip().split(":")
    if parts[0] == "random" and len(parts) == 2:
        return StrategyFilter("random"), _parse_ratio(parts[1])
    if parts[0] == "stopwords" and len(parts) == 2:
        return StrategyFilter("stopwords"), _parse_ratio(parts[1])
    if parts[0] == "pos" and len(parts) == 3:
        name = parts[1].lower()
        tagset = POS_GROUPS.get(name)
        if tagset is None:
            tagset = frozenset({name.upper()})
        return StrategyFilter("pos", tagset=tagset, tagset_name=name), _parse_ratio(parts[2])
    raise ValueError(f"cannot parse strategy component {text!r}")


def parse_strategy(spec: str) -> tuple[tuple[StrategyFilter, float], ...]:
    """Parse a strategy spec string into (filter, ratio) components."""
    spec = spec.strip()
    if spec.startswith("hybrid:"):
        inner = spec[len("hybrid:") :].strip()
        if not (inner.startswith("(") and inner.endswith(")")):
            raise ValueError(f"hybrid spec needs parentheses: {spec!r}")
        items = [item for item in inner[1:-1].split(",") if item.strip()]
        if not items:
            raise ValueError("empty hybrid strategy")
        return tuple(_parse_component(item) for item in items)
    return (_parse_component(spec),)


def expand_strategy_sweep(spec: str) -> list[str]:
    """Expand a sweep ratio ("a..b:step") into concrete spec strings.

    A plain spec expands to itself. Sweeps apply to simple strategies only.
    """
    spec = spec.strip()
    if spec.startswith("hybrid:"):
        parse_strategy(spec)  # validate
        return [spec]
    m = _SWEEP_RE.search(spec)
    if not m:
        parse_strategy(spec)
        return [spec]
    head = spec[: m.start()]
    lo, hi, step = (float(m.group(g)) for g in ("lo", "hi", "step"))
    if step <= 0 or hi < lo:
        raise ValueError(f"bad sweep range in {spec!r}")
    out = []
    n_steps = int(round((hi - lo) / step))
    for idx in range(n_steps + 1):
        ratio = round(lo + idx * step, 10)
        if ratio > hi + 1e-9:
            break
        out.append(f"{head}:{ratio:g}")
    for item in out:
        parse_strategy(item)
    return out


@dataclass(frozen=True)
class PlannedChunk:
    chunk: FeaturizedChunk
    eligibility: EligibilitySet
    plan: MaskPlan


@dataclass(frozen=True)
class PlannedLetter:
    note_id: str
    text: str
    chunks: tuple[PlannedChunk, ...]
    strategy: str


class MaskPlanner(BaseEstimator, TransformerMixin):
    """Builds mask plans for featurized letters.

    Parameters
    ----------
    strategy : str
        Strategy spec string (see the grammar above).
    seed : int
        Corpus seed; each chunk derives its own seed from it.
    """

    def __init__(self, strategy="random:0.4", seed=0):
        self.strategy = strategy
        self.seed = seed

    def fit(self, X, y=None):
        parse_strategy(self.strategy)
        return self

    def transform(self, X):
        components = parse_strategy(self.strategy)
        out = []
        for letter in X:
            planned = []
            for chunk in letter.chunks:
                eligibility = compute_eligibility(chunk.tokens)
                seed = derive_seed(self.seed, letter.note_id, chunk.chunk_index)
                plan = plan_for(chunk.tokens, eligibility, components, seed)
                planned.append(PlannedChunk(chunk=chunk, eligibility=eligibility, plan=plan))
            out.append(
                PlannedLetter(
                    note_id=letter.note_id,
                    text=letter.text,
                    chunks=tuple(planned),
                    strategy=self.strategy,
                )
            )
        return out
