"""Downstream NER harness: silver annotation, splitting, delegated training, scoring.

The comparison protocol holds everything fixed except the training
text: one split of note_ids (seeded), silver labels for the test set
always taken from the original letters, and the backend trains once on
original training text and once on synthetic training text.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from hashlib import blake2b
from pathlib import Path
from typing import Sequence

from .backends import PredictionBackend
from .corpus import LetterRecord
from .errors import CapabilityError

Span = tuple[int, int, str]


@dataclass(frozen=True)
class SilverDocument:
    note_id: str
    text: str
    spans: tuple[Span, ...]


@dataclass(frozen=True)
class NerScores:
    precision: float
    recall: float
    f1: float


def resolve_overlaps(spans: Sequence[Span]) -> tuple[Span, ...]:
    """Non-overlapping subset: longest span wins, ties to the earlier start."""
    ordered = sorted(spans, key=lambda s: (-(s[1] - s[0]), s[0], s[2]))
    kept: list[Span] = []
    for span in ordered:
        if all(span[1] <= k[0] or k[1] <= span[0] for k in kept):
            kept.append(span)
    return tuple(sorted(kept))


def build_silver_dataset(
    letters: Sequence[LetterRecord], backend: PredictionBackend, layer: str = "ner"
) -> list[SilverDocument]:
    """One SilverDocument per letter from the backend's annotation layer."""
    if not backend.supports_layer(layer):
        raise CapabilityError(f"backend lacks the {layer!r} annotation layer")
    docs = []
    for letter in letters:
        result = backend.annotate(letter.text, [layer])
        spans = [(s.start, s.end, s.label) for s in result.spans if s.layer == layer]
        for start, end, _ in spans:
            if not (0 <= start < end <= len(letter.text)):
                raise ValueError(
                    f"backend span [{start}:{end}] out of bounds for {letter.note_id}"
                )
        docs.append(
            SilverDocument(
                note_id=letter.note_id, text=letter.text, spans=resolve_overlaps(spans)
            )
        )
    return docs


def split_dataset(
    docs: Sequence[SilverDocument], test_fraction: float = 0.2, seed: int = 0
) -> tuple[list[SilverDocument], list[SilverDocument]]:
    """Seeded split by note_id: train gets floor(n * (1 - test_fraction)) docs."""
    if len(docs) < 2:
        raise ValueError("split needs at least 2 documents")
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test_fraction must be in (0, 1)")
    shuffled = sorted(
        docs,
        key=lambda d: blake2b(f"{seed}:{d.note_id}".encode(), digest_size=8).digest(),
    )
    n_train = int(len(docs) * (1.0 - test_fraction))
    if n_train == 0 or n_train == len(docs):
        raise ValueError(
            f"degenerate split: {n_train} train / {len(docs) - n_train} test"
        )
    return list(shuffled[:n_train]), list(shuffled[n_train:])


def split_ids(docs: Sequence[SilverDocument], test_fraction: float = 0.2, seed: int = 0):
    train, test = split_dataset(docs, test_fraction, seed)
    return [d.note_id for d in train], [d.note_id for d in test]


def span_prf(gold: Sequence[Span], predicted: Sequence[Span]) -> NerScores:
    """Exact (start, end, label) matching.

    Empty prediction against empty gold is vacuous agreement (all 1.0);
    an empty prediction against non-empty gold scores zero precision;
    the "no predictions are trivially precise" convention is rejected.
    """
    gold_set = set(gold)
    pred_set = set(predicted)
    if not gold_set and not pred_set:
        return NerScores(1.0, 1.0, 1.0)
    matches = len(gold_set & pred_set)
    precision = matches / len(pred_set) if pred_set else 0.0
    recall = matches / len(gold_set) if gold_set else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return NerScores(precision, recall, f1)


def _micro_prf(gold_docs: Sequence[Sequence[Span]], pred_docs: Sequence[Sequence[Span]]) -> NerScores:
    matches = total_pred = total_gold = 0
    for gold, pred in zip(gold_docs, pred_docs):
        gold_set, pred_set = set(gold), set(pred)
        matches += len(gold_set & pred_set)
        total_pred += len(pred_set)
        total_gold += len(gold_set)
    if total_gold == 0 and total_pred == 0:
        return NerScores(1.0, 1.0, 1.0)
    precision = matches / total_pred if total_pred else 0.0
    recall = matches / total_gold if total_gold else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return NerScores(precision, recall, f1)


def run_downstream(
    train: Sequence[SilverDocument],
    test: Sequence[SilverDocument],
    backend: PredictionBackend,
    seed: int = 0,
    epochs: int = 10,
) -> NerScores:
    """Train through the backend, predict the test texts, score micro P/R/F1."""
    dataset = [{"text": d.text, "spans": [list(s) for s in d.spans]} for d in train]
    handle = backend.ner_train(dataset, seed=seed, epochs=epochs)
    predictions = backend.ner_predict(handle, [d.text for d in test])
    return _micro_prf([d.spans for d in test], predictions)


@dataclass(frozen=True)
class ComparisonReport:
    original: NerScores
    synthetic: NerScores
    delta_f1: float
    split_seed: int
    epochs: int

    def to_json(self) -> dict:
        return {
            "original": vars(self.original),
            "synthetic": vars(self.synthetic),
            "delta_f1": self.delta_f1,
            "split_seed": self.split_seed,
            "epochs": self.epochs,
        }


def run_comparison(
    original_letters: Sequence[LetterRecord],
    synthetic_letters: Sequence[LetterRecord],
    backend: PredictionBackend,
    test_fraction: float = 0.2,
    seed: int = 0,
    epochs: int = 10,
    layer: str = "ner",
) -> ComparisonReport:
    """Original-trained vs synthetic-trained NER, identical split and test silver."""
    synth_by_id = {l.note_id: l for l in synthetic_letters}
    missing = [l.note_id for l in original_letters if l.note_id not in synth_by_id]
    if missing:
        raise ValueError(f"synthetic corpus is missing notes: {missing[:5]}")

    silver_original = build_silver_dataset(original_letters, backend, layer)
    train_orig, test_orig = split_dataset(silver_original, test_fraction, seed)

    synth_train_letters = [synth_by_id[d.note_id] for d in train_orig]
    train_synth = build_silver_dataset(synth_train_letters, backend, layer)

    scores_original = run_downstream(train_orig, test_orig, backend, seed=seed, epochs=epochs)
    scores_synthetic = run_downstream(train_synth, test_orig, backend, seed=seed, epochs=epochs)
    return ComparisonReport(
        original=scores_original,
        synthetic=scores_synthetic,
        delta_f1=scores_synthetic.f1 - scores_original.f1,
        split_seed=seed,
        epochs=epochs,
    )


def write_ner_report(report: ComparisonReport, path: str | Path) -> None:
    Path(path).write_text(json.dumps(report.to_json(), indent=2) + "\n", encoding="utf-8")
