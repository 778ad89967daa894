"""Per-letter evaluation rows and corpus aggregates.

Every letter contributes three aligned texts: the original, the masked
baseline (sentinels left in as literal `[MASK]` tokens), and the
synthetic output. Similarity is scored synthetic-vs-original and
masked-vs-original; readability covers all three; the advanced suite
covers original and synthetic. A failing metric degrades its own field
to null, never the whole row.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .advanced import AdvancedScores, advanced_suite
from .embedding import bert_score
from .overlap import meteor, rouge
from .readability import ReadabilityScores, readability_suite

METRIC_VERSION_TAGS = {
    "rouge": "clipped n-gram / LCS, F1 reported, word-tokenized lowercased",
    "meteor": "exact+stem matching only, alpha=0.9 beta=3 gamma=0.5",
    "bertscore": "greedy cosine matching, no idf, no baseline rescaling",
    "readability": "vowel-group syllables with silent-e rule",
    "perplexity": "pseudo-perplexity: exp(mean masked-token NLL)",
}


@dataclass(frozen=True)
class SimilarityScores:
    rouge1: tuple[float, float, float]
    rouge2: tuple[float, float, float]
    rougeL: tuple[float, float, float]
    meteor: float
    bertscore: tuple[float, float, float] | None


@dataclass(frozen=True)
class LetterEvaluation:
    note_id: str
    synthetic: SimilarityScores
    baseline: SimilarityScores
    readability_original: ReadabilityScores
    readability_masked: ReadabilityScores
    readability_synthetic: ReadabilityScores
    advanced_original: AdvancedScores
    advanced_synthetic: AdvancedScores
    invalid_rate: float | None


def similarity_scores(candidate: str, reference: str, backend=None) -> SimilarityScores:
    return SimilarityScores(
        rouge1=rouge(candidate, reference, 1),
        rouge2=rouge(candidate, reference, 2),
        rougeL=rouge(candidate, reference, "L"),
        meteor=meteor(candidate, reference),
        bertscore=bert_score(candidate, reference, backend) if backend is not None else None,
    )


def evaluate_letter(
    original: str,
    masked: str,
    synthetic: str,
    backend=None,
    note_id: str = "",
    invalid_rate: float | None = None,
) -> LetterEvaluation:
    return LetterEvaluation(
        note_id=note_id,
        synthetic=similarity_scores(synthetic, original, backend),
        baseline=similarity_scores(masked, original, backend),
        readability_original=readability_suite(original),
        readability_masked=readability_suite(masked),
        readability_synthetic=readability_suite(synthetic),
        advanced_original=advanced_suite(original, backend),
        advanced_synthetic=advanced_suite(synthetic, backend),
        invalid_rate=invalid_rate,
    )


def flatten_row(row: LetterEvaluation) -> dict[str, float | str | None]:
    flat: dict[str, float | str | None] = {"note_id": row.note_id}

    def put_similarity(prefix: str, scores: SimilarityScores):
        for name, triple in (("rouge1", scores.rouge1), ("rouge2", scores.rouge2), ("rougeL", scores.rougeL)):
            for part, value in zip(("p", "r", "f1"), triple):
                flat[f"{prefix}{name}_{part}"] = value
        flat[f"{prefix}meteor"] = scores.meteor
        for part, value in zip(("p", "r", "f1"), scores.bertscore or (None, None, None)):
            flat[f"{prefix}bertscore_{part}"] = value

    put_similarity("", row.synthetic)
    put_similarity("baseline_", row.baseline)
    for label, scores in (
        ("original", row.readability_original),
        ("masked", row.readability_masked),
        ("synthetic", row.readability_synthetic),
    ):
        flat[f"smog_{label}"] = scores.smog
        flat[f"fre_{label}"] = scores.flesch_reading_ease
        flat[f"fkg_{label}"] = scores.fk_grade
    for label, scores in (
        ("original", row.advanced_original),
        ("synthetic", row.advanced_synthetic),
    ):
        flat[f"pseudo_perplexity_{label}"] = scores.pseudo_perplexity
        flat[f"entropy_bits_{label}"] = scores.entropy_bits
        flat[f"subjectivity_{label}"] = scores.subjectivity
    flat["invalid_rate"] = row.invalid_rate
    return flat


def corpus_summary(rows: Sequence[LetterEvaluation]) -> dict:
    """Arithmetic means over letters, each letter weighted equally.

    Null fields are excluded from their mean; a column that is null
    everywhere aggregates to null.
    """
    flats = [flatten_row(r) for r in rows]
    keys = [k for k in (flats[0] if flats else {}) if k != "note_id"]
    means: dict[str, float | None] = {}
    for key in keys:
        values = [f[key] for f in flats if f[key] is not None]
        means[key] = sum(values) / len(values) if values else None
    return {
        "n_letters": len(rows),
        "means": means,
        "metric_versions": METRIC_VERSION_TAGS,
    }


def write_evaluation_report(rows: Sequence[LetterEvaluation], path: str | Path) -> None:
    flats = [flatten_row(r) for r in rows]
    if not flats:
        Path(path).write_text("note_id\n", encoding="utf-8")
        return
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(flats[0]))
        writer.writeheader()
        for flat in flats:
            writer.writerow({k: ("" if v is None else v) for k, v in flat.items()})


def write_evaluation_summary(summary: dict, path: str | Path) -> None:
    Path(path).write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
