"""Evaluation battery: literal overlap, embedding similarity, readability,
advanced text-quality scores, and the per-letter report assembly."""

from .advanced import AdvancedScores, advanced_suite, entropy_bits, subjectivity
from .embedding import bert_score
from .overlap import meteor, metric_tokens, rouge
from .readability import ReadabilityScores, count_syllables, readability_suite
from .report import (
    LetterEvaluation,
    SimilarityScores,
    corpus_summary,
    evaluate_letter,
    flatten_row,
    similarity_scores,
    write_evaluation_report,
    write_evaluation_summary,
)

__all__ = [
    "AdvancedScores",
    "LetterEvaluation",
    "ReadabilityScores",
    "SimilarityScores",
    "advanced_suite",
    "bert_score",
    "corpus_summary",
    "count_syllables",
    "entropy_bits",
    "evaluate_letter",
    "flatten_row",
    "meteor",
    "metric_tokens",
    "readability_suite",
    "rouge",
    "similarity_scores",
    "subjectivity",
    "write_evaluation_report",
    "write_evaluation_summary",
]
