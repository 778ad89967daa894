"""BERTScore-style greedy cosine matching over backend embeddings.

No idf weighting, no baseline rescaling: recall is the mean over
reference tokens of their best cosine similarity to any candidate
token, precision is the symmetric statement, F1 the harmonic mean.
"""

from __future__ import annotations

import numpy as np

from ..errors import BackendError


def _unit_rows(vectors: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(vectors, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    return vectors / norms


def bert_score(candidate: str, reference: str, embed_backend) -> tuple[float, float, float] | None:
    """(precision, recall, f1) fractions, or None when embedding fails."""
    try:
        cand = embed_backend.embed(candidate)
        ref = embed_backend.embed(reference)
    except (BackendError, ValueError):
        return None
    if len(cand.tokens) == 0 or len(ref.tokens) == 0:
        return (0.0, 0.0, 0.0)
    sim = _unit_rows(np.asarray(cand.vectors, dtype=np.float64)) @ _unit_rows(
        np.asarray(ref.vectors, dtype=np.float64)
    ).T
    precision = float(sim.max(axis=1).mean())
    recall = float(sim.max(axis=0).mean())
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return (precision, recall, f1)
