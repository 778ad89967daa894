"""Trainable token classifier for the downstream NER harness.

BIO tagging over window features with logistic regression: small,
deterministic for a fixed seed (single-threaded lbfgs), and fast enough
to train inside a request. Spans come back in character offsets of the
input text.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass

from sklearn.feature_extraction import DictVectorizer
from sklearn.linear_model import LogisticRegression

from .bundles import simple_tokens


def _features(tokens: list[tuple[str, int, int]], position: int) -> dict:
    surface = tokens[position][0]
    prev_surface = tokens[position - 1][0] if position > 0 else "<s>"
    next_surface = tokens[position + 1][0] if position + 1 < len(tokens) else "</s>"
    return {
        f"w={surface.lower()}": 1,
        f"p3={surface[:3].lower()}": 1,
        f"s3={surface[-3:].lower()}": 1,
        "title": int(surface[:1].isupper()),
        "upper": int(surface.isupper() and len(surface) > 1),
        "digit": int(any(ch.isdigit() for ch in surface)),
        f"prev={prev_surface.lower()}": 1,
        f"next={next_surface.lower()}": 1,
    }


def _bio_labels(tokens, spans) -> list[str]:
    labels = ["O"] * len(tokens)
    for start, end, label in spans:
        inside = [
            i for i, (_, t_start, t_end) in enumerate(tokens) if t_start < end and start < t_end
        ]
        for order, index in enumerate(inside):
            labels[index] = ("B-" if order == 0 else "I-") + str(label)
    return labels


def _decode(tokens, labels) -> list[tuple[int, int, str]]:
    spans = []
    current = None  # [start, end, label]
    for (surface, start, end), tag in zip(tokens, labels):
        if tag == "O":
            if current:
                spans.append(tuple(current))
                current = None
            continue
        prefix, label = tag.split("-", 1)
        if current and prefix == "I" and current[2] == label:
            current[1] = end
        else:
            if current:
                spans.append(tuple(current))
            current = [start, end, label]
    if current:
        spans.append(tuple(current))
    return spans


@dataclass
class _TrainedModel:
    vectorizer: DictVectorizer
    classifier: LogisticRegression | None  # None when training saw no entities


class NerService:
    """In-memory registry of trained models, keyed by handle."""

    def __init__(self):
        self._models: dict[str, _TrainedModel] = {}
        self._lock = threading.Lock()
        self._counter = 0

    def train(self, dataset: list[dict], seed: int, epochs: int) -> str:
        rows, labels = [], []
        for document in dataset:
            tokens = simple_tokens(document["text"])
            spans = [tuple(s) for s in document.get("spans", ())]
            tags = _bio_labels(tokens, spans)
            for position in range(len(tokens)):
                rows.append(_features(tokens, position))
                labels.append(tags[position])
        if not rows:
            raise ValueError("training dataset has no tokens")

        vectorizer = DictVectorizer()
        matrix = vectorizer.fit_transform(rows)
        if len(set(labels)) < 2:
            model = _TrainedModel(vectorizer=vectorizer, classifier=None)
        else:
            classifier = LogisticRegression(
                max_iter=max(100, 50 * epochs),
                random_state=seed,
                solver="lbfgs",
            )
            classifier.fit(matrix, labels)
            model = _TrainedModel(vectorizer=vectorizer, classifier=classifier)

        with self._lock:
            self._counter += 1
            handle = f"ner-{self._counter}"
            self._models[handle] = model
        return handle

    def predict(self, handle: str, texts: list[str]) -> list[list[tuple[int, int, str]]]:
        with self._lock:
            if handle not in self._models:
                raise KeyError(handle)
            model = self._models[handle]
        out = []
        for text in texts:
            tokens = simple_tokens(text)
            if not tokens or model.classifier is None:
                out.append([])
                continue
            matrix = model.vectorizer.transform(
                [_features(tokens, position) for position in range(len(tokens))]
            )
            tags = list(model.classifier.predict(matrix))
            out.append(_decode(tokens, tags))
        return out
