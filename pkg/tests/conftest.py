import sys
from pathlib import Path

import pytest

from synthmask.backends import AnnotationResult, AnnotationSpan, PredictionBackend
from synthmask.corpus import load_corpus

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def letters_csv() -> Path:
    return FIXTURES / "letters.csv"


@pytest.fixture(scope="session")
def annotations_csv() -> Path:
    return FIXTURES / "annotations.csv"


@pytest.fixture(scope="session")
def fixture_corpus(letters_csv, annotations_csv):
    return load_corpus(letters_csv, annotations_csv)


class StubNerBackend(PredictionBackend):
    """Annotates from a fixed table and 'trains' by memorizing silver spans.

    Prediction returns the memorized spans for known texts (optionally
    degraded), which makes downstream-harness outcomes fully scriptable.
    """

    def __init__(self, spans_by_text=None, drop_every=0):
        self.spans_by_text = dict(spans_by_text or {})
        self.drop_every = drop_every
        self.train_calls = []
        self._models = {}

    def capabilities(self):
        from synthmask.backends import BackendDescriptor

        return BackendDescriptor(
            kind="mock-echo", model_name="stub-ner", max_input_tokens=100000, layers=("ner",)
        )

    def annotate(self, text, layers):
        spans = tuple(
            AnnotationSpan(start, end, label, "ner")
            for start, end, label in self.spans_by_text.get(text, ())
        )
        return AnnotationResult(spans=spans)

    def ner_train(self, dataset, seed, epochs):
        handle = f"model-{len(self._models)}-seed{seed}"
        self.train_calls.append((len(dataset), seed, epochs))
        self._models[handle] = {row["text"]: [tuple(s) for s in row["spans"]] for row in dataset}
        return handle

    def ner_predict(self, model_handle, texts):
        if model_handle not in self._models:
            raise KeyError(model_handle)
        out = []
        for i, text in enumerate(texts):
            spans = [tuple(s) for s in self.spans_by_text.get(text, ())]
            if self.drop_every and i % self.drop_every == 0 and spans:
                spans = spans[1:]
            out.append(spans)
        return out


@pytest.fixture
def stub_ner_backend():
    return StubNerBackend
