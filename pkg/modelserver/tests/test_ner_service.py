import pytest

from modelserver.ner_service import NerService, _bio_labels, _decode
from modelserver.bundles import simple_tokens


class TestBioRoundtrip:
    def test_labels_from_spans(self):
        text = "deep vein thrombosis found"
        tokens = simple_tokens(text)
        labels = _bio_labels(tokens, [(0, 20, "PROBLEM")])
        assert labels == ["B-PROBLEM", "I-PROBLEM", "I-PROBLEM", "O"]

    def test_decode_inverts_labels(self):
        text = "deep vein thrombosis found near the old fracture site"
        tokens = simple_tokens(text)
        spans = [(0, 20, "PROBLEM"), (text.index("fracture"), text.index("fracture") + 8, "PROBLEM")]
        labels = _bio_labels(tokens, spans)
        assert _decode(tokens, labels) == spans

    def test_adjacent_entities_stay_separate(self):
        tokens = [("a", 0, 1), ("b", 2, 3)]
        labels = ["B-X", "B-X"]
        assert _decode(tokens, labels) == [(0, 1, "X"), (2, 3, "X")]


class TestNerService:
    def test_memorizes_training_surface(self):
        service = NerService()
        handle = service.train(
            [
                {"text": "enoxaparin injected daily", "spans": [[0, 10, "TREATMENT"]]},
                {"text": "enoxaparin stopped early", "spans": [[0, 10, "TREATMENT"]]},
                {"text": "breakfast served early", "spans": []},
            ],
            seed=1,
            epochs=2,
        )
        predictions = service.predict(handle, ["enoxaparin given again"])
        assert predictions[0] == [(0, 10, "TREATMENT")]

    def test_no_entity_training_predicts_nothing(self):
        service = NerService()
        handle = service.train([{"text": "plain text only", "spans": []}], seed=0, epochs=1)
        assert service.predict(handle, ["plain text only"]) == [[]]

    def test_unknown_handle_raises_keyerror(self):
        service = NerService()
        with pytest.raises(KeyError):
            service.predict("missing", ["x"])

    def test_determinism_same_seed(self):
        dataset = [
            {"text": f"compound{i} relieves pain quickly", "spans": [[0, 9, "CHEMICAL"]]}
            for i in range(8)
        ]
        texts = ["compound3 relieves pain quickly", "no entity in sight"]
        runs = []
        for _ in range(2):
            service = NerService()
            handle = service.train(dataset, seed=4, epochs=2)
            runs.append(service.predict(handle, texts))
        assert runs[0] == runs[1]

    def test_empty_dataset_rejected(self):
        with pytest.raises(ValueError):
            NerService().train([], seed=0, epochs=1)
