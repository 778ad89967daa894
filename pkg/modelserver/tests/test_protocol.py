"""Protocol conformance: every response validates against the published schemas."""

import json
from importlib import resources

import jsonschema
import pytest
from fastapi.testclient import TestClient

from modelserver import ServerConfig, create_app


@pytest.fixture(scope="module")
def client():
    return TestClient(create_app(ServerConfig(max_input_tokens=64)))


def schema(name: str) -> dict:
    data = resources.files("modelserver.wire_schemas").joinpath(f"{name}.json").read_text("utf-8")
    return json.loads(data)


def check(payload: dict, name: str):
    jsonschema.validate(payload, schema(name))


class TestHealthAndCapabilities:
    def test_healthz(self, client):
        response = client.get("/healthz")
        assert response.status_code == 200
        assert response.json()["status"] == "ok"

    def test_capabilities_schema(self, client):
        response = client.post("/v1/capabilities", json={})
        assert response.status_code == 200
        payload = response.json()
        check(payload, "capabilities")
        assert payload["max_input_tokens"] == 64
        assert set(payload["layers"]) == {"pos", "ner", "medterm"}


class TestFillMask:
    def test_single_sentinel(self, client):
        response = client.post(
            "/v1/fill_mask", json={"id": "r1", "text": "went to the [MASK] today", "top_k": 5}
        )
        assert response.status_code == 200
        payload = response.json()
        check(payload, "fill_mask")
        assert payload["id"] == "r1"
        assert len(payload["masks"]) == 1
        candidates = payload["masks"][0]["candidates"]
        assert len(candidates) == 5
        scores = [c["score"] for c in candidates]
        assert scores == sorted(scores, reverse=True)
        assert all(0 < s <= 1 for s in scores)

    def test_two_sentinels_ordered(self, client):
        text = "try [MASK] then [MASK] after"
        payload = client.post(
            "/v1/fill_mask", json={"id": "r2", "text": text, "top_k": 3}
        ).json()
        check(payload, "fill_mask")
        assert len(payload["masks"]) == 2
        # per-slot answers are position-dependent but deterministic
        again = client.post("/v1/fill_mask", json={"id": "r2", "text": text, "top_k": 3}).json()
        assert payload == again

    def test_zero_sentinels_is_400(self, client):
        response = client.post("/v1/fill_mask", json={"id": "r3", "text": "no mask", "top_k": 3})
        assert response.status_code == 400
        check(response.json(), "error")

    def test_over_length_is_400_too_long(self, client):
        text = "[MASK] " + "word " * 100
        response = client.post("/v1/fill_mask", json={"id": "r4", "text": text, "top_k": 1})
        assert response.status_code == 400
        payload = response.json()
        check(payload, "error")
        assert payload["error"] == "too_long"

    def test_sentinel_never_a_candidate(self, client):
        payload = client.post(
            "/v1/fill_mask", json={"id": "r5", "text": "a [MASK] b", "top_k": 10}
        ).json()
        tokens = [c["token"] for c in payload["masks"][0]["candidates"]]
        assert "[MASK]" not in tokens


class TestEmbedAndPll:
    def test_embed_schema_and_shape(self, client):
        payload = client.post("/v1/embed", json={"id": "e1", "text": "patient went home"}).json()
        check(payload, "embed")
        assert len(payload["tokens"]) == 3
        assert len(payload["vectors"]) == 3
        assert len(payload["vectors"][0]) == 16

    def test_embed_identical_tokens_identical_vectors(self, client):
        payload = client.post("/v1/embed", json={"id": "e2", "text": "a b a"}).json()
        assert payload["vectors"][0] == payload["vectors"][2]

    def test_embed_truncation_flagged(self, client):
        payload = client.post(
            "/v1/embed", json={"id": "e3", "text": "word " * 100}
        ).json()
        check(payload, "embed")
        assert payload["truncated"] is True
        assert len(payload["tokens"]) == 64

    def test_pll_deterministic(self, client):
        body = {"id": "p1", "text": "the patient improved overnight"}
        first = client.post("/v1/pll", json=body).json()
        check(first, "pll")
        assert first["mean_nll"] > 0
        assert client.post("/v1/pll", json=body).json() == first

    def test_empty_text_rejected(self, client):
        assert client.post("/v1/pll", json={"id": "p2", "text": ""}).status_code == 400


class TestAnnotate:
    def test_offsets_roundtrip(self, client):
        text = "Dr. Smith reviewed the open fracture in Leeds on 06/03/2010"
        payload = client.post(
            "/v1/annotate", json={"id": "a1", "text": text, "layers": ["ner", "medterm", "pos"]}
        ).json()
        check(payload, "annotate")
        assert payload["spans"], "expected at least one span"
        for span in payload["spans"]:
            assert 0 <= span["start"] < span["end"] <= len(text)
            surface = text[span["start"] : span["end"]]
            assert surface.strip() == surface

    def test_person_date_loc_and_medterm(self, client):
        text = "Dr. Smith saw the fracture in Leeds on 06/03/2010"
        payload = client.post(
            "/v1/annotate", json={"id": "a2", "text": text, "layers": ["ner", "medterm"]}
        ).json()
        by_layer = {}
        for span in payload["spans"]:
            by_layer.setdefault(span["layer"], []).append(
                (text[span["start"] : span["end"]], span["label"])
            )
        assert ("Smith", "PERSON") in by_layer["ner"]
        assert ("06/03/2010", "DATE") in by_layer["ner"]
        assert ("fracture", "PROBLEM") in by_layer["medterm"]

    def test_empty_text_empty_spans(self, client):
        payload = client.post(
            "/v1/annotate", json={"id": "a3", "text": "", "layers": ["ner"]}
        ).json()
        assert payload["spans"] == []

    def test_unknown_layer_rejected(self, client):
        response = client.post(
            "/v1/annotate", json={"id": "a4", "text": "x", "layers": ["syntax-trees"]}
        )
        assert response.status_code == 400


class TestNerEndpoints:
    def test_train_then_predict(self, client):
        dataset = [
            {"text": "aspirin helps the pain", "spans": [[0, 7, "CHEMICAL"]]},
            {"text": "aspirin was given twice", "spans": [[0, 7, "CHEMICAL"]]},
            {"text": "the ward was quiet", "spans": []},
        ]
        trained = client.post(
            "/v1/ner/train", json={"id": "t1", "dataset": dataset, "seed": 0, "epochs": 2}
        ).json()
        check(trained, "ner_train")
        handle = trained["model_handle"]

        predicted = client.post(
            "/v1/ner/predict",
            json={"id": "t2", "model_handle": handle, "texts": ["aspirin helps recovery"]},
        ).json()
        check(predicted, "ner_predict")
        spans = predicted["per_text_spans"][0]
        assert {(s["start"], s["end"], s["label"]) for s in spans} == {(0, 7, "CHEMICAL")}

    def test_same_seed_identical_predictions(self, client):
        dataset = [
            {"text": f"drug{i} dose taken daily", "spans": [[0, 5, "CHEMICAL"]]} for i in range(6)
        ]
        handles = []
        for request_id in ("s1", "s2"):
            trained = client.post(
                "/v1/ner/train", json={"id": request_id, "dataset": dataset, "seed": 9, "epochs": 3}
            ).json()
            handles.append(trained["model_handle"])
        texts = ["drug9 dose taken daily", "nothing here"]
        first = client.post(
            "/v1/ner/predict", json={"id": "q1", "model_handle": handles[0], "texts": texts}
        ).json()["per_text_spans"]
        second = client.post(
            "/v1/ner/predict", json={"id": "q2", "model_handle": handles[1], "texts": texts}
        ).json()["per_text_spans"]
        assert first == second

    def test_unknown_handle_404(self, client):
        response = client.post(
            "/v1/ner/predict", json={"id": "u1", "model_handle": "nope", "texts": ["x"]}
        )
        assert response.status_code == 404
        check(response.json(), "error")

    def test_empty_dataset_rejected(self, client):
        response = client.post(
            "/v1/ner/train", json={"id": "u2", "dataset": [], "seed": 0, "epochs": 1}
        )
        assert response.status_code == 400


def test_golden_request_response_pairs(client):
    """Frozen wire-level exchanges for the debug bundle (regenerate only deliberately)."""
    request = {"id": "gold-1", "text": "the [MASK] was quiet", "top_k": 2}
    payload = client.post("/v1/fill_mask", json=request).json()
    check(payload, "fill_mask")
    first, second = payload["masks"][0]["candidates"]
    assert payload["id"] == "gold-1"
    assert first["score"] == pytest.approx(2 / 3)
    assert second["score"] == pytest.approx(1 / 3)
    again = client.post("/v1/fill_mask", json=request).json()
    assert again == payload
