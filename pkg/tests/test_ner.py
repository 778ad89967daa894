import pytest

from synthmask.corpus import LetterRecord
from synthmask.errors import CapabilityError
from synthmask.ner import (
    NerScores,
    SilverDocument,
    build_silver_dataset,
    resolve_overlaps,
    run_comparison,
    run_downstream,
    span_prf,
    split_dataset,
)


class TestSpanPrf:
    def test_perfect_match(self):
        scores = span_prf([(0, 4, "D")], [(0, 4, "D")])
        assert scores == NerScores(1.0, 1.0, 1.0)

    def test_half_match(self):
        gold = [(0, 4, "D"), (6, 9, "C")]
        pred = [(0, 4, "D"), (6, 9, "D")]
        scores = span_prf(gold, pred)
        assert scores == NerScores(0.5, 0.5, 0.5)

    def test_empty_pred_nonempty_gold(self):
        assert span_prf([(0, 4, "D")], []) == NerScores(0.0, 0.0, 0.0)

    def test_both_empty_vacuous_agreement(self):
        assert span_prf([], []) == NerScores(1.0, 1.0, 1.0)

    def test_label_must_match(self):
        assert span_prf([(0, 4, "D")], [(0, 4, "C")]).f1 == 0.0

    def test_offsets_must_match_exactly(self):
        assert span_prf([(0, 4, "D")], [(0, 5, "D")]).f1 == 0.0

    def test_relabel_permutation_symmetry(self):
        gold = [(0, 4, "D"), (6, 9, "C"), (12, 15, "D")]
        pred = [(0, 4, "D"), (6, 9, "D")]
        swap = {"D": "C", "C": "D"}
        relabelled_gold = [(s, e, swap[l]) for s, e, l in gold]
        relabelled_pred = [(s, e, swap[l]) for s, e, l in pred]
        assert span_prf(gold, pred) == span_prf(relabelled_gold, relabelled_pred)


class TestResolveOverlaps:
    def test_nested_keeps_longest(self):
        assert resolve_overlaps([(0, 10, "A"), (0, 4, "B")]) == ((0, 10, "A"),)

    def test_tie_earlier_start_wins(self):
        assert resolve_overlaps([(2, 6, "B"), (0, 4, "A")]) == ((0, 4, "A"),)

    def test_disjoint_all_kept_sorted(self):
        spans = [(8, 10, "B"), (0, 4, "A")]
        assert resolve_overlaps(spans) == ((0, 4, "A"), (8, 10, "B"))


class TestSplitDataset:
    def _docs(self, n):
        return [SilverDocument(f"n{i}", f"text {i}", ()) for i in range(n)]

    def test_ten_docs_80_20(self):
        train, test = split_dataset(self._docs(10), 0.2, seed=1)
        assert (len(train), len(test)) == (8, 2)

    def test_204_docs_163_41(self):
        train, test = split_dataset(self._docs(204), 0.2, seed=1)
        assert (len(train), len(test)) == (163, 41)

    def test_same_seed_same_membership(self):
        docs = self._docs(10)
        a_train, a_test = split_dataset(docs, 0.2, seed=9)
        b_train, b_test = split_dataset(docs, 0.2, seed=9)
        assert [d.note_id for d in a_train] == [d.note_id for d in b_train]
        assert [d.note_id for d in a_test] == [d.note_id for d in b_test]

    def test_different_seed_different_membership(self):
        docs = self._docs(30)
        a = {d.note_id for d in split_dataset(docs, 0.2, seed=1)[1]}
        b = {d.note_id for d in split_dataset(docs, 0.2, seed=2)[1]}
        assert a != b  # holds for these seeds

    def test_degenerate_sizes_rejected(self):
        with pytest.raises(ValueError):
            split_dataset(self._docs(1), 0.2, seed=0)
        with pytest.raises(ValueError):
            split_dataset(self._docs(2), 0.9, seed=0)  # train would be empty


class TestSilverAndDownstream:
    def test_build_silver_resolves_overlaps(self, stub_ner_backend):
        backend = stub_ner_backend(
            {"enoxaparin given": [(0, 10, "CHEMICAL"), (0, 4, "CHEMICAL")]}
        )
        docs = build_silver_dataset([LetterRecord("n1", "enoxaparin given")], backend)
        assert docs[0].spans == ((0, 10, "CHEMICAL"),)

    def test_letter_without_entities(self, stub_ner_backend):
        backend = stub_ner_backend({})
        docs = build_silver_dataset([LetterRecord("n1", "plain text")], backend)
        assert docs[0].spans == ()

    def test_missing_layer_hard_error(self):
        from synthmask.backends import EchoBackend

        with pytest.raises(CapabilityError):
            build_silver_dataset([LetterRecord("n1", "x")], EchoBackend())

    def test_downstream_perfect_when_stub_predicts_gold(self, stub_ner_backend):
        table = {f"doc {i}": [(0, 3, "D")] for i in range(10)}
        backend = stub_ner_backend(table)
        docs = build_silver_dataset(
            [LetterRecord(f"n{i}", f"doc {i}") for i in range(10)], backend
        )
        train, test = split_dataset(docs, 0.2, seed=0)
        scores = run_downstream(train, test, backend, seed=0, epochs=1)
        assert scores == NerScores(1.0, 1.0, 1.0)

    def test_downstream_deterministic(self, stub_ner_backend):
        table = {f"document {i}": [(0, 3, "D"), (4, 6, "C")] for i in range(12)}
        backend = stub_ner_backend(table, drop_every=3)
        docs = build_silver_dataset(
            [LetterRecord(f"n{i}", f"document {i}") for i in range(12)], backend
        )
        train, test = split_dataset(docs, 0.25, seed=3)
        first = run_downstream(train, test, backend, seed=3, epochs=2)
        second = run_downstream(train, test, backend, seed=3, epochs=2)
        assert first == second
        assert 0.0 <= first.f1 <= 1.0


class TestComparison:
    def test_identical_corpora_zero_delta(self, stub_ner_backend):
        table = {f"doc {i}": [(0, 3, "D")] for i in range(10)}
        backend = stub_ner_backend(table)
        letters = [LetterRecord(f"n{i}", f"doc {i}") for i in range(10)]
        report = run_comparison(letters, letters, backend, seed=1, epochs=1)
        assert report.delta_f1 == 0.0
        assert report.original == report.synthetic
        assert report.split_seed == 1

    def test_synthetic_missing_note_rejected(self, stub_ner_backend):
        backend = stub_ner_backend({})
        letters = [LetterRecord(f"n{i}", f"doc {i}") for i in range(4)]
        with pytest.raises(ValueError, match="missing"):
            run_comparison(letters, letters[:-1], backend)

    def test_report_json_shape(self, stub_ner_backend, tmp_path):
        from synthmask.ner import write_ner_report
        import json

        table = {f"doc {i}": [(0, 3, "D")] for i in range(10)}
        backend = stub_ner_backend(table)
        letters = [LetterRecord(f"n{i}", f"doc {i}") for i in range(10)]
        report = run_comparison(letters, letters, backend, seed=2, epochs=4)
        path = tmp_path / "ner_report.json"
        write_ner_report(report, path)
        payload = json.loads(path.read_text())
        assert set(payload) == {"original", "synthetic", "delta_f1", "split_seed", "epochs"}
        assert set(payload["original"]) == {"precision", "recall", "f1"}
