import json

import numpy as np
import pytest

from oracles import oracle_micro_f1
from phenotext.errors import DataError
from phenotext.metrics import (
    EvalReport,
    build_report,
    confusion_matrix,
    micro_f1,
    per_class_prf,
    save_report,
)


class TestMicroF1:
    def test_hand_worked_case(self):
        pred = [0, 1, 1, 1]
        gold = [0, 0, 1, 1]
        # pooled TP=3, FP=1, FN=1 -> F1 = 3 / (3 + 0.5*2) = 0.75
        assert micro_f1(pred, gold) == pytest.approx(0.75, abs=1e-12)

    def test_perfect_and_worst(self):
        assert micro_f1([0, 1, 2], [0, 1, 2]) == 1.0
        assert micro_f1([1, 1, 1], [0, 0, 0]) == 0.0

    def test_matches_oracle_on_random_trials(self):
        rng = np.random.default_rng(42)
        for _ in range(1000):
            n = int(rng.integers(1, 30))
            k = int(rng.integers(2, 6))
            gold = rng.integers(0, k, size=n)
            pred = rng.integers(0, k, size=n)
            assert abs(micro_f1(pred, gold) - oracle_micro_f1(gold, pred)) <= 1e-12

    def test_equals_accuracy_for_single_label(self):
        rng = np.random.default_rng(7)
        gold = rng.integers(0, 4, size=500)
        pred = rng.integers(0, 4, size=500)
        assert micro_f1(pred, gold) == pytest.approx((gold == pred).mean(), abs=1e-12)

    def test_joint_permutation_invariance(self):
        rng = np.random.default_rng(8)
        gold = rng.integers(0, 3, size=60)
        pred = rng.integers(0, 3, size=60)
        perm = rng.permutation(60)
        assert micro_f1(pred, gold) == micro_f1(pred[perm], gold[perm])

    def test_input_validation(self):
        with pytest.raises(DataError, match="empty"):
            micro_f1([], [])
        with pytest.raises(DataError, match="shapes"):
            micro_f1([0, 1], [0])
        with pytest.raises(DataError, match="non-negative"):
            micro_f1([0, -1], [0, 0])
        with pytest.raises(DataError, match="shapes"):
            micro_f1(np.zeros((2, 2)), np.zeros((2, 2)))


class TestConfusionMatrix:
    def test_rows_are_gold_columns_are_predicted(self):
        pred = [0, 1, 1, 0]
        gold = [0, 0, 1, 2]
        m = confusion_matrix(pred, gold, n_classes=3)
        expected = np.array([[1, 1, 0], [0, 1, 0], [1, 0, 0]])
        assert np.array_equal(m, expected)

    def test_row_sums_equal_class_support(self):
        rng = np.random.default_rng(9)
        gold = rng.integers(0, 4, size=80)
        pred = rng.integers(0, 4, size=80)
        m = confusion_matrix(pred, gold, n_classes=4)
        assert np.array_equal(m.sum(axis=1), np.bincount(gold, minlength=4))
        assert m.sum() == 80

    def test_n_classes_expands_beyond_observed(self):
        m = confusion_matrix([0], [0], n_classes=3)
        assert m.shape == (3, 3)
        assert m.sum() == 1

    def test_label_outside_matrix_raises(self):
        with pytest.raises(DataError, match="label space"):
            confusion_matrix([0, 0], [0, 3], n_classes=2)


class TestPerClassPrf:
    def test_hand_worked_case(self):
        pred = [0, 1, 1, 1]
        gold = [0, 0, 1, 1]
        rows = per_class_prf(pred, gold, n_classes=2)
        assert rows[0]["precision"] == 1.0
        assert rows[0]["recall"] == 0.5
        assert rows[0]["f1"] == pytest.approx(2 / 3, abs=1e-12)
        assert rows[0]["support"] == 2
        assert rows[1]["precision"] == pytest.approx(2 / 3, abs=1e-12)
        assert rows[1]["recall"] == 1.0
        assert rows[1]["f1"] == pytest.approx(0.8, abs=1e-12)

    def test_absent_class_scores_zero_not_nan(self):
        rows = per_class_prf([0, 0], [0, 0], n_classes=2)
        assert (rows[1]["precision"], rows[1]["recall"], rows[1]["f1"]) == (0, 0, 0)
        assert rows[1]["support"] == 0


class TestBuildReport:
    def test_contents(self):
        rep = build_report("knn", [0, 1, 0], [0, 1, 1], class_names=["non", "smk"],
                           extra={"k": 27})
        assert isinstance(rep, EvalReport)
        assert rep.n_examples == 3
        assert rep.micro_f1 == pytest.approx(2 / 3, abs=1e-12)
        assert rep.class_names == ["non", "smk"]
        d = rep.to_dict()
        assert d["model"] == "knn"
        assert d["k"] == 27
        assert d["confusion"] == [[1, 0], [1, 1]]
        assert "wall_clock_seconds" not in d

    def test_wall_clock_attribute_stays_out_of_dict(self):
        rep = build_report("knn", [0], [0], class_names=["a", "b"])
        rep.wall_clock_seconds = 1.5
        assert rep.wall_clock_seconds == 1.5
        assert "wall_clock_seconds" not in rep.to_dict()

    def test_label_outside_class_names_raises(self):
        with pytest.raises(DataError, match="label space"):
            build_report("knn", [0, 0], [0, 2], class_names=["a", "b"])

    def test_render_mentions_key_numbers(self):
        rep = build_report("mlp", [0, 1, 1, 0], [0, 1, 1, 1],
                           class_names=["non", "smk"])
        text = rep.render()
        assert "micro-F1: 0.7500" in text
        assert "model: mlp" in text
        assert "non" in text and "smk" in text
        assert "rows = gold" in text

    def test_save_is_byte_stable(self, tmp_path):
        rep = build_report("svm", [1, 0], [0, 1], class_names=["a", "b"],
                           extra={"kernel": "rbf"})
        p1, p2 = tmp_path / "r1.json", tmp_path / "r2.json"
        save_report(rep, p1)
        save_report(rep, p2)
        assert p1.read_bytes() == p2.read_bytes()
        payload = json.loads(p1.read_text())
        assert payload["micro_f1"] == 0.0
        assert payload["n_examples"] == 2
        assert payload["kernel"] == "rbf"
