import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from sklearn.metrics import normalized_mutual_info_score

from gccfp.evaluation import (
    ClusterAssignment,
    contingency,
    evaluate,
    extract_clusters,
    matched_accuracy,
    nmi,
    read_labels,
    write_labels,
)
from gccfp.exceptions import ParseError, ShapeError

labelings = st.integers(2, 30).flatmap(
    lambda n: st.tuples(
        st.lists(st.integers(0, 4), min_size=n, max_size=n),
        st.lists(st.integers(0, 4), min_size=n, max_size=n),
    )
)


def brute_accuracy(pred, truth):
    # try every injective relabelling of predicted clusters
    pv, tv = sorted(set(pred)), sorted(set(truth))
    pool = tv + [None] * max(0, len(pv) - len(tv))
    best = 0
    for perm in itertools.permutations(pool, len(pv)):
        m = dict(zip(pv, perm))
        best = max(best, sum(m[p] == t for p, t in zip(pred, truth)))
    return best / len(pred)


class TestExtract:
    def test_argmax(self):
        v = np.array([[0.1, 0.9], [0.8, 0.2], [0.3, 0.7]])
        assert extract_clusters(v).labels.tolist() == [1, 0, 1]

    def test_ties_go_to_smallest_index(self):
        assert extract_clusters(np.array([[0.5, 0.5, 0.1], [0.2, 0.7, 0.7]])).labels.tolist() == [0, 1]

    def test_zero_row_warns(self):
        with pytest.warns(UserWarning):
            a = extract_clusters(np.array([[0.0, 0.0], [0.0, 1.0]]))
        assert a.labels.tolist() == [0, 1] and a.n_zero_rows == 1

    def test_positive_scaling_invariant(self):
        v = np.random.default_rng(0).random((20, 4))
        assert np.array_equal(extract_clusters(v).labels, extract_clusters(v * 37.5).labels)

    def test_bad_shape(self):
        with pytest.raises(ShapeError):
            extract_clusters(np.ones(3))

    def test_assignment_range_checked(self):
        with pytest.raises(ValueError):
            ClusterAssignment(np.array([0, 2]), 2)


class TestScores:
    def test_independent_partitions(self):
        assert nmi([0, 0, 1, 1], [0, 1, 0, 1]) == pytest.approx(0.0, abs=1e-12)

    def test_identical_up_to_relabel(self):
        assert nmi([2, 2, 0, 0, 1], [0, 0, 1, 1, 2]) == pytest.approx(1.0)
        assert matched_accuracy([2, 2, 0, 0, 1], [0, 0, 1, 1, 2]) == 1.0

    def test_accuracy_example(self):
        assert matched_accuracy([0, 0, 0, 1], [0, 0, 1, 1]) == 0.75

    def test_single_cluster_rules(self):
        assert nmi([0, 0, 0], [1, 1, 1]) == 1.0
        assert nmi([0, 0, 0], [0, 1, 1]) == 0.0

    def test_missing_labels_skipped(self):
        assert contingency([0, 1, 1], [0, -1, 1]).sum() == 2
        assert matched_accuracy([0, 1, 0], [0, -1, 1]) == 0.5

    def test_length_mismatch(self):
        with pytest.raises(ShapeError):
            nmi([0, 1], [0, 1, 1])

    def test_all_missing(self):
        with pytest.raises(ShapeError):
            nmi([0, 1], [-1, -1])

    @settings(max_examples=150, deadline=None)
    @given(labelings)
    def test_nmi_matches_reference(self, pair):
        p, t = pair
        ref = normalized_mutual_info_score(t, p, average_method="arithmetic")
        assert nmi(p, t) == pytest.approx(ref, abs=1e-10)

    @settings(max_examples=80, deadline=None)
    @given(labelings)
    def test_accuracy_matches_brute_force(self, pair):
        p, t = pair
        assert matched_accuracy(p, t) == pytest.approx(brute_accuracy(p, t))

    @settings(max_examples=80, deadline=None)
    @given(labelings, st.permutations(range(5)))
    def test_symmetry_and_relabel_invariance(self, pair, perm):
        p, t = pair
        q = [perm[x] for x in p]
        assert nmi(p, t) == pytest.approx(nmi(t, p), abs=1e-12)
        assert nmi(q, t) == pytest.approx(nmi(p, t), abs=1e-12)
        assert matched_accuracy(q, t) == matched_accuracy(p, t)
        assert 0.0 <= nmi(p, t) <= 1.0

    @settings(max_examples=80, deadline=None)
    @given(labelings)
    def test_accuracy_at_least_best_single_match(self, pair):
        p, t = pair
        # matching only the largest contingency cell is always feasible
        assert matched_accuracy(p, t) >= contingency(p, t).max() / len(t) - 1e-12
        if len(set(p)) == 1:
            assert matched_accuracy(p, t) == pytest.approx(np.bincount(t).max() / len(t))


class TestReport:
    def test_evaluate_and_json(self, tmp_path):
        rep = evaluate([0, 0, 1, 1], [1, 1, 0, 0])
        assert rep.nmi == pytest.approx(1.0) and rep.accuracy == 1.0 and rep.n_scored == 4
        rep.to_json(tmp_path / "r.json")
        assert '"nmi"' in (tmp_path / "r.json").read_text()

    def test_labels_roundtrip(self, tmp_path):
        write_labels(tmp_path / "l.txt", [0, 2, -1, 1])
        assert read_labels(tmp_path / "l.txt").tolist() == [0, 2, -1, 1]

    def test_labels_parse_error_reports_line(self, tmp_path):
        (tmp_path / "l.txt").write_text("0\n1\nx\n")
        with pytest.raises(ParseError, match="line 3"):
            read_labels(tmp_path / "l.txt")
