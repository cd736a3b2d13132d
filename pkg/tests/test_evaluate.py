import math

import numpy as np
import pytest

from adml import (LabeledDataset, MetricModel, annotate, f1_scores, knn_classify, mdist,
                  pair_histogram, subspace_distance, tag_stats)
from adml.dataset import MULTILABEL
from adml.errors import DegenerateDataWarning, EmptyReference, NotOrthonormal, ShapeMismatch
from adml.evaluate import (TagStats, f1_from_counts, knn_classify_batch, write_projection_csv)

from conftest import random_orthonormal


def brute_knn(X, labels, W, x, k):
    """Sort every reference by (distance, position) and vote by hand."""
    d = sorted((float(np.linalg.norm(W.T @ (X[:, j] - x))), j) for j in range(X.shape[1]))[:k]
    votes, sums = {}, {}
    for dist, j in d:
        votes[labels[j]] = votes.get(labels[j], 0) + 1
        sums[labels[j]] = sums.get(labels[j], 0.0) + dist
    return min(votes, key=lambda lab: (-votes[lab], sums[lab], lab))


class TestMdist:
    def test_euclidean_identity(self):
        assert mdist(np.eye(2), [0, 0], [3, 4]) == 5.0

    def test_zero_metric(self, rng):
        assert mdist(np.zeros((3, 2)), rng.normal(size=3), rng.normal(size=3)) == 0.0

    def test_quadratic_form_oracle(self, rng):
        for _ in range(50):
            W = rng.normal(size=(5, 2))
            x, y = rng.normal(size=5), rng.normal(size=5)
            Q = W @ W.T
            assert mdist(W, x, y) == pytest.approx(math.sqrt((x - y) @ Q @ (x - y)), rel=1e-12)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatch):
            mdist(np.eye(2), [0, 0, 0], [1, 1, 1])

    def test_metric_axioms(self, rng):
        W = rng.normal(size=(4, 2))
        for _ in range(100):
            x, y, z = rng.normal(size=(3, 4))
            assert mdist(W, x, x) == 0.0
            assert mdist(W, x, y) == mdist(W, y, x)
            assert mdist(W, x, z) <= mdist(W, x, y) + mdist(W, y, z) + 1e-10

    def test_projection_consistency(self, rng):
        model = MetricModel(random_orthonormal(rng, 6, 2))
        for _ in range(20):
            x, y = rng.normal(size=(2, 6))
            px, py = model.project(x[:, None]), model.project(y[:, None])
            assert abs(mdist(model, x, y) - np.linalg.norm(px - py)) <= 1e-12


class TestKnn:
    def test_k1_example(self):
        ref = LabeledDataset([[1.0, 5.0], [0.0, 0.0]], [0, 1])
        assert knn_classify(ref, np.eye(2), [0, 0], 1) == 0

    def test_equidistant_lower_id_wins(self):
        ref = LabeledDataset([[-1.0, 1.0]], [7, 3])
        assert knn_classify(ref, np.eye(1), [0.0], 1) == 7

    def test_vote_tie_smaller_distance_sum(self):
        ref = LabeledDataset([[1.0, -1.5]], [2, 1])
        assert knn_classify(ref, np.eye(1), [0.0], 2) == 2

    def test_vote_tie_label_id(self):
        ref = LabeledDataset([[1.0, -1.0]], [2, 1])
        assert knn_classify(ref, np.eye(1), [0.0], 2) == 1

    def test_brute_force_oracle(self, rng):
        for _ in range(30):
            n = int(rng.integers(3, 25))
            X = np.round(rng.normal(size=(3, n)), 1)
            labels = rng.integers(0, 3, n)
            W = rng.normal(size=(3, 2))
            x = np.round(rng.normal(size=3), 1)
            k = int(rng.integers(1, n + 1))
            ref = LabeledDataset(X, labels)
            assert knn_classify(ref, W, x, k) == brute_knn(X, labels, W, x, k)

    def test_batch_matches_single(self, rng):
        ref = LabeledDataset(rng.normal(size=(3, 30)), rng.integers(0, 2, 30))
        Q = rng.normal(size=(3, 10))
        batch = knn_classify_batch(ref, np.eye(3), Q, 3)
        assert batch.tolist() == [knn_classify(ref, np.eye(3), Q[:, m], 3) for m in range(10)]

    def test_empty_reference(self):
        with pytest.raises(EmptyReference):
            knn_classify(LabeledDataset(np.zeros((2, 0)), np.zeros(0)), np.eye(2), [0, 0], 1)


def tag_ref(tagged_flags, positions):
    tags = [{1} if f else {2} for f in tagged_flags]
    return LabeledDataset([positions], tags, MULTILABEL)


class TestAnnotate:
    def test_three_of_four(self):
        ref = tag_ref([1, 1, 1, 0], [1.0, 2.0, 3.0, 4.0])
        stats = TagStats((1,), np.array([0.5]))
        assert annotate(ref, stats, np.eye(1), [0.0], 4) == frozenset({1})

    def test_equal_rate_absent(self):
        ref = tag_ref([1, 1, 0, 0], [1.0, 2.0, 3.0, 4.0])
        stats = TagStats((1,), np.array([0.5]))
        assert annotate(ref, stats, np.eye(1), [0.0], 4) == frozenset()

    def test_untagged_neighbours(self):
        ref = tag_ref([0, 0, 1], [1.0, 2.0, 9.0])
        stats = TagStats((1,), np.array([0.0]))
        assert annotate(ref, stats, np.eye(1), [0.0], 2) == frozenset()

    def test_background_rates_and_determinism(self, rng):
        tags = [frozenset(int(t) for t in rng.choice(5, 2, replace=False)) for _ in range(40)]
        ref = LabeledDataset(rng.normal(size=(3, 40)), tags, MULTILABEL)
        stats = tag_stats(ref)
        assert np.all((stats.r0 >= 0) & (stats.r0 <= 1))
        for t, r in zip(stats.vocabulary, stats.r0):
            assert r == sum(t in s for s in tags) / 40
        x = rng.normal(size=3)
        assert annotate(ref, stats, np.eye(3), x, 15) == annotate(ref, stats, np.eye(3), x, 15)


class TestF1:
    def test_symmetric(self):
        assert f1_from_counts(1, 1, 1) == 0.5

    def test_zero_over_zero(self):
        assert f1_from_counts(0, 0, 0) == 0.0

    def test_hand_example(self):
        assert f1_from_counts(3, 2, 1) == pytest.approx(2 / 3, abs=1e-15)

    def test_per_tag_and_macro(self):
        truth = [frozenset({1}), frozenset({1}), frozenset({1}), frozenset({1}), frozenset(),
                 frozenset()]
        pred = [frozenset({1}), frozenset({1}), frozenset({1}), frozenset(), frozenset({1}),
                frozenset({1, 2})]
        per, macro = f1_scores(pred, truth, [1, 2])
        assert per[1] == pytest.approx(2 / 3, abs=1e-15) and per[2] == 0.0
        assert macro == pytest.approx(1 / 3, abs=1e-15)

    def test_range(self, rng):
        pred = [frozenset(rng.choice(4, rng.integers(0, 4), replace=False).tolist())
                for _ in range(30)]
        truth = [frozenset(rng.choice(4, rng.integers(0, 4), replace=False).tolist())
                 for _ in range(30)]
        per, macro = f1_scores(pred, truth, range(4))
        assert all(0.0 <= v <= 1.0 for v in per.values()) and 0.0 <= macro <= 1.0


class TestHistogram:
    def test_accounting_and_range(self, rng):
        ds = LabeledDataset(rng.normal(size=(3, 50)), rng.integers(0, 2, 50))
        h = pair_histogram(ds, np.eye(3), n_pairs=1000, bins=20, seed=3)
        assert h.counts_within.sum() + h.counts_between.sum() == 1000 == h.n_pairs
        assert h.edges[0] == 0.0 and h.edges[-1] == 1.0 and len(h.edges) == 21
        assert h.normalizer > 0

    def test_duplicate_pair_lowest_bin(self):
        ds = LabeledDataset([[0.0, 0.0, 5.0]], [0, 0, 1])
        h = pair_histogram(ds, np.eye(1), n_pairs=500, bins=10, seed=0)
        # pairs of the two duplicates are the only same-class pairs
        assert h.counts_within[0] == h.counts_within.sum() > 0

    def test_all_identical_warns(self):
        ds = LabeledDataset(np.ones((2, 5)), [0, 1, 0, 1, 0])
        with pytest.warns(DegenerateDataWarning):
            h = pair_histogram(ds, np.eye(2), n_pairs=50, bins=5)
        assert h.normalizer == 0.0
        assert h.counts_within[0] + h.counts_between[0] == 50

    def test_seeded(self, rng):
        ds = LabeledDataset(rng.normal(size=(2, 30)), rng.integers(0, 2, 30))
        a = pair_histogram(ds, np.eye(2), 300, 8, seed=5)
        b = pair_histogram(ds, np.eye(2), 300, 8, seed=5)
        np.testing.assert_array_equal(a.counts_within, b.counts_within)

    def test_csv(self, tmp_path, rng):
        ds = LabeledDataset(rng.normal(size=(2, 30)), rng.integers(0, 2, 30))
        pair_histogram(ds, np.eye(2), 100, 4).to_csv(tmp_path / "h.csv")
        lines = (tmp_path / "h.csv").read_text().splitlines()
        assert lines[0] == "bin_lo,bin_hi,count_within,count_between" and len(lines) == 5


class TestSubspaceDistance:
    def test_self(self, rng):
        W = random_orthonormal(rng, 5, 2)
        assert subspace_distance(W, W) <= 1e-14

    def test_rotation_invariance(self, rng):
        W = random_orthonormal(rng, 6, 3)
        Q = random_orthonormal(rng, 3, 3)
        assert subspace_distance(W, W @ Q) <= 1e-10

    def test_orthogonal_axes(self):
        assert subspace_distance([[1.0], [0.0]], [[0.0], [1.0]]) == pytest.approx(math.sqrt(2),
                                                                                  abs=1e-15)

    def test_matches_projector_difference(self, rng):
        for _ in range(20):
            A, B = random_orthonormal(rng, 7, 3), random_orthonormal(rng, 7, 3)
            ref = np.linalg.norm(A @ A.T - B @ B.T)
            assert subspace_distance(A, B) == pytest.approx(ref, rel=1e-10)
            assert subspace_distance(A, B) == pytest.approx(subspace_distance(B, A), rel=1e-12)

    def test_not_orthonormal(self):
        with pytest.raises(NotOrthonormal):
            subspace_distance([[2.0], [0.0]], [[1.0], [0.0]])


def test_projection_csv(tmp_path):
    ds = LabeledDataset([[1.0, 2.0], [3.0, 4.0]], [0, 1])
    write_projection_csv(ds, MetricModel(np.array([[1.0], [1.0]])), tmp_path / "p.csv")
    assert (tmp_path / "p.csv").read_text().splitlines() == ["label,p1", "0,4", "1,6"]
