"""Using a learned metric: distances, nearest-neighbour rules and diagnostics."""
from __future__ import annotations

import csv
import warnings
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.spatial.distance import cdist

from .dataset import CATEGORICAL, LabeledDataset
from .errors import DegenerateDataWarning, EmptyReference, NotOrthonormal, ShapeMismatch
from .model import MetricModel


def _W(model) -> np.ndarray:
    return model.W if isinstance(model, MetricModel) else np.asarray(model, dtype=np.float64)


def mdist(model, x, y) -> float:
    """``||W^T (x - y)||``, the Mahalanobis distance with ``Q = W W^T``."""
    W = _W(model)
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if x.shape != y.shape or x.shape[0] != W.shape[0]:
        raise ShapeMismatch(f"vectors {x.shape}, {y.shape} vs metric dimension {W.shape[0]}")
    return float(np.linalg.norm(W.T @ (x - y)))


def _ref_distances(ref: LabeledDataset, model, X: np.ndarray) -> np.ndarray:
    """Distances from each query column of X (d x m) to every reference sample."""
    if ref.n_samples == 0:
        raise EmptyReference("reference set is empty")
    W = _W(model)
    if X.shape[0] != W.shape[0] or ref.dim != W.shape[0]:
        raise ShapeMismatch("query, reference and metric dimensions differ")
    return cdist((W.T @ X).T, (W.T @ ref.features).T)


def _nearest(dist_row: np.ndarray, k: int) -> np.ndarray:
    # stable sort on positions; reference positions are in ascending sample-id order
    return np.argsort(dist_row, kind="stable")[:k]


def knn_classify(ref: LabeledDataset, model, x, k: int = 1) -> int:
    """Majority label of the k nearest references.

    Vote ties go to the label with the smaller summed distance, then the
    smaller label id.
    """
    return int(knn_classify_batch(ref, model, np.asarray(x, dtype=np.float64).reshape(-1, 1), k)[0])


def knn_classify_batch(ref: LabeledDataset, model, X: np.ndarray, k: int = 1) -> np.ndarray:
    if ref.mode != CATEGORICAL:
        raise ValueError("knn classification needs categorical labels")
    if ref.n_samples == 0:
        raise EmptyReference("reference set is empty")
    if not 1 <= k <= ref.n_samples:
        raise ValueError(f"k={k} must lie in [1, {ref.n_samples}]")
    # sort references by sample id so stable ordering equals id ordering
    order = np.argsort(ref.sample_ids, kind="stable")
    D = _ref_distances(ref, model, X)[:, order]
    labels = ref.labels[order]
    out = np.empty(X.shape[1], dtype=np.int64)
    for m, row in enumerate(D):
        nn = _nearest(row, k)
        if k == 1:
            out[m] = labels[nn[0]]
            continue
        votes = Counter()
        dsum = Counter()
        for j in nn:
            votes[labels[j]] += 1
            dsum[labels[j]] += row[j]
        out[m] = min(votes, key=lambda lab: (-votes[lab], dsum[lab], lab))
    return out


def knn_accuracy(ref: LabeledDataset, model, test: LabeledDataset, k: int = 1) -> float:
    pred = knn_classify_batch(ref, model, test.features, k)
    return float(np.mean(pred == test.labels))


@dataclass(frozen=True)
class TagStats:
    vocabulary: tuple[int, ...]
    r0: np.ndarray

    def __post_init__(self):
        if not self.vocabulary:
            raise ValueError("tag vocabulary is empty")


def tag_stats(ref: LabeledDataset, vocabulary: Sequence[int] | None = None) -> TagStats:
    """Background rate of each tag over the reference set."""
    vocab = tuple(ref.vocabulary() if vocabulary is None else vocabulary)
    T = ref.tag_matrix(vocab)
    return TagStats(vocab, T.mean(axis=0))


def annotate(ref: LabeledDataset, stats: TagStats, model, x, k: int = 15) -> frozenset:
    """Tags whose rate among the k nearest references strictly exceeds the background rate."""
    return annotate_batch(ref, stats, model, np.asarray(x, dtype=np.float64).reshape(-1, 1), k)[0]


def annotate_batch(ref: LabeledDataset, stats: TagStats, model, X: np.ndarray,
                   k: int = 15) -> list[frozenset]:
    if ref.n_samples == 0:
        raise EmptyReference("reference set is empty")
    if k < 1:
        raise ValueError("k must be >= 1")
    k = min(k, ref.n_samples)
    order = np.argsort(ref.sample_ids, kind="stable")
    D = _ref_distances(ref, model, X)[:, order]
    T = ref.tag_matrix(stats.vocabulary)[order]
    vocab = np.array(stats.vocabulary)
    out = []
    for row in D:
        r1 = T[_nearest(row, k)].mean(axis=0)
        out.append(frozenset(int(t) for t in vocab[r1 > stats.r0]))
    return out


def f1_scores(pred: Sequence[frozenset], truth: Sequence[frozenset],
              vocabulary: Sequence[int] | None = None) -> tuple[dict, float]:
    """Per-tag F1 and their unweighted mean; 0/0 cases score 0."""
    if len(pred) != len(truth):
        raise ShapeMismatch(f"{len(pred)} predictions for {len(truth)} samples")
    if vocabulary is None:
        vocabulary = sorted(set().union(*truth, *pred)) if truth else []
    scores = {}
    for t in vocabulary:
        tp = sum(1 for p, g in zip(pred, truth) if t in p and t in g)
        fp = sum(1 for p, g in zip(pred, truth) if t in p and t not in g)
        fn = sum(1 for p, g in zip(pred, truth) if t not in p and t in g)
        scores[t] = f1_from_counts(tp, fp, fn)
    macro = float(np.mean(list(scores.values()))) if scores else 0.0
    return scores, macro


def f1_from_counts(tp: int, fp: int, fn: int) -> float:
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


@dataclass
class Histogram:
    edges: np.ndarray
    counts_within: np.ndarray
    counts_between: np.ndarray
    n_pairs: int
    normalizer: float
    mean_within: float = float("nan")
    mean_between: float = float("nan")

    def to_csv(self, path) -> None:
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["bin_lo", "bin_hi", "count_within", "count_between"])
            for b in range(len(self.counts_within)):
                w.writerow([format(self.edges[b], ".17g"), format(self.edges[b + 1], ".17g"),
                            int(self.counts_within[b]), int(self.counts_between[b])])


def sample_pairs(n: int, n_pairs: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Uniform pairs with distinct endpoints, drawn with replacement."""
    i = rng.integers(0, n, n_pairs)
    j = rng.integers(0, n - 1, n_pairs)
    j = j + (j >= i)
    return i, j


def pair_histogram(ds: LabeledDataset, model, n_pairs: int = 10000, bins: int = 50,
                   seed: int = 0) -> Histogram:
    """Histograms of max-normalized distances for same-class and cross-class pairs.

    Bins are half-open ``[lo, hi)`` except the last, which includes 1.
    """
    if ds.n_samples < 2:
        raise ValueError("need at least two samples")
    rng = np.random.default_rng(seed)
    i, j = sample_pairs(ds.n_samples, n_pairs, rng)
    Z = _W(model).T @ ds.features
    dist = np.linalg.norm(Z[:, i] - Z[:, j], axis=0)
    norm = float(dist.max()) if n_pairs else 0.0
    if norm > 0:
        v = dist / norm
    else:
        warnings.warn("all sampled distances are zero", DegenerateDataWarning, stacklevel=2)
        v = np.zeros_like(dist)
    if ds.mode == CATEGORICAL:
        same = ds.labels[i] == ds.labels[j]
    else:
        same = np.array([bool(ds.labels[a] & ds.labels[b]) for a, b in zip(i, j)], dtype=bool)
    idx = np.minimum((v * bins).astype(np.int64), bins - 1)
    cw = np.bincount(idx[same], minlength=bins)
    cb = np.bincount(idx[~same], minlength=bins)
    return Histogram(np.linspace(0.0, 1.0, bins + 1), cw, cb, int(n_pairs), norm,
                     float(v[same].mean()) if same.any() else float("nan"),
                     float(v[~same].mean()) if (~same).any() else float("nan"))


def write_projection_csv(ds: LabeledDataset, model, path) -> None:
    Z = _W(model).T @ ds.features
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["label"] + [f"p{c + 1}" for c in range(Z.shape[0])])
        for n in range(ds.n_samples):
            lab = ";".join(map(str, sorted(ds.labels[n]))) if ds.mode != CATEGORICAL \
                else str(int(ds.labels[n]))
            w.writerow([lab] + [format(float(v), ".17g") for v in Z[:, n]])


def subspace_distance(W1, W2, tol: float = 1e-6) -> float:
    """Frobenius distance between the orthogonal projectors onto span(W1) and span(W2)."""
    W1 = np.asarray(W1, dtype=np.float64)
    W2 = np.asarray(W2, dtype=np.float64)
    if W1.shape != W2.shape:
        raise ShapeMismatch(f"shapes differ: {W1.shape} vs {W2.shape}")
    q = W1.shape[1]
    for W in (W1, W2):
        if np.linalg.norm(W.T @ W - np.eye(q)) > tol:
            raise NotOrthonormal("columns are not orthonormal")
    # for equal-rank projectors ||P1 - P2||_F^2 = 2 ||(I - P1) W2||_F^2
    resid = W2 - W1 @ (W1.T @ W2)
    return float(np.sqrt(2.0) * np.linalg.norm(resid))
