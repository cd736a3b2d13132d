"""Labelled datasets: CSV ingestion, normalization, synthetic data and splits.

Features are stored feature-major, ``features[:, j]`` is sample ``j``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import EmptyFile, InvalidK, MalformedRow, NonNumericFeature

CATEGORICAL = "categorical"
MULTILABEL = "multilabel"


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class LabeledDataset:
    """Immutable d x N feature matrix with per-sample labels.

    In categorical mode ``labels`` is an int array of class ids. In
    multilabel mode it is a tuple of frozensets of tag ids.
    """

    features: np.ndarray
    labels: object
    mode: str = CATEGORICAL
    sample_ids: np.ndarray = None

    def __post_init__(self):
        X = np.asarray(self.features, dtype=np.float64)
        # N = 0 is allowed so that empty reference sets reach EmptyReference
        if X.ndim != 2 or X.shape[0] < 1:
            raise ValueError(f"features must be a d x N matrix with d >= 1, got shape {X.shape}")
        if not np.all(np.isfinite(X)):
            raise NonNumericFeature("features contain NaN or Inf")
        n = X.shape[1]
        if self.mode == CATEGORICAL:
            labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)
            labels = _readonly(labels)
        elif self.mode == MULTILABEL:
            labels = tuple(frozenset(int(t) for t in tags) for tags in self.labels)
            if any(len(tags) == 0 for tags in labels):
                raise ValueError("every multilabel sample needs at least one tag")
        else:
            raise ValueError(f"unknown label mode {self.mode!r}")
        if len(labels) != n:
            raise ValueError(f"{len(labels)} labels for {n} samples")
        ids = np.arange(n) if self.sample_ids is None else self.sample_ids
        ids = np.asarray(ids, dtype=np.int64).reshape(-1)
        if len(ids) != n:
            raise ValueError("sample_ids length does not match sample count")
        object.__setattr__(self, "features", _readonly(X))
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "sample_ids", _readonly(ids))

    @property
    def dim(self) -> int:
        return self.features.shape[0]

    @property
    def n_samples(self) -> int:
        return self.features.shape[1]

    def __len__(self):
        return self.n_samples

    def subset(self, positions) -> "LabeledDataset":
        """View of the samples at ``positions`` (keeps their sample ids)."""
        positions = np.asarray(positions, dtype=np.int64)
        if self.mode == CATEGORICAL:
            labels = self.labels[positions]
        else:
            labels = [self.labels[p] for p in positions]
        return LabeledDataset(self.features[:, positions], labels, self.mode,
                              self.sample_ids[positions])

    def with_features(self, features: np.ndarray) -> "LabeledDataset":
        return LabeledDataset(features, self.labels, self.mode, self.sample_ids)

    def vocabulary(self) -> list[int]:
        if self.mode == CATEGORICAL:
            return sorted(set(self.labels.tolist()))
        return sorted(set().union(*self.labels))

    def tag_matrix(self, vocabulary: Sequence[int] | None = None) -> np.ndarray:
        """N x T boolean indicator matrix (one column per class or tag)."""
        vocab = self.vocabulary() if vocabulary is None else list(vocabulary)
        col = {t: c for c, t in enumerate(vocab)}
        out = np.zeros((self.n_samples, len(vocab)), dtype=bool)
        if self.mode == CATEGORICAL:
            for j, lab in enumerate(self.labels.tolist()):
                if lab in col:
                    out[j, col[lab]] = True
        else:
            for j, tags in enumerate(self.labels):
                for t in tags:
                    if t in col:
                        out[j, col[t]] = True
        return out

    def same_class(self) -> np.ndarray:
        """N x N boolean matrix; multilabel samples match when they share a tag."""
        if self.mode == CATEGORICAL:
            return self.labels[:, None] == self.labels[None, :]
        T = self.tag_matrix().astype(np.float64)
        return (T @ T.T) > 0


# ---------------------------------------------------------------------------
# CSV


def load_csv(path, mode: str = CATEGORICAL) -> LabeledDataset:
    """Read ``label,f1,...,fd`` rows (``tags`` column ``;``-separated in multilabel mode)."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows:
        raise EmptyFile(f"{path}: empty file")
    header, body = rows[0], rows[1:]
    d = len(header) - 1
    if d < 1:
        raise MalformedRow(f"{path}: header needs a label column and at least one feature")
    if not body:
        raise EmptyFile(f"{path}: header but no data rows")

    feats = np.empty((d, len(body)))
    labels = []
    for n, row in enumerate(body):
        lineno = n + 2
        if len(row) != d + 1:
            raise MalformedRow(f"{path}:{lineno}: expected {d + 1} columns, got {len(row)}")
        try:
            values = [float(c) for c in row[1:]]
        except ValueError as exc:
            raise NonNumericFeature(f"{path}:{lineno}: {exc}") from None
        if not all(math.isfinite(v) for v in values):
            raise NonNumericFeature(f"{path}:{lineno}: NaN or Inf feature")
        feats[:, n] = values
        try:
            if mode == MULTILABEL:
                tags = frozenset(int(t) for t in row[0].split(";") if t.strip())
                if not tags:
                    raise MalformedRow(f"{path}:{lineno}: sample without tags")
                labels.append(tags)
            else:
                labels.append(int(row[0]))
        except ValueError:
            raise MalformedRow(f"{path}:{lineno}: bad label {row[0]!r}") from None
    return LabeledDataset(feats, labels, mode)


def write_csv(ds: LabeledDataset, path) -> None:
    first = "tags" if ds.mode == MULTILABEL else "label"
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([first] + [f"f{i + 1}" for i in range(ds.dim)])
        for j in range(ds.n_samples):
            if ds.mode == MULTILABEL:
                lab = ";".join(str(t) for t in sorted(ds.labels[j]))
            else:
                lab = str(int(ds.labels[j]))
            w.writerow([lab] + [repr(float(v)) for v in ds.features[:, j]])


# ---------------------------------------------------------------------------
# Normalization


@dataclass(frozen=True)
class NormStats:
    mean: np.ndarray
    scale: np.ndarray

    def apply(self, ds: LabeledDataset) -> LabeledDataset:
        return ds.with_features(self.transform(ds.features))

    def transform(self, features: np.ndarray) -> np.ndarray:
        return (features - self.mean[:, None]) / self.scale[:, None]


def normalize(ds: LabeledDataset) -> tuple[LabeledDataset, NormStats]:
    """Z-score each feature row (sample std, N-1 denominator).

    Zero-variance features get scale 1 and therefore map to zeros.
    """
    if ds.n_samples < 2:
        raise ValueError("normalize needs at least two samples")
    X = ds.features
    mean = X.mean(axis=1)
    scale = X.std(axis=1, ddof=1)
    scale = np.where(scale > 0, scale, 1.0)
    stats = NormStats(mean, scale)
    return stats.apply(ds), stats


# ---------------------------------------------------------------------------
# Synthetic data


def gen_coiled_surfaces(n_per_class: int = 1000, noise_sigma: float = 0.05,
                        z_halfwidth: float = 1.5, turns: float = 1.0,
                        seed: int = 0) -> LabeledDataset:
    """Two interleaved spiral sheets in 3-D, extruded along z.

    Class ``c`` follows ``r = 0.25 + 0.15 t`` rotated by ``c * pi``; z is
    uniform noise with a wider range than the x/y extent for the defaults.
    """
    if n_per_class < 1:
        raise ValueError("n_per_class must be >= 1")
    if noise_sigma < 0 or z_halfwidth <= 0 or turns <= 0:
        raise ValueError("need noise_sigma >= 0, z_halfwidth > 0, turns > 0")
    rng = np.random.default_rng(seed)
    blocks = []
    for c in (0, 1):
        t = rng.uniform(0.0, 2.0 * np.pi * turns, n_per_class)
        r = 0.25 + 0.15 * t
        eps = rng.normal(0.0, noise_sigma, (2, n_per_class)) if noise_sigma > 0 \
            else np.zeros((2, n_per_class))
        x = r * np.cos(t + c * np.pi) + eps[0]
        y = r * np.sin(t + c * np.pi) + eps[1]
        z = rng.uniform(-z_halfwidth, z_halfwidth, n_per_class)
        blocks.append(np.vstack([x, y, z]))
    labels = np.repeat([0, 1], n_per_class)
    return LabeledDataset(np.hstack(blocks), labels)


# ---------------------------------------------------------------------------
# Splitting


@dataclass(frozen=True)
class SplitPlan:
    K: int
    seed: int
    assignment: np.ndarray = field(repr=False)  # sample position -> subset id in 1..K

    def members(self, k: int) -> np.ndarray:
        return np.flatnonzero(self.assignment == k)


def random_split(ds: LabeledDataset, K: int | None = None, subset_size: int | None = None,
                 seed: int = 0) -> tuple[list[LabeledDataset], SplitPlan]:
    """Seeded uniform partition into K subsets whose sizes differ by at most one.

    Exactly one of ``K`` and ``subset_size`` is given; ``subset_size`` implies
    ``K = ceil(N / subset_size)``. Each subset keeps samples in ascending
    position order.
    """
    n = ds.n_samples
    if (K is None) == (subset_size is None):
        raise ValueError("give exactly one of K and subset_size")
    if subset_size is not None:
        if subset_size < 1:
            raise InvalidK(f"subset_size must be >= 1, got {subset_size}")
        K = -(-n // subset_size)
    if K < 1 or K > n:
        raise InvalidK(f"K={K} outside [1, {n}]")
    perm = np.random.default_rng(seed).permutation(n)
    assignment = np.empty(n, dtype=np.int64)
    parts = []
    for k, chunk in enumerate(np.array_split(perm, K), start=1):
        chunk = np.sort(chunk)
        assignment[chunk] = k
        parts.append(ds.subset(chunk))
    return parts, SplitPlan(K, seed, _readonly(assignment))


def train_test_split(ds: LabeledDataset, test_fraction: float = 0.5,
                     seed: int = 0) -> tuple[LabeledDataset, LabeledDataset]:
    perm = np.random.default_rng(seed).permutation(ds.n_samples)
    n_test = int(round(test_fraction * ds.n_samples))
    return ds.subset(np.sort(perm[n_test:])), ds.subset(np.sort(perm[:n_test]))
