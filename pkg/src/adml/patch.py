"""Discriminative patches and the subset scatter operator.

A patch around sample ``i`` holds its ``k_W`` nearest same-class and
``k_B`` nearest other-class neighbours. Each patch contributes a small
penalty matrix whose quadratic form is

    sum_within ||W^T (x_i - x_j)||^2 - beta * sum_between ||W^T (x_i - x_j)||^2

and the penalties of all patches in a subset add up to a sparse N_k x N_k
matrix ``L_k`` with ``R_k = X_k L_k X_k^T``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.spatial.distance import cdist

from .dataset import LabeledDataset
from .errors import NoBetweenClass, SubsetDegenerate

DENSE = "dense"
FACTORED = "factored"


@dataclass(frozen=True)
class PatchSpec:
    k_W: int = 10
    k_B: int = 20
    beta: float = 0.1

    def __post_init__(self):
        if self.k_W < 0 or self.k_B < 1 or self.beta <= 0:
            raise ValueError(f"invalid patch spec {self}: need k_W >= 0, k_B >= 1, beta > 0")


@dataclass(frozen=True)
class Patch:
    center: int
    within: tuple[int, ...]
    between: tuple[int, ...]
    omega: np.ndarray

    @property
    def indices(self) -> list[int]:
        """Patch members in penalty-matrix order: centre, within, between."""
        return [self.center, *self.within, *self.between]


@dataclass
class ScatterRep:
    """Subset scatter ``R_k``, dense or factored as ``(X_k, L_k)``."""

    X: np.ndarray
    L: sp.csr_matrix | None = None
    R: np.ndarray | None = None
    n_skipped: int = 0

    @property
    def is_factored(self) -> bool:
        return self.L is not None

    @property
    def dim(self) -> int:
        return self.X.shape[0]

    @property
    def n_samples(self) -> int:
        return self.X.shape[1]

    def dense(self) -> np.ndarray:
        if self.R is not None:
            return self.R
        return _dense_scatter(self.X, self.L)

    def apply(self, W: np.ndarray) -> np.ndarray:
        """``R_k @ W`` without materializing a d x d matrix when factored."""
        if self.L is not None:
            return self.X @ (self.L @ (self.X.T @ W))
        return self.R @ W


def _dense_scatter(X: np.ndarray, L: sp.spmatrix) -> np.ndarray:
    R = X @ (L @ X.T)
    return (R + R.T) / 2


def _neighbour_lists(dist: np.ndarray, same: np.ndarray, spec: PatchSpec, centre_idx=None):
    """Vectorized neighbour selection for every row of a distance matrix.

    Returns (centres, neighbours, weights, has_between) where the first three
    are flat arrays of patch edges, ordered by centre, then within before
    between, then ascending distance (ties by index). Row ``r`` is the
    patch of sample ``centre_idx[r]`` (default: ``r``).
    """
    n = dist.shape[0]
    order = np.argsort(dist, axis=1, kind="stable")
    rows = np.arange(n)[:, None]
    if centre_idx is None:
        centre_idx = np.arange(n)
    same_sorted = same[rows, order]
    not_self = order != np.asarray(centre_idx)[:, None]
    is_w = same_sorted & not_self
    is_b = ~same_sorted & not_self
    take_w = is_w & (np.cumsum(is_w, axis=1) <= spec.k_W)
    take_b = is_b & (np.cumsum(is_b, axis=1) <= spec.k_B)
    has_between = take_b.any(axis=1)
    take_w &= has_between[:, None]

    ci_w, pos_w = np.nonzero(take_w)
    ci_b, pos_b = np.nonzero(take_b)
    centres = np.concatenate([ci_w, ci_b])
    neigh = np.concatenate([order[ci_w, pos_w], order[ci_b, pos_b]])
    weights = np.concatenate([np.ones(len(ci_w)), np.full(len(ci_b), -spec.beta)])
    # group edges by centre, keeping within-before-between and distance order
    key = np.argsort(centres, kind="stable")
    return centres[key], neigh[key], weights[key], has_between


def find_patch(subset: LabeledDataset, i: int, spec: PatchSpec) -> Patch:
    """Patch around the sample at position ``i`` of ``subset``."""
    X = subset.features
    dist = cdist(X[:, i:i + 1].T, X.T, "sqeuclidean")
    same = subset.same_class()[i:i + 1]
    _, nb, w, has_between = _neighbour_lists(dist, same, spec, centre_idx=[i])
    if not has_between[0]:
        raise NoBetweenClass(f"sample {i} has no other-class neighbour in its subset")
    within = tuple(int(j) for j, wt in zip(nb, w) if wt > 0)
    between = tuple(int(j) for j, wt in zip(nb, w) if wt < 0)
    return Patch(i, within, between, w.copy())


def build_local_penalty(patch: Patch) -> np.ndarray:
    """(m+1) x (m+1) penalty matrix of one patch; row/col 0 is the centre."""
    omega = np.asarray(patch.omega, dtype=np.float64)
    if omega.size < 1:
        raise ValueError("patch has no neighbours")
    m = omega.size
    Li = np.zeros((m + 1, m + 1))
    Li[0, 0] = omega.sum()
    Li[0, 1:] = -omega
    Li[1:, 0] = -omega
    Li[1:, 1:] = np.diag(omega)
    return Li


def penalty_matrix(subset: LabeledDataset, spec: PatchSpec) -> tuple[sp.csr_matrix, int]:
    """Sparse ``L_k`` summed over all valid patches, plus the count of skipped samples."""
    X = subset.features
    n = X.shape[1]
    dist = cdist(X.T, X.T, "sqeuclidean")
    centres, neigh, w, has_between = _neighbour_lists(dist, subset.same_class(), spec)
    n_skipped = int(n - has_between.sum())
    if n_skipped == n:
        raise SubsetDegenerate("no sample in the subset has an other-class neighbour")
    centre_sum = np.bincount(centres, weights=w, minlength=n)
    rows = np.concatenate([np.arange(n), centres, neigh, neigh])
    cols = np.concatenate([np.arange(n), neigh, centres, neigh])
    data = np.concatenate([centre_sum, -w, -w, w])
    L = sp.coo_matrix((data, (rows, cols)), shape=(n, n)).tocsr()
    L.sum_duplicates()
    return L, n_skipped


def accumulate_scatter(subset: LabeledDataset, spec: PatchSpec, mode: str = FACTORED) -> ScatterRep:
    """Scatter of a subset in dense (``R_k``) or factored (``X_k``, ``L_k``) form.

    Samples without an other-class neighbour are skipped and tallied in
    ``n_skipped``; ``SubsetDegenerate`` is raised when every sample is skipped.
    """
    L, n_skipped = penalty_matrix(subset, spec)
    X = subset.features
    if mode == FACTORED:
        return ScatterRep(X, L=L, n_skipped=n_skipped)
    if mode == DENSE:
        return ScatterRep(X, R=_dense_scatter(X, L), n_skipped=n_skipped)
    raise ValueError(f"unknown scatter mode {mode!r}")

