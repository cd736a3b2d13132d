"""Combining subset solutions into one global projection.

Two rules are available:

* inverse-weighted (``adml1``): solve ``(sum_k R_k) W_A = sum_k R_k W_k``;
* SVD-orthogonalized (``adml2``): ``W_A D V^T = sum_k R_k W_k``.

``bound_report`` evaluates the consistency bounds that relate
``||W_A - W_hat||`` to ``max_k ||W_k - W_hat||`` for a target ``W_hat``.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la

from .errors import (MissingDense, RankDeficientWarning, ShapeMismatch, SingularAggregate,
                     ZeroAggregate)
from .patch import ScatterRep
from .solver import canonicalize_signs

HOLDS = "holds"
VIOLATED = "violated"
NOT_APPLICABLE = "n/a"


@dataclass
class AggregationInput:
    """Per-subset pieces needed by the aggregation rules, in subset order."""

    P: list[np.ndarray]
    W: list[np.ndarray]
    R: list[np.ndarray] | None = None
    subset_ids: list[int] | None = None

    def __post_init__(self):
        if not self.P:
            raise ValueError("aggregation needs at least one subset")
        shape = self.P[0].shape
        if any(p.shape != shape for p in self.P) or any(w.shape != shape for w in self.W):
            raise ShapeMismatch("all P_k and W_k must share one (d, q) shape")
        if len(self.W) != len(self.P):
            raise ShapeMismatch("P and W lists differ in length")
        if self.R is not None:
            d = shape[0]
            if len(self.R) != len(self.P) or any(r.shape != (d, d) for r in self.R):
                raise ShapeMismatch("dense R_k must be d x d, one per subset")

    @property
    def K(self) -> int:
        return len(self.P)

    def fold_P(self) -> np.ndarray:
        """``sum_k P_k`` folded in list order."""
        M = np.zeros_like(self.P[0])
        for p in self.P:
            M = M + p
        return M

    def aligned(self) -> "AggregationInput":
        """Copy with each subset's column signs matched to the first subset.

        Eigenvectors are only defined up to sign; summing ``R_k W_k`` with
        inconsistent signs cancels columns. Flipping a column of ``W_k``
        flips the same column of ``P_k``.
        """
        ref = self.W[0]
        P, W = [], []
        for p, w in zip(self.P, self.W):
            s = np.sign(np.sum(ref * w, axis=0))
            s[s == 0] = 1.0
            P.append(p * s)
            W.append(w * s)
        return AggregationInput(P, W, self.R, self.subset_ids)

    def fold_R(self) -> np.ndarray:
        if self.R is None:
            raise MissingDense("dense R_k were not collected")
        R = np.zeros_like(self.R[0])
        for r in self.R:
            R = R + r
        return R


def compute_pk(scatter: ScatterRep, W: np.ndarray) -> np.ndarray:
    """``R_k W_k`` evaluated right-to-left as ``X_k (L_k (X_k^T W_k))``."""
    W = np.asarray(W, dtype=np.float64)
    if W.ndim != 2 or W.shape[0] != scatter.dim:
        raise ShapeMismatch(f"W has shape {W.shape}, scatter dimension is {scatter.dim}")
    return np.asarray(scatter.apply(W))


def aggregate_inverse(inputs: AggregationInput) -> np.ndarray:
    R = inputs.fold_R()
    s = la.svdvals(R)
    if s[0] == 0 or s[-1] <= 1e-10 * s[0]:
        raise SingularAggregate(
            f"sum of R_k is numerically singular (sigma_min/sigma_max = "
            f"{(s[-1] / s[0]) if s[0] else 0.0:.3g}); use the SVD rule (adml2)")
    return la.solve(R, inputs.fold_P(), assume_a="sym")


def aggregate_svd(inputs: AggregationInput) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Thin SVD of ``sum_k P_k``; returns ``(W_A, D, V)`` with ``M = W_A diag(D) V^T``."""
    M = inputs.fold_P()
    if not np.any(M):
        raise ZeroAggregate("sum of R_k W_k is exactly zero")
    U, D, Vt = la.svd(M, full_matrices=False)
    W_A = canonicalize_signs(U)
    flip = np.sign(np.sum(W_A * U, axis=0))
    V = Vt.T * flip
    if D[-1] <= 1e-12 * D[0]:
        warnings.warn("aggregated matrix is rank deficient; S3 is undefined", RankDeficientWarning,
                      stacklevel=2)
    return W_A, D, V


@dataclass
class BoundReport:
    K: int
    S1: float
    S2: float
    S3: float
    lhs: float
    max_dev: float
    rhs1: float
    rhs2: float
    rhs3: float
    rhs3_corrected: float
    min_diag_D: float
    flags: dict = field(default_factory=dict)

    _KEYS = ("K", "S1", "S2", "S3", "lhs", "max_dev", "rhs1", "rhs2", "rhs3", "rhs3_corrected",
             "min_diag_D")
    _FLAGS = ("bound1", "bound2", "bound3", "bound3_corrected")

    def as_dict(self) -> dict:
        out = {k: getattr(self, k) for k in self._KEYS}
        out.update({k: self.flags.get(k, NOT_APPLICABLE) for k in self._FLAGS})
        return out

    def to_text(self) -> str:
        return "\n".join(f"{k}={_fmt(v)}" for k, v in self.as_dict().items())

    def csv_header(self) -> str:
        return ",".join(self.as_dict())

    def csv_row(self) -> str:
        return ",".join(_fmt(v) for v in self.as_dict().values())


def _fmt(v) -> str:
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


# absolute slack for floating-point noise in lhs when the bound is exactly 0
FLAG_SLACK = 1e-10


def _flag(lhs: float, rhs: float) -> str:
    if not np.isfinite(rhs):
        return NOT_APPLICABLE
    return HOLDS if lhs <= rhs + FLAG_SLACK else VIOLATED


def bound_report(inputs: AggregationInput, W_A: np.ndarray, target: np.ndarray,
                 D: np.ndarray | None = None, align_target: bool = True) -> BoundReport:
    """Evaluate the consistency bounds for one aggregated solution.

    Pass ``D`` (singular values from :func:`aggregate_svd`) when ``W_A`` came
    from the SVD rule; otherwise ``W_A`` is taken as the inverse-rule result.
    All constants use singular values, so indefinite ``R_k`` are handled.
    With ``align_target`` the target's column signs are matched to ``W_A``
    first (same metric, smaller spurious deviation).
    """
    if inputs.R is None:
        raise MissingDense("bound diagnostics need the dense R_k of every subset")
    K = inputs.K
    R = inputs.fold_R()
    s_R = la.svdvals(R)
    sig_max_k = np.array([la.norm(r, 2) for r in inputs.R])
    lam_min_k = np.array([la.eigvalsh(r)[0] for r in inputs.R])

    S1 = K * sig_max_k.max() / s_R[-1] if s_R[-1] > 0 else float("inf")
    S2 = sig_max_k.max() / lam_min_k.min() if np.all(lam_min_k > 0) else float("inf")
    min_D = float(D.min()) if D is not None else float("nan")
    if D is not None and min_D > 1e-12 * float(D.max()):
        S3 = s_R[0] / min_D
    else:
        S3 = float("inf")

    if align_target:
        s = np.sign(np.sum(W_A * target, axis=0))
        s[s == 0] = 1.0
        target = target * s
    lhs = float(la.norm(W_A - target, 2))
    max_dev = max(float(la.norm(w - target, 2)) for w in inputs.W)
    rhs1 = S1 * max_dev
    rhs2 = S2 * max_dev
    rhs3 = K * S3 * max_dev + S3 + 1
    if np.isfinite(S3):
        rhs3_corr = sig_max_k.sum() * max_dev / min_D + s_R[0] / min_D + 1
    else:
        rhs3_corr = float("inf")

    if D is None:
        flags = {"bound1": _flag(lhs, rhs1), "bound2": _flag(lhs, rhs2)}
    else:
        flags = {"bound3": _flag(lhs, rhs3), "bound3_corrected": _flag(lhs, rhs3_corr)}
    return BoundReport(K, float(S1), float(S2), float(S3), lhs, max_dev, float(rhs1), float(rhs2),
                       float(rhs3), float(rhs3_corr), min_D, flags)
