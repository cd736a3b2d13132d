"""Smallest-eigenvalue subspaces of subset scatter operators.

Two routes produce the same subspace: a direct d x d symmetric
eigendecomposition, and a Gram-space route that works in the N_k x N_k
sample space (``W_k = X_k U_k``) and pays off when d > N_k.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as la

from .errors import BadDimension, GramIllConditioned
from .patch import ScatterRep

DIRECT = "direct"
GRAM = "gram"
AUTO = "auto"

GRAM_COND_LIMIT = 1e12


@dataclass
class SubsetSolution:
    W: np.ndarray
    eigenvalues: np.ndarray
    subset_id: int = 0
    sigma_max: float = float("nan")
    sigma_min: float = float("nan")
    rank: int = 0


def canonicalize_signs(W: np.ndarray) -> np.ndarray:
    """Flip columns so each column's largest-magnitude entry is positive."""
    W = np.array(W, dtype=np.float64, copy=True)
    if W.size == 0:
        return W
    idx = np.argmax(np.abs(W), axis=0)
    signs = np.sign(W[idx, np.arange(W.shape[1])])
    signs[signs == 0] = 1.0
    return W * signs


def _spectrum_diagnostics(lam: np.ndarray, full_rank: bool) -> tuple[float, float, int]:
    mags = np.abs(lam)
    smax = float(mags.max()) if mags.size else 0.0
    tol = smax * max(lam.size, 1) * np.finfo(float).eps
    rank = int(np.count_nonzero(mags > tol))
    smin = float(mags.min()) if (full_rank and mags.size) else 0.0
    return smax, smin, rank


def eigen_smallest(M: np.ndarray, q: int) -> tuple[np.ndarray, np.ndarray]:
    """Unit eigenvectors of the ``q`` algebraically smallest eigenvalues (ascending)."""
    W, lam, _ = _eigen_smallest_full(M, q)
    return W, lam


def _eigen_smallest_full(M, q):
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise BadDimension(f"expected a square matrix, got shape {M.shape}")
    d = M.shape[0]
    if not 1 <= q <= d:
        raise BadDimension(f"q={q} must lie in [1, {d}]")
    M = (M + M.T) / 2
    lam, V = la.eigh(M)
    return canonicalize_signs(V[:, :q]), lam[:q].copy(), lam


def default_ridge(G: np.ndarray) -> float:
    return 1e-8 * float(np.trace(G)) / G.shape[0]


def _solve_gram(scatter: ScatterRep, q: int, ridge: float | None):
    X, L = scatter.X, scatter.L
    d, n = X.shape
    G = X.T @ X
    if ridge is None:
        ridge = default_ridge(G)
    g, E = la.eigh(G)
    g = np.clip(g, 0.0, None)
    g_top = g[-1] if g.size else 0.0
    if g[0] + ridge <= 0 or (g_top + ridge) > GRAM_COND_LIMIT * (g[0] + ridge):
        raise GramIllConditioned(
            f"Gram matrix condition exceeds {GRAM_COND_LIMIT:g}; increase the ridge (now {ridge:g})")
    # drop exact null directions of X_k; they would otherwise add spurious
    # near-zero eigenvalues whenever N_k > d
    keep = g > g_top * max(n, d) * np.finfo(float).eps
    Er, gr = E[:, keep], g[keep]
    r = gr.size
    if q > r:
        raise BadDimension(f"q={q} exceeds the rank {r} of the subset data")
    s = np.sqrt(gr + ridge)
    M = s[:, None] * (Er.T @ (L @ Er)) * s[None, :]
    M = (M + M.T) / 2
    lam_all, V = la.eigh(M)
    U = Er @ (V[:, :q] / s[:, None])
    Wq, _ = np.linalg.qr(X @ U)
    W = canonicalize_signs(Wq)
    Z = X.T @ W
    rayleigh = np.einsum("ij,ij->j", Z, L @ Z)
    return W, rayleigh, lam_all, r == d


def solve_subset(scatter: ScatterRep, q: int, mode: str = AUTO, ridge: float | None = None,
                 subset_id: int = 0) -> SubsetSolution:
    """Minimize ``tr(W^T R_k W)`` over orthonormal d x q ``W``.

    ``mode='auto'`` picks the Gram route when d > N_k and the scatter is
    factored. ``ridge`` only affects the Gram route (default
    ``1e-8 * tr(G) / N_k``).
    """
    d, n = scatter.dim, scatter.n_samples
    if mode == AUTO:
        mode = GRAM if (d > n and scatter.is_factored) else DIRECT
    if mode == DIRECT:
        if q > d:
            raise BadDimension(f"q={q} exceeds d={d}")
        W, lam, lam_all = _eigen_smallest_full(scatter.dense(), q)
        smax, smin, rank = _spectrum_diagnostics(lam_all, full_rank=True)
    elif mode == GRAM:
        if not scatter.is_factored:
            raise ValueError("the Gram route needs a factored scatter (X_k, L_k)")
        if q > min(d, n):
            raise BadDimension(f"q={q} exceeds min(d, N_k)={min(d, n)}")
        W, lam, lam_all, full = _solve_gram(scatter, q, ridge)
        smax, smin, rank = _spectrum_diagnostics(lam_all, full_rank=full)
    else:
        raise ValueError(f"unknown solver mode {mode!r}")
    return SubsetSolution(W, lam, subset_id, smax, smin, rank)


def trace_objective(R: np.ndarray, W: np.ndarray) -> float:
    return float(np.trace(W.T @ R @ W))


def trace_gradient(R: np.ndarray, W: np.ndarray) -> np.ndarray:
    """Gradient of ``tr(W^T R W)`` for symmetric ``R``."""
    return 2.0 * (R @ W)
