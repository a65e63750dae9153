"""Dense PSD linear algebra: Cholesky with a fixed jitter ladder, triangular
solves, symmetric square roots, partial pivoted Cholesky, and conjugate
gradients with a low-rank-plus-diagonal preconditioner."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

# Relative jitter ladder, scaled by the mean diagonal of the input.
JITTER_LADDER = (0.0, 1e-10, 1e-8, 1e-6)


class NotPositiveDefiniteError(ValueError):
    """Factorization failed at every admissible jitter level."""

    def __init__(self, message: str, failed_jitter: float):
        super().__init__(message)
        self.failed_jitter = failed_jitter


@dataclass(frozen=True)
class CholeskyFactor:
    """Lower-triangular factor of A + jitter*I."""

    L: np.ndarray
    jitter_used: float

    @property
    def n(self) -> int:
        return self.L.shape[0]


@dataclass(frozen=True)
class LowRankFactor:
    """Partial pivoted Cholesky factor R with R @ R.T <= A in trace."""

    R: np.ndarray
    pivots: tuple[int, ...]

    @property
    def rank(self) -> int:
        return self.R.shape[1]


@dataclass(frozen=True)
class CgReport:
    iterations: int
    final_residual_norm: float
    converged: bool


def _check_symmetric(A: np.ndarray, rtol: float, what: str) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"{what} expects a square matrix, got shape {A.shape}")
    scale = np.max(np.abs(A)) if A.size else 0.0
    if scale > 0 and np.max(np.abs(A - A.T)) > rtol * scale:
        raise ValueError(f"{what} expects a symmetric matrix (relative asymmetry > {rtol:g})")
    return A


def cholesky(A: np.ndarray, max_jitter: float | None = None) -> CholeskyFactor:
    """Cholesky factor of A + jitter*I, taking the smallest workable jitter
    from the ladder {0, 1e-10, 1e-8, 1e-6} * mean(diag(A)).

    `max_jitter` caps the absolute jitter; pass 0.0 to forbid jitter
    entirely. Raises NotPositiveDefiniteError when every admissible ladder
    step fails.
    """
    A = _check_symmetric(A, 1e-10, "cholesky")
    if A.shape[0] == 0:
        return CholeskyFactor(L=np.zeros((0, 0)), jitter_used=0.0)
    mean_diag = float(np.mean(np.diag(A)))
    last_jitter = 0.0
    for level in JITTER_LADDER:
        jitter = level * mean_diag
        if max_jitter is not None and jitter > max_jitter:
            break
        last_jitter = jitter
        B = A if jitter == 0.0 else A + jitter * np.eye(A.shape[0])
        try:
            L = np.linalg.cholesky(B)
        except np.linalg.LinAlgError:
            continue
        return CholeskyFactor(L=L, jitter_used=jitter)
    raise NotPositiveDefiniteError(
        f"matrix is not positive definite: Cholesky failed with jitter {last_jitter:g} "
        f"(ladder {JITTER_LADDER} * mean diagonal {mean_diag:g})",
        failed_jitter=last_jitter,
    )


def solve_psd(factor: CholeskyFactor, B: np.ndarray) -> np.ndarray:
    """Solve (L L^T) X = B for X."""
    B = np.asarray(B, dtype=float)
    rows = B.shape[0] if B.ndim > 0 else None
    if rows != factor.n:
        raise ValueError(f"right-hand side has {rows} rows, factor is {factor.n}x{factor.n}")
    if factor.n == 0:
        return B.copy()
    return cho_solve((factor.L, True), B)


def psd_sqrt(A: np.ndarray) -> np.ndarray:
    """Symmetric PSD square root via eigendecomposition.

    Eigenvalues in [-1e-8 * ||A||, 0) are clamped to zero; anything more
    negative violates the PSD precondition and raises.
    """
    A = _check_symmetric(A, 1e-8, "psd_sqrt")
    if A.shape[0] == 0:
        return A.copy()
    w, V = np.linalg.eigh(0.5 * (A + A.T))
    scale = float(np.max(np.abs(w))) if w.size else 0.0
    if scale > 0 and np.min(w) < -1e-8 * scale:
        raise ValueError(
            f"matrix is not PSD: smallest eigenvalue {np.min(w):g} below -1e-8*||A||"
        )
    w = np.maximum(w, 0.0)
    S = (V * np.sqrt(w)) @ V.T
    return 0.5 * (S + S.T)


def pivoted_cholesky(A: np.ndarray, rank: int) -> LowRankFactor:
    """Partial pivoted Cholesky with greedy selection of the largest
    remaining diagonal entry.

    Stops early once the residual diagonal is exhausted (numerically zero),
    so the returned factor may have fewer than `rank` columns.
    """
    A = _check_symmetric(A, 1e-10, "pivoted_cholesky")
    n = A.shape[0]
    if not 1 <= rank <= n:
        raise ValueError(f"rank must be in [1, {n}], got {rank}")
    d = np.diag(A).astype(float).copy()
    tol = max(float(np.max(d)), 0.0) * n * np.finfo(float).eps
    R = np.zeros((n, rank))
    pivots: list[int] = []
    for j in range(rank):
        i = int(np.argmax(d))
        if d[i] <= tol:
            R = R[:, :j]
            break
        pivots.append(i)
        col = (A[:, i] - R[:, :j] @ R[i, :j]) / math.sqrt(d[i])
        R[:, j] = col
        d -= col * col
        d[i] = 0.0
    return LowRankFactor(R=R, pivots=tuple(pivots))


def low_rank_preconditioner(
    factor: LowRankFactor, noise_variance: float
) -> Callable[[np.ndarray], np.ndarray]:
    """Apply (R R^T + noise*I)^{-1} through the low-rank inverse identity.

    The returned callable costs O(n * rank) per application and is meant to
    be built once and reused across solves sharing the same system.
    """
    if not noise_variance > 0:
        raise ValueError("noise_variance must be positive")
    R = factor.R
    r = R.shape[1]
    inner = noise_variance * np.eye(r) + R.T @ R
    L = np.linalg.cholesky(inner)

    def apply(v: np.ndarray) -> np.ndarray:
        w = cho_solve((L, True), R.T @ v)
        return (v - R @ w) / noise_variance

    return apply


def cg_solve(
    apply_A: Callable[[np.ndarray], np.ndarray],
    b: np.ndarray,
    precond: Callable[[np.ndarray], np.ndarray] | None = None,
    tol: float = 1e-8,
    max_iter: int | None = None,
) -> tuple[np.ndarray, CgReport]:
    """Conjugate gradients for A x = b with A SPD given as an operator.

    Stops when ||A x - b|| <= tol * ||b||. `max_iter` defaults to 4n. A
    non-converged run is reported through CgReport, not raised.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    b = np.asarray(b, dtype=float)
    n = b.shape[0]
    if max_iter is None:
        max_iter = 4 * n
    b_norm = float(np.linalg.norm(b))
    if b_norm == 0.0:
        return np.zeros_like(b), CgReport(0, 0.0, True)
    x = np.zeros_like(b)
    r = b.copy()
    z = precond(r) if precond is not None else r
    p = z.copy()
    rz = float(r @ z)
    res_norm = b_norm
    for it in range(1, max_iter + 1):
        Ap = apply_A(p)
        alpha = rz / float(p @ Ap)
        x += alpha * p
        r -= alpha * Ap
        res_norm = float(np.linalg.norm(r))
        if res_norm <= tol * b_norm:
            return x, CgReport(it, res_norm, True)
        z = precond(r) if precond is not None else r
        rz_new = float(r @ z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    return x, CgReport(max_iter, res_norm, False)


def cg_solve_multi(
    apply_A: Callable[[np.ndarray], np.ndarray],
    B: np.ndarray,
    precond: Callable[[np.ndarray], np.ndarray] | None = None,
    tol: float = 1e-8,
    max_iter: int | None = None,
) -> tuple[np.ndarray, Sequence[CgReport]]:
    """Column-by-column CG against multiple right-hand sides.

    The preconditioner is built once by the caller and reused across all
    columns; no explicit inverse is ever formed.
    """
    B = np.asarray(B, dtype=float)
    if B.ndim != 2:
        raise ValueError("B must be a 2-d matrix of right-hand sides")
    X = np.empty_like(B)
    reports = []
    for j in range(B.shape[1]):
        X[:, j], report = cg_solve(apply_A, B[:, j], precond=precond, tol=tol, max_iter=max_iter)
        reports.append(report)
    return X, reports
