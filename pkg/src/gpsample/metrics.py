"""Distances and error measures for grading approximate posteriors:
Gaussian 2-Wasserstein in closed form, entropic Sinkhorn estimates between
point clouds, sup-norm kernel error, and empirical moments."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .conditioning import GaussianMoments
from .kernels import Kernel, eval_kernel
from .linalg import psd_sqrt
from .prior import FourierFeatureMap


@dataclass(frozen=True)
class SampleBatch:
    """S draws of an n-dimensional quantity, one draw per row.

    `locations` optionally records where process values were evaluated; it
    plays no role in the estimators themselves.
    """

    values: np.ndarray
    locations: np.ndarray | None = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2 or values.shape[0] < 2:
            raise ValueError("values must be a (S, n) matrix with S >= 2")
        object.__setattr__(self, "values", values)
        if self.locations is not None:
            loc = np.asarray(self.locations, dtype=float)
            if loc.ndim != 2 or loc.shape[0] != values.shape[1]:
                raise ValueError("locations must be (n, d) matching the value columns")
            object.__setattr__(self, "locations", loc)

    @property
    def num_samples(self) -> int:
        return self.values.shape[0]


def empirical_moments(batch: SampleBatch) -> GaussianMoments:
    """Sample mean and unbiased sample covariance of a batch."""
    values = batch.values
    mean = values.mean(axis=0)
    centered = values - mean
    cov = centered.T @ centered / (values.shape[0] - 1)
    return GaussianMoments(mean=mean, covariance=0.5 * (cov + cov.T))


def w2_gaussian(a: GaussianMoments, b: GaussianMoments) -> float:
    """2-Wasserstein distance between Gaussians (Bures form).

    sqrt(||m1 - m2||^2 + tr(S1 + S2 - 2 (S2^{1/2} S1 S2^{1/2})^{1/2})).
    """
    if a.dim != b.dim:
        raise ValueError("moment dimensions do not match")
    mean_term = float(np.sum((a.mean - b.mean) ** 2))
    root_b = psd_sqrt(b.covariance)
    cross = psd_sqrt(root_b @ a.covariance @ root_b)
    trace_term = float(np.trace(a.covariance) + np.trace(b.covariance) - 2.0 * np.trace(cross))
    return float(np.sqrt(max(mean_term + trace_term, 0.0)))


def _pairwise_sq_dists(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    diff = x[:, None, :] - y[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def sinkhorn_distance(
    a: SampleBatch,
    b: SampleBatch,
    reg: float | None = None,
    max_iter: int = 2000,
) -> float:
    """Entropy-regularized transport estimate of the 2-Wasserstein distance
    between two empirical clouds (rows are points, uniform weights).

    Log-domain updates on the squared Euclidean cost, annealing the
    regularization down to `reg`; the returned value is sqrt(<P, C>).
    `reg` defaults to 1e-2 times the mean pairwise cost. Warns instead of
    raising when max_iter is hit.

    The two batches are ordered deterministically by content before
    iterating, so the result is exactly symmetric in its arguments.
    """
    x, y = a.values, b.values
    if x.shape[1] != y.shape[1]:
        raise ValueError("batches must share the same number of columns")
    if (x.shape, x.tobytes()) > (y.shape, y.tobytes()):
        x, y = y, x
    C = _pairwise_sq_dists(x, y)
    mean_cost = float(np.mean(C))
    if reg is None:
        reg = 1e-2 * mean_cost
    if not reg > 0:
        raise ValueError("reg must be positive")
    log_mu = -math.log(x.shape[0])
    log_nu = -math.log(y.shape[0])
    # Potentials live in cost units so they carry over between annealing
    # stages; warm starts make the small-reg final stage affordable.
    stages = [reg]
    while stages[-1] < max(mean_cost, reg):
        stages.append(stages[-1] * 4.0)
    stages = stages[::-1]
    f = np.zeros(x.shape[0])
    g = np.zeros(y.shape[0])
    iterations_left = max_iter
    converged = False
    work = np.empty_like(C)

    def half_step(pot: np.ndarray, eps: float, log_w: float, axis: int) -> np.ndarray:
        # -eps * logsumexp((pot - C)/eps + log_w) over `axis`, reusing `work`.
        np.subtract(pot[None, :] if axis == 1 else pot[:, None], C, out=work)
        np.divide(work, eps, out=work)
        peak = np.max(work, axis=axis)
        np.subtract(work, peak[:, None] if axis == 1 else peak[None, :], out=work)
        np.exp(work, out=work)
        return -eps * (np.log(np.sum(work, axis=axis)) + peak + log_w)

    def plan(eps: float) -> np.ndarray:
        np.subtract(f[:, None] + g[None, :], C, out=work)
        np.divide(work, eps, out=work)
        np.add(work, log_mu + log_nu, out=work)
        return np.exp(work, out=work)

    value = math.inf
    for stage, eps in enumerate(stages):
        final = stage == len(stages) - 1
        budget = iterations_left if final else min(10, iterations_left)
        for it in range(budget):
            iterations_left -= 1
            f_new = half_step(g, eps, log_nu, axis=1)
            g = half_step(f_new, eps, log_mu, axis=0)
            delta = float(np.max(np.abs(f_new - f)))
            f = f_new
            if delta < 1e-9 * max(mean_cost, reg):
                converged = True
                break
            # The transport value stabilizes long before the potentials do;
            # poll it occasionally on the final stage.
            if final and (it + 1) % 10 == 0:
                new_value = float(np.sum(plan(eps) * C))
                if abs(new_value - value) <= 1e-4 * max(abs(new_value), reg):
                    converged = True
                    break
                value = new_value
        if (final and converged) or iterations_left <= 0:
            break
        converged = False
    P = plan(reg)
    if not converged:
        err = float(np.max(np.abs(P.sum(axis=1) * x.shape[0] - 1.0)))
        warnings.warn(
            f"Sinkhorn did not converge in {max_iter} iterations "
            f"(relative row-marginal error {err:.2e})",
            RuntimeWarning,
        )
    return float(np.sqrt(max(np.sum(P * C), 0.0)))


def _logsumexp_rows(A: np.ndarray, axis: int) -> np.ndarray:
    peak = np.max(A, axis=axis, keepdims=True)
    out = peak + np.log(np.sum(np.exp(A - peak), axis=axis, keepdims=True))
    return np.squeeze(out, axis=axis)


def kernel_sup_error(kernel: Kernel, basis: FourierFeatureMap, grid: np.ndarray) -> float:
    """max over grid x grid of |phi(x).phi(x') - k(x, x')|."""
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 2 or grid.shape[0] < 1:
        raise ValueError("grid must be a nonempty (n, d) location matrix")
    Phi = basis.features(grid)
    K = eval_kernel(kernel, grid, grid)
    return float(np.max(np.abs(Phi @ Phi.T - K)))
