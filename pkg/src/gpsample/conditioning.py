"""Pathwise update rules mapping prior draws to posterior draws, plus the
exact distributional oracles used to verify them.

Every update follows the same recipe: draw any required noise up front,
solve one PSD linear system for coefficients over canonical basis functions
k(., center), and freeze the result. A constructed posterior path is a
deterministic function; re-evaluating it never consumes randomness.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from . import linalg
from .kernels import Kernel, _check_locations, eval_kernel, eval_kernel_gradient
from .prior import Basis, FourierFeatureMap, PriorPath


@dataclass(frozen=True)
class Dataset:
    """Observations y at locations X with homoscedastic noise variance.

    noise_variance == 0 means the observations are exact process values
    (noise-free canonical conditioning).
    """

    X: np.ndarray
    y: np.ndarray
    noise_variance: float = 0.0

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if X.ndim != 2:
            raise ValueError("X must be a 2-d location matrix")
        if y.shape != (X.shape[0],):
            raise ValueError("y length must match the number of rows of X")
        if self.noise_variance < 0:
            raise ValueError("noise_variance must be nonnegative")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "noise_variance", float(self.noise_variance))

    @property
    def n(self) -> int:
        return self.X.shape[0]


@dataclass(frozen=True)
class Moments:
    """Inducing distribution q(u) given by its mean and covariance."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float)
        cov = np.asarray(self.cov, dtype=float)
        if mean.ndim != 1 or cov.shape != (mean.size, mean.size):
            raise ValueError("mean must be a vector with a matching square covariance")
        scale = np.max(np.abs(cov)) if cov.size else 0.0
        if scale > 0 and np.max(np.abs(cov - cov.T)) > 1e-8 * scale:
            raise ValueError("covariance must be symmetric")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)


@dataclass(frozen=True)
class PseudoData:
    """Inducing distribution parameterized by pseudo-observations and
    strictly positive per-point pseudo-noise variances."""

    targets: np.ndarray
    noise_variances: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.targets, dtype=float)
        s2 = np.asarray(self.noise_variances, dtype=float)
        if t.ndim != 1 or s2.shape != t.shape:
            raise ValueError("targets and noise_variances must be matching vectors")
        if not np.all(s2 > 0):
            raise ValueError("pseudo-noise variances must be strictly positive")
        object.__setattr__(self, "targets", t)
        object.__setattr__(self, "noise_variances", s2)


@dataclass(frozen=True)
class InducingModel:
    """Inducing locations Z plus either Moments or PseudoData."""

    Z: np.ndarray
    parameterization: Moments | PseudoData

    def __post_init__(self):
        Z = np.asarray(self.Z, dtype=float)
        if Z.ndim != 2 or Z.shape[0] < 1:
            raise ValueError("Z must be a nonempty 2-d location matrix")
        p = self.parameterization
        m = p.mean.size if isinstance(p, Moments) else p.targets.size
        if m != Z.shape[0]:
            raise ValueError("parameterization size must match the number of inducing points")
        object.__setattr__(self, "Z", Z)

    @property
    def m(self) -> int:
        return self.Z.shape[0]


@dataclass(frozen=True)
class GaussianMoments:
    """Mean vector and covariance matrix of process values at finite locations."""

    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float)
        cov = np.asarray(self.covariance, dtype=float)
        if mean.ndim != 1 or cov.shape != (mean.size, mean.size):
            raise ValueError("mean must be a vector with a matching square covariance")
        scale = np.max(np.abs(cov)) if cov.size else 0.0
        if scale > 0 and np.max(np.abs(cov - cov.T)) > 1e-10 * scale:
            raise ValueError("covariance must be symmetric")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", cov)

    @property
    def dim(self) -> int:
        return self.mean.size


@dataclass(frozen=True)
class DirectCholesky:
    """Solve update systems by dense Cholesky factorization."""


@dataclass(frozen=True)
class ConjugateGradients:
    """Solve update systems iteratively with preconditioned CG."""

    tol: float = 1e-8
    max_iter: int | None = None
    precond_rank: int = 16

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iter is not None and self.max_iter < 1:
            raise ValueError("max_iter must be positive")
        if self.precond_rank < 1:
            raise ValueError("precond_rank must be positive")


SolverChoice = DirectCholesky | ConjugateGradients

DEFAULT_SOLVER = DirectCholesky()


class PosteriorPath:
    """A prior draw plus a frozen data-driven correction.

    Evaluation costs O(num_features + num_centers) per point:
    f(.) + sum_i v_i k(., c_i). Instances are immutable by convention and
    safe for unrestricted concurrent evaluation.
    """

    def __init__(
        self,
        prior,
        kernel: Kernel,
        centers: np.ndarray,
        coefficients: np.ndarray,
        targets: np.ndarray,
        noise_draws: np.ndarray,
        noise_diag: np.ndarray,
        factor: linalg.CholeskyFactor | None = None,
    ):
        centers = np.asarray(centers, dtype=float)
        coefficients = np.asarray(coefficients, dtype=float)
        n = centers.shape[0]
        if coefficients.shape != (n,):
            raise ValueError("one coefficient per center required")
        if not np.all(np.isfinite(coefficients)):
            raise ValueError("coefficients must be finite")
        self.prior = prior
        self.kernel = kernel
        self.centers = centers
        self.coefficients = coefficients
        self.targets = np.asarray(targets, dtype=float)
        self.noise_draws = np.asarray(noise_draws, dtype=float)
        self.noise_diag = np.asarray(noise_diag, dtype=float)
        self._factor = factor

    @property
    def num_centers(self) -> int:
        return self.centers.shape[0]

    def evaluate(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        values = self.prior.evaluate(X)
        if self.num_centers:
            values = values + eval_kernel(self.kernel, X, self.centers) @ self.coefficients
        return values

    def gradient(self, X: np.ndarray) -> np.ndarray:
        """Analytic gradient of the posterior draw, shape (len(X), dim)."""
        grad = self.prior.gradient(X)
        if self.num_centers:
            grad = grad + np.einsum(
                "nmd,m->nd", eval_kernel_gradient(self.kernel, X, self.centers), self.coefficients
            )
        return grad

    def system_factor(self) -> linalg.CholeskyFactor:
        """Cholesky factor of K(centers, centers) + diag(noise_diag).

        Computed on demand when the path was built by an iterative solver.
        """
        if self._factor is None:
            A = eval_kernel(self.kernel, self.centers, self.centers)
            A[np.diag_indices_from(A)] += self.noise_diag
            self._factor = linalg.cholesky(A, max_jitter=0.0)
        return self._factor

    def to_record(self) -> dict:
        """JSON-serializable record; reproduces evaluations bit-for-bit.

        Only paths over serializable (Fourier) prior bases are supported.
        """
        if not isinstance(self.prior, PriorPath) or not isinstance(
            self.prior.basis, FourierFeatureMap
        ):
            raise TypeError("only posterior paths over Fourier prior bases serialize")
        return {
            "type": "posterior_path",
            "basis": self.prior.basis.to_record(),
            "weights": self.prior.weights.tolist(),
            "kernel": self.kernel.to_config(),
            "centers": self.centers.tolist(),
            "coefficients": self.coefficients.tolist(),
            "targets": self.targets.tolist(),
            "noise_draws": self.noise_draws.tolist(),
            "noise_diag": self.noise_diag.tolist(),
        }

    @classmethod
    def from_record(cls, record: dict) -> "PosteriorPath":
        if record.get("type") != "posterior_path":
            raise ValueError("not a posterior path record")
        basis = FourierFeatureMap.from_record(record["basis"])
        prior = PriorPath(basis=basis, weights=np.asarray(record["weights"], dtype=float))
        d = basis.frequencies.shape[1]
        return cls(
            prior=prior,
            kernel=Kernel.from_config(record["kernel"]),
            centers=np.asarray(record["centers"], dtype=float).reshape(-1, d),
            coefficients=np.asarray(record["coefficients"], dtype=float),
            targets=np.asarray(record["targets"], dtype=float),
            noise_draws=np.asarray(record["noise_draws"], dtype=float),
            noise_diag=np.asarray(record["noise_diag"], dtype=float),
        )


def matheron_finite(
    a_sample: np.ndarray,
    b_sample: np.ndarray,
    beta: np.ndarray,
    cov_ab: np.ndarray,
    cov_bb: np.ndarray,
) -> np.ndarray:
    """Update a joint draw (a, b) to a draw of a | b = beta.

    Accepts batches: leading dimensions of a_sample and b_sample broadcast,
    with the trailing axis indexing components.
    """
    a = np.asarray(a_sample, dtype=float)
    b = np.asarray(b_sample, dtype=float)
    beta = np.asarray(beta, dtype=float)
    cov_ab = np.atleast_2d(np.asarray(cov_ab, dtype=float))
    cov_bb = np.atleast_2d(np.asarray(cov_bb, dtype=float))
    nb = cov_bb.shape[0]
    if beta.shape[-1] != nb or b.shape[-1] != nb or cov_ab.shape[1] != nb:
        raise ValueError("conditioned block shapes do not conform")
    if cov_ab.shape[0] != a.shape[-1]:
        raise ValueError("cov_ab rows must match the dimension of a")
    factor = linalg.cholesky(cov_bb)
    gain = linalg.solve_psd(factor, cov_ab.T).T
    return a + (beta - b) @ gain.T


def posterior_moments(kernel: Kernel, data: Dataset, X_star: np.ndarray) -> GaussianMoments:
    """Exact mean and covariance of f(X_star) | y; the module's ground truth."""
    X_star = _check_locations(X_star, kernel.dim, "X_star")
    K_ss = eval_kernel(kernel, X_star, X_star)
    if data.n == 0:
        return GaussianMoments(mean=np.zeros(X_star.shape[0]), covariance=K_ss)
    A = eval_kernel(kernel, data.X, data.X)
    if data.noise_variance > 0:
        A[np.diag_indices_from(A)] += data.noise_variance
    factor = linalg.cholesky(A)
    K_sn = eval_kernel(kernel, X_star, data.X)
    half = solve_triangular(factor.L, K_sn.T, lower=True)
    mean = half.T @ solve_triangular(factor.L, data.y, lower=True)
    cov = K_ss - half.T @ half
    return GaussianMoments(mean=mean, covariance=0.5 * (cov + cov.T))


class PreparedUpdate:
    """A factored conditioning system reused across many prior draws.

    Holds everything about the update that does not depend on the
    particular path: centers, the system matrix K(centers, centers) +
    diag(noise), and either its Cholesky factor or the CG preconditioner.
    Building one per dataset and applying it to thousands of draws is what
    makes repeated pathwise sampling cheap.
    """

    def __init__(
        self,
        kernel: Kernel,
        centers: np.ndarray,
        noise_diag: np.ndarray,
        solver: SolverChoice = DEFAULT_SOLVER,
    ):
        centers = np.asarray(centers, dtype=float)
        noise_diag = np.asarray(noise_diag, dtype=float)
        if centers.ndim != 2 or noise_diag.shape != (centers.shape[0],):
            raise ValueError("centers must be (n, d) with one noise entry per row")
        self.kernel = kernel
        self.centers = centers
        self.noise_diag = noise_diag
        self.solver = solver
        A = eval_kernel(kernel, centers, centers)
        if centers.shape[0]:
            A[np.diag_indices_from(A)] += noise_diag
        self.factor: linalg.CholeskyFactor | None = None
        self._matrix: np.ndarray | None = None
        self._precond = None
        if isinstance(solver, DirectCholesky):
            try:
                self.factor = linalg.cholesky(A, max_jitter=0.0)
            except linalg.NotPositiveDefiniteError as err:
                if not np.any(noise_diag > 0):
                    raise linalg.NotPositiveDefiniteError(
                        "noise-free conditioning system is singular (duplicated "
                        "or near-duplicate centers?); jitter is deliberately not "
                        "applied because it would make the stated condition "
                        "inconsistent",
                        failed_jitter=err.failed_jitter,
                    ) from err
                raise
        else:
            # Iterative route: dense matvec plus a partial pivoted Cholesky
            # preconditioner built once on the same system matrix.
            self._matrix = A
            rank = min(solver.precond_rank, max(A.shape[0], 1))
            if A.shape[0]:
                low_rank = linalg.pivoted_cholesky(A, rank)
                sigma2 = max(
                    float(np.min(noise_diag)), 1e-10 * float(np.mean(np.diag(A)))
                )
                self._precond = linalg.low_rank_preconditioner(low_rank, sigma2)

    @property
    def num_centers(self) -> int:
        return self.centers.shape[0]

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        if self.factor is not None:
            return linalg.solve_psd(self.factor, rhs)
        if self.num_centers == 0:
            return rhs.copy()
        v, report = linalg.cg_solve(
            lambda w: self._matrix @ w,
            rhs,
            precond=self._precond,
            tol=self.solver.tol,
            max_iter=self.solver.max_iter,
        )
        if not report.converged:
            raise linalg.NotPositiveDefiniteError(
                f"conjugate gradients failed to reach tol {self.solver.tol:g} in "
                f"{report.iterations} iterations "
                f"(residual {report.final_residual_norm:g})",
                failed_jitter=0.0,
            )
        return v

    def posterior(self, prior, targets: np.ndarray, noise_draws: np.ndarray) -> PosteriorPath:
        """Finish an update: solve for coefficients and freeze the path."""
        return PosteriorPath(
            prior=prior,
            kernel=self.kernel,
            centers=self.centers,
            coefficients=self.solve(targets),
            targets=targets,
            noise_draws=noise_draws,
            noise_diag=self.noise_diag,
            factor=self.factor,
        )


def canonical_update(
    path, data: Dataset, kernel: Kernel | None = None, solver: SolverChoice = DEFAULT_SOLVER
) -> PosteriorPath:
    """Noise-free pathwise update: coefficients solve K v = y - f(X_n).

    The posterior path interpolates the conditioned values at the centers.
    `kernel` defaults to the prior basis kernel when the path carries one.
    """
    if data.noise_variance != 0.0:
        raise ValueError("canonical conditioning requires noise_variance == 0")
    kernel = _resolve_kernel(path, kernel)
    prep = PreparedUpdate(kernel, data.X, np.zeros(data.n), solver)
    f_n = path.evaluate(data.X) if data.n else np.zeros(0)
    return prep.posterior(path, data.y - f_n, np.zeros(data.n))


def gaussian_update(
    path,
    data: Dataset,
    rng: np.random.Generator,
    kernel: Kernel | None = None,
    solver: SolverChoice = DEFAULT_SOLVER,
) -> PosteriorPath:
    """Gaussian-likelihood update: (K + s2 I) v = y - f(X_n) - eps.

    The noise draw eps ~ N(0, s2 I) happens here and is stored on the
    returned path, before any solver dispatch, so solver variants can be
    compared on identical draws.
    """
    if not data.noise_variance > 0:
        raise ValueError("gaussian conditioning requires noise_variance > 0")
    kernel = _resolve_kernel(path, kernel)
    rng = np.random.default_rng(rng)
    eps = math.sqrt(data.noise_variance) * rng.standard_normal(data.n)
    prep = PreparedUpdate(kernel, data.X, np.full(data.n, data.noise_variance), solver)
    f_n = path.evaluate(data.X) if data.n else np.zeros(0)
    return prep.posterior(path, data.y - f_n - eps, eps)


def sparse_update(
    path,
    inducing: InducingModel,
    rng: np.random.Generator,
    kernel: Kernel | None = None,
    solver: SolverChoice = DEFAULT_SOLVER,
) -> PosteriorPath:
    """Sparse update against u ~ q(u): K_mm v = u - f(Z); cost O(m^3)."""
    if not isinstance(inducing.parameterization, Moments):
        raise TypeError("sparse_update requires the Moments parameterization")
    kernel = _resolve_kernel(path, kernel)
    rng = np.random.default_rng(rng)
    q = inducing.parameterization
    u = q.mean + linalg.psd_sqrt(q.cov) @ rng.standard_normal(inducing.m)
    prep = PreparedUpdate(kernel, inducing.Z, np.zeros(inducing.m), solver)
    return prep.posterior(path, u - path.evaluate(inducing.Z), u)


def pseudo_data_update(
    path,
    inducing: InducingModel,
    rng: np.random.Generator,
    kernel: Kernel | None = None,
    solver: SolverChoice = DEFAULT_SOLVER,
) -> PosteriorPath:
    """Pseudo-data update: (K_mm + Lambda) v = y~ - f(Z) - eps~."""
    if not isinstance(inducing.parameterization, PseudoData):
        raise TypeError("pseudo_data_update requires the PseudoData parameterization")
    kernel = _resolve_kernel(path, kernel)
    rng = np.random.default_rng(rng)
    q = inducing.parameterization
    eps = np.sqrt(q.noise_variances) * rng.standard_normal(inducing.m)
    prep = PreparedUpdate(kernel, inducing.Z, q.noise_variances.copy(), solver)
    return prep.posterior(path, q.targets - path.evaluate(inducing.Z) - eps, eps)


def rank1_update(
    post: PosteriorPath,
    new_point: np.ndarray,
    new_value: float,
    noise_variance: float,
    rng: np.random.Generator | None = None,
) -> PosteriorPath:
    """Extend a posterior path with one more condition arriving online.

    Equal in distribution to a batch re-update on the augmented dataset;
    implemented by extending the stored Cholesky factor by one row.
    """
    if noise_variance < 0:
        raise ValueError("noise_variance must be nonnegative")
    x = np.asarray(new_point, dtype=float).reshape(1, -1)
    if x.shape[1] != post.kernel.dim:
        raise ValueError("new_point dimension does not match the kernel")
    if noise_variance == 0.0 and post.num_centers:
        if np.any(np.all(post.centers == x[0], axis=1)):
            raise ValueError(
                "noise-free rank-1 update at an existing center would make the "
                "condition inconsistent"
            )
    eps = 0.0
    if noise_variance > 0:
        rng = np.random.default_rng(rng)
        eps = math.sqrt(noise_variance) * float(rng.standard_normal())
    target_new = float(new_value) - float(post.prior.evaluate(x)[0]) - eps

    factor = post.system_factor()
    a = eval_kernel(post.kernel, post.centers, x)[:, 0] if post.num_centers else np.zeros(0)
    alpha = float(eval_kernel(post.kernel, x, x)[0, 0]) + noise_variance
    w = solve_triangular(factor.L, a, lower=True) if post.num_centers else np.zeros(0)
    lam_sq = alpha - float(w @ w)
    if lam_sq <= 0:
        raise linalg.NotPositiveDefiniteError(
            "rank-1 extension is not positive definite (duplicate or "
            "near-duplicate center?)",
            failed_jitter=0.0,
        )
    n = post.num_centers
    L_new = np.zeros((n + 1, n + 1))
    L_new[:n, :n] = factor.L
    L_new[n, :n] = w
    L_new[n, n] = math.sqrt(lam_sq)
    new_factor = linalg.CholeskyFactor(L=L_new, jitter_used=factor.jitter_used)

    targets = np.concatenate([post.targets, [target_new]])
    coefficients = linalg.solve_psd(new_factor, targets)
    return PosteriorPath(
        prior=post.prior,
        kernel=post.kernel,
        centers=np.vstack([post.centers, x]) if n else x,
        coefficients=coefficients,
        targets=targets,
        noise_draws=np.concatenate([post.noise_draws, [eps]]),
        noise_diag=np.concatenate([post.noise_diag, [noise_variance]]),
        factor=new_factor,
    )


def weight_space_update(path: PriorPath, data: Dataset, regularizer: float = 0.0) -> PriorPath:
    """Condition within the path's own basis: w + Phi^T (Phi Phi^T + r I)^{-1} (y - Phi w).

    Deterministic given the path and data. With regularizer 0 and an
    invertible Phi Phi^T, the updated path interpolates y at X_n. This is
    the unified-basis posterior; it represents data poorly compared to the
    canonical update and exists largely so that pathology can be measured.
    """
    if regularizer < 0:
        raise ValueError("regularizer must be nonnegative")
    if not isinstance(path, PriorPath):
        raise TypeError("weight_space_update operates on basis-backed prior paths")
    Phi = path.basis.features(data.X)
    residual = data.y - Phi @ path.weights
    G = Phi @ Phi.T
    if regularizer > 0:
        G[np.diag_indices_from(G)] += regularizer
    try:
        factor = linalg.cholesky(G, max_jitter=0.0)
    except linalg.NotPositiveDefiniteError as err:
        raise linalg.NotPositiveDefiniteError(
            "Phi Phi^T is singular; pass a positive regularizer (or fewer "
            "observations than basis functions)",
            failed_jitter=err.failed_jitter,
        ) from err
    new_weights = path.weights + Phi.T @ linalg.solve_psd(factor, residual)
    return PriorPath(basis=path.basis, weights=new_weights)


def decoupled_posterior_covariance(
    basis: Basis | Kernel,
    data: Dataset,
    X_star: np.ndarray,
    kernel: Kernel | None = None,
) -> GaussianMoments:
    """Exact moments of the decoupled posterior: an approximate prior from
    `basis` corrected by the canonical (noise-free) update of the true
    kernel.

    `basis` may also be a Kernel, in which case the approximate prior is
    any GP with that covariance (the degenerate-prior analysis route). The
    true kernel defaults to the basis kernel for Fourier bases.
    """
    if data.noise_variance != 0.0:
        raise ValueError("the decoupled oracle is defined for noise-free conditioning")
    if data.n == 0:
        raise ValueError("decoupled conditioning requires at least one observation")
    if kernel is None:
        if isinstance(basis, FourierFeatureMap):
            kernel = basis.kernel
        else:
            raise ValueError("a true kernel must be supplied for this basis type")
    X_star = _check_locations(X_star, kernel.dim, "X_star")
    K_nn = eval_kernel(kernel, data.X, data.X)
    K_sn = eval_kernel(kernel, X_star, data.X)
    factor = linalg.cholesky(K_nn)
    Xi = linalg.solve_psd(factor, K_sn.T).T
    mean = Xi @ data.y
    if isinstance(basis, Kernel):
        C_ss = eval_kernel(basis, X_star, X_star)
        C_sn = eval_kernel(basis, X_star, data.X)
        C_nn = eval_kernel(basis, data.X, data.X)
        cov = C_ss - C_sn @ Xi.T - Xi @ C_sn.T + Xi @ C_nn @ Xi.T
    else:
        B = basis.features(X_star) - Xi @ basis.features(data.X)
        cov = B @ basis.weight_prior_covariance() @ B.T
    return GaussianMoments(mean=mean, covariance=0.5 * (cov + cov.T))


def inducing_moments(kernel: Kernel, inducing: InducingModel) -> Moments:
    """Moments of q(u) for either parameterization.

    For pseudo-data, the mean is K (K + Lambda)^{-1} y~ and the covariance
    is realized through the sampling identity K (K + Lambda)^{-1} Lambda,
    avoiding any explicit inverse of K.
    """
    p = inducing.parameterization
    if isinstance(p, Moments):
        return p
    K = eval_kernel(kernel, inducing.Z, inducing.Z)
    A = K.copy()
    A[np.diag_indices_from(A)] += p.noise_variances
    factor = linalg.cholesky(A)
    gain = linalg.solve_psd(factor, K).T  # K (K + Lambda)^{-1}
    mean = gain @ p.targets
    cov = gain * p.noise_variances
    return Moments(mean=mean, cov=0.5 * (cov + cov.T))


def sparse_posterior_moments(
    kernel: Kernel, inducing: InducingModel, X_star: np.ndarray
) -> GaussianMoments:
    """Dense oracle: moments of f(X_star) | u marginalized over q(u)."""
    X_star = _check_locations(X_star, kernel.dim, "X_star")
    q = inducing_moments(kernel, inducing)
    K_mm = eval_kernel(kernel, inducing.Z, inducing.Z)
    K_sm = eval_kernel(kernel, X_star, inducing.Z)
    factor = linalg.cholesky(K_mm)
    psi = linalg.solve_psd(factor, K_sm.T).T  # K_sm K_mm^{-1}
    mean = psi @ q.mean
    K_ss = eval_kernel(kernel, X_star, X_star)
    cov = K_ss - psi @ K_sm.T + psi @ q.cov @ psi.T
    return GaussianMoments(mean=mean, covariance=0.5 * (cov + cov.T))


def _resolve_kernel(path, kernel: Kernel | None) -> Kernel:
    if kernel is not None:
        return kernel
    basis = getattr(path, "basis", None)
    resolved = getattr(basis, "kernel", None)
    if resolved is None:
        raise ValueError(
            "update kernel could not be inferred from the path; pass kernel="
        )
    return resolved
