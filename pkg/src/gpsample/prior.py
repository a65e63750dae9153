"""Function draws from GP priors.

Exact finite-dimensional draws use a location-scale transform of the kernel
matrix. Approximate priors are Bayesian linear models over a cosine Fourier
basis or a user-supplied Karhunen-Loeve eigensystem; a realized draw is a
plain deterministic function, evaluable in O(num_features) per point.

All priors are centered. A deterministic mean can be added at evaluation
time; conditioning on data with a nonzero mean is handled by shifting
residuals on the caller side.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import solve_triangular

from . import linalg
from .kernels import Kernel, SpectralSampler, _check_locations, eval_kernel


@dataclass(frozen=True)
class FourierFeatureMap:
    """Random cosine features phi_j(x) = amplitude * cos(2*pi w_j.x + tau_j).

    The amplitude sqrt(2 * variance / num_features) makes the expected inner
    product of feature vectors equal to the kernel; pointwise products never
    exceed 2 * variance.
    """

    frequencies: np.ndarray
    phases: np.ndarray
    kernel: Kernel

    def __post_init__(self):
        W = np.asarray(self.frequencies, dtype=float)
        tau = np.asarray(self.phases, dtype=float)
        if W.ndim != 2 or W.shape[0] != tau.shape[0]:
            raise ValueError("frequencies must be (num_features, dim) matching phases")
        if W.shape[0] < 1:
            raise ValueError("need at least one feature")
        if np.any(tau < 0) or np.any(tau >= 2.0 * math.pi):
            raise ValueError("phases must lie in [0, 2*pi)")
        object.__setattr__(self, "frequencies", W)
        object.__setattr__(self, "phases", tau)

    @property
    def num_features(self) -> int:
        return self.frequencies.shape[0]

    @property
    def amplitude(self) -> float:
        return math.sqrt(2.0 * self.kernel.variance / self.num_features)

    def features(self, X: np.ndarray) -> np.ndarray:
        """Feature matrix of shape (len(X), num_features)."""
        X = _check_locations(X, self.frequencies.shape[1], "X")
        return self.amplitude * np.cos(
            2.0 * math.pi * X @ self.frequencies.T + self.phases
        )

    def feature_gradients(self, X: np.ndarray) -> np.ndarray:
        """d phi_j / dx as an (len(X), num_features, dim) array."""
        X = _check_locations(X, self.frequencies.shape[1], "X")
        s = np.sin(2.0 * math.pi * X @ self.frequencies.T + self.phases)
        return -2.0 * math.pi * self.amplitude * s[:, :, None] * self.frequencies[None, :, :]

    def weight_prior_covariance(self) -> np.ndarray:
        return np.eye(self.num_features)

    def to_record(self) -> dict:
        """JSON-serializable record reproducing evaluations bit-for-bit."""
        return {
            "type": "fourier",
            "kernel": self.kernel.to_config(),
            "frequencies": self.frequencies.tolist(),
            "phases": self.phases.tolist(),
        }

    @classmethod
    def from_record(cls, record: dict) -> "FourierFeatureMap":
        if record.get("type") != "fourier":
            raise ValueError(f"not a Fourier basis record: {record.get('type')!r}")
        return cls(
            frequencies=np.asarray(record["frequencies"], dtype=float),
            phases=np.asarray(record["phases"], dtype=float),
            kernel=Kernel.from_config(record["kernel"]),
        )


@dataclass(frozen=True)
class KlBasis:
    """Truncated Karhunen-Loeve eigensystem supplied by the caller.

    Eigenfunctions are callables mapping an (n, d) location matrix to n
    values; eigenvalues must be positive and nonincreasing. No eigensolver
    is included here.
    """

    eigenfunctions: Sequence[Callable[[np.ndarray], np.ndarray]]
    eigenvalues: np.ndarray

    def __post_init__(self):
        lam = np.asarray(self.eigenvalues, dtype=float)
        if lam.ndim != 1 or len(self.eigenfunctions) != lam.size:
            raise ValueError("eigenvalues must be a vector matching the eigenfunction list")
        if not np.all(lam > 0):
            raise ValueError("eigenvalues must be strictly positive")
        if np.any(np.diff(lam) > 0):
            raise ValueError("eigenvalues must be sorted in nonincreasing order")
        object.__setattr__(self, "eigenfunctions", tuple(self.eigenfunctions))
        object.__setattr__(self, "eigenvalues", lam)

    @property
    def num_features(self) -> int:
        return self.eigenvalues.size

    def features(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        cols = [np.asarray(f(X), dtype=float).reshape(len(X)) for f in self.eigenfunctions]
        return np.stack(cols, axis=1) if cols else np.zeros((len(X), 0))

    def weight_prior_covariance(self) -> np.ndarray:
        return np.diag(self.eigenvalues)


Basis = FourierFeatureMap | KlBasis


@dataclass(frozen=True)
class PriorPath:
    """A realized draw f(.) = sum_j w_j phi_j(.); deterministic once built.

    Paths hold their basis by reference, so many draws share one set of
    frequencies and phases.
    """

    basis: Basis
    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.shape != (self.basis.num_features,):
            raise ValueError(
                f"weights shape {w.shape} does not match basis size {self.basis.num_features}"
            )
        object.__setattr__(self, "weights", w)

    def evaluate(self, X: np.ndarray) -> np.ndarray:
        return self.basis.features(X) @ self.weights

    def gradient(self, X: np.ndarray) -> np.ndarray:
        """Analytic gradient, shape (len(X), dim); Fourier bases only."""
        if not isinstance(self.basis, FourierFeatureMap):
            raise TypeError("analytic gradients require a Fourier feature basis")
        return np.einsum("njd,j->nd", self.basis.feature_gradients(X), self.weights)


class TabulatedPath:
    """Exact prior draw realized on a fixed finite location set.

    Evaluation is a lookup by exact coordinates and fails for locations the
    draw was not realized on. Used to push exact location-scale draws
    through pathwise update rules.
    """

    def __init__(self, locations: np.ndarray, values: np.ndarray):
        locations = np.ascontiguousarray(locations, dtype=float)
        values = np.asarray(values, dtype=float)
        if locations.ndim != 2 or values.shape != (locations.shape[0],):
            raise ValueError("locations must be (n, d) with one value per row")
        self.locations = locations
        self.values = values
        self._index = {row.tobytes(): i for i, row in enumerate(locations)}

    def evaluate(self, X: np.ndarray) -> np.ndarray:
        X = np.ascontiguousarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.locations.shape[1]:
            raise ValueError("X must match the tabulated location dimension")
        try:
            idx = [self._index[row.tobytes()] for row in X]
        except KeyError:
            raise ValueError("tabulated path queried outside its realized location set")
        return self.values[np.asarray(idx, dtype=int)] if idx else np.zeros(0)


class ExactPriorFunction:
    """Lazily materialized exact prior draw.

    Each query extends the realized set with an exact conditional draw, so
    repeated queries are mutually consistent with a single function drawn
    from the prior. Not safe for concurrent extension.
    """

    def __init__(self, kernel: Kernel, rng: np.random.Generator):
        self.kernel = kernel
        self.rng = np.random.default_rng(rng)
        self._locations = np.zeros((0, kernel.dim))
        self._values = np.zeros(0)
        self._index: dict[bytes, int] = {}

    def __call__(self, X: np.ndarray) -> np.ndarray:
        X = np.ascontiguousarray(_check_locations(X, self.kernel.dim, "X"))
        keys = [row.tobytes() for row in X]
        new_rows = []
        seen_new: dict[bytes, int] = {}
        for key, row in zip(keys, X):
            if key not in self._index and key not in seen_new:
                seen_new[key] = len(new_rows)
                new_rows.append(row)
        if new_rows:
            X_new = np.asarray(new_rows)
            if self._locations.shape[0] == 0:
                f_new = sample_exact(self.kernel, X_new, 1, self.rng)[0]
            else:
                f_new = sample_exact_conditional(
                    self.kernel, self._locations, self._values, X_new, self.rng
                )
            base = self._locations.shape[0]
            self._locations = np.vstack([self._locations, X_new])
            self._values = np.concatenate([self._values, f_new])
            for key, offset in seen_new.items():
                self._index[key] = base + offset
        return self._values[[self._index[key] for key in keys]]


def sample_exact(
    kernel: Kernel, X: np.ndarray, count: int, rng: np.random.Generator
) -> np.ndarray:
    """Draw `count` exact joint samples of f(X); rows are i.i.d. N(0, K)."""
    X = _check_locations(X, kernel.dim, "X")
    rng = np.random.default_rng(rng)
    factor = linalg.cholesky(eval_kernel(kernel, X, X))
    z = rng.standard_normal((X.shape[0], count))
    return (factor.L @ z).T


def _conditional_moments(
    kernel: Kernel, X_done: np.ndarray, f_done: np.ndarray, X_new: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    K_nn = eval_kernel(kernel, X_done, X_done)
    K_sn = eval_kernel(kernel, X_new, X_done)
    factor = linalg.cholesky(K_nn)
    half = solve_triangular(factor.L, K_sn.T, lower=True)
    mean = half.T @ solve_triangular(factor.L, f_done, lower=True)
    cov = eval_kernel(kernel, X_new, X_new) - half.T @ half
    return mean, 0.5 * (cov + cov.T)


def _sample_psd(cov: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    # Conditional covariances are PSD up to roundoff; clamp outright rather
    # than going through the strict public psd_sqrt precondition.
    w, V = np.linalg.eigh(cov)
    root = (V * np.sqrt(np.maximum(w, 0.0))) @ V.T
    return root @ rng.standard_normal(cov.shape[0])


def sample_exact_conditional(
    kernel: Kernel,
    X_done: np.ndarray,
    f_done: np.ndarray,
    X_new: np.ndarray,
    rng: np.random.Generator,
) -> np.ndarray:
    """Extend an exact draw: sample f(X_new) | f(X_done) = f_done.

    The concatenated values are distributed as one joint exact draw over
    X_done and X_new.
    """
    X_done = _check_locations(X_done, kernel.dim, "X_done")
    X_new = _check_locations(X_new, kernel.dim, "X_new")
    f_done = np.asarray(f_done, dtype=float)
    if X_done.shape[0] == 0:
        raise ValueError("X_done must be nonempty; use sample_exact instead")
    if f_done.shape != (X_done.shape[0],):
        raise ValueError("f_done length must match X_done")
    rng = np.random.default_rng(rng)
    mean, cov = _conditional_moments(kernel, X_done, f_done, X_new)
    return mean + _sample_psd(cov, rng)


def build_rff_basis(
    kernel: Kernel, num_features: int, rng: np.random.Generator
) -> FourierFeatureMap:
    """Random Fourier feature basis for a kernel with a spectral density."""
    rng = np.random.default_rng(rng)
    sampler = SpectralSampler(kernel)
    frequencies = sampler.sample(num_features, rng)
    phases = rng.uniform(0.0, 2.0 * math.pi, size=num_features)
    return FourierFeatureMap(frequencies=frequencies, phases=phases, kernel=kernel)


def sample_prior_path(
    basis: Basis, count: int, rng: np.random.Generator
) -> list[PriorPath]:
    """Draw `count` independent weight vectors over a shared basis."""
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = np.random.default_rng(rng)
    W = rng.standard_normal((count, basis.num_features))
    if isinstance(basis, KlBasis):
        W = W * np.sqrt(basis.eigenvalues)
    return [PriorPath(basis=basis, weights=w) for w in W]


def build_kl_path(basis: KlBasis, rng: np.random.Generator) -> PriorPath:
    """Draw one path from a truncated KL expansion, w_i ~ N(0, lambda_i)."""
    return sample_prior_path(basis, 1, rng)[0]


def eval_path(path, X: np.ndarray, mean_fn: Callable[[np.ndarray], np.ndarray] | None = None):
    """Evaluate a prior or posterior path at locations X.

    Pure and repeatable: never consumes randomness. `mean_fn` optionally
    adds a deterministic mean on top of the centered draw.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValueError(f"X must be a 2-d location matrix, got shape {X.shape}")
    values = path.evaluate(X) if X.shape[0] else np.zeros(0)
    if mean_fn is not None and X.shape[0]:
        values = values + np.asarray(mean_fn(X), dtype=float).reshape(len(X))
    return values


def save_basis(basis: FourierFeatureMap, path: str) -> None:
    """Write a Fourier basis to a JSON text record."""
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(basis.to_record(), fh)


def load_basis(path: str) -> FourierFeatureMap:
    with open(path, "r", encoding="utf-8") as fh:
        return FourierFeatureMap.from_record(json.load(fh))
