"""Core domain types and density evaluation for the cluster-weighted mixture.

Each component g models the covariates as N(mean_x[g], cov_x[g]) and the
response given covariates as N(coeffs[g]' x*, cov_y[g]) with x* = (1, x).
All densities are computed and combined in log space; probabilities are
materialized only in the responsibility matrix.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import logsumexp

from .covariance import CovStructure, CovarianceError

__all__ = [
    "Dataset",
    "ComponentParams",
    "MixtureParams",
    "Responsibilities",
    "IdentifiabilityWarning",
    "regression_mean",
    "gaussian_logpdf",
    "joint_log_components",
    "loglik",
    "map_labels",
]

_LOG_2PI = np.log(2.0 * np.pi)


class IdentifiabilityWarning(UserWarning):
    """Two components share regression coefficients and response covariance."""


@dataclass(frozen=True)
class Dataset:
    """Paired covariate and response matrices, optionally with true labels."""

    x: np.ndarray  # (N, p)
    y: np.ndarray  # (N, d)
    labels: Optional[np.ndarray] = None
    names_x: Optional[Sequence[str]] = None
    names_y: Optional[Sequence[str]] = None

    def __post_init__(self):
        x = np.atleast_2d(np.asarray(self.x, dtype=float))
        y = np.atleast_2d(np.asarray(self.y, dtype=float))
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        if x.ndim != 2 or y.ndim != 2:
            raise ValueError("covariates and responses must be 2-d arrays")
        if x.shape[0] != y.shape[0]:
            raise ValueError("covariates and responses must have equal row counts")
        if x.shape[0] < 1 or x.shape[1] < 1 or y.shape[1] < 1:
            raise ValueError("empty dataset")
        if not (np.isfinite(x).all() and np.isfinite(y).all()):
            raise ValueError("dataset contains non-finite entries")
        if self.labels is not None:
            labels = np.asarray(self.labels)
            if labels.shape != (x.shape[0],):
                raise ValueError("labels length must match the number of rows")
            object.__setattr__(self, "labels", labels)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def p(self) -> int:
        return self.x.shape[1]

    @property
    def d(self) -> int:
        return self.y.shape[1]

    def design_matrix(self) -> np.ndarray:
        """x* rows: a leading 1 column prepended to the covariates."""
        cached = getattr(self, "_design", None)
        if cached is None:
            cached = np.hstack([np.ones((self.n, 1)), self.x])
            object.__setattr__(self, "_design", cached)
        return cached

    def moment_bases(self) -> dict:
        """Per-row outer products reused by every weighted M-step.

        Flattened so each weighted scatter is a single (G, N) x (N, k*k)
        matrix product.
        """
        cached = getattr(self, "_moments", None)
        if cached is None:
            xs = self.design_matrix()
            cached = {
                "xx": (self.x[:, :, None] * self.x[:, None, :]).reshape(self.n, -1),
                "ss": (xs[:, :, None] * xs[:, None, :]).reshape(self.n, -1),
                "sy": (xs[:, :, None] * self.y[:, None, :]).reshape(self.n, -1),
                "yy": (self.y[:, :, None] * self.y[:, None, :]).reshape(self.n, -1),
            }
            object.__setattr__(self, "_moments", cached)
        return cached


@dataclass(frozen=True)
class ComponentParams:
    """Parameters of one mixture component."""

    weight: float
    mean_x: np.ndarray  # (p,)
    cov_x: np.ndarray  # (p, p)
    coeffs: np.ndarray  # (1 + p, d), first row = intercepts
    cov_y: np.ndarray  # (d, d)

    def __post_init__(self):
        for name in ("mean_x", "cov_x", "coeffs", "cov_y"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        if not 0.0 < self.weight < 1.0 + 1e-12:
            raise ValueError("component weight must lie in (0, 1]")
        p = self.mean_x.shape[0]
        d = self.cov_y.shape[0]
        if self.cov_x.shape != (p, p) or self.cov_y.shape != (d, d):
            raise ValueError("covariance shapes do not match the means")
        if self.coeffs.shape != (1 + p, d):
            raise ValueError(f"coeffs must be ({1 + p}, {d})")
        for cov in (self.cov_x, self.cov_y):
            if np.max(np.abs(cov - cov.T)) > 1e-8:
                raise CovarianceError("component covariance is not symmetric")

    @classmethod
    def _unchecked(cls, weight, mean_x, cov_x, coeffs, cov_y):
        """Internal fast path for values produced by the M-step itself."""
        obj = object.__new__(cls)
        object.__setattr__(obj, "weight", float(weight))
        object.__setattr__(obj, "mean_x", mean_x)
        object.__setattr__(obj, "cov_x", cov_x)
        object.__setattr__(obj, "coeffs", coeffs)
        object.__setattr__(obj, "cov_y", cov_y)
        return obj


@dataclass(frozen=True)
class MixtureParams:
    """A full mixture: components plus the structure labels they were fit under."""

    components: tuple
    structure_y: CovStructure = CovStructure.VVV
    structure_x: CovStructure = CovStructure.VVV

    def __post_init__(self):
        comps = tuple(self.components)
        if not comps:
            raise ValueError("at least one component required")
        object.__setattr__(self, "components", comps)
        object.__setattr__(self, "structure_y", CovStructure.parse(self.structure_y))
        object.__setattr__(self, "structure_x", CovStructure.parse(self.structure_x))
        total = sum(c.weight for c in comps)
        if abs(total - 1.0) > 1e-12 * max(1.0, len(comps)):
            raise ValueError(f"component weights sum to {total}, expected 1")
        self._check_identifiability()

    @classmethod
    def _unchecked(cls, components, structure_y, structure_x, stacked=None):
        """Internal fast path for values produced by the M-step itself."""
        obj = object.__new__(cls)
        object.__setattr__(obj, "components", tuple(components))
        object.__setattr__(obj, "structure_y", structure_y)
        object.__setattr__(obj, "structure_x", structure_x)
        if stacked is not None:
            object.__setattr__(obj, "_stacked", stacked)
        obj._check_identifiability()
        return obj

    def _check_identifiability(self):
        comps = self.components
        for i in range(len(comps)):
            for j in range(i + 1, len(comps)):
                same_beta = np.max(np.abs(comps[i].coeffs - comps[j].coeffs)) <= 1e-8
                same_cov = same_beta and (
                    np.max(np.abs(comps[i].cov_y - comps[j].cov_y)) <= 1e-8
                )
                if same_beta and same_cov:
                    warnings.warn(
                        f"components {i} and {j} share regression coefficients and "
                        "response covariance; the mixture may not be identifiable",
                        IdentifiabilityWarning,
                        stacklevel=3,
                    )
                    return

    @property
    def n_components(self) -> int:
        return len(self.components)

    @property
    def weights(self) -> np.ndarray:
        return np.array([c.weight for c in self.components])

    def stacked(self) -> dict:
        """Component parameters as batched arrays, cached per instance."""
        cached = getattr(self, "_stacked", None)
        if cached is None:
            cached = {
                "weights": self.weights,
                "means_x": np.stack([c.mean_x for c in self.components]),
                "cov_x": np.stack([c.cov_x for c in self.components]),
                "coeffs": np.stack([c.coeffs for c in self.components]),
                "cov_y": np.stack([c.cov_y for c in self.components]),
            }
            object.__setattr__(self, "_stacked", cached)
        return cached


@dataclass(frozen=True)
class Responsibilities:
    """Posterior membership probabilities, one row per observation."""

    tau: np.ndarray  # (N, G)

    def __post_init__(self):
        tau = np.asarray(self.tau, dtype=float)
        object.__setattr__(self, "tau", tau)
        if tau.ndim != 2:
            raise ValueError("tau must be 2-d")
        if np.any(tau < -1e-15) or np.any(tau > 1 + 1e-15):
            raise ValueError("tau entries must lie in [0, 1]")
        if np.max(np.abs(tau.sum(axis=1) - 1.0)) > 1e-12:
            raise ValueError("tau rows must sum to 1")

    @classmethod
    def _unchecked(cls, tau):
        """Internal fast path for rows normalized by construction."""
        obj = object.__new__(cls)
        object.__setattr__(obj, "tau", tau)
        return obj

    @property
    def n_components(self) -> int:
        return self.tau.shape[1]


def regression_mean(coeffs: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Conditional response mean coeffs' (1, x) for one covariate vector."""
    coeffs = np.asarray(coeffs, dtype=float)
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or coeffs.ndim != 2 or coeffs.shape[0] != x.shape[0] + 1:
        raise ValueError(
            f"shape mismatch: coeffs {coeffs.shape} with covariate vector {x.shape}"
        )
    return coeffs[0] + x @ coeffs[1:]


def gaussian_logpdf(v: np.ndarray, mean: np.ndarray, cov: np.ndarray) -> np.ndarray:
    """Multivariate normal log-density via Cholesky factorization.

    ``v`` may be a single q-vector or an (N, q) matrix of rows.
    """
    v = np.asarray(v, dtype=float)
    mean = np.asarray(mean, dtype=float)
    cov = np.asarray(cov, dtype=float)
    single = v.ndim == 1
    dev = np.atleast_2d(v) - mean
    q = cov.shape[0]
    try:
        lower = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise CovarianceError(f"covariance is not positive definite: {exc}") from exc
    z = solve_triangular(lower, dev.T, lower=True)
    logdet = 2.0 * np.sum(np.log(np.diagonal(lower)))
    out = -0.5 * (q * _LOG_2PI + logdet + np.sum(z * z, axis=0))
    return float(out[0]) if single else out


def joint_log_components(data: Dataset, params: MixtureParams) -> np.ndarray:
    """(N, G) matrix of log pi_g + log phi(y | x, g) + log phi(x | g)."""
    xs = data.design_matrix()
    stk = params.stacked()
    dev_x = data.x[None, :, :] - stk["means_x"][:, None, :]  # (G, N, p)
    dev_y = data.y[None, :, :] - xs @ stk["coeffs"]  # broadcast to (G, N, d)
    lx = _batch_logpdf(dev_x, stk["cov_x"])
    ly = _batch_logpdf(dev_y, stk["cov_y"])
    return (np.log(stk["weights"])[:, None] + lx + ly).T


def _batch_logpdf(dev: np.ndarray, covs: np.ndarray) -> np.ndarray:
    """Centered log-densities for G components at once; dev is (G, N, q)."""
    q = covs.shape[-1]
    try:
        lower = np.linalg.cholesky(covs)
    except np.linalg.LinAlgError as exc:
        raise CovarianceError(f"covariance is not positive definite: {exc}") from exc
    # inverse of a small triangular factor is cheap and stable
    linv = np.linalg.inv(lower)
    z = dev @ linv.transpose(0, 2, 1)
    logdet = 2.0 * np.sum(np.log(np.diagonal(lower, axis1=1, axis2=2)), axis=1)
    return -0.5 * (q * _LOG_2PI + logdet[:, None] + np.square(z).sum(axis=2))


def loglik(data: Dataset, params: MixtureParams) -> float:
    """Observed-data log-likelihood, stabilized with log-sum-exp."""
    return float(np.sum(logsumexp(joint_log_components(data, params), axis=1)))


def map_labels(tau: Responsibilities | np.ndarray) -> np.ndarray:
    """Hard assignment per row; ties go to the lowest component index."""
    mat = tau.tau if isinstance(tau, Responsibilities) else np.asarray(tau)
    return np.argmax(mat, axis=1)
