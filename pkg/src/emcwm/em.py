"""EM fitting of one cluster-weighted mixture under fixed covariance structures."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import covariance as cov_mod
from .covariance import (
    CovStructure,
    CovarianceError,
    DegenerateCovarianceError,
    WeightedScatter,
    free_params,
)
from .model import (
    ComponentParams,
    Dataset,
    MixtureParams,
    Responsibilities,
    joint_log_components,
    map_labels,
)

__all__ = [
    "FitConfig",
    "FitResult",
    "e_step",
    "m_step",
    "aitken_converged",
    "count_params",
    "fit",
]


@dataclass(frozen=True)
class FitConfig:
    """Settings for one EM run."""

    n_components: int
    structure_y: CovStructure = CovStructure.VVV
    structure_x: CovStructure = CovStructure.VVV
    max_iter: int = 1000
    aitken_eps: float = 1e-5
    # expected-count floor per component; None means p + d + 1
    min_component_weight: Optional[float] = None
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "structure_y", CovStructure.parse(self.structure_y))
        object.__setattr__(self, "structure_x", CovStructure.parse(self.structure_x))
        if self.n_components < 1:
            raise ValueError("n_components must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be positive")
        if self.aitken_eps <= 0:
            raise ValueError("aitken_eps must be positive")
        if self.min_component_weight is not None and self.min_component_weight < 1:
            raise ValueError("min_component_weight must be at least 1")

    def resolved_min_weight(self, data: Dataset) -> float:
        if self.min_component_weight is not None:
            return float(self.min_component_weight)
        return float(data.p + data.d + 1)


@dataclass(frozen=True)
class FitResult:
    """Converged (or failed) EM output."""

    params: Optional[MixtureParams]
    tau: Optional[Responsibilities]
    loglik_trace: np.ndarray
    final_loglik: float
    n_params: int
    bic: float
    icl: float
    labels: Optional[np.ndarray]
    converged: bool
    iterations: int
    failure: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.failure is None


def _check_collapse(w: np.ndarray, raw_scale: np.ndarray, what: str) -> None:
    """Reject scatters that collapsed relative to the uncentered second moment.

    Catches exact-fit degeneracies (e.g. a noise-free linear response) that a
    purely within-matrix eigenvalue ratio cannot see.
    """
    min_eig = np.linalg.eigvalsh(w)[:, 0]
    bad = min_eig < 1e-12 * np.maximum(raw_scale, 0.0)
    if np.any(bad):
        g = int(np.flatnonzero(bad)[0])
        raise DegenerateCovarianceError(
            f"{what} for component {g} collapsed "
            f"(eigenvalue {min_eig[g]:.3e} against scale {raw_scale[g]:.3e})"
        )


def e_step(data: Dataset, params: MixtureParams) -> tuple[Responsibilities, float]:
    """Responsibilities and observed-data log-likelihood for current params."""
    logc = joint_log_components(data, params)
    top = logc.max(axis=1, keepdims=True)
    shifted = np.exp(logc - top)
    norm = shifted.sum(axis=1, keepdims=True)
    tau = shifted / norm
    row_lse = top[:, 0] + np.log(norm[:, 0])
    return Responsibilities._unchecked(tau), float(row_lse.sum())


def m_step(
    data: Dataset,
    tau: Responsibilities | np.ndarray,
    structure_y: CovStructure | str,
    structure_x: CovStructure | str,
    prev: Optional[MixtureParams] = None,
) -> MixtureParams:
    """Weighted-ML parameter updates for all components.

    ``prev`` warm-starts the iterative constrained covariance estimators so
    that successive M-steps preserve the generalized-EM monotonicity.
    """
    t = tau.tau if isinstance(tau, Responsibilities) else np.asarray(tau, dtype=float)
    structure_y = CovStructure.parse(structure_y)
    structure_x = CovStructure.parse(structure_x)
    n_g = t.sum(axis=0)
    if np.any(n_g <= 0):
        raise DegenerateCovarianceError("a component received zero total weight")
    N, G = t.shape[0], t.shape[1]
    pi = n_g / N

    # covariate side: weighted means and scatters
    mu_x = (t.T @ data.x) / n_g[:, None]
    p, d, k = data.p, data.d, 1 + data.p
    bases = data.moment_bases()
    tt = t.T  # (G, N)

    # scatter of x about the weighted mean: sum t x x' - n mu mu'
    w_x = (tt @ bases["xx"]).reshape(G, p, p)
    raw_scale_x = np.trace(w_x, axis1=1, axis2=2)
    w_x -= n_g[:, None, None] * (mu_x[:, :, None] * mu_x[:, None, :])
    w_x = 0.5 * (w_x + w_x.transpose(0, 2, 1))
    _check_collapse(w_x, raw_scale_x, "covariate scatter")

    xtx = (tt @ bases["ss"]).reshape(G, k, k)
    xty = (tt @ bases["sy"]).reshape(G, k, d)
    try:
        coeffs = np.linalg.solve(xtx, xty)
    except np.linalg.LinAlgError as exc:
        raise DegenerateCovarianceError(
            f"rank-deficient weighted design matrix: {exc}"
        ) from exc
    # residual scatter: Syy - Sxy' B, using the normal equations Sxx B = Sxy
    w_y = (tt @ bases["yy"]).reshape(G, d, d)
    raw_scale_y = np.trace(w_y, axis1=1, axis2=2)
    w_y -= xty.transpose(0, 2, 1) @ coeffs
    w_y = 0.5 * (w_y + w_y.transpose(0, 2, 1))
    _check_collapse(w_y, raw_scale_y, "residual scatter")

    prev_x = prev_y = None
    if prev is not None:
        stk = prev.stacked()
        prev_x, prev_y = stk["cov_x"], stk["cov_y"]
    cov_x = cov_mod.estimate_constrained(
        WeightedScatter(w_x, n_g), structure_x, init=prev_x
    )
    cov_y = cov_mod.estimate_constrained(
        WeightedScatter(w_y, n_g), structure_y, init=prev_y
    )

    comps = tuple(
        ComponentParams._unchecked(pi[g], mu_x[g], cov_x[g], coeffs[g], cov_y[g])
        for g in range(G)
    )
    stacked = {
        "weights": pi,
        "means_x": mu_x,
        "cov_x": cov_x,
        "coeffs": coeffs,
        "cov_y": cov_y,
    }
    return MixtureParams._unchecked(comps, structure_y, structure_x, stacked)


def aitken_converged(
    l_prev2: float, l_prev: float, l_curr: float, eps: float
) -> bool:
    """Aitken-accelerated stopping test on three consecutive log-likelihoods.

    Extrapolates the asymptotic log-likelihood assuming geometric progress and
    stops once the estimated remaining gain is below ``eps``.
    """
    if l_curr - l_prev == 0.0:
        return True
    denom = l_prev - l_prev2
    if denom == 0.0:
        return True
    c = (l_curr - l_prev) / denom
    if c >= 1.0:
        return False
    l_inf = l_prev + (l_curr - l_prev) / (1.0 - c)
    gap = l_inf - l_curr
    return 0.0 <= gap < eps


def count_params(
    structure_y: CovStructure | str,
    structure_x: CovStructure | str,
    G: int,
    p: int,
    d: int,
) -> int:
    """Total free parameters: weights, covariate means/covariances, regression
    coefficients, and response covariances."""
    if G < 1 or p < 1 or d < 1:
        raise ValueError("G, p, d must be positive")
    return (
        (G - 1)
        + G * p
        + free_params(structure_x, p, G)
        + G * d * (1 + p)
        + free_params(structure_y, d, G)
    )


def _hard_tau(labels: np.ndarray, G: int) -> np.ndarray:
    labels = np.asarray(labels)
    uniq = np.unique(labels)
    if uniq.shape[0] != G:
        raise ValueError(
            f"initial labels contain {uniq.shape[0]} groups, expected {G}"
        )
    tau = np.zeros((labels.shape[0], G))
    for g, lab in enumerate(uniq):
        tau[labels == lab, g] = 1.0
    return tau


def _failed(trace, n_params, iterations, reason) -> FitResult:
    return FitResult(
        params=None,
        tau=None,
        loglik_trace=np.asarray(trace, dtype=float),
        final_loglik=trace[-1] if len(trace) else -np.inf,
        n_params=n_params,
        bic=-np.inf,
        icl=-np.inf,
        labels=None,
        converged=False,
        iterations=iterations,
        failure=reason,
    )


def fit(data: Dataset, config: FitConfig, init_labels: np.ndarray) -> FitResult:
    """Run EM from hard initial labels until Aitken convergence or max_iter.

    All failures (undersized components, degenerate covariances, rank
    deficiency) are reported through ``FitResult.failure`` rather than raised,
    so a model search can continue past them.
    """
    from .selection import bic as bic_fn, icl as icl_fn  # local import, no cycle at load

    G = config.n_components
    m = count_params(config.structure_y, config.structure_x, G, data.p, data.d)
    min_weight = config.resolved_min_weight(data)

    tau = _hard_tau(init_labels, G)
    params = None
    trace: list[float] = []
    converged = False
    iterations = 0
    resp = None

    for iterations in range(1, config.max_iter + 1):
        col = tau.sum(axis=0)
        if np.any(col < min_weight):
            g = int(np.argmin(col))
            return _failed(
                trace,
                m,
                iterations - 1,
                f"degenerate component {g}: expected count "
                f"{col[g]:.2f} below floor {min_weight:g}",
            )
        try:
            params = m_step(
                data, tau, config.structure_y, config.structure_x, prev=params
            )
            resp, ll = e_step(data, params)
        except (CovarianceError, np.linalg.LinAlgError) as exc:
            return _failed(trace, m, iterations - 1, f"degenerate covariance: {exc}")
        tau = resp.tau
        trace.append(ll)
        if len(trace) >= 3 and aitken_converged(
            trace[-3], trace[-2], trace[-1], config.aitken_eps
        ):
            converged = True
            break

    final_ll = trace[-1]
    bic_val = bic_fn(final_ll, m, data.n)
    labels = map_labels(resp)
    icl_val = icl_fn(bic_val, resp)
    return FitResult(
        params=params,
        tau=resp,
        loglik_trace=np.asarray(trace),
        final_loglik=final_ll,
        n_params=m,
        bic=bic_val,
        icl=icl_val,
        labels=labels,
        converged=converged,
        iterations=iterations,
        failure=None,
    )
