"""Eigen-decomposed covariance structures and constrained M-step estimators.

A symmetric positive-definite matrix is factored as ``volume * Gamma @
diag(shape) @ Gamma.T`` where the volume is det(Sigma)**(1/q), the shape
vector has unit product, and Gamma is orthogonal.  Constraining volume,
shape, and orientation to be equal or variable across groups yields the
fourteen classical three-letter structures (EII ... VVV).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from enum import Enum

import numpy as np

__all__ = [
    "CovStructure",
    "EigenTriple",
    "WeightedScatter",
    "CovarianceError",
    "DegenerateCovarianceError",
    "InnerLoopWarning",
    "free_params",
    "decompose",
    "reconstruct",
    "estimate_constrained",
    "scatter_objective",
]

# Eigenvalues below EIGVAL_FLOOR * max eigenvalue make a scatter degenerate.
EIGVAL_FLOOR = 1e-12

INNER_TOL = 1e-8
INNER_MAX_ITER = 200


class CovarianceError(ValueError):
    """Invalid covariance input (asymmetric, wrong shape, not SPD)."""


class DegenerateCovarianceError(CovarianceError):
    """A covariance estimate collapsed (near-singular solution path)."""


class InnerLoopWarning(RuntimeWarning):
    """An iterative structure estimator hit its iteration cap."""


class CovStructure(str, Enum):
    """The fourteen volume/shape/orientation constraint labels."""

    EII = "EII"
    VII = "VII"
    EEI = "EEI"
    VEI = "VEI"
    EVI = "EVI"
    VVI = "VVI"
    EEE = "EEE"
    VEE = "VEE"
    EVE = "EVE"
    EEV = "EEV"
    VVE = "VVE"
    VEV = "VEV"
    EVV = "EVV"
    VVV = "VVV"

    @classmethod
    def parse(cls, label: str) -> "CovStructure":
        try:
            return cls(str(label).upper())
        except ValueError:
            raise ValueError(
                f"unknown covariance structure {label!r}; expected one of "
                + ", ".join(m.value for m in cls)
            ) from None

    @property
    def volume_equal(self) -> bool:
        return self.value[0] == "E"

    @property
    def shape_kind(self) -> str:
        """'I' (spherical), 'E' (equal) or 'V' (variable)."""
        return self.value[1]

    @property
    def orientation_kind(self) -> str:
        """'I' (axis-aligned), 'E' (shared) or 'V' (variable)."""
        return self.value[2]

    def __str__(self) -> str:  # pragma: no cover - cosmetic
        return self.value


def free_params(structure: CovStructure | str, q: int, G: int) -> int:
    """Number of free covariance parameters for ``G`` groups in dimension ``q``."""
    if q < 1 or G < 1:
        raise ValueError("q and G must be positive")
    s = CovStructure.parse(structure)
    half = q * (q + 1) // 2
    counts = {
        CovStructure.EII: 1,
        CovStructure.VII: G,
        CovStructure.EEI: q,
        CovStructure.VEI: G + q - 1,
        CovStructure.EVI: G * q - (G - 1),
        CovStructure.VVI: G * q,
        CovStructure.EEE: half,
        CovStructure.VEE: half + (G - 1),
        CovStructure.EVE: half + (G - 1) * (q - 1),
        CovStructure.EEV: G * half - (G - 1) * q,
        CovStructure.VVE: half + (G - 1) * q,
        CovStructure.VEV: G * half - (G - 1) * (q - 1),
        CovStructure.EVV: G * half - (G - 1),
        CovStructure.VVV: G * half,
    }
    return counts[s]


@dataclass(frozen=True)
class EigenTriple:
    """Volume/shape/orientation factorization of one SPD matrix.

    ``volume`` is det(Sigma)**(1/q); ``shape`` is the unit-product diagonal
    (sorted non-increasing); ``orientation`` holds the matching eigenvectors
    as columns.
    """

    volume: float
    shape: np.ndarray
    orientation: np.ndarray

    def __post_init__(self):
        shape = np.asarray(self.shape, dtype=float)
        orient = np.asarray(self.orientation, dtype=float)
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "orientation", orient)
        q = shape.shape[0]
        if self.volume <= 0:
            raise CovarianceError("volume must be positive")
        if np.any(shape <= 0):
            raise CovarianceError("shape entries must be positive")
        if abs(np.prod(shape) - 1.0) > 1e-10:
            raise CovarianceError("shape entries must have unit product")
        if np.any(np.diff(shape) > 1e-10):
            raise CovarianceError("shape entries must be sorted non-increasing")
        if orient.shape != (q, q):
            raise CovarianceError("orientation must be q x q")
        if np.max(np.abs(orient.T @ orient - np.eye(q))) > 1e-10:
            raise CovarianceError("orientation must be orthogonal")

    @property
    def q(self) -> int:
        return self.shape.shape[0]


@dataclass(frozen=True)
class WeightedScatter:
    """Per-group weighted scatter matrices and their total weights."""

    scatters: np.ndarray  # (G, q, q)
    weights: np.ndarray  # (G,)

    def __post_init__(self):
        scat = np.asarray(self.scatters, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        object.__setattr__(self, "scatters", scat)
        object.__setattr__(self, "weights", w)
        if scat.ndim != 3 or scat.shape[1] != scat.shape[2]:
            raise CovarianceError("scatters must be (G, q, q)")
        if w.shape != (scat.shape[0],):
            raise CovarianceError("weights must have one entry per scatter")
        if np.any(w <= 0):
            raise CovarianceError("weights must be positive")
        if np.max(np.abs(scat - scat.transpose(0, 2, 1))) > 1e-10:
            raise CovarianceError("scatters must be symmetric")

    @property
    def n_groups(self) -> int:
        return self.scatters.shape[0]

    @property
    def q(self) -> int:
        return self.scatters.shape[1]


def _ordered_eigh(sigma: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition with non-increasing values and sign-fixed vectors."""
    vals, vecs = np.linalg.eigh(sigma)
    order = np.argsort(-vals, kind="stable")
    vals = vals[order]
    vecs = vecs[:, order]
    # deterministic sign: largest-magnitude entry of each column positive
    idx = np.argmax(np.abs(vecs), axis=0)
    signs = np.sign(vecs[idx, np.arange(vecs.shape[1])])
    signs[signs == 0] = 1.0
    return vals, vecs * signs


def decompose(sigma: np.ndarray) -> EigenTriple:
    """Factor an SPD matrix into volume, shape, and orientation."""
    sigma = np.asarray(sigma, dtype=float)
    if sigma.ndim != 2 or sigma.shape[0] != sigma.shape[1]:
        raise CovarianceError("expected a square matrix")
    if np.max(np.abs(sigma - sigma.T)) > 1e-10:
        raise CovarianceError("matrix is not symmetric")
    q = sigma.shape[0]
    vals, vecs = _ordered_eigh(sigma)
    if vals[-1] <= 0:
        raise DegenerateCovarianceError(
            f"matrix is not positive definite (smallest eigenvalue {vals[-1]:.3e})"
        )
    volume = float(np.exp(np.mean(np.log(vals))))
    shape = vals / volume
    # renormalize away floating-point drift in the unit-product constraint
    shape = shape / np.prod(shape) ** (1.0 / q)
    return EigenTriple(volume=volume, shape=shape, orientation=vecs)


def reconstruct(triple: EigenTriple) -> np.ndarray:
    """Rebuild the SPD matrix from its volume/shape/orientation factors."""
    g = triple.orientation
    out = triple.volume * (g * triple.shape) @ g.T
    return 0.5 * (out + out.T)


def scatter_objective(stats: WeightedScatter, covs: np.ndarray) -> float:
    """Weighted Gaussian log-likelihood term sum_g [-n_g log|S_g| - tr(S_g^-1 W_g)].

    Higher is better; this is the quantity the constrained estimators maximize.
    """
    total = 0.0
    for W, n, S in zip(stats.scatters, stats.weights, covs):
        sign, logdet = np.linalg.slogdet(S)
        if sign <= 0:
            return -np.inf
        total -= n * logdet + np.trace(np.linalg.solve(S, W))
    return float(total)


def _check_spectra(mats: np.ndarray, what: str) -> None:
    vals = np.linalg.eigvalsh(mats)  # (G, q), ascending per matrix
    bad = (vals[:, -1] <= 0) | (vals[:, 0] < EIGVAL_FLOOR * vals[:, -1])
    if np.any(bad):
        g = int(np.flatnonzero(bad)[0])
        raise DegenerateCovarianceError(
            f"{what} for group {g} is numerically singular "
            f"(eigenvalue {vals[g, 0]:.3e} vs largest {vals[g, -1]:.3e})"
        )


def _check_scatter_conditioning(stats: WeightedScatter) -> None:
    _check_spectra(stats.scatters, "scatter matrix")


def _check_estimates(covs: np.ndarray) -> np.ndarray:
    _check_spectra(covs, "covariance estimate")
    return covs


def _det_normalize(diag_or_mat: np.ndarray) -> np.ndarray:
    """Scale a positive diagonal vector or SPD matrix to unit determinant."""
    if diag_or_mat.ndim == 1:
        return diag_or_mat / np.prod(diag_or_mat) ** (1.0 / diag_or_mat.shape[0])
    q = diag_or_mat.shape[0]
    sign, logdet = np.linalg.slogdet(diag_or_mat)
    return diag_or_mat * np.exp(-logdet / q)


def _init_volumes(
    init: np.ndarray | None, W: np.ndarray, n: np.ndarray, q: int
) -> np.ndarray:
    """Starting volumes for the shared-shape loops, warm-started when possible."""
    if init is not None:
        signs, logdets = np.linalg.slogdet(init)
        if np.all(signs > 0):
            return np.exp(logdets / q)
    return np.trace(W, axis1=1, axis2=2) / (n * q)


def _mm_orientation(
    scatters: np.ndarray, inv_diags: np.ndarray, gamma: np.ndarray, alphas: np.ndarray
) -> np.ndarray:
    """One majorization-minimization update of a shared orientation.

    Minimizes sum_g tr(diag(inv_diags[g]) Gamma' W_g Gamma) over orthogonal
    Gamma via the linear surrogate at the current iterate.
    """
    q = gamma.shape[0]
    M = alphas[:, None, None] * np.eye(q) - scatters
    F = ((M @ gamma) * inv_diags[:, None, :]).sum(axis=0)
    u, _, vt = np.linalg.svd(F)
    return u @ vt


def _iterate(update, objective, init_state, max_iter: int, tol: float, label: str):
    """Generic fixed-point loop maximizing ``objective`` (higher is better)."""
    state = init_state
    best = objective(state)
    for _ in range(max_iter):
        state = update(state)
        val = objective(state)
        if abs(val - best) <= tol * (abs(best) + 1.0):
            return state
        best = val
    warnings.warn(
        f"{label} inner loop did not converge in {max_iter} iterations",
        InnerLoopWarning,
        stacklevel=3,
    )
    return state


def estimate_constrained(
    stats: WeightedScatter,
    structure: CovStructure | str,
    init: np.ndarray | None = None,
    max_inner: int = INNER_MAX_ITER,
    tol: float = INNER_TOL,
) -> np.ndarray:
    """Constrained weighted ML covariance estimates for all groups.

    Parameters
    ----------
    stats : WeightedScatter
        Unnormalized scatter matrices W_g and their weights n_g.
    structure : CovStructure or str
        One of the fourteen constraint labels.
    init : ndarray (G, q, q), optional
        Warm start for the iterative structures (VEI, VEE, EVE, VVE, VEV);
        typically the previous M-step's estimates.  Closed-form structures
        ignore it.

    Returns
    -------
    covs : ndarray (G, q, q)

    Raises
    ------
    DegenerateCovarianceError
        If a scatter or an estimate is numerically singular.  No automatic
        jitter is applied; silent regularization would bias model comparison.
    """
    s = CovStructure.parse(structure)
    _check_scatter_conditioning(stats)
    W = stats.scatters
    n = stats.weights
    G, q = stats.n_groups, stats.q
    N = float(n.sum())
    eye = np.eye(q)

    if s is CovStructure.VVV:
        covs = W / n[:, None, None]

    elif s is CovStructure.EEE:
        pooled = W.sum(axis=0) / N
        covs = np.broadcast_to(pooled, (G, q, q)).copy()

    elif s is CovStructure.EII:
        lam = np.trace(W.sum(axis=0)) / (N * q)
        covs = np.broadcast_to(lam * eye, (G, q, q)).copy()

    elif s is CovStructure.VII:
        lam = np.trace(W, axis1=1, axis2=2) / (n * q)
        covs = lam[:, None, None] * eye

    elif s is CovStructure.EEI:
        d = np.diagonal(W.sum(axis=0)) / N
        covs = np.broadcast_to(np.diag(d), (G, q, q)).copy()

    elif s is CovStructure.VVI:
        covs = np.stack([np.diag(np.diagonal(Wg) / ng) for Wg, ng in zip(W, n)])

    elif s is CovStructure.EVI:
        B = np.diagonal(W, axis1=1, axis2=2)  # (G, q)
        if np.any(B <= 0):
            raise DegenerateCovarianceError("zero diagonal scatter entry")
        roots = np.prod(B, axis=1) ** (1.0 / q)  # |diag W_g|^{1/q}
        lam = roots.sum() / N
        covs = np.stack([np.diag(lam * Bg / r) for Bg, r in zip(B, roots)])

    elif s is CovStructure.EVV:
        dets = np.array([np.linalg.slogdet(Wg)[1] for Wg in W])
        roots = np.exp(dets / q)
        lam = roots.sum() / N
        covs = np.stack([lam * Wg / r for Wg, r in zip(W, roots)])

    elif s is CovStructure.EEV:
        omegas = []
        gammas = []
        for Wg in W:
            vals, vecs = _ordered_eigh(Wg)
            omegas.append(vals)
            gammas.append(vecs)
        A = np.sum(omegas, axis=0) / N  # shared lambda * shape, still ordered
        covs = np.stack([(g * A) @ g.T for g in gammas])

    elif s in (CovStructure.VEI, CovStructure.VEV):
        # variable volume, shared shape; axis-aligned or per-group orientation
        if s is CovStructure.VEI:
            B = np.diagonal(W, axis1=1, axis2=2).copy()  # (G, q)
            gammas = None
        else:
            B = np.empty((G, q))
            gammas = []
            for g, Wg in enumerate(W):
                vals, vecs = _ordered_eigh(Wg)
                B[g] = vals
                gammas.append(vecs)
        if np.any(B <= 0):
            raise DegenerateCovarianceError("non-positive scatter spectrum")

        def vei_objective(state):
            lam, delta = state
            return -float(
                np.sum(n * q * np.log(lam)) + np.sum(B / (lam[:, None] * delta))
            )

        def vei_update(state):
            lam, delta = state
            lam = np.sum(B / delta, axis=1) / (n * q)
            delta = _det_normalize(np.sum(B / lam[:, None], axis=0))
            return lam, delta

        delta0 = _det_normalize(np.sort(B.sum(axis=0))[::-1])
        lam0 = _init_volumes(init, W, n, q)
        lam, delta = _iterate(
            vei_update, vei_objective, (lam0, delta0), max_inner, tol, s.value
        )
        if s is CovStructure.VEI:
            covs = np.stack([np.diag(l * delta) for l in lam])
        else:
            covs = np.stack([(g * (l * delta)) @ g.T for g, l in zip(gammas, lam)])

    elif s is CovStructure.VEE:
        # variable volume, shared shape and orientation: Sigma_g = lam_g * C
        def vee_objective(state):
            lam, C = state
            Cinv = np.linalg.inv(C)
            tr = np.tensordot(W, Cinv, axes=([1, 2], [1, 0]))
            return -float(np.sum(n * q * np.log(lam)) + np.sum(tr / lam))

        def vee_update(state):
            lam, C = state
            Cinv = np.linalg.inv(C)
            lam = np.tensordot(W, Cinv, axes=([1, 2], [1, 0])) / (n * q)
            C = _det_normalize(np.sum(W / lam[:, None, None], axis=0))
            return lam, C

        C0 = _det_normalize(W.sum(axis=0))
        lam0 = _init_volumes(init, W, n, q)
        lam, C = _iterate(
            vee_update, vee_objective, (lam0, C0), max_inner, tol, s.value
        )
        covs = lam[:, None, None] * C

    elif s in (CovStructure.EVE, CovStructure.VVE):
        # shared orientation with variable shape (and volume for VVE)
        alphas = np.linalg.eigvalsh(W)[:, -1]

        def gamma_diags(gamma):
            """Per-group diagonal of Gamma' W_g Gamma."""
            return ((W @ gamma) * gamma).sum(axis=1)

        if s is CovStructure.VVE:

            def vve_objective(gamma):
                D = gamma_diags(gamma) / n[:, None]
                if np.any(D <= 0):
                    return -np.inf
                B = gamma_diags(gamma)
                return -float(np.sum(n[:, None] * np.log(D)) + np.sum(B / D))

            def vve_update(gamma):
                D = gamma_diags(gamma) / n[:, None]
                return _mm_orientation(W, 1.0 / D, gamma, alphas)

            objective, update = vve_objective, vve_update
        else:

            def eve_objective(gamma):
                B = gamma_diags(gamma)
                if np.any(B <= 0):
                    return -np.inf
                deltas = B / np.prod(B, axis=1, keepdims=True) ** (1.0 / q)
                lam = np.sum(B / deltas) / (N * q)
                return -float(N * q * np.log(lam) + np.sum(B / deltas) / lam)

            def eve_update(gamma):
                B = gamma_diags(gamma)
                deltas = B / np.prod(B, axis=1, keepdims=True) ** (1.0 / q)
                return _mm_orientation(W, 1.0 / deltas, gamma, alphas)

            objective, update = eve_objective, eve_update

        if init is not None:
            gamma0 = _ordered_eigh(0.5 * (init[0] + init[0].T))[1]
        else:
            gamma0 = _ordered_eigh(W.sum(axis=0))[1]
        gamma = _iterate(update, objective, gamma0, max_inner, tol, s.value)

        B = gamma_diags(gamma)
        if np.any(B <= 0):
            raise DegenerateCovarianceError("degenerate rotated scatter diagonal")
        if s is CovStructure.VVE:
            D = B / n[:, None]
            covs = np.stack([(gamma * Dg) @ gamma.T for Dg in D])
        else:
            deltas = B / np.prod(B, axis=1, keepdims=True) ** (1.0 / q)
            lam = np.sum(B / deltas) / (N * q)
            covs = np.stack([lam * (gamma * dg) @ gamma.T for dg in deltas])

    else:  # pragma: no cover - exhaustive enum
        raise AssertionError(s)

    covs = 0.5 * (covs + covs.transpose(0, 2, 1))
    return _check_estimates(covs)
