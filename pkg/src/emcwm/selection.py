"""Model selection: information criteria, initialization protocol, grid search.

The search fits every requested (response structure, covariate structure)
pair for each number of components.  Initial labels per G come from a pilot
protocol: several EEE-EEE fits started from random partitions plus one
started from k-means, keeping the labels of the best pilot by BIC.
"""

from __future__ import annotations

import hashlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .covariance import CovStructure
from .em import FitConfig, FitResult, fit
from .model import Dataset, Responsibilities

__all__ = [
    "SearchSpec",
    "SearchRecord",
    "SearchResult",
    "InitializationError",
    "bic",
    "icl",
    "kmeans",
    "init_labels",
    "search",
    "canonical_structure_g1",
]

ALL_STRUCTURES = tuple(CovStructure)


class InitializationError(RuntimeError):
    """Every pilot fit failed; no usable starting labels."""


def bic(loglik: float, m: int, n: int) -> float:
    """Bayesian information criterion, 2*loglik - m*log(n).  Higher is better."""
    if n < 1:
        raise ValueError("n must be positive")
    return 2.0 * loglik - m * np.log(n)


def icl(bic_value: float, tau: Responsibilities | np.ndarray) -> float:
    """BIC penalized by the log-responsibility of each MAP assignment."""
    t = tau.tau if isinstance(tau, Responsibilities) else np.asarray(tau, dtype=float)
    best = t[np.arange(t.shape[0]), np.argmax(t, axis=1)]
    return float(bic_value + np.sum(np.log(np.maximum(best, 1e-300))))


def kmeans(points: np.ndarray, G: int, seed: int, max_iter: int = 100) -> np.ndarray:
    """Deterministic Lloyd iterations from seeded distinct-point centers."""
    points = np.asarray(points, dtype=float)
    n = points.shape[0]
    if n < G:
        raise ValueError("need at least G points")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    centers = points[rng.choice(n, size=G, replace=False)].copy()
    labels = np.full(n, -1)
    for _ in range(max_iter):
        d2 = np.sum((points[:, None, :] - centers[None, :, :]) ** 2, axis=2)
        new_labels = np.argmin(d2, axis=1)
        for g in range(G):
            if not np.any(new_labels == g):
                # re-seed an empty cluster at the globally farthest point
                far = int(np.argmax(np.min(d2, axis=1)))
                new_labels[far] = g
                centers[g] = points[far]
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for g in range(G):
            centers[g] = points[labels == g].mean(axis=0)
    return labels


def _derived_seed(*parts) -> int:
    """Stable 63-bit seed from arbitrary string-able parts."""
    digest = hashlib.sha256("|".join(str(p) for p in parts).encode()).digest()
    return int.from_bytes(digest[:8], "big") >> 1


def _random_partition(n: int, G: int, rng: np.random.Generator) -> np.ndarray:
    labels = rng.integers(0, G, size=n)
    # round-robin repair: every component keeps at least 2 members
    for g in range(G):
        while np.sum(labels == g) < 2:
            counts = np.bincount(labels, minlength=G)
            donor = int(np.argmax(counts))
            take = np.flatnonzero(labels == donor)[0]
            labels[take] = g
    return labels


def init_labels(
    data: Dataset,
    G: int,
    pilot_runs: int = 10,
    seed: int = 0,
    base_config: Optional[FitConfig] = None,
) -> tuple[np.ndarray, FitResult | None]:
    """Starting labels for a G-component search via the EEE-EEE pilot protocol.

    Returns the MAP labels of the best pilot by BIC, together with that pilot
    fit (None when G == 1, where no pilot is needed).
    """
    if G == 1:
        return np.zeros(data.n, dtype=int), None
    if pilot_runs < 1:
        raise ValueError("pilot_runs must be at least 1")
    cfg = base_config or FitConfig(n_components=G)
    cfg = replace(
        cfg,
        n_components=G,
        structure_y=CovStructure.EEE,
        structure_x=CovStructure.EEE,
    )

    starts = [kmeans(np.hstack([data.x, data.y]), G, seed=_derived_seed(seed, G, "km"))]
    for r in range(pilot_runs - 1):
        rng = np.random.default_rng(
            np.random.SeedSequence(_derived_seed(seed, G, "rand", r))
        )
        starts.append(_random_partition(data.n, G, rng))

    best: FitResult | None = None
    for labels0 in starts:
        if np.unique(labels0).shape[0] != G:
            continue
        res = fit(data, cfg, labels0)
        if res.ok and (best is None or res.bic > best.bic):
            best = res
    if best is None:
        raise InitializationError(f"all {pilot_runs} pilot fits failed for G={G}")
    return best.labels, best


@dataclass(frozen=True)
class SearchSpec:
    """Grid definition and per-fit settings for a model search."""

    g_min: int = 1
    g_max: int = 4
    structures_y: tuple = ALL_STRUCTURES
    structures_x: tuple = ALL_STRUCTURES
    pilot_runs: int = 10
    criterion: str = "bic"
    seed: int = 0
    max_iter: int = 1000
    aitken_eps: float = 1e-5
    min_component_weight: Optional[float] = None
    threads: int = 1

    def __post_init__(self):
        object.__setattr__(
            self,
            "structures_y",
            tuple(CovStructure.parse(s) for s in self.structures_y),
        )
        object.__setattr__(
            self,
            "structures_x",
            tuple(CovStructure.parse(s) for s in self.structures_x),
        )
        if not (1 <= self.g_min <= self.g_max):
            raise ValueError("need 1 <= g_min <= g_max")
        if not self.structures_y or not self.structures_x:
            raise ValueError("structure subsets must be non-empty")
        if self.criterion not in ("bic", "icl"):
            raise ValueError("criterion must be 'bic' or 'icl'")
        if self.pilot_runs < 1:
            raise ValueError("pilot_runs must be at least 1")


@dataclass(frozen=True)
class SearchRecord:
    """One fitted grid cell."""

    structure_y: CovStructure
    structure_x: CovStructure
    n_components: int
    loglik: float
    n_params: int
    bic: float
    icl: float
    converged: bool
    failure: Optional[str]
    fit: FitResult

    def criterion_value(self, criterion: str) -> float:
        return self.bic if criterion == "bic" else self.icl


@dataclass(frozen=True)
class SearchResult:
    """Ranked outcome of a grid search."""

    table: tuple
    best: Optional[SearchRecord]
    pilots: dict
    criterion: str


def canonical_structure_g1(structure: CovStructure) -> CovStructure:
    """Collapse a structure label to its single-group representative.

    With one component the volume and the equal/variable distinctions vanish,
    leaving spherical, diagonal, and full covariance shapes.
    """
    if structure.shape_kind == "I":
        return CovStructure.EII
    if structure.orientation_kind == "I":
        return CovStructure.EEI
    return CovStructure.EEE


def _fit_cell(args):
    data, spec, sy, sx, G, labels0 = args
    cfg = FitConfig(
        n_components=G,
        structure_y=sy,
        structure_x=sx,
        max_iter=spec.max_iter,
        aitken_eps=spec.aitken_eps,
        min_component_weight=spec.min_component_weight,
        seed=_derived_seed(spec.seed, sy.value, sx.value, G),
    )
    res = fit(data, cfg, labels0)
    return SearchRecord(
        structure_y=sy,
        structure_x=sx,
        n_components=G,
        loglik=res.final_loglik,
        n_params=res.n_params,
        bic=res.bic,
        icl=res.icl,
        converged=res.converged,
        failure=res.failure,
        fit=res,
    )


def search(data: Dataset, spec: SearchSpec) -> SearchResult:
    """Fit every structure pair for each G and rank by the chosen criterion."""
    base_cfg = FitConfig(
        n_components=1,
        max_iter=spec.max_iter,
        aitken_eps=spec.aitken_eps,
        min_component_weight=spec.min_component_weight,
    )
    pilots: dict[int, FitResult | None] = {}
    jobs = []
    init_failures: list[str] = []
    for G in range(spec.g_min, spec.g_max + 1):
        try:
            labels0, pilot = init_labels(
                data, G, spec.pilot_runs, spec.seed, base_config=base_cfg
            )
        except InitializationError as exc:
            init_failures.append(str(exc))
            continue
        pilots[G] = pilot
        if G == 1:
            pairs = sorted(
                {
                    (canonical_structure_g1(sy), canonical_structure_g1(sx))
                    for sy in spec.structures_y
                    for sx in spec.structures_x
                },
                key=lambda t: (t[0].value, t[1].value),
            )
        else:
            pairs = [(sy, sx) for sy in spec.structures_y for sx in spec.structures_x]
        jobs.extend((data, spec, sy, sx, G, labels0) for sy, sx in pairs)

    if not jobs:
        raise InitializationError("; ".join(init_failures) or "empty search grid")

    if spec.threads > 1:
        with ProcessPoolExecutor(max_workers=spec.threads) as pool:
            records = list(pool.map(_fit_cell, jobs, chunksize=8))
    else:
        records = [_fit_cell(j) for j in jobs]

    def sort_key(rec: SearchRecord):
        return (
            -rec.criterion_value(spec.criterion),
            rec.n_params,
            rec.structure_y.value,
            rec.structure_x.value,
            rec.n_components,
        )

    table = tuple(sorted(records, key=sort_key))
    best = next((r for r in table if r.failure is None), None)
    return SearchResult(table=table, best=best, pilots=pilots, criterion=spec.criterion)
