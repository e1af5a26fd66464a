"""Scikit-learn style estimators wrapping the EM fit and the model search.

``ClusterWeightedModel`` fits one structure pair; ``ClusterWeightedModelSearch``
runs the full grid and adopts the best model by information criterion.  Both
follow the sklearn parameter conventions (``get_params`` / ``set_params``,
trailing-underscore fitted attributes) so they compose with pipelines and
model-selection tooling that passes ``(X, Y)`` pairs.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from . import em, selection
from .covariance import CovStructure
from .model import Dataset, map_labels

__all__ = ["ClusterWeightedModel", "ClusterWeightedModelSearch", "FitFailedError"]


class FitFailedError(RuntimeError):
    """EM terminated with a degeneracy diagnostic instead of parameters."""


def _as_dataset(X, Y) -> Dataset:
    X = check_array(X, ensure_2d=True, dtype=float)
    Y = check_array(Y, ensure_2d=True, dtype=float)
    return Dataset(x=X, y=Y)


class ClusterWeightedModel(BaseEstimator):
    """Gaussian cluster-weighted mixture with constrained covariances.

    Parameters
    ----------
    n_components : int
        Number of mixture components.
    structure_y, structure_x : str
        Three-letter covariance constraint for the response and covariate
        sides (EII ... VVV).
    max_iter : int
        EM iteration cap.
    tol : float
        Aitken convergence threshold on the extrapolated log-likelihood gap.
    min_component_weight : float or None
        Expected-count floor per component; None means p + d + 1.
    init : 'pilot', 'kmeans', or array of labels
        Starting partition.  'pilot' runs the shared-covariance pilot
        protocol; 'kmeans' clusters the concatenated (x, y) rows.
    pilot_runs : int
        Number of pilot starts when ``init='pilot'``.
    random_state : int
        Seed for every stochastic choice; fits are bit-reproducible.
    """

    def __init__(
        self,
        n_components=1,
        structure_y="VVV",
        structure_x="VVV",
        max_iter=1000,
        tol=1e-5,
        min_component_weight=None,
        init="pilot",
        pilot_runs=10,
        random_state=0,
    ):
        self.n_components = n_components
        self.structure_y = structure_y
        self.structure_x = structure_x
        self.max_iter = max_iter
        self.tol = tol
        self.min_component_weight = min_component_weight
        self.init = init
        self.pilot_runs = pilot_runs
        self.random_state = random_state

    def _config(self) -> em.FitConfig:
        return em.FitConfig(
            n_components=self.n_components,
            structure_y=CovStructure.parse(self.structure_y),
            structure_x=CovStructure.parse(self.structure_x),
            max_iter=self.max_iter,
            aitken_eps=self.tol,
            min_component_weight=self.min_component_weight,
            seed=self.random_state,
        )

    def _initial_labels(self, data: Dataset) -> np.ndarray:
        if isinstance(self.init, str):
            if self.init == "pilot":
                labels, _ = selection.init_labels(
                    data,
                    self.n_components,
                    pilot_runs=self.pilot_runs,
                    seed=self.random_state,
                    base_config=self._config(),
                )
                return labels
            if self.init == "kmeans":
                if self.n_components == 1:
                    return np.zeros(data.n, dtype=int)
                return selection.kmeans(
                    np.hstack([data.x, data.y]),
                    self.n_components,
                    seed=self.random_state,
                )
            raise ValueError(f"unknown init {self.init!r}")
        labels = np.asarray(self.init)
        if labels.shape != (data.n,):
            raise ValueError("init label array must have one entry per row")
        return labels

    def fit(self, X, Y):
        """Fit by EM on covariates X (N, p) and responses Y (N, d)."""
        data = _as_dataset(X, Y)
        result = em.fit(data, self._config(), self._initial_labels(data))
        if not result.ok:
            raise FitFailedError(result.failure)
        self._adopt(result, data)
        return self

    def _adopt(self, result: em.FitResult, data: Dataset):
        params = result.params
        self.result_ = result
        self.mixture_ = params
        self.weights_ = params.weights
        self.means_x_ = np.stack([c.mean_x for c in params.components])
        self.covariances_x_ = np.stack([c.cov_x for c in params.components])
        self.coefficients_ = np.stack([c.coeffs for c in params.components])
        self.covariances_y_ = np.stack([c.cov_y for c in params.components])
        self.responsibilities_ = result.tau.tau
        self.labels_ = result.labels
        self.log_likelihood_ = result.final_loglik
        self.n_params_ = result.n_params
        self.bic_ = result.bic
        self.icl_ = result.icl
        self.n_iter_ = result.iterations
        self.converged_ = result.converged
        self.n_features_in_ = data.p

    def predict_proba(self, X, Y):
        """Posterior component membership for new (X, Y) pairs."""
        check_is_fitted(self, "mixture_")
        tau, _ = em.e_step(_as_dataset(X, Y), self.mixture_)
        return tau.tau

    def predict(self, X, Y):
        """MAP component labels for new (X, Y) pairs."""
        return map_labels(self.predict_proba(X, Y))

    def score(self, X, Y):
        """Mean observed-data log-likelihood per observation."""
        check_is_fitted(self, "mixture_")
        from .model import loglik

        data = _as_dataset(X, Y)
        return loglik(data, self.mixture_) / data.n


class ClusterWeightedModelSearch(BaseEstimator):
    """Exhaustive structure/size search selecting by BIC or ICL.

    Fits every pair from ``structures_y`` x ``structures_x`` for each G in
    [g_min, g_max], all started from per-G pilot labels, and adopts the
    best-ranked non-failed fit.
    """

    def __init__(
        self,
        g_min=1,
        g_max=4,
        structures_y="all",
        structures_x="all",
        criterion="bic",
        pilot_runs=10,
        max_iter=1000,
        tol=1e-5,
        min_component_weight=None,
        random_state=0,
        threads=1,
    ):
        self.g_min = g_min
        self.g_max = g_max
        self.structures_y = structures_y
        self.structures_x = structures_x
        self.criterion = criterion
        self.pilot_runs = pilot_runs
        self.max_iter = max_iter
        self.tol = tol
        self.min_component_weight = min_component_weight
        self.random_state = random_state
        self.threads = threads

    @staticmethod
    def _structures(value):
        if value == "all" or value is None:
            return selection.ALL_STRUCTURES
        if isinstance(value, str):
            value = value.split(",")
        return tuple(CovStructure.parse(v) for v in value)

    def _spec(self) -> selection.SearchSpec:
        return selection.SearchSpec(
            g_min=self.g_min,
            g_max=self.g_max,
            structures_y=self._structures(self.structures_y),
            structures_x=self._structures(self.structures_x),
            pilot_runs=self.pilot_runs,
            criterion=self.criterion,
            seed=self.random_state,
            max_iter=self.max_iter,
            aitken_eps=self.tol,
            min_component_weight=self.min_component_weight,
            threads=self.threads,
        )

    def fit(self, X, Y):
        data = _as_dataset(X, Y)
        result = selection.search(data, self._spec())
        if result.best is None:
            raise FitFailedError("every fit in the search grid failed")
        self.search_result_ = result
        self.best_record_ = result.best
        best = result.best.fit
        delegate = ClusterWeightedModel(
            n_components=result.best.n_components,
            structure_y=result.best.structure_y.value,
            structure_x=result.best.structure_x.value,
            max_iter=self.max_iter,
            tol=self.tol,
            random_state=self.random_state,
        )
        delegate._adopt(best, data)
        self.best_estimator_ = delegate
        self.labels_ = best.labels
        self.bic_ = best.bic
        self.icl_ = best.icl
        self.n_components_ = result.best.n_components
        self.structure_y_ = result.best.structure_y
        self.structure_x_ = result.best.structure_x
        return self

    def predict(self, X, Y):
        check_is_fitted(self, "best_estimator_")
        return self.best_estimator_.predict(X, Y)

    def predict_proba(self, X, Y):
        check_is_fitted(self, "best_estimator_")
        return self.best_estimator_.predict_proba(X, Y)
