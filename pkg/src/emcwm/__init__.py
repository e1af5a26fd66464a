"""Parsimonious Gaussian cluster-weighted models (eMCWM).

Mixtures whose components model both a covariate density and a multivariate
linear-regression response density, with fourteen eigen-decomposed covariance
constraints on each side, EM fitting, and BIC/ICL model search.
"""

from .covariance import (
    CovStructure,
    CovarianceError,
    DegenerateCovarianceError,
    EigenTriple,
    WeightedScatter,
    decompose,
    estimate_constrained,
    free_params,
    reconstruct,
)
from .em import FitConfig, FitResult, aitken_converged, count_params, e_step, fit, m_step
from .estimators import ClusterWeightedModel, ClusterWeightedModelSearch, FitFailedError
from .io import ColumnSpec, load_csv, write_csv
from .metrics import CrossTab, ari, cross_tab
from .model import (
    ComponentParams,
    Dataset,
    MixtureParams,
    Responsibilities,
    gaussian_logpdf,
    joint_log_components,
    loglik,
    map_labels,
    regression_mean,
)
from .selection import SearchRecord, SearchResult, SearchSpec, bic, icl, init_labels, kmeans, search
from .simulate import GeneratorSpec, dataset1, dataset1_params, sample

__version__ = "0.1.0"

__all__ = [
    "CovStructure",
    "CovarianceError",
    "DegenerateCovarianceError",
    "EigenTriple",
    "WeightedScatter",
    "decompose",
    "estimate_constrained",
    "free_params",
    "reconstruct",
    "FitConfig",
    "FitResult",
    "aitken_converged",
    "count_params",
    "e_step",
    "fit",
    "m_step",
    "ClusterWeightedModel",
    "ClusterWeightedModelSearch",
    "FitFailedError",
    "ColumnSpec",
    "load_csv",
    "write_csv",
    "CrossTab",
    "ari",
    "cross_tab",
    "ComponentParams",
    "Dataset",
    "MixtureParams",
    "Responsibilities",
    "gaussian_logpdf",
    "joint_log_components",
    "loglik",
    "map_labels",
    "regression_mean",
    "SearchRecord",
    "SearchResult",
    "SearchSpec",
    "bic",
    "icl",
    "init_labels",
    "kmeans",
    "search",
    "GeneratorSpec",
    "dataset1",
    "dataset1_params",
    "sample",
]
