"""Bundled and user-supplied benchmark datasets.

Iris ships with the package (public-domain measurements).  The crabs and
athlete (AIS) tables are loaded from user-supplied CSV files because their
redistribution terms vary; loaders accept a path or fall back to the
``EMCWM_CRABS_CSV`` / ``EMCWM_AIS_CSV`` environment variables.
"""

from __future__ import annotations

import os
from importlib import resources

from .io import ColumnSpec, load_csv
from .model import Dataset

__all__ = ["load_iris", "load_crabs", "load_ais"]


def _bundled(name: str) -> str:
    return str(resources.files("emcwm.data").joinpath(name))


def load_iris() -> Dataset:
    """Iris with the width measurements as responses and lengths as covariates."""
    return load_csv(
        _bundled("iris.csv"),
        ColumnSpec(
            response_cols=("sepal_width", "petal_width"),
            covariate_cols=("sepal_length", "petal_length"),
            label_col="species",
        ),
    )


def _resolve(path: str | None, env_var: str, what: str) -> str:
    path = path or os.environ.get(env_var)
    if not path or not os.path.exists(path):
        raise FileNotFoundError(
            f"{what} data not bundled; provide a CSV path or set {env_var}"
        )
    return path


def load_crabs(path: str | None = None) -> Dataset:
    """Crabs morphology with width measurements (CW, FL, RW) as responses.

    Expects the classic columns sp, sex, FL, RW, CL, CW, BD; the label is the
    colour/sex pair.
    """
    path = _resolve(path, "EMCWM_CRABS_CSV", "crabs")
    ds = load_csv(
        path,
        ColumnSpec(
            response_cols=("CW", "FL", "RW"),
            covariate_cols=("CL", "BD"),
            label_col="sp",
        ),
    )
    # rebuild the 4-class label from colour and sex
    import csv

    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    labels = [f"{r['sp']}{r['sex']}" for r in rows]
    return Dataset(
        x=ds.x, y=ds.y, labels=labels, names_x=ds.names_x, names_y=ds.names_y
    )


def load_ais(path: str | None = None) -> Dataset:
    """Athlete biomedical data: blood counts as responses, biometrics as covariates."""
    path = _resolve(path, "EMCWM_AIS_CSV", "AIS")
    return load_csv(
        path,
        ColumnSpec(
            response_cols=("RCC", "WCC", "Fe"),
            covariate_cols=("BMI", "SSF", "Bfat", "LBM"),
            label_col="sex",
        ),
    )
