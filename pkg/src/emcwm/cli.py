"""Command-line surface: simulate / fit / search / eval with JSON reports.

Exit codes: 0 success, 2 validation error (bad flags, malformed CSV),
3 numerical failure (every fit degenerate).
"""

from __future__ import annotations

import functools
import json
import sys
import time
from importlib.metadata import version as pkg_version

import click
import numpy as np

from . import em, selection
from .covariance import CovStructure
from .estimators import FitFailedError
from .io import ColumnSpec, CsvFormatError, load_csv, write_csv
from .metrics import ari, cross_tab
from .model import ComponentParams, Dataset, MixtureParams
from .selection import InitializationError, SearchSpec
from .simulate import GeneratorSpec, dataset1_params, sample

SCHEMA = "emcwm-report/1"

EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3


def _tool_version() -> str:
    try:
        return pkg_version("emcwm")
    except Exception:  # pragma: no cover - not installed
        return "unknown"


def _emit(report: dict, out: str | None) -> None:
    payload = json.dumps(report, indent=2, default=_jsonify)
    click.echo(payload)
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(payload + "\n")


def _jsonify(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, CovStructure):
        return obj.value
    raise TypeError(f"not JSON-serializable: {type(obj)}")


def _guard(func):
    """Map exceptions to structured JSON errors and exit codes."""

    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except (CsvFormatError, FileNotFoundError, ValueError) as exc:
            _emit({"schema": SCHEMA, "error": {"type": "validation", "message": str(exc)}}, None)
            sys.exit(EXIT_VALIDATION)
        except (FitFailedError, InitializationError) as exc:
            _emit({"schema": SCHEMA, "error": {"type": "numerical", "message": str(exc)}}, None)
            sys.exit(EXIT_NUMERICAL)

    return wrapper


def _columns(responses: str, covariates: str, labels: str | None) -> ColumnSpec:
    return ColumnSpec(
        response_cols=tuple(s.strip() for s in responses.split(",") if s.strip()),
        covariate_cols=tuple(s.strip() for s in covariates.split(",") if s.strip()),
        label_col=labels,
    )


def _maybe_scale(data: Dataset, scale: bool) -> Dataset:
    if not scale:
        return data
    x = (data.x - data.x.mean(axis=0)) / data.x.std(axis=0, ddof=0)
    y = (data.y - data.y.mean(axis=0)) / data.y.std(axis=0, ddof=0)
    return Dataset(x=x, y=y, labels=data.labels, names_x=data.names_x, names_y=data.names_y)


def _params_payload(params: MixtureParams) -> dict:
    return {
        "structure_y": params.structure_y,
        "structure_x": params.structure_x,
        "components": [
            {
                "weight": c.weight,
                "mean_x": c.mean_x,
                "cov_x": c.cov_x,
                "coeffs": c.coeffs,
                "cov_y": c.cov_y,
            }
            for c in params.components
        ],
    }


def _fit_payload(res: em.FitResult) -> dict:
    payload = {
        "loglik": res.final_loglik,
        "n_params": res.n_params,
        "bic": res.bic,
        "icl": res.icl,
        "converged": res.converged,
        "iterations": res.iterations,
        "failure": res.failure,
    }
    if res.ok:
        payload["params"] = _params_payload(res.params)
        payload["labels"] = res.labels
        payload["loglik_trace"] = res.loglik_trace
    return payload


def _metrics_payload(truth, estimated) -> dict:
    tab = cross_tab(truth, estimated)
    return {
        "ari": ari(truth, estimated),
        "cross_tab": {
            "rows": list(tab.rows),
            "cols": [int(c) for c in tab.cols],
            "counts": tab.counts,
        },
    }


@click.group()
def main():
    """Parsimonious Gaussian cluster-weighted models."""


@main.command()
@click.option("--preset", type=click.Choice(["dataset1"]), default=None)
@click.option("--params", "params_file", type=click.Path(exists=True), default=None,
              help="JSON mixture description (alternative to --preset).")
@click.option("--n", type=int, required=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(), required=True)
@_guard
def simulate(preset, params_file, n, seed, out):
    """Generate a dataset from a mixture and write it as CSV."""
    if (preset is None) == (params_file is None):
        raise ValueError("provide exactly one of --preset or --params")
    if n < 1:
        raise ValueError("--n must be positive")
    if preset == "dataset1":
        params = dataset1_params()
    else:
        with open(params_file, encoding="utf-8") as fh:
            raw = json.load(fh)
        comps = tuple(
            ComponentParams(
                weight=c["weight"],
                mean_x=np.asarray(c["mean_x"]),
                cov_x=np.asarray(c["cov_x"]),
                coeffs=np.asarray(c["coeffs"]),
                cov_y=np.asarray(c["cov_y"]),
            )
            for c in raw["components"]
        )
        params = MixtureParams(
            comps,
            structure_y=raw.get("structure_y", "VVV"),
            structure_x=raw.get("structure_x", "VVV"),
        )
    data = sample(GeneratorSpec(params=params, n=n, seed=seed))
    write_csv(out, data)
    click.echo(f"wrote {data.n} rows to {out}")


@main.command()
@click.argument("data_file", type=click.Path(exists=True))
@click.option("--responses", required=True, help="Comma list of response columns.")
@click.option("--covariates", required=True, help="Comma list of covariate columns.")
@click.option("--labels", default=None, help="Optional true-label column.")
@click.option("--g", type=int, required=True)
@click.option("--structure-y", default="VVV", show_default=True)
@click.option("--structure-x", default="VVV", show_default=True)
@click.option("--max-iter", type=int, default=1000, show_default=True)
@click.option("--tol", type=float, default=1e-5, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--scale/--no-scale", default=False, show_default=True)
@click.option("--timing/--no-timing", default=True, show_default=True)
@click.option("--out", type=click.Path(), default=None)
@_guard
def fit(data_file, responses, covariates, labels, g, structure_y, structure_x,
        max_iter, tol, seed, scale, timing, out):
    """Fit a single structure pair by EM and report the result."""
    start = time.perf_counter()
    columns = _columns(responses, covariates, labels)
    data = _maybe_scale(load_csv(data_file, columns), scale)
    labels0, _ = selection.init_labels(
        data, g, seed=seed,
        base_config=em.FitConfig(n_components=max(g, 1), max_iter=max_iter, aitken_eps=tol),
    )
    cfg = em.FitConfig(
        n_components=g,
        structure_y=CovStructure.parse(structure_y),
        structure_x=CovStructure.parse(structure_x),
        max_iter=max_iter,
        aitken_eps=tol,
        seed=seed,
    )
    res = em.fit(data, cfg, labels0)
    if not res.ok:
        raise FitFailedError(res.failure)
    report = {
        "schema": SCHEMA,
        "version": _tool_version(),
        "command": "fit",
        "spec": {
            "data": data_file,
            "responses": list(columns.response_cols),
            "covariates": list(columns.covariate_cols),
            "labels": labels,
            "g": g,
            "structure_y": structure_y,
            "structure_x": structure_x,
            "max_iter": max_iter,
            "tol": tol,
            "seed": seed,
            "scale": scale,
        },
        "result": _fit_payload(res),
    }
    if data.labels is not None:
        report["metrics"] = _metrics_payload(data.labels, res.labels)
    if timing:
        report["timing_seconds"] = time.perf_counter() - start
    _emit(report, out)


@main.command()
@click.argument("data_file", type=click.Path(exists=True))
@click.option("--responses", required=True)
@click.option("--covariates", required=True)
@click.option("--labels", default=None)
@click.option("--g-min", type=int, default=1, show_default=True)
@click.option("--g-max", type=int, default=4, show_default=True)
@click.option("--structures-y", default="all", show_default=True,
              help="Comma list of structure labels, or 'all'.")
@click.option("--structures-x", default="all", show_default=True)
@click.option("--criterion", type=click.Choice(["bic", "icl"]), default="bic",
              show_default=True)
@click.option("--pilot-runs", type=int, default=10, show_default=True)
@click.option("--max-iter", type=int, default=1000, show_default=True)
@click.option("--tol", type=float, default=1e-5, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--threads", type=int, default=1, show_default=True)
@click.option("--scale/--no-scale", default=False, show_default=True)
@click.option("--timing/--no-timing", default=True, show_default=True)
@click.option("--out", type=click.Path(), default=None)
@_guard
def search(data_file, responses, covariates, labels, g_min, g_max, structures_y,
           structures_x, criterion, pilot_runs, max_iter, tol, seed, threads,
           scale, timing, out):
    """Exhaustive structure/size search ranked by BIC or ICL."""
    start = time.perf_counter()
    columns = _columns(responses, covariates, labels)
    data = _maybe_scale(load_csv(data_file, columns), scale)

    def parse_structs(value):
        if value.strip().lower() == "all":
            return selection.ALL_STRUCTURES
        return tuple(CovStructure.parse(v) for v in value.split(","))

    spec = SearchSpec(
        g_min=g_min,
        g_max=g_max,
        structures_y=parse_structs(structures_y),
        structures_x=parse_structs(structures_x),
        pilot_runs=pilot_runs,
        criterion=criterion,
        seed=seed,
        max_iter=max_iter,
        aitken_eps=tol,
        threads=threads,
    )
    result = selection.search(data, spec)
    if result.best is None:
        raise FitFailedError("every fit in the search grid failed")
    table = [
        {
            "structure_y": r.structure_y,
            "structure_x": r.structure_x,
            "g": r.n_components,
            "loglik": r.loglik,
            "n_params": r.n_params,
            "bic": r.bic,
            "icl": r.icl,
            "converged": r.converged,
            "failure": r.failure,
        }
        for r in result.table
    ]
    report = {
        "schema": SCHEMA,
        "version": _tool_version(),
        "command": "search",
        "spec": {
            "data": data_file,
            "responses": list(columns.response_cols),
            "covariates": list(columns.covariate_cols),
            "labels": labels,
            "g_min": g_min,
            "g_max": g_max,
            "structures_y": structures_y,
            "structures_x": structures_x,
            "criterion": criterion,
            "pilot_runs": pilot_runs,
            "max_iter": max_iter,
            "tol": tol,
            "seed": seed,
            "scale": scale,
        },
        "result": {
            "best": {
                "structure_y": result.best.structure_y,
                "structure_x": result.best.structure_x,
                "g": result.best.n_components,
                **_fit_payload(result.best.fit),
            },
            "table": table,
        },
    }
    if data.labels is not None:
        report["metrics"] = _metrics_payload(data.labels, result.best.fit.labels)
    if timing:
        report["timing_seconds"] = time.perf_counter() - start
    _emit(report, out)


@main.command()
@click.argument("truth_file", type=click.Path(exists=True))
@click.argument("predicted_file", type=click.Path(exists=True))
@click.option("--truth-col", default="label", show_default=True)
@click.option("--pred-col", default="label", show_default=True)
@click.option("--out", type=click.Path(), default=None)
@_guard
def eval(truth_file, predicted_file, truth_col, pred_col, out):
    """Adjusted Rand index and cross-tabulation of two label files."""
    truth = _read_label_column(truth_file, truth_col)
    pred = _read_label_column(predicted_file, pred_col)
    if len(truth) != len(pred):
        raise ValueError(
            f"label files have different lengths ({len(truth)} vs {len(pred)})"
        )
    tab = cross_tab(truth, pred)
    report = {
        "schema": SCHEMA,
        "version": _tool_version(),
        "command": "eval",
        "spec": {
            "truth": truth_file,
            "predicted": predicted_file,
            "truth_col": truth_col,
            "pred_col": pred_col,
        },
        "metrics": {
            "ari": ari(truth, pred),
            "cross_tab": {
                "rows": [str(r) for r in tab.rows],
                "cols": [str(c) for c in tab.cols],
                "counts": tab.counts,
            },
        },
    }
    _emit(report, out)


def _read_label_column(path: str, col: str) -> list:
    import csv as _csv

    with open(path, newline="", encoding="utf-8") as fh:
        reader = _csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CsvFormatError(f"{path}: empty file") from None
        rows = list(reader)
    lowered = [h.strip().lower() for h in header]
    key = col.strip().lower()
    if key.isdigit():
        idx = int(key)
    elif key in lowered:
        idx = lowered.index(key)
    else:
        raise CsvFormatError(f"{path}: missing column {col!r} (header: {header})")
    return [row[idx] for row in rows]


if __name__ == "__main__":  # pragma: no cover
    main()
