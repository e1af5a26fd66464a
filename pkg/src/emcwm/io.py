"""CSV ingestion and emission for the command-line surface.

Files are RFC-4180-style with a required header row, decimal-point numerals,
UTF-8 encoding.  Numeric values are written with 17 significant digits so a
write/read roundtrip is exact.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .model import Dataset

__all__ = ["ColumnSpec", "CsvFormatError", "load_csv", "write_csv"]

ColumnRef = Union[str, int]


class CsvFormatError(ValueError):
    """Malformed input file: missing column, ragged row, or non-numeric cell."""


@dataclass(frozen=True)
class ColumnSpec:
    """Which columns hold responses, covariates, and (optionally) labels.

    Columns may be referenced by header name or 0-based index.
    """

    response_cols: Sequence[ColumnRef]
    covariate_cols: Sequence[ColumnRef]
    label_col: Optional[ColumnRef] = None

    def __post_init__(self):
        if not self.response_cols or not self.covariate_cols:
            raise ValueError("response and covariate column sets must be non-empty")


def _resolve(ref: ColumnRef, header: list[str], path: str) -> int:
    if isinstance(ref, int) or (isinstance(ref, str) and ref.lstrip("-").isdigit()):
        idx = int(ref)
        if not 0 <= idx < len(header):
            raise CsvFormatError(f"{path}: column index {idx} out of range")
        return idx
    lowered = [h.strip().lower() for h in header]
    key = ref.strip().lower()
    if key not in lowered:
        raise CsvFormatError(f"{path}: missing column {ref!r} (header: {header})")
    return lowered.index(key)


def load_csv(path: str, columns: ColumnSpec) -> Dataset:
    """Read a dataset; rows keep file order."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CsvFormatError(f"{path}: empty file") from None
        rows = list(reader)
    if not rows:
        raise CsvFormatError(f"{path}: no data rows")

    resp_idx = [_resolve(r, header, path) for r in columns.response_cols]
    cov_idx = [_resolve(c, header, path) for c in columns.covariate_cols]
    if set(resp_idx) & set(cov_idx):
        raise CsvFormatError(f"{path}: response and covariate columns overlap")
    lab_idx = (
        _resolve(columns.label_col, header, path)
        if columns.label_col is not None
        else None
    )

    def cell(row, ridx, cidx):
        try:
            return float(row[cidx])
        except ValueError:
            raise CsvFormatError(
                f"{path}: non-numeric value {row[cidx]!r} at row {ridx + 2}, "
                f"column {header[cidx]!r}"
            ) from None

    y = np.empty((len(rows), len(resp_idx)))
    x = np.empty((len(rows), len(cov_idx)))
    labels = [] if lab_idx is not None else None
    for i, row in enumerate(rows):
        if len(row) != len(header):
            raise CsvFormatError(
                f"{path}: row {i + 2} has {len(row)} fields, expected {len(header)}"
            )
        y[i] = [cell(row, i, j) for j in resp_idx]
        x[i] = [cell(row, i, j) for j in cov_idx]
        if labels is not None:
            labels.append(row[lab_idx])
    return Dataset(
        x=x,
        y=y,
        labels=np.asarray(labels) if labels is not None else None,
        names_x=tuple(header[j] for j in cov_idx),
        names_y=tuple(header[j] for j in resp_idx),
    )


def write_csv(path: str, data: Dataset) -> None:
    """Emit covariates, responses, and labels (when present) with full precision."""
    names_x = list(data.names_x) if data.names_x else [f"x{i + 1}" for i in range(data.p)]
    names_y = list(data.names_y) if data.names_y else [f"y{i + 1}" for i in range(data.d)]
    header = names_x + names_y + (["label"] if data.labels is not None else [])
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i in range(data.n):
            row = [f"{v:.17g}" for v in data.x[i]] + [f"{v:.17g}" for v in data.y[i]]
            if data.labels is not None:
                row.append(str(data.labels[i]))
            writer.writerow(row)
