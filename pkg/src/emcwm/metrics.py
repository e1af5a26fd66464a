"""External cluster-agreement metrics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["CrossTab", "cross_tab", "ari"]


@dataclass(frozen=True)
class CrossTab:
    """Contingency table of true classes (rows) against estimated clusters."""

    rows: tuple
    cols: tuple
    counts: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "counts", np.asarray(self.counts, dtype=np.int64))


def _as_labels(a) -> np.ndarray:
    return np.asarray(a).ravel()


def cross_tab(truth, estimated) -> CrossTab:
    """Co-occurrence counts of each (true class, estimated cluster) pair."""
    t = _as_labels(truth)
    e = _as_labels(estimated)
    if t.shape[0] != e.shape[0]:
        raise ValueError("label sequences have different lengths")
    rows, ti = np.unique(t, return_inverse=True)
    cols, ei = np.unique(e, return_inverse=True)
    counts = np.zeros((rows.shape[0], cols.shape[0]), dtype=np.int64)
    np.add.at(counts, (ti, ei), 1)
    return CrossTab(rows=tuple(rows.tolist()), cols=tuple(cols.tolist()), counts=counts)


def ari(truth, estimated) -> float:
    """Adjusted Rand index between two partitions of the same items.

    Chance-corrected so identical partitions (up to relabeling) score 1 and
    random agreement scores 0 in expectation.  When the correction denominator
    vanishes (both partitions trivial in the same way) the index is 1 by
    convention.
    """
    t = _as_labels(truth)
    e = _as_labels(estimated)
    if t.shape[0] != e.shape[0]:
        raise ValueError("label sequences have different lengths")
    n = t.shape[0]
    if n < 2:
        raise ValueError("need at least two items")
    counts = cross_tab(t, e).counts
    a = counts.sum(axis=1)
    b = counts.sum(axis=0)

    def comb2(x):
        return np.sum(x * (x - 1)) / 2.0

    index = comb2(counts)
    sum_a = comb2(a)
    sum_b = comb2(b)
    total = n * (n - 1) / 2.0
    expected = sum_a * sum_b / total
    max_index = 0.5 * (sum_a + sum_b)
    if max_index == expected:
        return 1.0
    return float((index - expected) / (max_index - expected))
