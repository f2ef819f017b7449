"""Hard cluster extraction and partition scoring (NMI, matched accuracy)."""

from __future__ import annotations

import json
import warnings
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np
from scipy.optimize import linear_sum_assignment

from .exceptions import ParseError, ShapeError

__all__ = [
    "ClusterAssignment",
    "EvalReport",
    "extract_clusters",
    "contingency",
    "nmi",
    "matched_accuracy",
    "evaluate",
    "read_labels",
    "write_labels",
    "MISSING",
]

MISSING = -1


@dataclass(frozen=True)
class ClusterAssignment:
    labels: np.ndarray
    k_clusters: int
    n_zero_rows: int = 0

    def __post_init__(self):
        lab = np.asarray(self.labels, dtype=np.int64)
        if lab.ndim != 1:
            raise ShapeError("labels must be a vector")
        if lab.size and (lab.min() < 0 or lab.max() >= self.k_clusters):
            raise ValueError(f"labels must lie in [0, {self.k_clusters})")
        object.__setattr__(self, "labels", lab)

    def __len__(self):
        return self.labels.size


def extract_clusters(v) -> ClusterAssignment:
    """Assign each vertex to the column of its largest membership weight.

    Ties go to the smallest column index. All-zero rows land in cluster 0
    and are counted in ``n_zero_rows``.
    """
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 2 or v.shape[1] < 1:
        raise ShapeError(f"membership matrix must be N x K with K >= 1, got {v.shape}")
    labels = np.argmax(v, axis=1)
    n_zero = int(np.count_nonzero(~v.any(axis=1)))
    if n_zero:
        warnings.warn(f"{n_zero} vertex/vertices with all-zero membership assigned to cluster 0", stacklevel=2)
    return ClusterAssignment(labels, v.shape[1], n_zero)


def _as_labels(x):
    if isinstance(x, ClusterAssignment):
        return x.labels
    return np.asarray(x, dtype=np.int64).ravel()


def _paired(pred, truth):
    p, t = _as_labels(pred), _as_labels(truth)
    if p.size != t.size:
        raise ShapeError(f"length mismatch: {p.size} predicted vs {t.size} true labels")
    keep = (t != MISSING) & (p != MISSING)
    return p[keep], t[keep]


def contingency(pred, truth):
    """Count table with rows = predicted clusters, columns = true clusters.

    Labels are compacted to the values that actually occur; vertices with a
    missing (``-1``) label are skipped.
    """
    p, t = _paired(pred, truth)
    _, pi = np.unique(p, return_inverse=True)
    _, ti = np.unique(t, return_inverse=True)
    table = np.zeros((pi.max(initial=-1) + 1, ti.max(initial=-1) + 1), dtype=np.int64)
    np.add.at(table, (pi, ti), 1)
    return table


def _entropy(counts, n):
    p = counts[counts > 0] / n
    return float(-np.sum(p * np.log(p)))


def nmi(pred, truth) -> float:
    """Normalized mutual information with arithmetic-mean normalization.

    ``I(pred; truth) / ((H(pred) + H(truth)) / 2)`` using natural logs.
    Two single-cluster partitions score 1; a single-cluster partition
    against a non-trivial one scores 0.
    """
    table = contingency(pred, truth)
    n = table.sum()
    if n == 0:
        raise ShapeError("no labelled vertices to score")
    h_p = _entropy(table.sum(axis=1), n)
    h_t = _entropy(table.sum(axis=0), n)
    if h_p == 0.0 or h_t == 0.0:
        return 1.0 if h_p == h_t else 0.0
    nz_per_row = np.count_nonzero(table, axis=1)
    if table.shape[0] == table.shape[1] and np.all(nz_per_row == 1) and np.all(np.count_nonzero(table, axis=0) == 1):
        # same partition up to relabelling; skip the log round-off
        return 1.0
    nz = table > 0
    pij = table[nz] / n
    outer = np.outer(table.sum(axis=1), table.sum(axis=0))[nz] / float(n) ** 2
    mi = float(np.sum(pij * np.log(pij / outer)))
    return float(min(max(mi / (0.5 * (h_p + h_t)), 0.0), 1.0))


def matched_accuracy(pred, truth) -> float:
    """Fraction of vertices labelled correctly under the best cluster matching."""
    table = contingency(pred, truth)
    n = table.sum()
    if n == 0:
        raise ShapeError("no labelled vertices to score")
    rows, cols = linear_sum_assignment(table, maximize=True)
    return float(table[rows, cols].sum() / n)


@dataclass(frozen=True)
class EvalReport:
    nmi: float
    accuracy: float
    contingency: np.ndarray
    n_scored: int

    def to_dict(self):
        d = asdict(self)
        d["contingency"] = self.contingency.tolist()
        return d

    def to_json(self, path=None):
        text = json.dumps(self.to_dict(), indent=2)
        if path is not None:
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(text + "\n")
        return text


def evaluate(pred, truth) -> EvalReport:
    table = contingency(pred, truth)
    return EvalReport(nmi(pred, truth), matched_accuracy(pred, truth), table, int(table.sum()))


def read_labels(path) -> np.ndarray:
    """One integer label per line; line number is the vertex index. ``-1`` marks missing."""
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            s = line.strip()
            if not s:
                raise ParseError("empty label line", path, lineno)
            try:
                lab = int(s)
            except ValueError:
                raise ParseError(f"invalid label {s!r}", path, lineno) from None
            if lab < MISSING:
                raise ParseError(f"negative label {lab}", path, lineno)
            out.append(lab)
    return np.array(out, dtype=np.int64)


def write_labels(path, labels):
    with open(path, "w", encoding="utf-8") as fh:
        for lab in _as_labels(labels):
            fh.write(f"{int(lab)}\n")
