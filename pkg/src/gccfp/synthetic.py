"""Planted-partition multi-view graphs and scalar reference updates.

:func:`generate` draws a graph with ``K`` balanced clusters, edges with
probability ``p_in`` inside a cluster and ``p_out`` across, and per-cluster
indicator features with symmetric bit-flip noise.

:func:`oracle_update` evaluates each update rule with explicit scalar loops,
straight from the formula, for cross-checking the vectorized optimizer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Tuple

import numpy as np
import scipy.sparse as sp

from .evaluation import write_labels
from .exceptions import SizeError, ValidationError
from .graph import MultiViewGraph, build_graph, write_edge_file, write_view_file

__all__ = ["PlantedSpec", "generate", "write_dataset", "oracle_update", "ORACLE_LIMIT"]


@dataclass(frozen=True)
class PlantedSpec:
    """Parameters of a planted multi-view graph.

    ``views`` lists ``(features_per_cluster, flip_noise)`` per view; view
    ``i`` then has ``K * features_per_cluster`` features.
    """

    n_vertices: int = 120
    k_clusters: int = 3
    p_in: float = 0.3
    p_out: float = 0.02
    views: Tuple[Tuple[int, float], ...] = ((8, 0.05),)
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "views", tuple((int(m), float(q)) for m, q in self.views))
        self.validate()

    def validate(self):
        if self.k_clusters < 1:
            raise ValidationError("k_clusters must be >= 1")
        if self.k_clusters > self.n_vertices:
            raise ValidationError(
                f"k_clusters ({self.k_clusters}) exceeds n_vertices ({self.n_vertices})"
            )
        if not (0.0 <= self.p_out < self.p_in <= 1.0):
            raise ValidationError(f"need 0 <= p_out < p_in <= 1, got p_in={self.p_in}, p_out={self.p_out}")
        if not self.views:
            raise ValidationError("at least one view is required")
        for m, q in self.views:
            if m < 1:
                raise ValidationError("features_per_cluster must be >= 1")
            if not (0.0 <= q < 0.5):
                raise ValidationError(f"flip_noise must lie in [0, 0.5), got {q}")

    def labels(self) -> np.ndarray:
        """Balanced contiguous cluster labels; sizes differ by at most one."""
        sizes = np.full(self.k_clusters, self.n_vertices // self.k_clusters)
        sizes[: self.n_vertices % self.k_clusters] += 1
        return np.repeat(np.arange(self.k_clusters), sizes)


def generate(spec: PlantedSpec):
    """Draw ``(graph, labels)`` for ``spec``; deterministic in ``spec.seed``."""
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    n, k = spec.n_vertices, spec.k_clusters
    labels = spec.labels()

    iu, ju = np.triu_indices(n, k=1)
    same = labels[iu] == labels[ju]
    prob = np.where(same, spec.p_in, spec.p_out)
    keep = rng.random(iu.size) < prob
    edges = np.column_stack([iu[keep], ju[keep]])

    views = []
    for per_cluster, noise in spec.views:
        owner = np.repeat(np.arange(k), per_cluster)
        f = (owner[:, None] == labels[None, :]).astype(np.float64)
        flip = rng.random(f.shape) < noise
        f[flip] = 1.0 - f[flip]
        views.append(sp.csr_matrix(f))
    return build_graph(n, edges, views), labels


def write_dataset(out_dir, graph: MultiViewGraph, labels) -> dict:
    """Write ``edges.txt``, ``view_<i>.txt`` and ``labels.txt`` into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"edges": out / "edges.txt", "views": [], "labels": out / "labels.txt"}
    write_edge_file(paths["edges"], graph)
    for i, v in enumerate(graph.views, start=1):
        p = out / f"view_{i}.txt"
        write_view_file(p, v.matrix)
        paths["views"].append(p)
    write_labels(paths["labels"], labels)
    return paths


# -- scalar oracle -------------------------------------------------------------

ORACLE_LIMIT = 32
RULES = ("V", "U", "P", "X", "C", "W")


def _mat(a):
    a = a.toarray() if sp.issparse(a) else np.asarray(a, dtype=np.float64)
    return [[float(x) for x in row] for row in a]


def _mm(a, b):
    n, m, p = len(a), len(b), len(b[0])
    out = [[0.0] * p for _ in range(n)]
    for i in range(n):
        for j in range(p):
            s = 0.0
            for l in range(m):
                s += a[i][l] * b[l][j]
            out[i][j] = s
    return out


def _t(a):
    return [list(col) for col in zip(*a)]


def _sqrt_entry(z, b, a4, c8, rhs):
    # z * sqrt(sqrt(b^2 + c8*rhs) - b) / sqrt(a4)
    if z == 0.0:
        return 0.0
    disc = b * b + c8 * rhs
    return z * math.sqrt(math.sqrt(disc) - b) / math.sqrt(a4)


def _mu(z, num, den):
    return 0.0 if z == 0.0 else z * num / den


def oracle_update(rule, factors, data, hp, view=0):
    """Evaluate one update rule with nested scalar loops.

    ``rule`` is one of ``"V", "U", "P", "X", "C", "W"``; ``view`` selects the
    P block. Follows the textbook form of each rule literally, with no
    denominator guard. Instances with more than ``ORACLE_LIMIT`` vertices or
    features raise :class:`SizeError`.
    """
    rule = rule.upper()
    if rule not in RULES:
        raise ValueError(f"unknown rule {rule!r}")
    n, k = factors.v.shape
    m = factors.u.shape[0]
    if n > ORACLE_LIMIT or m > ORACLE_LIMIT:
        raise SizeError(f"oracle limited to N, M <= {ORACLE_LIMIT}; got N={n}, M={m}")

    V, U, X, C, W = (_mat(a) for a in (factors.v, factors.u, factors.x, factors.c, factors.w))
    Pv = [_mat(p) for p in factors.p_views]
    P = [row for blk in Pv for row in blk]
    s = len(X[0])
    alpha, lam, delta = hp.alpha, hp.lam, hp.delta

    if rule == "V":
        Y, F = _mat(data.y), _mat(data.f)
        VVtV = _mm(V, _mm(_t(V), V))
        VUtU = _mm(V, _mm(_t(U), U))
        YV, FtU, XC = _mm(Y, V), _mm(_t(F), U), _mm(X, C)
        out = [[0.0] * k for _ in range(n)]
        for j in range(n):
            for q in range(k):
                b = VUtU[j][q] + lam * V[j][q]
                rhs = 2 * alpha * YV[j][q] + FtU[j][q] + lam * XC[j][q]
                out[j][q] = _sqrt_entry(V[j][q], b, 4 * alpha * VVtV[j][q], 8 * alpha * VVtV[j][q], rhs)
        return np.array(out)

    if rule == "U":
        F = _mat(data.f)
        FV, PW, UVtV = _mm(F, V), _mm(P, W), _mm(U, _mm(_t(V), V))
        out = [[0.0] * k for _ in range(m)]
        for j in range(m):
            for q in range(k):
                out[j][q] = _mu(U[j][q], FV[j][q] + PW[j][q], UVtV[j][q] + U[j][q])
        return np.array(out)

    if rule == "P":
        Hi, Pi = _mat(data.h[view]), Pv[view]
        start = sum(len(b) for b in Pv[:view])
        Ui = U[start:start + len(Pi)]
        HX, UWt = _mm(Hi, X), _mm(Ui, _t(W))
        PXtX, PWWt = _mm(Pi, _mm(_t(X), X)), _mm(Pi, _mm(W, _t(W)))
        out = [[0.0] * s for _ in range(len(Pi))]
        for j in range(len(Pi)):
            for r in range(s):
                out[j][r] = _mu(Pi[j][r], HX[j][r] + UWt[j][r], PXtX[j][r] + PWWt[j][r])
        return np.array(out)

    if rule == "X":
        H = [_mat(h) for h in data.h]
        VCt, XCCt = _mm(V, _t(C)), _mm(X, _mm(C, _t(C)))
        HtP = [_mm(_t(h), p) for h, p in zip(H, Pv)]
        XPtP = [_mm(X, _mm(_t(p), p)) for p in Pv]
        out = [[0.0] * s for _ in range(n)]
        for a in range(n):
            for r in range(s):
                num = sum(t[a][r] for t in HtP) + lam * VCt[a][r]
                den = lam * XCCt[a][r] + sum(t[a][r] for t in XPtP)
                out[a][r] = _mu(X[a][r], num, den)
        return np.array(out)

    if rule == "C":
        XtXC, CCtC, XtV = _mm(_mm(_t(X), X), C), _mm(C, _mm(_t(C), C)), _mm(_t(X), V)
        out = [[0.0] * k for _ in range(s)]
        for r in range(s):
            for q in range(k):
                b = lam * XtXC[r][q]
                rhs = 2 * delta * C[r][q] + lam * XtV[r][q]
                out[r][q] = _sqrt_entry(C[r][q], b, 4 * delta * CCtC[r][q], 8 * delta * CCtC[r][q], rhs)
        return np.array(out)

    # W
    PtPW, WWtW, PtU = _mm(_mm(_t(P), P), W), _mm(W, _mm(_t(W), W)), _mm(_t(P), U)
    out = [[0.0] * k for _ in range(s)]
    for r in range(s):
        for q in range(k):
            b = PtPW[r][q]
            rhs = 2 * delta * W[r][q] + PtU[r][q]
            out[r][q] = _sqrt_entry(W[r][q], b, 4 * delta * WWtW[r][q], 8 * delta * WWtW[r][q], rhs)
    return np.array(out)
