"""Multi-view graph containers, file loading and preprocessing.

The preprocessing chain is::

    graph = load_graph("edges.txt", ["view_1.txt", "view_2.txt"])
    dw = diffusion_reweight(graph)          # re-weighted adjacency
    hp = propagate_features(graph, dw)      # per-view propagation H^i = F^i D

File formats
------------
Edge file
    One edge per line, two whitespace separated 0-based vertex indices.
    Lines starting with ``#`` and blank lines are ignored.
View file
    Header line ``M N`` followed by ``feature vertex value`` triples
    (0-based coordinate format). Omitted entries are zero.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp

from .exceptions import BoundsError, ConsistencyError, ParseError, ShapeError

__all__ = [
    "ViewFeatures",
    "MultiViewGraph",
    "DiffusionWeights",
    "PropagatedFeatures",
    "LoadOptions",
    "build_graph",
    "load_graph",
    "read_edge_file",
    "read_view_file",
    "write_edge_file",
    "write_view_file",
    "degrees",
    "diffusion_reweight",
    "propagate_features",
    "stack_features",
]


@dataclass(frozen=True)
class ViewFeatures:
    """One view of vertex features, stored as a sparse ``M^i x N`` matrix."""

    view_index: int
    matrix: sp.csr_matrix

    def __post_init__(self):
        m = sp.csr_matrix(self.matrix, dtype=np.float64)
        m.sum_duplicates()
        m.eliminate_zeros()
        if m.shape[0] < 1:
            raise ShapeError(f"view {self.view_index} has no features")
        if m.nnz and (not np.all(np.isfinite(m.data)) or m.data.min() < 0):
            raise ValueError(f"view {self.view_index} has negative or non-finite entries")
        object.__setattr__(self, "matrix", m)

    @property
    def n_features(self) -> int:
        return self.matrix.shape[0]

    @property
    def is_binary(self) -> bool:
        return bool(np.all(self.matrix.data == 1.0))


@dataclass(frozen=True)
class MultiViewGraph:
    """Simple undirected graph with ``D`` ordered views of vertex features.

    ``adjacency`` is a symmetric binary CSR matrix with an empty diagonal.
    Construct through :func:`build_graph` or :func:`load_graph` unless the
    inputs are already clean; ``__post_init__`` validates but does not repair.
    """

    adjacency: sp.csr_matrix
    views: tuple
    vertex_ids: Optional[tuple] = None
    dropped_self_loops: int = 0

    def __post_init__(self):
        a = sp.csr_matrix(self.adjacency, dtype=np.float64)
        a.sum_duplicates()
        a.eliminate_zeros()
        n = a.shape[0]
        if a.shape != (n, n):
            raise ShapeError(f"adjacency must be square, got {a.shape}")
        if a.nnz and not np.all(a.data == 1.0):
            raise ValueError("adjacency entries must be 0 or 1")
        if a.diagonal().any():
            raise ValueError("adjacency must have a zero diagonal")
        if (a != a.T).nnz:
            raise ValueError("adjacency must be symmetric")
        views = tuple(self.views)
        for v in views:
            if v.matrix.shape[1] != n:
                raise ShapeError(
                    f"view {v.view_index} covers {v.matrix.shape[1]} vertices, graph has {n}"
                )
        if self.vertex_ids is not None and len(self.vertex_ids) != n:
            raise ShapeError("vertex_ids length differs from the vertex count")
        object.__setattr__(self, "adjacency", a)
        object.__setattr__(self, "views", views)

    @property
    def n_vertices(self) -> int:
        return self.adjacency.shape[0]

    @property
    def n_edges(self) -> int:
        return self.adjacency.nnz // 2

    @property
    def n_views(self) -> int:
        return len(self.views)

    @property
    def view_sizes(self) -> list:
        return [v.n_features for v in self.views]

    @property
    def n_features(self) -> int:
        return sum(self.view_sizes)


@dataclass(frozen=True)
class DiffusionWeights:
    matrix: sp.csr_matrix
    source_degrees: np.ndarray


@dataclass(frozen=True)
class PropagatedFeatures:
    per_view: tuple

    def __len__(self):
        return len(self.per_view)

    def __getitem__(self, i):
        return self.per_view[i]


@dataclass
class LoadOptions:
    """Options for :func:`load_graph`.

    ``n_vertices`` overrides the vertex count taken from the view headers.
    ``strict_binary`` rejects feature values other than 0 and 1.
    """

    n_vertices: Optional[int] = None
    strict_binary: bool = False
    comment: str = "#"


def build_graph(n_vertices, edges, views, vertex_ids=None):
    """Build a validated graph from raw edge pairs and feature matrices.

    Edges are symmetrized and deduplicated; self-loops are dropped with a
    warning. ``views`` is a sequence of ``M^i x N`` arrays or sparse matrices.
    """
    n = int(n_vertices)
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    if edges.size and (edges.min() < 0 or edges.max() >= n):
        bad = edges[(edges < 0).any(axis=1) | (edges >= n).any(axis=1)][0]
        raise BoundsError(f"edge ({bad[0]}, {bad[1]}) out of range for {n} vertices")
    loops = edges[:, 0] == edges[:, 1]
    n_loops = int(loops.sum())
    if n_loops:
        warnings.warn(f"dropped {n_loops} self-loop(s)", stacklevel=2)
    edges = edges[~loops]
    rows = np.concatenate([edges[:, 0], edges[:, 1]])
    cols = np.concatenate([edges[:, 1], edges[:, 0]])
    a = sp.csr_matrix((np.ones(rows.size), (rows, cols)), shape=(n, n))
    a.sum_duplicates()
    a.data[:] = 1.0
    vf = tuple(ViewFeatures(i + 1, sp.csr_matrix(m, dtype=np.float64)) for i, m in enumerate(views))
    return MultiViewGraph(a, vf, vertex_ids=vertex_ids, dropped_self_loops=n_loops)


def _tokens(path, comment="#"):
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            s = line.strip()
            if not s or s.startswith(comment):
                continue
            yield lineno, s.split()


def _parse_index(tok, path, lineno, what):
    try:
        return int(tok)
    except ValueError:
        raise ParseError(f"invalid {what} {tok!r}", path, lineno) from None


def read_edge_file(path, comment="#"):
    """Return an ``(E, 2)`` int array of the edges listed in ``path``."""
    out = []
    for lineno, toks in _tokens(path, comment):
        if len(toks) != 2:
            raise ParseError(f"expected 2 vertex indices, got {len(toks)} fields", path, lineno)
        i = _parse_index(toks[0], path, lineno, "vertex index")
        j = _parse_index(toks[1], path, lineno, "vertex index")
        if i < 0 or j < 0:
            raise ParseError("negative vertex index", path, lineno)
        out.append((i, j))
    return np.array(out, dtype=np.int64).reshape(-1, 2)


def read_view_file(path, strict_binary=False, comment="#"):
    """Read a coordinate-format feature view; return a CSR ``M x N`` matrix."""
    it = _tokens(path, comment)
    try:
        lineno, toks = next(it)
    except StopIteration:
        raise ParseError("missing 'M N' header", path, 1) from None
    if len(toks) != 2:
        raise ParseError("header must be 'M N'", path, lineno)
    m = _parse_index(toks[0], path, lineno, "feature count")
    n = _parse_index(toks[1], path, lineno, "vertex count")
    if m < 1 or n < 1:
        raise ParseError("header dimensions must be positive", path, lineno)
    rows, cols, vals = [], [], []
    seen = set()
    for lineno, toks in it:
        if len(toks) != 3:
            raise ParseError(f"expected 'feature vertex value', got {len(toks)} fields", path, lineno)
        r = _parse_index(toks[0], path, lineno, "feature index")
        c = _parse_index(toks[1], path, lineno, "vertex index")
        try:
            v = float(toks[2])
        except ValueError:
            raise ParseError(f"invalid value {toks[2]!r}", path, lineno) from None
        if not math.isfinite(v) or v < 0:
            raise ParseError(f"value must be finite and nonnegative, got {toks[2]}", path, lineno)
        if strict_binary and v not in (0.0, 1.0):
            raise ParseError(f"non-binary feature value {toks[2]} in strict mode", path, lineno)
        if not (0 <= r < m):
            raise BoundsError(f"{path}:line {lineno}: feature index {r} out of range [0, {m})")
        if not (0 <= c < n):
            raise BoundsError(f"{path}:line {lineno}: vertex index {c} out of range [0, {n})")
        if (r, c) in seen:
            raise ParseError(f"duplicate entry ({r}, {c})", path, lineno)
        seen.add((r, c))
        rows.append(r)
        cols.append(c)
        vals.append(v)
    mat = sp.csr_matrix((vals, (rows, cols)), shape=(m, n), dtype=np.float64)
    mat.eliminate_zeros()
    return mat


def load_graph(edge_path, view_paths: Sequence, options: Optional[LoadOptions] = None):
    """Load and validate a multi-view graph from text files.

    The vertex count comes from ``options.n_vertices`` when given, otherwise
    from the view headers, which must all agree.
    """
    options = options or LoadOptions()
    if not view_paths:
        raise ShapeError("at least one feature view is required")
    mats = [read_view_file(p, options.strict_binary, options.comment) for p in view_paths]
    sizes = {m.shape[1] for m in mats}
    n = options.n_vertices
    if n is None:
        if len(sizes) != 1:
            raise ShapeError(f"views disagree on the vertex count: {sorted(sizes)}")
        n = sizes.pop()
    else:
        for p, m in zip(view_paths, mats):
            if m.shape[1] != n:
                raise ShapeError(f"{p}: view covers {m.shape[1]} vertices, expected {n}")
    edges = read_edge_file(edge_path, options.comment)
    if edges.size and edges.max() >= n:
        raise BoundsError(f"{edge_path}: vertex index {int(edges.max())} out of range for {n} vertices")
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        graph = build_graph(n, edges, mats)
    for w in caught:
        warnings.warn(f"{edge_path}: {w.message}", stacklevel=2)
    return graph


def write_edge_file(path, graph: MultiViewGraph):
    """Write each undirected edge once as ``i j`` with ``i < j``."""
    upper = sp.triu(graph.adjacency, k=1).tocoo()
    order = np.lexsort((upper.col, upper.row))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# {graph.n_vertices} vertices, {graph.n_edges} edges\n")
        for i, j in zip(upper.row[order], upper.col[order]):
            fh.write(f"{i} {j}\n")


def write_view_file(path, matrix):
    m = sp.coo_matrix(matrix)
    order = np.lexsort((m.col, m.row))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{m.shape[0]} {m.shape[1]}\n")
        for r, c, v in zip(m.row[order], m.col[order], m.data[order]):
            fh.write(f"{r} {c} {v:.17g}\n")


def degrees(graph: MultiViewGraph) -> np.ndarray:
    """Number of neighbours of each vertex under the binary adjacency."""
    return np.asarray(graph.adjacency.sum(axis=1)).ravel().astype(np.int64)


def diffusion_reweight(graph: MultiViewGraph) -> DiffusionWeights:
    """Re-weight every edge by degree and common-neighbour count.

    For an edge ``(i, j)``::

        D_ij = (d_i + d_j) * (cn_ij + 1) / (2 * d_i * d_j)

    where ``cn_ij = [Y^T Y]_ij`` counts common neighbours. Non-edges stay 0,
    so isolated vertices keep all-zero rows.
    """
    y = graph.adjacency
    d = degrees(graph)
    coo = y.tocoo()
    r, c = coo.row, coo.col
    if r.size and (d[r].min() == 0 or d[c].min() == 0):
        raise ConsistencyError("edge incident to a vertex of degree 0")
    # common neighbours restricted to the edge set
    cn = np.asarray((y @ y)[r, c]).ravel() if r.size else np.zeros(0)
    di = d[r].astype(np.float64)
    dj = d[c].astype(np.float64)
    vals = (di + dj) * (cn + 1.0) / (2.0 * di * dj)
    mat = sp.csr_matrix((vals, (r, c)), shape=y.shape)
    n_isolated = int((d == 0).sum())
    if n_isolated:
        warnings.warn(f"{n_isolated} isolated vertex/vertices kept as zero rows", stacklevel=2)
    return DiffusionWeights(mat, d)


def propagate_features(graph: MultiViewGraph, dw: DiffusionWeights) -> PropagatedFeatures:
    """View-wise feature propagation ``H^i = F^i D``."""
    n = graph.n_vertices
    if dw.matrix.shape != (n, n):
        raise ShapeError(f"diffusion matrix is {dw.matrix.shape}, graph has {n} vertices")
    return PropagatedFeatures(tuple(sp.csr_matrix(v.matrix @ dw.matrix) for v in graph.views))


def stack_features(graph: MultiViewGraph) -> sp.csr_matrix:
    """Row-wise concatenation ``F = [F^1; ...; F^D]`` in view order."""
    if not graph.views:
        raise ShapeError("graph has no feature views")
    return sp.csr_matrix(sp.vstack([v.matrix for v in graph.views], format="csr"))
