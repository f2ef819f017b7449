"""Latent factors, hyperparameters and objective evaluation.

The unified objective is::

    O = ||F - U V^T||^2 + sum_i ||H^i - P^i X^T||^2 + ||P W - U||^2
        + alpha ||Y - V V^T||^2 + lambda ||X C - V||^2

with ``Y`` the diffusion re-weighted adjacency. The orthogonality penalties
``||C C^T - I||^2`` and ``||W W^T - I||^2`` are reported alongside but are
not part of ``total``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from typing import List, Optional

import numpy as np
import scipy.sparse as sp

from .exceptions import NumericOverflowError, ParseError, ShapeError, ValidationError
from .graph import (
    MultiViewGraph,
    diffusion_reweight,
    propagate_features,
    stack_features,
)

__all__ = [
    "Hyperparams",
    "LatentFactors",
    "ModelData",
    "ObjectiveBreakdown",
    "prepare_data",
    "init_factors",
    "objective",
    "relaxed_cw_objective",
    "save_factors",
    "load_factors",
]

EPSILON_MODES = ("relative", "absolute")
CONVERGENCE_STATISTICS = ("penalized", "objective")


@dataclass(frozen=True)
class Hyperparams:
    """Model and solver settings.

    ``s_dim=None`` means ``S = K``. With ``epsilon_mode="relative"`` the fit
    stops once the per-iteration decrease drops to ``epsilon`` times the
    initial value of the monitored statistic; in ``"absolute"`` mode the
    threshold is ``epsilon`` itself.

    ``convergence_on`` picks the monitored statistic: ``"penalized"`` is the
    unified objective plus ``delta`` times the orthogonality penalties (the
    quantity every update rule decreases), ``"objective"`` the unified
    objective alone.
    """

    alpha: float = 5.0
    lam: float = 1.0
    delta: float = 1e5
    k_clusters: int = 2
    s_dim: Optional[int] = None
    t_max: int = 300
    epsilon: float = 1e-6
    epsilon_mode: str = "relative"
    convergence_on: str = "penalized"
    seed: int = 0

    def __post_init__(self):
        for name in ("alpha", "lam", "delta"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise ValidationError(f"{name} must be finite and >= 0, got {v}")
        if not (math.isfinite(self.epsilon) and self.epsilon > 0):
            raise ValidationError(f"epsilon must be > 0, got {self.epsilon}")
        if self.epsilon_mode not in EPSILON_MODES:
            raise ValidationError(f"epsilon_mode must be one of {EPSILON_MODES}")
        if self.convergence_on not in CONVERGENCE_STATISTICS:
            raise ValidationError(f"convergence_on must be one of {CONVERGENCE_STATISTICS}")
        if self.k_clusters < 2:
            raise ValidationError(f"k_clusters must be >= 2, got {self.k_clusters}")
        if self.s_dim is not None and self.s_dim < 1:
            raise ValidationError(f"s_dim must be >= 1, got {self.s_dim}")
        if self.t_max < 1:
            raise ValidationError(f"t_max must be >= 1, got {self.t_max}")
        if not (-(2**63) <= self.seed < 2**64):
            raise ValidationError("seed must fit in 64 bits")

    @property
    def s(self) -> int:
        return self.k_clusters if self.s_dim is None else self.s_dim

    def to_dict(self):
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d["s_dim"] = self.s
        return d

    def with_(self, **kw):
        return replace(self, **kw)


@dataclass
class LatentFactors:
    """The six nonnegative factor matrices of one fit.

    ``p_views[i]`` is the ``M^i x S`` block for view ``i``; :attr:`p` stacks
    them into the full ``M x S`` matrix.
    """

    v: np.ndarray
    u: np.ndarray
    x: np.ndarray
    p_views: List[np.ndarray]
    c: np.ndarray
    w: np.ndarray

    @property
    def p(self) -> np.ndarray:
        return np.vstack(self.p_views)

    @property
    def view_slices(self):
        out, start = [], 0
        for pi in self.p_views:
            out.append(slice(start, start + pi.shape[0]))
            start += pi.shape[0]
        return out

    def copy(self) -> "LatentFactors":
        return LatentFactors(
            self.v.copy(), self.u.copy(), self.x.copy(),
            [pi.copy() for pi in self.p_views], self.c.copy(), self.w.copy(),
        )

    def named(self):
        yield "v", self.v
        yield "u", self.u
        yield "x", self.x
        for i, pi in enumerate(self.p_views, start=1):
            yield f"p{i}", pi
        yield "c", self.c
        yield "w", self.w

    def all_finite(self) -> bool:
        return all(np.all(np.isfinite(m)) for _, m in self.named())

    def min_entry(self) -> float:
        return min(float(m.min()) for _, m in self.named())

    def check_shapes(self, data: "ModelData" = None):
        n, k = self.v.shape
        s = self.x.shape[1]
        m = sum(pi.shape[0] for pi in self.p_views)
        expect = {"u": (m, k), "x": (n, s), "c": (s, k), "w": (s, k)}
        for name, shape in expect.items():
            if getattr(self, name).shape != shape:
                raise ShapeError(f"factor {name} is {getattr(self, name).shape}, expected {shape}")
        for i, pi in enumerate(self.p_views, start=1):
            if pi.shape[1] != s:
                raise ShapeError(f"factor p{i} has {pi.shape[1]} columns, expected {s}")
        if data is not None:
            if n != data.n_vertices or m != data.n_features:
                raise ShapeError("factor dimensions do not match the data")
            if [pi.shape[0] for pi in self.p_views] != data.view_sizes:
                raise ShapeError("view block sizes do not match the data")


@dataclass(frozen=True)
class ModelData:
    """Preprocessed inputs consumed by the optimizer.

    ``y`` is the re-weighted adjacency that stands in for the binary one,
    ``f`` the stacked features and ``h`` the per-view propagation matrices.
    """

    y: sp.csr_matrix
    f: sp.csr_matrix
    h: tuple
    view_sizes: list

    @property
    def n_vertices(self) -> int:
        return self.y.shape[0]

    @property
    def n_features(self) -> int:
        return self.f.shape[0]

    @property
    def view_slices(self):
        out, start = [], 0
        for m in self.view_sizes:
            out.append(slice(start, start + m))
            start += m
        return out

    @classmethod
    def from_arrays(cls, y, f_views, h=None):
        """Assemble data from raw matrices, computing ``H^i = F^i Y`` if not given."""
        y = sp.csr_matrix(y, dtype=np.float64)
        fv = [sp.csr_matrix(fi, dtype=np.float64) for fi in f_views]
        if h is None:
            h = [sp.csr_matrix(fi @ y) for fi in fv]
        else:
            h = [sp.csr_matrix(hi, dtype=np.float64) for hi in h]
        f = sp.csr_matrix(sp.vstack(fv, format="csr"))
        return cls(y, f, tuple(h), [fi.shape[0] for fi in fv])


def prepare_data(graph: MultiViewGraph) -> ModelData:
    """Diffusion re-weighting followed by view-wise propagation."""
    dw = diffusion_reweight(graph)
    h = propagate_features(graph, dw)
    return ModelData(dw.matrix, stack_features(graph), tuple(h.per_view), graph.view_sizes)


def init_factors(n, view_sizes, k, s=None, seed=0) -> LatentFactors:
    """Draw every factor entry independently from ``(0, 1]``.

    V, U, C and W are scaled by ``1/sqrt(K)``; X and the P^i by ``1/sqrt(S)``.
    Entries are strictly positive because multiplicative updates never revive
    an exact zero.
    """
    s = k if s is None else s
    view_sizes = [int(m) for m in view_sizes]
    if n < 1 or k < 1 or s < 1 or not view_sizes or min(view_sizes) < 1:
        raise ShapeError("all factor dimensions must be positive")
    m = sum(view_sizes)
    rng = np.random.default_rng(seed)

    def draw(shape, scale):
        # 1 - U[0, 1) lies in (0, 1]
        return (1.0 - rng.random(shape)) * scale

    ks, ss = 1.0 / math.sqrt(k), 1.0 / math.sqrt(s)
    v = draw((n, k), ks)
    u = draw((m, k), ks)
    x = draw((n, s), ss)
    p_views = [draw((mi, s), ss) for mi in view_sizes]
    c = draw((s, k), ks)
    w = draw((s, k), ks)
    return LatentFactors(v, u, x, p_views, c, w)


@dataclass(frozen=True)
class ObjectiveBreakdown:
    total: float
    feature_term: float
    propagation_terms: tuple
    coupling_u: float
    structural: float
    coupling_v: float
    ortho_c: float
    ortho_w: float
    penalty_weight: float = 0.0

    @property
    def penalized(self) -> float:
        """``total + delta * (ortho_c + ortho_w)``."""
        return self.total + self.penalty_weight * (self.ortho_c + self.ortho_w)

    def statistic(self, which="penalized") -> float:
        return self.penalized if which == "penalized" else self.total

    def as_dict(self):
        d = {
            "total": self.total,
            "feature_term": self.feature_term,
            "coupling_u": self.coupling_u,
            "structural": self.structural,
            "coupling_v": self.coupling_v,
            "ortho_c": self.ortho_c,
            "ortho_w": self.ortho_w,
            "penalized": self.penalized,
        }
        for i, t in enumerate(self.propagation_terms, start=1):
            d[f"propagation_{i}"] = t
        return d


# Above this many entries the data residual is evaluated through a trace
# expansion instead of densifying the data matrix.
DENSE_LIMIT = 1 << 22


def residual_sq(a, left, right) -> float:
    """``||A - left @ right.T||_F^2`` for sparse or dense ``A``."""
    if not sp.issparse(a) or a.shape[0] * a.shape[1] <= DENSE_LIMIT:
        a = a.toarray() if sp.issparse(a) else np.asarray(a)
        r = a - left @ right.T
        return float(np.einsum("ij,ij->", r, r))
    a_sq = float(a.multiply(a).sum())
    cross = float(np.einsum("ij,ij->", a @ right, left))
    gram = float(np.einsum("ij,ij->", left.T @ left, right.T @ right))
    return max(a_sq - 2.0 * cross + gram, 0.0)


def _sq(m) -> float:
    return float(np.einsum("ij,ij->", m, m))


def _ortho_sq(m) -> float:
    g = m @ m.T
    g[np.diag_indices_from(g)] -= 1.0
    return _sq(g)


def _finite(name, value):
    if not math.isfinite(value):
        raise NumericOverflowError(f"objective term {name!r} is not finite", term=name)
    return value


def objective(factors: LatentFactors, data: ModelData, hp: Hyperparams) -> ObjectiveBreakdown:
    """Evaluate every term of the unified objective plus the C/W penalties."""
    fa = factors
    feature = _finite("feature_term", residual_sq(data.f, fa.u, fa.v))
    prop = tuple(
        _finite(f"propagation_{i}", residual_sq(hi, pi, fa.x))
        for i, (hi, pi) in enumerate(zip(data.h, fa.p_views), start=1)
    )
    coupling_u = _finite("coupling_u", _sq(fa.p @ fa.w - fa.u))
    structural = _finite("structural", hp.alpha * residual_sq(data.y, fa.v, fa.v))
    coupling_v = _finite("coupling_v", hp.lam * _sq(fa.x @ fa.c - fa.v))
    ortho_c = _finite("ortho_c", _ortho_sq(fa.c))
    ortho_w = _finite("ortho_w", _ortho_sq(fa.w))
    total = _finite("total", feature + sum(prop) + coupling_u + structural + coupling_v)
    return ObjectiveBreakdown(
        total, feature, prop, coupling_u, structural, coupling_v, ortho_c, ortho_w, hp.delta
    )


def relaxed_cw_objective(factors: LatentFactors, hp: Hyperparams) -> float:
    """The C/W subproblem: couplings plus ``delta``-weighted orthogonality penalties."""
    fa = factors
    val = (
        _sq(fa.p @ fa.w - fa.u)
        + hp.lam * _sq(fa.x @ fa.c - fa.v)
        + hp.delta * (_ortho_sq(fa.c) + _ortho_sq(fa.w))
    )
    return _finite("relaxed_cw", val)


# -- serialization ---------------------------------------------------------
#
#   gccfp-factors 1
#   matrix <name> <rows> <cols>
#   <row values, space separated, %.17g>   (rows lines)
#   ...
#
# Matrices appear in the order v, u, x, p1..pD, c, w. Values round-trip
# exactly through %.17g.

_MAGIC = "gccfp-factors 1"


def save_factors(path, factors: LatentFactors):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(_MAGIC + "\n")
        for name, m in factors.named():
            fh.write(f"matrix {name} {m.shape[0]} {m.shape[1]}\n")
            for row in m:
                fh.write(" ".join(f"{x:.17g}" for x in row) + "\n")


def load_factors(path) -> LatentFactors:
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0].strip() != _MAGIC:
        raise ParseError("not a gccfp factor file", path, 1)
    mats = {}
    order = []
    i = 1
    while i < len(lines):
        head = lines[i].split()
        if not head:
            i += 1
            continue
        if len(head) != 4 or head[0] != "matrix":
            raise ParseError("expected 'matrix <name> <rows> <cols>'", path, i + 1)
        name, r, c = head[1], int(head[2]), int(head[3])
        body = lines[i + 1:i + 1 + r]
        if len(body) != r:
            raise ParseError(f"matrix {name} truncated", path, i + 1)
        try:
            m = np.array([[float(t) for t in row.split()] for row in body], dtype=np.float64)
        except ValueError as exc:
            raise ParseError(f"matrix {name}: {exc}", path, i + 1) from None
        m = m.reshape(r, c)
        mats[name] = m
        order.append(name)
        i += 1 + r
    p_names = sorted((n for n in mats if n.startswith("p")), key=lambda n: int(n[1:]))
    missing = {"v", "u", "x", "c", "w"} - set(mats)
    if missing or not p_names:
        raise ParseError(f"factor file lacks matrices {sorted(missing) or ['p1']}", path)
    fa = LatentFactors(mats["v"], mats["u"], mats["x"], [mats[n] for n in p_names], mats["c"], mats["w"])
    fa.check_shapes()
    return fa
