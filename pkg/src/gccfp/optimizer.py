"""Multiplicative update rules and the alternating fit loop.

V, C and W carry quartic terms (``||Y - V V^T||^2`` and the orthogonality
penalties), so their rules take the square-root form

    Z <- Z * sqrt((sqrt(b^2 + 2 a c) - b) / a)

with ``a`` the cubic term, ``b`` the remaining positive gradient part and
``c`` the negative gradient part. We evaluate the ratio through the
algebraically identical ``2 c / (sqrt(b^2 + 2 a c) + b)``, which does not
cancel when ``2 a c << b^2`` and stays defined when ``a = 0``. U, P^i and X
use the plain ratio-of-gradient-parts rule.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np

from .exceptions import NumericOverflowError, ShapeError
from .factors import (
    Hyperparams,
    LatentFactors,
    ModelData,
    ObjectiveBreakdown,
    init_factors,
    objective,
    prepare_data,
)
from .graph import MultiViewGraph

__all__ = [
    "GuardPolicy",
    "FitTrace",
    "IterationRecord",
    "update_v",
    "update_u",
    "update_p",
    "update_x",
    "update_c",
    "update_w",
    "sweep",
    "fit",
    "fit_data",
    "gradient_v",
    "u_ratio",
    "row_peakedness",
]

STOP_THRESHOLD = "threshold"
STOP_T_MAX = "t_max"
STOP_NUMERIC = "numeric_guard"


@dataclass(frozen=True)
class GuardPolicy:
    denom_floor: float = 1e-12
    clamp_negative_radicand: bool = True

    def __post_init__(self):
        if not self.denom_floor > 0:
            raise ValueError("denom_floor must be > 0")


DEFAULT_GUARD = GuardPolicy()


def _ratio(num, den, guard):
    return num / (den + guard.denom_floor)


def _sqrt_rule(z, a, b, c, guard):
    """Square-root multiplicative step; see the module docstring."""
    with np.errstate(over="ignore", invalid="ignore"):
        if guard.clamp_negative_radicand:
            # hypot(b, sqrt(2ac)) == sqrt(b^2 + 2ac) without squaring b
            root = np.hypot(b, np.sqrt(np.maximum(2.0 * a, 0.0)) * np.sqrt(np.maximum(c, 0.0)))
        else:
            root = np.sqrt(b * b + 2.0 * a * c)
        den = root + b
        sq = np.where(den > 0, 2.0 * c / (den + guard.denom_floor), 1.0)
    if guard.clamp_negative_radicand:
        sq = np.maximum(sq, 0.0)
    return z * np.sqrt(sq)


def _check(name, m):
    if not np.all(np.isfinite(m)):
        raise NumericOverflowError(f"update of {name} produced non-finite values", term=name)
    return m


def update_v(fa: LatentFactors, data: ModelData, hp: Hyperparams, guard=DEFAULT_GUARD):
    v = fa.v
    vvv = v @ (v.T @ v)
    a = 4.0 * hp.alpha * vvv
    b = v @ (fa.u.T @ fa.u) + hp.lam * v
    c = 2.0 * hp.alpha * (data.y @ v) + data.f.T @ fa.u + hp.lam * (fa.x @ fa.c)
    return _check("v", _sqrt_rule(v, a, b, np.asarray(c), guard))


def update_u(fa: LatentFactors, data: ModelData, hp: Hyperparams, guard=DEFAULT_GUARD):
    u = fa.u
    num = np.asarray(data.f @ fa.v) + fa.p @ fa.w
    den = u @ (fa.v.T @ fa.v) + u
    return _check("u", u * _ratio(num, den, guard))


def update_p(fa: LatentFactors, data: ModelData, hp: Hyperparams, guard=DEFAULT_GUARD, view=0):
    """Update the block ``P^i`` for the 0-based ``view``."""
    pi = fa.p_views[view]
    ui = fa.u[fa.view_slices[view]]
    num = np.asarray(data.h[view] @ fa.x) + ui @ fa.w.T
    den = pi @ (fa.x.T @ fa.x) + pi @ (fa.w @ fa.w.T)
    return _check(f"p{view + 1}", pi * _ratio(num, den, guard))


def update_x(fa: LatentFactors, data: ModelData, hp: Hyperparams, guard=DEFAULT_GUARD):
    x = fa.x
    num = hp.lam * (fa.v @ fa.c.T)
    gram = hp.lam * (fa.c @ fa.c.T)
    for hi, pi in zip(data.h, fa.p_views):
        num = num + np.asarray(hi.T @ pi)
        gram = gram + pi.T @ pi
    den = x @ gram
    return _check("x", x * _ratio(num, den, guard))


def update_c(fa: LatentFactors, hp: Hyperparams, guard=DEFAULT_GUARD):
    c = fa.c
    a = 4.0 * hp.delta * (c @ (c.T @ c))
    b = hp.lam * ((fa.x.T @ fa.x) @ c)
    rhs = 2.0 * hp.delta * c + hp.lam * (fa.x.T @ fa.v)
    return _check("c", _sqrt_rule(c, a, b, rhs, guard))


def update_w(fa: LatentFactors, hp: Hyperparams, guard=DEFAULT_GUARD):
    w = fa.w
    p = fa.p
    a = 4.0 * hp.delta * (w @ (w.T @ w))
    b = (p.T @ p) @ w
    rhs = 2.0 * hp.delta * w + p.T @ fa.u
    return _check("w", _sqrt_rule(w, a, b, rhs, guard))


def sweep(fa: LatentFactors, data: ModelData, hp: Hyperparams, guard=DEFAULT_GUARD, on_update=None):
    """One pass over all six rules, in place, each using the freshest factors.

    Order: V, U, every P^i, X, C, W. ``on_update(name, factors)`` is called
    after each individual rule when given.
    """
    def done(name):
        if on_update is not None:
            on_update(name, fa)

    fa.v = update_v(fa, data, hp, guard)
    done("v")
    fa.u = update_u(fa, data, hp, guard)
    done("u")
    for i in range(len(fa.p_views)):
        fa.p_views[i] = update_p(fa, data, hp, guard, view=i)
        done(f"p{i + 1}")
    fa.x = update_x(fa, data, hp, guard)
    done("x")
    fa.c = update_c(fa, hp, guard)
    done("c")
    fa.w = update_w(fa, hp, guard)
    done("w")
    return fa


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    objective: ObjectiveBreakdown
    wall_time: float
    delta: float


@dataclass
class FitTrace:
    """Per-iteration objective history of one fit.

    ``initial`` holds the objective at the initial factors (iteration 0);
    ``iterations`` starts at iteration 1. ``delta`` of a record is the
    decrease of the monitored statistic, ``threshold`` the absolute decrease
    at or below which the fit stops.
    """

    initial: ObjectiveBreakdown
    threshold: float
    iterations: List[IterationRecord] = field(default_factory=list)
    converged: bool = False
    stop_reason: str = STOP_T_MAX
    message: str = ""

    @property
    def n_iterations(self) -> int:
        return len(self.iterations)

    @property
    def final(self) -> ObjectiveBreakdown:
        return self.iterations[-1].objective if self.iterations else self.initial

    def totals(self) -> np.ndarray:
        """Unified objective values including the initial value at index 0."""
        return np.array([self.initial.total] + [r.objective.total for r in self.iterations])

    def penalized(self) -> np.ndarray:
        return np.array([self.initial.penalized] + [r.objective.penalized for r in self.iterations])

    def rows(self):
        """Flat dict rows suitable for CSV export."""
        for r in self.iterations:
            row = {"iteration": r.iteration}
            row.update(r.objective.as_dict())
            row["delta"] = r.delta
            row["wall_ms"] = r.wall_time * 1e3
            yield row

    def write_csv(self, path):
        import csv

        rows = list(self.rows())
        names = ["iteration", "total", "feature_term"]
        names += [f"propagation_{i}" for i in range(1, len(self.initial.propagation_terms) + 1)]
        names += ["coupling_u", "structural", "coupling_v", "ortho_c", "ortho_w", "penalized", "delta", "wall_ms"]
        with open(path, "w", newline="", encoding="utf-8") as fh:
            wr = csv.DictWriter(fh, fieldnames=names, lineterminator="\n")
            wr.writeheader()
            for row in rows:
                wr.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})


def fit_data(
    data: ModelData,
    hp: Hyperparams,
    guard: GuardPolicy = DEFAULT_GUARD,
    init: Optional[LatentFactors] = None,
    checkpoint: Optional[Callable[[int, LatentFactors], None]] = None,
    checkpoint_every: int = 50,
    on_update: Optional[Callable[[str, LatentFactors], None]] = None,
):
    """Run the alternating updates on preprocessed data.

    Stops when the monitored statistic (``hp.convergence_on``) decreases by
    at most ``threshold`` in one sweep, or after ``hp.t_max`` sweeps.
    If an update or the objective becomes non-finite the last finite factors
    are returned with ``stop_reason == "numeric_guard"``.

    ``init`` resumes from given factors (copied, not mutated).
    ``checkpoint(iteration, factors)`` is called every ``checkpoint_every``
    iterations.
    """
    if init is None:
        fa = init_factors(data.n_vertices, data.view_sizes, hp.k_clusters, hp.s, hp.seed)
    else:
        fa = init.copy()
    fa.check_shapes(data)
    if fa.v.shape[1] != hp.k_clusters or fa.x.shape[1] != hp.s:
        raise ShapeError("initial factors do not match k_clusters / s_dim")

    which = hp.convergence_on
    prev = objective(fa, data, hp)
    eps = hp.epsilon * prev.statistic(which) if hp.epsilon_mode == "relative" else hp.epsilon
    trace = FitTrace(initial=prev, threshold=eps)
    last_good = fa.copy()
    t0 = time.perf_counter()
    for it in range(1, hp.t_max + 1):
        try:
            sweep(fa, data, hp, guard, on_update=on_update)
            cur = objective(fa, data, hp)
        except NumericOverflowError as exc:
            trace.stop_reason = STOP_NUMERIC
            trace.message = str(exc)
            return last_good, trace
        now = time.perf_counter()
        change = prev.statistic(which) - cur.statistic(which)
        trace.iterations.append(IterationRecord(it, cur, now - t0, change))
        t0 = now
        last_good = fa.copy()
        if checkpoint is not None and checkpoint_every and it % checkpoint_every == 0:
            checkpoint(it, last_good)
        if change <= eps:
            trace.converged = True
            trace.stop_reason = STOP_THRESHOLD
            break
        prev = cur
    return fa, trace


def fit(graph: MultiViewGraph, hp: Hyperparams, **kwargs):
    """Full pipeline from a graph: re-weight, propagate, then :func:`fit_data`."""
    return fit_data(prepare_data(graph), hp, **kwargs)


# -- diagnostics -------------------------------------------------------------

def gradient_v(fa: LatentFactors, data: ModelData, hp: Hyperparams) -> np.ndarray:
    """Gradient of the unified objective with respect to V."""
    v = fa.v
    pos = 4.0 * hp.alpha * (v @ (v.T @ v)) + 2.0 * (v @ (fa.u.T @ fa.u)) + 2.0 * hp.lam * v
    neg = 4.0 * hp.alpha * (data.y @ v) + 2.0 * (data.f.T @ fa.u) + 2.0 * hp.lam * (fa.x @ fa.c)
    return pos - np.asarray(neg)


def u_ratio(fa: LatentFactors, data: ModelData) -> np.ndarray:
    """Multiplicative factor the U rule would apply; 1 at a stationary point."""
    num = np.asarray(data.f @ fa.v) + fa.p @ fa.w
    den = fa.u @ (fa.v.T @ fa.v) + fa.u
    return num / den


def row_peakedness(m: np.ndarray) -> float:
    """Mean over rows of ``max entry / row 2-norm``; 1 for one-hot rows.

    All-zero rows are skipped.
    """
    norms = np.linalg.norm(m, axis=1)
    keep = norms > 0
    if not keep.any():
        return 0.0
    return float(np.mean(m[keep].max(axis=1) / norms[keep]))
