import math

import numpy as np
import pytest
import scipy.sparse as sp

from gccfp import (
    Hyperparams,
    LatentFactors,
    ModelData,
    NumericOverflowError,
    ShapeError,
    ValidationError,
    init_factors,
    load_factors,
    objective,
    relaxed_cw_objective,
    save_factors,
)
from gccfp import factors as factors_mod

from helpers import random_instance


def loop_objective(fa, data, hp):
    """Scalar-loop evaluation of every objective term."""
    def dense(a):
        return a.toarray() if sp.issparse(a) else np.asarray(a)

    def resid(a, left, right):
        a = dense(a)
        total = 0.0
        for i in range(a.shape[0]):
            for j in range(a.shape[1]):
                r = a[i, j] - sum(left[i, q] * right[j, q] for q in range(left.shape[1]))
                total += r * r
        return total

    def sq_minus(a, b):
        return sum((a[i, j] - b[i, j]) ** 2 for i in range(a.shape[0]) for j in range(a.shape[1]))

    def matmul(a, b):
        return np.array([[sum(a[i, l] * b[l, j] for l in range(a.shape[1])) for j in range(b.shape[1])]
                         for i in range(a.shape[0])])

    feature = resid(data.f, fa.u, fa.v)
    prop = [resid(h, p, fa.x) for h, p in zip(data.h, fa.p_views)]
    cu = sq_minus(matmul(fa.p, fa.w), fa.u)
    structural = hp.alpha * resid(data.y, fa.v, fa.v)
    cv = hp.lam * sq_minus(matmul(fa.x, fa.c), fa.v)
    oc = sq_minus(matmul(fa.c, fa.c.T), np.eye(fa.c.shape[0]))
    ow = sq_minus(matmul(fa.w, fa.w.T), np.eye(fa.w.shape[0]))
    return feature, prop, cu, structural, cv, oc, ow


class TestHyperparams:
    def test_defaults(self):
        hp = Hyperparams(k_clusters=4)
        assert (hp.alpha, hp.lam, hp.delta, hp.t_max) == (5.0, 1.0, 1e5, 300)
        assert hp.s == 4

    @pytest.mark.parametrize("kw", [
        {"alpha": -1}, {"lam": -0.1}, {"delta": float("nan")}, {"epsilon": 0},
        {"k_clusters": 1}, {"s_dim": 0}, {"t_max": 0}, {"epsilon_mode": "x"},
        {"convergence_on": "x"},
    ])
    def test_invalid(self, kw):
        kw = {"k_clusters": 2, **kw}
        with pytest.raises(ValidationError):
            Hyperparams(**kw)


class TestInit:
    def test_deterministic(self):
        a = init_factors(10, [3, 4], 3, 2, seed=5)
        b = init_factors(10, [3, 4], 3, 2, seed=5)
        for (_, x), (_, y) in zip(a.named(), b.named()):
            assert np.array_equal(x, y)

    def test_strictly_positive_and_scaled(self):
        fa = init_factors(50, [20], 4, 9, seed=1)
        assert fa.min_entry() > 0
        assert fa.v.max() <= 1 / math.sqrt(4) and fa.c.max() <= 1 / math.sqrt(4)
        assert fa.x.max() <= 1 / 3 and fa.p_views[0].max() <= 1 / 3

    def test_seeds_differ(self):
        a = init_factors(6, [2], 2, seed=1)
        b = init_factors(6, [2], 2, seed=2)
        assert not np.array_equal(a.v, b.v)

    def test_shapes(self):
        fa = init_factors(7, [2, 3, 4], 3, 5, seed=0)
        assert fa.v.shape == (7, 3) and fa.u.shape == (9, 3) and fa.x.shape == (7, 5)
        assert [p.shape for p in fa.p_views] == [(2, 5), (3, 5), (4, 5)]
        assert fa.c.shape == fa.w.shape == (5, 3) and fa.p.shape == (9, 5)

    def test_zero_dimension(self):
        with pytest.raises(ShapeError):
            init_factors(0, [2], 2)
        with pytest.raises(ShapeError):
            init_factors(3, [0], 2)


def zero_data(n, sizes):
    z = sp.csr_matrix((n, n))
    return ModelData(z, sp.csr_matrix((sum(sizes), n)), tuple(sp.csr_matrix((m, n)) for m in sizes), list(sizes))


class TestObjective:
    def test_zero_case(self):
        fa = init_factors(5, [2, 3], 2, seed=0)
        for _, m in fa.named():
            m[...] = 0.0
        ob = objective(fa, zero_data(5, [2, 3]), Hyperparams(k_clusters=2))
        assert ob.total == 0.0

    def test_perfect_fit(self):
        rng = np.random.default_rng(0)
        n, k = 6, 2
        v = rng.random((n, k))
        p_views = [rng.random((3, k)), rng.random((2, k))]
        eye = np.eye(k)
        fa = LatentFactors(v, np.vstack(p_views), v.copy(), p_views, eye.copy(), eye.copy())
        data = ModelData.from_arrays(v @ v.T, [p @ v.T for p in p_views], h=[p @ v.T for p in p_views])
        ob = objective(fa, data, Hyperparams(k_clusters=2))
        assert ob.total == pytest.approx(0.0, abs=1e-24)
        assert ob.ortho_c == 0.0 and ob.ortho_w == 0.0

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_loop_oracle(self, seed):
        data, fa, hp = random_instance(seed, n=4, view_sizes=(2, 3), k=2, s=3)
        ob = objective(fa, data, hp)
        feature, prop, cu, structural, cv, oc, ow = loop_objective(fa, data, hp)
        rel = dict(rel=1e-12, abs=0)
        assert ob.feature_term == pytest.approx(feature, **rel)
        assert list(ob.propagation_terms) == pytest.approx(prop, **rel)
        assert ob.coupling_u == pytest.approx(cu, **rel)
        assert ob.structural == pytest.approx(structural, **rel)
        assert ob.coupling_v == pytest.approx(cv, **rel)
        assert ob.ortho_c == pytest.approx(oc, **rel)
        assert ob.ortho_w == pytest.approx(ow, **rel)
        assert ob.total == pytest.approx(feature + sum(prop) + cu + structural + cv, **rel)

    def test_total_is_sum_and_terms_nonnegative(self, small_instance):
        data, fa, hp = small_instance
        ob = objective(fa, data, hp)
        parts = ob.feature_term + sum(ob.propagation_terms) + ob.coupling_u + ob.structural + ob.coupling_v
        assert ob.total == pytest.approx(parts, rel=1e-12)
        assert all(v >= 0 for v in ob.as_dict().values())
        assert ob.penalized == pytest.approx(ob.total + hp.delta * (ob.ortho_c + ob.ortho_w), rel=1e-15)

    def test_zeroed_data_gives_reconstruction_norms(self, small_instance):
        data, fa, hp = small_instance
        z = zero_data(data.n_vertices, data.view_sizes)
        ob = objective(fa, z, hp)
        assert ob.feature_term == pytest.approx(np.sum((fa.u @ fa.v.T) ** 2), rel=1e-12)
        for t, p in zip(ob.propagation_terms, fa.p_views):
            assert t == pytest.approx(np.sum((p @ fa.x.T) ** 2), rel=1e-12)
        assert ob.structural == pytest.approx(hp.alpha * np.sum((fa.v @ fa.v.T) ** 2), rel=1e-12)

    def test_trace_expansion_path(self, small_instance, monkeypatch):
        data, fa, hp = small_instance
        dense = objective(fa, data, hp)
        monkeypatch.setattr(factors_mod, "DENSE_LIMIT", 0)
        expanded = objective(fa, data, hp)
        assert expanded.total == pytest.approx(dense.total, rel=1e-10)
        assert expanded.structural == pytest.approx(dense.structural, rel=1e-10)

    def test_non_finite_names_term(self, small_instance):
        data, fa, hp = small_instance
        fa.u[0, 0] = np.inf
        with pytest.raises(NumericOverflowError) as exc:
            objective(fa, data, hp)
        assert exc.value.term == "feature_term"


class TestRelaxed:
    def test_orthonormal_rows_zero_penalty(self, small_instance):
        data, fa, hp = small_instance
        fa.c = np.eye(2)
        assert objective(fa, data, hp).ortho_c == 0.0

    def test_all_ones_closed_form(self):
        for s, k in [(2, 2), (3, 2), (4, 5)]:
            fa = init_factors(4, [2], k, s, seed=0)
            fa.c = np.ones((s, k)) / math.sqrt(k)
            # loop oracle of ||C C^T - I||^2
            g = [[sum(fa.c[i, q] * fa.c[j, q] for q in range(k)) - (i == j) for j in range(s)] for i in range(s)]
            loop = sum(x * x for row in g for x in row)
            assert loop == pytest.approx(s * s - s, rel=1e-14)
            ob = objective(fa, zero_data(4, [2]), Hyperparams(k_clusters=2))
            assert ob.ortho_c == pytest.approx(s * s - s, rel=1e-14)

    def test_delta_zero_reduces_to_couplings(self, small_instance):
        data, fa, hp = small_instance
        ob = objective(fa, data, hp)
        val = relaxed_cw_objective(fa, hp.with_(delta=0.0))
        assert val == pytest.approx(ob.coupling_u + ob.coupling_v, rel=1e-14)

    def test_full_expression(self, small_instance):
        data, fa, hp = small_instance
        ob = objective(fa, data, hp)
        expected = ob.coupling_u + ob.coupling_v + hp.delta * (ob.ortho_c + ob.ortho_w)
        assert relaxed_cw_objective(fa, hp) == pytest.approx(expected, rel=1e-13)


class TestSerialization:
    def test_roundtrip_exact(self, tmp_path):
        fa = init_factors(5, [2, 3], 3, 2, seed=4)
        save_factors(tmp_path / "f.txt", fa)
        fb = load_factors(tmp_path / "f.txt")
        for (na, a), (nb, b) in zip(fa.named(), fb.named()):
            assert na == nb and np.array_equal(a, b)

    def test_header(self, tmp_path):
        fa = init_factors(3, [2], 2, seed=0)
        save_factors(tmp_path / "f.txt", fa)
        lines = (tmp_path / "f.txt").read_text().splitlines()
        assert lines[0] == "gccfp-factors 1"
        assert lines[1] == "matrix v 3 2"

    def test_rejects_garbage(self, tmp_path):
        from gccfp import ParseError

        (tmp_path / "f.txt").write_text("hello\n")
        with pytest.raises(ParseError):
            load_factors(tmp_path / "f.txt")
