import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from rpdlp.model import (
    ModelError,
    bound_term,
    dual_objective,
    dual_residual,
    from_saddle,
    make_lp,
    primal_objective,
    primal_residual,
    project_dual,
    project_primal,
    reduced_costs,
    reduced_costs_from_slack,
    to_saddle,
)
from rpdlp.sparse import csr_from_dense

INF = math.inf
finite = st.floats(-1e3, 1e3, allow_nan=False)


def two_row_lp():
    # x1 + x2 >= 1 and x1 - x2 == 0.
    return make_lp([1.0, 2.0], G=[[1.0, 1.0]], h=[1.0], A=[[1.0, -1.0]], b=[0.0])


class TestConstruction:
    def test_defaults(self):
        lp = make_lp([1.0, 2.0])
        assert lp.l.tolist() == [0.0, 0.0]
        assert lp.u.tolist() == [INF, INF]
        assert lp.num_ineq == 0 and lp.num_eq == 0

    @pytest.mark.parametrize(
        "kwargs, message",
        [
            ({"l": [2.0], "u": [1.0]}, "l=2.0 > u=1.0"),
            ({"l": [INF]}, "lower bound"),
            ({"u": [-INF]}, "upper bound"),
            ({"l": [math.nan]}, "NaN"),
            ({"G": [[1.0]], "h": [1.0, 2.0]}, "right-hand side"),
        ],
    )
    def test_invalid(self, kwargs, message):
        with pytest.raises(ModelError, match=message):
            make_lp([1.0], **kwargs)

    def test_non_finite_cost(self):
        with pytest.raises(ModelError):
            make_lp([math.inf])


class TestSaddle:
    def test_equality_only(self):
        lp = make_lp([1.0, 1.0], A=[[1.0, 1.0]], b=[1.0])
        sp = to_saddle(lp)
        assert sp.m1 == 0
        np.testing.assert_array_equal(sp.K.to_dense(), [[1.0, 1.0]])
        assert sp.q.tolist() == [1.0]

    def test_inequality_only(self):
        lp = make_lp([1.0], G=[[2.0]], h=[3.0])
        sp = to_saddle(lp)
        assert sp.m1 == 1
        assert sp.q.tolist() == [3.0]

    def test_stacking_order(self):
        sp = to_saddle(two_row_lp())
        np.testing.assert_array_equal(sp.K.to_dense(), [[1.0, 1.0], [1.0, -1.0]])
        assert sp.q.tolist() == [1.0, 0.0]
        back = from_saddle(sp)
        np.testing.assert_array_equal(back.G.to_dense(), [[1.0, 1.0]])
        np.testing.assert_array_equal(back.A.to_dense(), [[1.0, -1.0]])


class TestProjections:
    def test_primal_examples(self):
        l, u = np.array([0.0, -1.0]), np.array([INF, 1.0])
        assert project_primal(np.array([0.5, 0.2]), l, u).tolist() == [0.5, 0.2]
        assert project_primal(np.array([-3.0, 5.0]), l, u).tolist() == [0.0, 1.0]

    def test_dual_examples(self):
        assert project_dual(np.array([-1.0, -1.0]), 0).tolist() == [-1.0, -1.0]
        assert project_dual(np.array([-1.0, -1.0]), 1).tolist() == [0.0, -1.0]

    @given(arrays(np.float64, 6, elements=finite), arrays(np.float64, 6, elements=finite))
    def test_primal_against_scalar_clamp(self, x, z):
        l = np.array([-INF, 0.0, -1.0, -INF, 2.0, -5.0])
        u = np.array([INF, INF, 1.0, 0.0, 2.0, 5.0])
        p = project_primal(x, l, u)
        assert p.tolist() == [min(max(a, lo), hi) for a, lo, hi in zip(x, l, u)]
        # Idempotent and 1-Lipschitz.
        np.testing.assert_array_equal(project_primal(p, l, u), p)
        q = project_primal(z, l, u)
        assert np.linalg.norm(p - q) <= np.linalg.norm(x - z) + 1e-12

    @given(arrays(np.float64, 5, elements=finite), st.integers(0, 5))
    def test_dual_against_scalar_loop(self, y, m1):
        assert project_dual(y, m1).tolist() == [max(v, 0.0) if i < m1 else v for i, v in enumerate(y)]


class TestReducedCosts:
    def test_examples(self):
        l = np.array([-INF, 0.0, 0.0, -INF])
        u = np.array([INF, INF, 1.0, 3.0])
        lam = reduced_costs_from_slack(np.array([4.0, -2.0, 5.0, 2.0]), l, u)
        assert lam.lam.tolist() == [0.0, 0.0, 5.0, 0.0]
        assert lam.lam_pos.tolist() == [0.0, 0.0, 5.0, 0.0]
        assert lam.lam_neg.tolist() == [0.0, 0.0, 0.0, 0.0]
        lam = reduced_costs_from_slack(np.array([0.0, 0.0, 0.0, -2.0]), l, u)
        assert lam.lam.tolist() == [0.0, 0.0, 0.0, -2.0]

    @given(arrays(np.float64, 4, elements=finite))
    @settings(max_examples=200)
    def test_sign_structure(self, r):
        l = np.array([-INF, 0.0, -INF, -1.0])
        u = np.array([INF, INF, 2.0, 1.0])
        lam = reduced_costs_from_slack(r, l, u)
        assert np.all(lam.lam_pos >= 0) and np.all(lam.lam_neg >= 0)
        assert np.all(lam.lam_pos * lam.lam_neg == 0)
        np.testing.assert_array_equal(lam.lam, lam.lam_pos - lam.lam_neg)
        assert lam.lam_pos[0] == 0 and lam.lam_pos[2] == 0
        assert lam.lam_neg[0] == 0 and lam.lam_neg[1] == 0
        assert math.isfinite(bound_term(l, u, lam))

    def test_uses_stacked_matrix(self):
        lp = two_row_lp()
        lam = reduced_costs(lp, np.array([1.0, 0.5]))
        # r = c - K.T y = [1 - 1.5, 2 - 0.5]; both variables have l = 0 only.
        assert lam.lam.tolist() == [0.0, 1.5]


class TestResidualsAndObjectives:
    def test_feasible_point(self):
        lp = two_row_lp()
        eq, ineq = primal_residual(lp, np.array([0.5, 0.5]))
        assert eq.tolist() == [0.0] and ineq.tolist() == [0.0]

    def test_analytic_optimum(self):
        # min x s.t. x >= 1: x* = 1, y* = 1, lambda* = 0.
        lp = make_lp([1.0], G=[[1.0]], h=[1.0])
        x, y = np.array([1.0]), np.array([1.0])
        lam = reduced_costs(lp, y)
        assert primal_objective(lp, x) == 1.0
        assert dual_objective(lp, y, lam) == 1.0
        assert dual_residual(lp, y, lam).tolist() == [0.0]

    def test_objective_constant(self):
        lp = make_lp([1.0], objective_constant=2.5)
        lam = reduced_costs(lp, np.zeros(0))
        assert primal_objective(lp, np.array([1.0])) == 3.5
        # lambda = 1 on a variable with l = 0 contributes l * lambda = 0.
        assert dual_objective(lp, np.zeros(0), lam) == 2.5

    def test_infinite_bounds_never_multiply(self):
        lp = make_lp([1.0, -1.0], l=[-INF, -INF], u=[INF, 4.0])
        lam = reduced_costs(lp, np.zeros(0))
        assert dual_objective(lp, np.zeros(0), lam) == -4.0

    def test_random_point_matches_dense(self):
        rng = np.random.default_rng(6)
        G, A = rng.standard_normal((3, 4)), rng.standard_normal((2, 4))
        l = np.array([0.0, -INF, -1.0, -INF])
        u = np.array([INF, 2.0, 1.0, INF])
        lp = make_lp(rng.standard_normal(4), G=G, h=rng.standard_normal(3), A=A, b=rng.standard_normal(2), l=l, u=u)
        x, y = rng.standard_normal(4), rng.standard_normal(5)
        eq, ineq = primal_residual(lp, x)
        np.testing.assert_allclose(eq, A @ x - lp.b, rtol=1e-14, atol=1e-14)
        np.testing.assert_allclose(ineq, np.maximum(lp.h - G @ x, 0), rtol=1e-14, atol=1e-14)
        r = lp.c - np.vstack([G, A]).T @ y
        lam = reduced_costs(lp, y)
        expected = [r[0] if r[0] > 0 else 0.0, min(r[1], 0.0), r[2], 0.0]
        np.testing.assert_allclose(lam.lam, expected, rtol=1e-14, atol=1e-14)
        np.testing.assert_allclose(dual_residual(lp, y, lam), r - lam.lam, rtol=1e-14, atol=1e-14)
        dobj = np.concatenate([lp.h, lp.b]) @ y + sum(
            (l[i] * lam.lam_pos[i] if lam.lam_pos[i] else 0.0) - (u[i] * lam.lam_neg[i] if lam.lam_neg[i] else 0.0)
            for i in range(4)
        )
        assert dual_objective(lp, y, lam) == pytest.approx(dobj, rel=1e-13)


def test_stacked_cache_reused():
    lp = two_row_lp()
    from rpdlp.model import stacked_matrix

    assert stacked_matrix(lp) is stacked_matrix(lp)
    assert stacked_matrix(lp).to_dense().tolist() == csr_from_dense([[1.0, 1.0], [1.0, -1.0]]).to_dense().tolist()
