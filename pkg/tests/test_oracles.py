"""The reference solvers are only useful if they are right: check them against HiGHS."""

from pathlib import Path

import numpy as np
import pytest
from scipy.optimize import linprog

from oracles import dense_parts, oracle_objective, textbook_simplex, vertex_enumeration
from rpdlp.model import make_lp
from rpdlp.mps import read_mps

SUITE = Path(__file__).parent / "data" / "suite"
NAMES = sorted(p.stem for p in SUITE.glob("*.mps"))


def highs(lp):
    G, A = dense_parts(lp)
    res = linprog(
        lp.c,
        A_ub=-G if G.shape[0] else None,
        b_ub=-lp.h if G.shape[0] else None,
        A_eq=A if A.shape[0] else None,
        b_eq=lp.b if A.shape[0] else None,
        bounds=[(None if np.isinf(lo) else lo, None if np.isinf(hi) else hi) for lo, hi in zip(lp.l, lp.u)],
        method="highs",
    )
    return res


def test_suite_size():
    assert len(NAMES) >= 20


@pytest.mark.parametrize("name", NAMES)
def test_suite_oracle_matches_highs(name):
    lp = read_mps(SUITE / f"{name}.mps")
    assert lp.nnz <= 5000
    res = highs(lp)
    assert res.status == 0
    assert oracle_objective(lp) == pytest.approx(res.fun + lp.objective_constant, rel=1e-9, abs=1e-9)


def test_random_small_lps():
    rng = np.random.default_rng(0)
    for _ in range(40):
        n, m1, m2 = 4, 3, 1
        G, A = rng.standard_normal((m1, n)), rng.standard_normal((m2, n))
        x0 = rng.uniform(0, 2, n)
        lp = make_lp(
            rng.standard_normal(n), G=G, h=G @ x0 - rng.uniform(0, 1, m1), A=A, b=A @ x0, u=np.full(n, 3.0)
        )
        ref = highs(lp).fun
        enum, _ = vertex_enumeration(lp)
        status, simplex, _ = textbook_simplex(lp)
        assert status == "optimal"
        assert enum == pytest.approx(ref, rel=1e-8, abs=1e-8)
        assert simplex == pytest.approx(ref, rel=1e-8, abs=1e-8)


def test_simplex_statuses():
    assert textbook_simplex(make_lp([0.0], G=[[1.0], [-1.0]], h=[1.0, 0.0], l=[-np.inf]))[0] == "infeasible"
    assert textbook_simplex(make_lp([-1.0]))[0] == "unbounded"
