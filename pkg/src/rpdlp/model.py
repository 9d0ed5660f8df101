"""Linear programs in inequality/equality/bound form and their saddle form.

The primal problem is::

    minimize    c @ x + objective_constant
    subject to  G @ x >= h
                A @ x == b
                l <= x <= u

Dualizing the rows gives ``min_{x in X} max_{y in Y} c@x - y@K@x + q@y`` with
``K = [G; A]``, ``q = [h; b]``, ``X`` the box and ``Y`` the set of ``y`` whose
first ``m1`` entries are nonnegative.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .sparse import CsrMatrix, empty_csr, norm2, row_slice, spmv, spmv_transpose, vstack


class ModelError(ValueError):
    """Raised for inconsistent problem data."""


@dataclass(frozen=True, eq=False)
class GeneralFormLp:
    G: CsrMatrix
    A: CsrMatrix
    c: np.ndarray
    h: np.ndarray
    b: np.ndarray
    l: np.ndarray
    u: np.ndarray
    objective_constant: float = 0.0
    name: str = ""

    def __post_init__(self):
        n = self.c.shape[0]
        for label, mat, rhs in (("G", self.G, self.h), ("A", self.A, self.b)):
            if mat.num_cols != n:
                raise ModelError(f"{label} has {mat.num_cols} columns, expected {n}")
            if rhs.shape != (mat.num_rows,):
                raise ModelError(f"right-hand side of {label} has shape {rhs.shape}")
        for label, v in (("l", self.l), ("u", self.u)):
            if v.shape != (n,):
                raise ModelError(f"bound vector {label} has shape {v.shape}, expected ({n},)")
        for label, v in (("c", self.c), ("h", self.h), ("b", self.b)):
            if not np.all(np.isfinite(v)):
                raise ModelError(f"{label} contains non-finite values")
        if np.any(np.isnan(self.l)) or np.any(np.isnan(self.u)):
            raise ModelError("NaN bound")
        if np.any(self.l == np.inf) or np.any(self.u == -np.inf):
            raise ModelError("lower bound +inf or upper bound -inf")
        bad = np.flatnonzero(self.l > self.u)
        if bad.size:
            i = int(bad[0])
            raise ModelError(f"variable {i} has l={self.l[i]} > u={self.u[i]}")

    @property
    def num_vars(self) -> int:
        return self.c.shape[0]

    @property
    def num_ineq(self) -> int:
        return self.G.num_rows

    @property
    def num_eq(self) -> int:
        return self.A.num_rows

    @property
    def nnz(self) -> int:
        return self.G.nnz + self.A.nnz


def make_lp(
    c,
    G=None,
    h=None,
    A=None,
    b=None,
    l=None,
    u=None,
    objective_constant: float = 0.0,
    name: str = "",
) -> GeneralFormLp:
    """Convenience constructor accepting dense arrays or :class:`CsrMatrix`.

    Missing bounds default to ``l = 0`` and ``u = +inf``.
    """
    from .sparse import csr_from_dense

    c = np.asarray(c, dtype=np.float64)
    n = c.shape[0]

    def as_csr(m):
        if m is None:
            return empty_csr(0, n)
        if isinstance(m, CsrMatrix):
            return m
        return csr_from_dense(np.asarray(m, dtype=np.float64).reshape(-1, n))

    G, A = as_csr(G), as_csr(A)
    h = np.zeros(0) if h is None else np.asarray(h, dtype=np.float64).reshape(-1)
    b = np.zeros(0) if b is None else np.asarray(b, dtype=np.float64).reshape(-1)
    l = np.zeros(n) if l is None else np.asarray(l, dtype=np.float64).reshape(-1)
    u = np.full(n, np.inf) if u is None else np.asarray(u, dtype=np.float64).reshape(-1)
    return GeneralFormLp(G, A, c, h, b, l, u, float(objective_constant), name)


@dataclass(frozen=True, eq=False)
class SaddleProblem:
    K: CsrMatrix
    q: np.ndarray
    c: np.ndarray
    l: np.ndarray
    u: np.ndarray
    m1: int

    @property
    def num_vars(self) -> int:
        return self.c.shape[0]

    @property
    def num_rows(self) -> int:
        return self.q.shape[0]


@dataclass
class PrimalDualPoint:
    x: np.ndarray
    y: np.ndarray

    def copy(self) -> "PrimalDualPoint":
        return PrimalDualPoint(self.x.copy(), self.y.copy())


@dataclass
class ReducedCosts:
    lam: np.ndarray
    lam_pos: np.ndarray
    lam_neg: np.ndarray


def to_saddle(lp: GeneralFormLp) -> SaddleProblem:
    return SaddleProblem(
        K=vstack(lp.G, lp.A),
        q=np.concatenate([lp.h, lp.b]),
        c=lp.c,
        l=lp.l,
        u=lp.u,
        m1=lp.num_ineq,
    )


def from_saddle(sp: SaddleProblem, objective_constant: float = 0.0, name: str = "") -> GeneralFormLp:
    """Split a saddle problem back into its inequality and equality blocks."""
    K, m1 = sp.K, sp.m1
    return GeneralFormLp(
        G=row_slice(K, 0, m1),
        A=row_slice(K, m1, K.num_rows),
        c=sp.c,
        h=sp.q[:m1],
        b=sp.q[m1:],
        l=sp.l,
        u=sp.u,
        objective_constant=objective_constant,
        name=name,
    )


def project_primal(x: np.ndarray, l: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Componentwise median of ``(l, x, u)``."""
    return np.minimum(np.maximum(x, l), u)


def project_dual(y: np.ndarray, m1: int) -> np.ndarray:
    if m1 == 0:
        return y.copy()
    out = y.copy()
    np.maximum(out[:m1], 0.0, out=out[:m1])
    return out


def reduced_costs_from_slack(r: np.ndarray, l: np.ndarray, u: np.ndarray) -> ReducedCosts:
    """Project the dual slack ``r`` onto signs admitting a finite dual objective.

    A positive reduced cost needs a finite lower bound and a negative one a
    finite upper bound; anything else is set to zero.
    """
    finite_l = np.isfinite(l)
    finite_u = np.isfinite(u)
    lam_pos = np.where(finite_l, np.maximum(r, 0.0), 0.0)
    lam_neg = np.where(finite_u, np.maximum(-r, 0.0), 0.0)
    return ReducedCosts(lam_pos - lam_neg, lam_pos, lam_neg)


def reduced_costs(lp: GeneralFormLp | SaddleProblem, y: np.ndarray, kty: np.ndarray | None = None) -> ReducedCosts:
    K = _stacked(lp)
    if kty is None:
        kty = spmv_transpose(K, y)
    return reduced_costs_from_slack(lp.c - kty, lp.l, lp.u)


def _stacked(lp) -> CsrMatrix:
    if isinstance(lp, SaddleProblem):
        return lp.K
    K = lp.__dict__.get("_K")
    if K is None:
        K = vstack(lp.G, lp.A)
        object.__setattr__(lp, "_K", K)
    return K


def stacked_matrix(lp: GeneralFormLp) -> CsrMatrix:
    """``K = [G; A]`` for ``lp`` (built once and cached on the instance)."""
    return _stacked(lp)


def stacked_rhs(lp: GeneralFormLp) -> np.ndarray:
    return np.concatenate([lp.h, lp.b])


def primal_residual(lp: GeneralFormLp, x: np.ndarray, kx: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(A@x - b, max(h - G@x, 0))``."""
    if kx is None:
        kx = spmv(_stacked(lp), x)
    m1 = lp.num_ineq
    return kx[m1:] - lp.b, np.maximum(lp.h - kx[:m1], 0.0)


def dual_residual(lp: GeneralFormLp, y: np.ndarray, lam: ReducedCosts, kty: np.ndarray | None = None) -> np.ndarray:
    if kty is None:
        kty = spmv_transpose(_stacked(lp), y)
    return lp.c - kty - lam.lam


def primal_objective(lp: GeneralFormLp, x: np.ndarray) -> float:
    return float(lp.c @ x) + lp.objective_constant


def bound_term(l: np.ndarray, u: np.ndarray, lam: ReducedCosts) -> float:
    """``l @ lam_pos - u @ lam_neg`` with ``0 * inf`` taken as 0."""
    lo = np.where(lam.lam_pos != 0.0, l, 0.0)
    hi = np.where(lam.lam_neg != 0.0, u, 0.0)
    return float(lo @ lam.lam_pos - hi @ lam.lam_neg)


def dual_objective(lp: GeneralFormLp, y: np.ndarray, lam: ReducedCosts) -> float:
    return float(stacked_rhs(lp) @ y) + bound_term(lp.l, lp.u, lam) + lp.objective_constant


def primal_residual_norm(lp: GeneralFormLp, x: np.ndarray, kx: np.ndarray | None = None) -> float:
    eq, ineq = primal_residual(lp, x, kx)
    return float(np.sqrt(eq @ eq + ineq @ ineq))


def rhs_norm(lp: GeneralFormLp) -> float:
    return float(np.sqrt(lp.h @ lp.h + lp.b @ lp.b))


def cost_norm(lp: GeneralFormLp) -> float:
    return norm2(lp.c)
