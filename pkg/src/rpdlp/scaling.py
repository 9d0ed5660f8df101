"""Diagonal preconditioning of the constraint matrix.

A scaling ``(d_row, d_col)`` replaces ``K`` by ``diag(d_row) K diag(d_col)``;
the rest of the problem follows so that ``x = d_col * x_hat`` and
``y = d_row * y_hat`` map scaled solutions back to original ones.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import PrimalDualPoint, SaddleProblem
from .sparse import CsrMatrix, row_col_inf_norms, row_col_power_sums

SCALING_MODES = ("none", "ruiz", "ruiz+pc")


@dataclass(frozen=True, eq=False)
class DiagonalScaling:
    d_row: np.ndarray
    d_col: np.ndarray

    def __post_init__(self):
        for label, d in (("d_row", self.d_row), ("d_col", self.d_col)):
            if not (np.all(np.isfinite(d)) and np.all(d > 0)):
                raise ValueError(f"{label} must be strictly positive and finite")

    @classmethod
    def identity(cls, num_rows: int, num_cols: int) -> "DiagonalScaling":
        return cls(np.ones(num_rows), np.ones(num_cols))


def _inv_sqrt_or_one(v: np.ndarray) -> np.ndarray:
    out = np.ones_like(v)
    pos = v > 0
    out[pos] = 1.0 / np.sqrt(v[pos])
    return out


def ruiz_equilibrate(K: CsrMatrix, iters: int = 10) -> DiagonalScaling:
    """Ruiz equilibration in the infinity norm.

    Each pass divides every row and column of the current scaled matrix by
    the square root of its max-abs entry. Empty rows and columns keep scale 1.
    """
    if iters < 0:
        raise ValueError("iters must be nonnegative")
    d_row = np.ones(K.num_rows)
    d_col = np.ones(K.num_cols)
    current = K
    for _ in range(iters):
        row_norm, col_norm = row_col_inf_norms(current)
        r = _inv_sqrt_or_one(row_norm)
        c = _inv_sqrt_or_one(col_norm)
        d_row *= r
        d_col *= c
        current = K.scale(d_row, d_col)
    return DiagonalScaling(d_row, d_col)


def pock_chambolle_scale(K: CsrMatrix, alpha: float = 1.0) -> DiagonalScaling:
    """One-shot scaling ``d_row = (sum |K_row|^(2-alpha))^(-1/2)``, ``d_col = (sum |K_col|^alpha)^(-1/2)``."""
    if not 0.0 <= alpha <= 2.0:
        raise ValueError(f"alpha must lie in [0, 2], got {alpha}")
    row_sum, col_sum = row_col_power_sums(K, alpha)
    return DiagonalScaling(_inv_sqrt_or_one(row_sum), _inv_sqrt_or_one(col_sum))


def compose(s1: DiagonalScaling, s2: DiagonalScaling) -> DiagonalScaling:
    return DiagonalScaling(s1.d_row * s2.d_row, s1.d_col * s2.d_col)


def compute_scaling(
    K: CsrMatrix, mode: str = "ruiz+pc", ruiz_iters: int = 10, alpha: float = 1.0
) -> DiagonalScaling:
    """Scaling for ``mode``; Pock-Chambolle runs on the Ruiz-scaled matrix."""
    if mode not in SCALING_MODES:
        raise ValueError(f"unknown scaling mode {mode!r}; expected one of {SCALING_MODES}")
    s = DiagonalScaling.identity(K.num_rows, K.num_cols)
    if mode == "none":
        return s
    s = ruiz_equilibrate(K, ruiz_iters)
    if mode == "ruiz+pc":
        s = compose(s, pock_chambolle_scale(K.scale(s.d_row, s.d_col), alpha))
    return s


def apply_scaling(problem: SaddleProblem, s: DiagonalScaling) -> SaddleProblem:
    """Scaled problem: ``K~ = D1 K D2``, ``c~ = D2 c``, ``q~ = D1 q``, bounds divided by ``D2``."""
    if s.d_row.shape != (problem.num_rows,) or s.d_col.shape != (problem.num_vars,):
        raise ValueError("scaling dimensions do not match the problem")
    return SaddleProblem(
        K=problem.K.scale(s.d_row, s.d_col),
        q=problem.q * s.d_row,
        c=problem.c * s.d_col,
        l=problem.l / s.d_col,
        u=problem.u / s.d_col,
        m1=problem.m1,
    )


def unscale_point(z: PrimalDualPoint, s: DiagonalScaling) -> PrimalDualPoint:
    return PrimalDualPoint(z.x * s.d_col, z.y * s.d_row)


def scale_point(z: PrimalDualPoint, s: DiagonalScaling) -> PrimalDualPoint:
    return PrimalDualPoint(z.x / s.d_col, z.y / s.d_row)
