"""Fixed-step restarted PDHG on standard-form LPs.

This is the small, analyzable variant of the solver: one step-size ``s`` for
both primal and dual updates, uniform iterate averaging, and a restart as soon
as the KKT error of the average has dropped by a factor ``beta`` relative to
the start of the epoch. It exists to check the linear-decay behaviour of the
restart scheme on toy instances, not to solve anything large.

The problem is ``min c@x  s.t.  A@x == b, x >= 0`` with saddle function
``c@x - y@A@x + b@y``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .model import GeneralFormLp
from .solver import NumericalFailure
from .sparse import CsrMatrix, csr_from_dense, norm2, spmv, spmv_transpose


@dataclass(frozen=True, eq=False)
class StandardFormLp:
    A: CsrMatrix
    b: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        m, n = self.A.shape
        if self.b.shape != (m,):
            raise ValueError(f"b has shape {self.b.shape}, expected ({m},)")
        if self.c.shape != (n,):
            raise ValueError(f"c has shape {self.c.shape}, expected ({n},)")
        if not (np.all(np.isfinite(self.b)) and np.all(np.isfinite(self.c))):
            raise ValueError("b and c must be finite")

    @property
    def num_vars(self) -> int:
        return self.c.shape[0]

    @property
    def num_rows(self) -> int:
        return self.b.shape[0]


def kkt_error_standard(x: np.ndarray, y: np.ndarray, lp: StandardFormLp) -> float:
    """2-norm of ``(A@x - b, [-x]+, [A.T@y - c]+, [c@x - b@y]+)``."""
    primal = spmv(lp.A, x) - lp.b
    bound = np.maximum(-x, 0.0)
    dual = np.maximum(spmv_transpose(lp.A, y) - lp.c, 0.0)
    gap = max(float(lp.c @ x - lp.b @ y), 0.0)
    return math.sqrt(float(primal @ primal + bound @ bound + dual @ dual) + gap * gap)


def spectral_norm(A: CsrMatrix, tol: float = 1e-12, max_iter: int = 100_000) -> float:
    """Largest singular value of ``A`` by power iteration on ``A.T @ A``.

    Stops once the estimate changes by at most ``tol`` relative. The start
    vector is drawn from a fixed seed so results are reproducible.
    """
    if A.nnz == 0:
        return 0.0
    v = np.random.default_rng(0).standard_normal(A.num_cols)
    v /= norm2(v)
    estimate = 0.0
    for _ in range(max_iter):
        w = spmv_transpose(A, spmv(A, v))
        w_norm = norm2(w)
        if w_norm == 0.0:
            return 0.0
        new = math.sqrt(float(v @ w))
        v = w / w_norm
        if abs(new - estimate) <= tol * new:
            return new
        estimate = new
    return estimate


def p_norm(x: np.ndarray, y: np.ndarray, A: CsrMatrix, s: float) -> float:
    """Norm induced by ``P_s = [[I, s A.T], [s A, I]]``; positive definite for ``s ||A|| < 1``."""
    value = float(x @ x + y @ y + 2.0 * s * (y @ spmv(A, x)))
    return math.sqrt(max(value, 0.0))


@dataclass
class Epoch:
    x_start: np.ndarray
    y_start: np.ndarray
    kkt_start: float
    length: int = 0
    iterates: list[tuple[np.ndarray, np.ndarray]] = field(default_factory=list)


@dataclass
class StandardTrace:
    epochs: list[Epoch]
    status: str  # "converged", "epoch_limit" or "iteration_limit"
    iterations: int
    x: np.ndarray
    y: np.ndarray

    @property
    def kkt_starts(self) -> list[float]:
        return [e.kkt_start for e in self.epochs]

    @property
    def restart_lengths(self) -> list[int]:
        """Lengths of the epochs that ended in a restart (all but the last)."""
        return [e.length for e in self.epochs[:-1]]


def restarted_pdhg_standard(
    lp: StandardFormLp,
    s: float,
    beta: float = 0.5,
    max_epochs: int = 50,
    max_iterations: int = 1_000_000,
    kkt_tol: float = 0.0,
    x0: np.ndarray | None = None,
    y0: np.ndarray | None = None,
    keep_iterates: bool = False,
) -> StandardTrace:
    """Run fixed-step restarted PDHG and return the epoch trace.

    Each epoch starts from the previous epoch's average. The run stops after
    ``max_epochs`` restarts, once an epoch-start KKT error is at most
    ``kkt_tol`` (``kkt_tol=0`` disables this), or after ``max_iterations``
    PDHG steps in total. The last epoch in the trace is the one that was
    open when the run stopped; after ``max_epochs`` restarts it is empty.
    With ``keep_iterates`` each epoch stores its start point followed by
    every inner iterate.

    Raises:
        NumericalFailure: when an iterate becomes non-finite.
    """
    if not s > 0:
        raise ValueError("step-size s must be positive")
    if not 0.0 < beta < 1.0:
        raise ValueError("beta must lie in (0, 1)")
    A, b, c = lp.A, lp.b, lp.c
    x = np.zeros(lp.num_vars) if x0 is None else np.asarray(x0, dtype=np.float64).copy()
    y = np.zeros(lp.num_rows) if y0 is None else np.asarray(y0, dtype=np.float64).copy()
    epochs: list[Epoch] = []
    total = 0
    status = "epoch_limit"
    while True:
        kkt_start = kkt_error_standard(x, y, lp)
        epoch = Epoch(x.copy(), y.copy(), kkt_start)
        if keep_iterates:
            epoch.iterates.append((x.copy(), y.copy()))
        epochs.append(epoch)
        if kkt_tol > 0 and kkt_start <= kkt_tol:
            status = "converged"
            break
        if len(epochs) > max_epochs:
            break
        threshold = beta * kkt_start
        x_sum = np.zeros_like(x)
        y_sum = np.zeros_like(y)
        aty = spmv_transpose(A, y)
        ax = spmv(A, x)
        restarted = False
        while total < max_iterations:
            x_new = np.maximum(x - s * (c - aty), 0.0)
            ax_new = spmv(A, x_new)
            y = y + s * (b - (2.0 * ax_new - ax))
            x, ax = x_new, ax_new
            aty = spmv_transpose(A, y)
            if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
                raise NumericalFailure(f"non-finite iterate after {total + 1} steps")
            total += 1
            epoch.length += 1
            x_sum += x
            y_sum += y
            if keep_iterates:
                epoch.iterates.append((x.copy(), y.copy()))
            x_avg = x_sum / epoch.length
            y_avg = y_sum / epoch.length
            if kkt_error_standard(x_avg, y_avg, lp) <= threshold:
                x, y = x_avg, y_avg
                restarted = True
                break
        if not restarted:
            status = "iteration_limit"
            break
    return StandardTrace(epochs, status, total, x.copy(), y.copy())


def standard_form_of(lp: GeneralFormLp) -> tuple[StandardFormLp, np.ndarray, np.ndarray, float]:
    """Slack reformulation of a general-form LP (dense; meant for small instances).

    Returns ``(std, T, offset, constant)`` with ``x = T @ z[:T.shape[1]] + offset``
    and ``c@x = std.c @ z + constant``. Finite lower bounds are shifted to zero,
    variables with only an upper bound are negated, free variables are split,
    and finite upper bounds and inequality rows get slack columns.
    """
    G = lp.G.to_dense() if lp.G.num_rows else np.zeros((0, lp.num_vars))
    A = lp.A.to_dense() if lp.A.num_rows else np.zeros((0, lp.num_vars))
    n = lp.num_vars
    cols: list[tuple[int, float]] = []
    offset = np.zeros(n)
    upper_rows: list[tuple[int, float]] = []
    for j in range(n):
        lo, hi = lp.l[j], lp.u[j]
        if np.isfinite(lo):
            offset[j] = lo
            cols.append((j, 1.0))
            if np.isfinite(hi):
                upper_rows.append((len(cols) - 1, hi - lo))
        elif np.isfinite(hi):
            offset[j] = hi
            cols.append((j, -1.0))
        else:
            cols.append((j, 1.0))
            cols.append((j, -1.0))
    T = np.zeros((n, len(cols)))
    for p, (j, sign) in enumerate(cols):
        T[j, p] = sign
    nz, m1, m2 = len(cols), G.shape[0], A.shape[0]
    total = nz + m1 + len(upper_rows)
    M = np.zeros((m1 + m2 + len(upper_rows), total))
    r = np.zeros(M.shape[0])
    M[:m1, :nz] = G @ T
    M[:m1, nz : nz + m1] = -np.eye(m1)
    r[:m1] = lp.h - G @ offset
    M[m1 : m1 + m2, :nz] = A @ T
    r[m1 : m1 + m2] = lp.b - A @ offset
    for k, (p, width) in enumerate(upper_rows):
        M[m1 + m2 + k, p] = 1.0
        M[m1 + m2 + k, nz + m1 + k] = 1.0
        r[m1 + m2 + k] = width
    cz = np.zeros(total)
    cz[:nz] = lp.c @ T
    constant = float(lp.c @ offset) + lp.objective_constant
    return StandardFormLp(csr_from_dense(M), r, cz), T, offset, constant
