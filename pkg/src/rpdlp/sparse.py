"""Compressed-sparse-row storage and the vector kernels used by the solver.

The matrix-vector products are the only heavy numerical work in a PDHG
iteration, so every product in the package goes through :func:`spmv` and
:func:`spmv_transpose`. Both accumulate each output entry sequentially in
stored-column order, which makes results reproducible run to run.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np
import scipy.sparse as sp


class SparseFormatError(ValueError):
    """Raised when a matrix cannot be assembled from the given entries."""


@dataclass(frozen=True, eq=False)
class CsrMatrix:
    """Sparse matrix in canonical CSR layout.

    ``row_offsets`` has ``num_rows + 1`` entries; the stored entries of row
    ``i`` live in ``col_indices[row_offsets[i]:row_offsets[i + 1]]`` with
    strictly increasing column indices. Exact zeros are never stored.
    """

    num_rows: int
    num_cols: int
    row_offsets: np.ndarray
    col_indices: np.ndarray
    values: np.ndarray
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.num_rows, self.num_cols)

    @property
    def nnz(self) -> int:
        return int(self.values.size)

    def _scipy(self) -> sp.csr_matrix:
        # Wraps the same arrays; scipy's CSR matvec is a per-row sequential loop.
        mat = self._cache.get("csr")
        if mat is None:
            mat = sp.csr_matrix(
                (self.values, self.col_indices, self.row_offsets), shape=self.shape
            )
            mat.has_canonical_format = True
            self._cache["csr"] = mat
        return mat

    def transpose(self) -> "CsrMatrix":
        """Explicit transpose, itself in canonical CSR form (cached)."""
        t = self._cache.get("transpose")
        if t is None:
            t = _transpose(self)
            self._cache["transpose"] = t
        return t

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.shape)
        for i in range(self.num_rows):
            lo, hi = self.row_offsets[i], self.row_offsets[i + 1]
            out[i, self.col_indices[lo:hi]] = self.values[lo:hi]
        return out

    def row_counts(self) -> np.ndarray:
        return np.diff(self.row_offsets)

    def row_indices(self) -> np.ndarray:
        """Row index of every stored entry (COO row array)."""
        return np.repeat(np.arange(self.num_rows), self.row_counts())

    def scale(self, row_scale: np.ndarray, col_scale: np.ndarray) -> "CsrMatrix":
        """Return ``diag(row_scale) @ self @ diag(col_scale)``."""
        vals = self.values * row_scale[self.row_indices()] * col_scale[self.col_indices]
        return CsrMatrix(
            self.num_rows, self.num_cols, self.row_offsets, self.col_indices, vals
        )

    def __repr__(self) -> str:
        return f"CsrMatrix({self.num_rows}x{self.num_cols}, nnz={self.nnz})"


def _transpose(a: CsrMatrix) -> CsrMatrix:
    counts = np.bincount(a.col_indices, minlength=a.num_cols)
    offsets = np.zeros(a.num_cols + 1, dtype=np.int64)
    np.cumsum(counts, out=offsets[1:])
    # Stable sort by column keeps row indices increasing inside each new row.
    order = np.argsort(a.col_indices, kind="stable")
    rows = a.row_indices()
    return CsrMatrix(
        a.num_cols,
        a.num_rows,
        offsets,
        rows[order].astype(np.int64),
        a.values[order].copy(),
    )


def csr_from_triplets(
    num_rows: int,
    num_cols: int,
    entries: Iterable[tuple[int, int, float]],
) -> CsrMatrix:
    """Assemble a canonical CSR matrix from ``(row, col, value)`` triplets.

    Duplicate positions are summed; entries whose (summed) value is exactly
    zero are dropped.

    Raises:
        SparseFormatError: if any index is out of range or a value is not finite.
    """
    entries = list(entries)
    if num_rows < 0 or num_cols < 0:
        raise SparseFormatError(f"negative shape ({num_rows}, {num_cols})")
    for pos, (r, c, v) in enumerate(entries):
        if not (0 <= r < num_rows and 0 <= c < num_cols):
            raise SparseFormatError(
                f"entry {pos} ({r}, {c}, {v}) out of range for shape ({num_rows}, {num_cols})"
            )
        if not np.isfinite(v):
            raise SparseFormatError(f"entry {pos} ({r}, {c}, {v}) has a non-finite value")
    if entries:
        rows = np.fromiter((e[0] for e in entries), dtype=np.int64, count=len(entries))
        cols = np.fromiter((e[1] for e in entries), dtype=np.int64, count=len(entries))
        vals = np.fromiter((e[2] for e in entries), dtype=np.float64, count=len(entries))
    else:
        rows = cols = np.zeros(0, dtype=np.int64)
        vals = np.zeros(0)
    return csr_from_arrays(num_rows, num_cols, rows, cols, vals)


def csr_from_arrays(
    num_rows: int, num_cols: int, rows: np.ndarray, cols: np.ndarray, vals: np.ndarray
) -> CsrMatrix:
    """Vectorized core of :func:`csr_from_triplets` (indices assumed valid)."""
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    vals = np.asarray(vals, dtype=np.float64)
    key = rows * max(num_cols, 1) + cols
    # Sort by value first so duplicate sums do not depend on the input order.
    order = np.lexsort((vals, key))
    key, vals = key[order], vals[order]
    uniq, start = np.unique(key, return_index=True)
    summed = np.add.reduceat(vals, start) if vals.size else vals
    keep = summed != 0.0
    uniq, summed = uniq[keep], summed[keep]
    r = uniq // max(num_cols, 1)
    c = uniq % max(num_cols, 1)
    offsets = np.zeros(num_rows + 1, dtype=np.int64)
    np.cumsum(np.bincount(r, minlength=num_rows), out=offsets[1:])
    return CsrMatrix(num_rows, num_cols, offsets, c.astype(np.int64), summed.astype(np.float64))


def csr_from_dense(a: np.ndarray) -> CsrMatrix:
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    r, c = np.nonzero(a)
    return csr_from_arrays(a.shape[0], a.shape[1], r, c, a[r, c])


def empty_csr(num_rows: int, num_cols: int) -> CsrMatrix:
    return csr_from_arrays(num_rows, num_cols, np.zeros(0), np.zeros(0), np.zeros(0))


def vstack(top: CsrMatrix, bottom: CsrMatrix) -> CsrMatrix:
    """Stack two matrices with equal column counts row-wise."""
    if top.num_cols != bottom.num_cols:
        raise SparseFormatError(
            f"column mismatch in vstack: {top.num_cols} vs {bottom.num_cols}"
        )
    offsets = np.concatenate([top.row_offsets, bottom.row_offsets[1:] + top.nnz])
    return CsrMatrix(
        top.num_rows + bottom.num_rows,
        top.num_cols,
        offsets.astype(np.int64),
        np.concatenate([top.col_indices, bottom.col_indices]).astype(np.int64),
        np.concatenate([top.values, bottom.values]),
    )


def row_slice(a: CsrMatrix, start: int, stop: int) -> CsrMatrix:
    lo, hi = a.row_offsets[start], a.row_offsets[stop]
    return CsrMatrix(
        stop - start,
        a.num_cols,
        a.row_offsets[start : stop + 1] - lo,
        a.col_indices[lo:hi],
        a.values[lo:hi],
    )


def spmv(a: CsrMatrix, x: np.ndarray) -> np.ndarray:
    """Compute ``a @ x``."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (a.num_cols,):
        raise ValueError(f"spmv: expected vector of length {a.num_cols}, got shape {x.shape}")
    return a._scipy() @ x


def spmv_transpose(a: CsrMatrix, y: np.ndarray) -> np.ndarray:
    """Compute ``a.T @ y`` via the cached explicit transpose."""
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (a.num_rows,):
        raise ValueError(
            f"spmv_transpose: expected vector of length {a.num_rows}, got shape {y.shape}"
        )
    return a.transpose()._scipy() @ y


def max_abs_entry(a: CsrMatrix) -> float:
    return float(np.max(np.abs(a.values))) if a.nnz else 0.0


def _row_reduce(a: CsrMatrix, vals: np.ndarray, op: np.ufunc) -> np.ndarray:
    out = np.zeros(a.num_rows)
    nonempty = a.row_counts() > 0
    if vals.size:
        out[nonempty] = op.reduceat(vals, a.row_offsets[:-1][nonempty])
    return out


def row_col_inf_norms(a: CsrMatrix) -> tuple[np.ndarray, np.ndarray]:
    """Per-row and per-column max-abs values (0 for empty rows/columns)."""
    absval = np.abs(a.values)
    row = _row_reduce(a, absval, np.maximum)
    col = np.zeros(a.num_cols)
    np.maximum.at(col, a.col_indices, absval)
    return row, col


def row_col_alpha_norms(a: CsrMatrix, alpha: float) -> tuple[np.ndarray, np.ndarray]:
    """Row ``(2 - alpha)``-norms and column ``alpha``-norms.

    ``alpha = 2`` makes the row "norm" ``sum |a_ij|^0`` (the entry count), and
    ``alpha = 0`` does the same for columns; the root is still taken so the
    Pock-Chambolle formula ``(sum |a|^p)^(-1/2)`` reads off the p-th power.
    """
    if not 0.0 <= alpha <= 2.0:
        raise ValueError(f"alpha must lie in [0, 2], got {alpha}")
    absval = np.abs(a.values)
    row_pow = _row_reduce(a, absval ** (2.0 - alpha), np.add)
    col_pow = np.bincount(a.col_indices, weights=absval**alpha, minlength=a.num_cols)
    with np.errstate(divide="ignore"):
        row = row_pow ** (1.0 / (2.0 - alpha)) if alpha < 2.0 else row_pow
        col = col_pow ** (1.0 / alpha) if alpha > 0.0 else col_pow
    return row, col


def row_col_power_sums(a: CsrMatrix, alpha: float) -> tuple[np.ndarray, np.ndarray]:
    """``sum_j |a_ij|^(2-alpha)`` per row and ``sum_i |a_ij|^alpha`` per column."""
    absval = np.abs(a.values)
    return (
        _row_reduce(a, absval ** (2.0 - alpha), np.add),
        np.bincount(a.col_indices, weights=absval**alpha, minlength=a.num_cols),
    )


# Dense vector kernels.


def axpy(alpha: float, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    return alpha * x + y


def scal(alpha: float, x: np.ndarray) -> np.ndarray:
    return alpha * x


def dot(x: np.ndarray, y: np.ndarray) -> float:
    return float(np.dot(x, y))


def norm2(x: np.ndarray) -> float:
    return float(np.sqrt(np.dot(x, x)))


def norm_inf(x: np.ndarray) -> float:
    return float(np.max(np.abs(x))) if x.size else 0.0


def clamp(x: np.ndarray, lower: np.ndarray, upper: np.ndarray) -> np.ndarray:
    return np.minimum(np.maximum(x, lower), upper)


def pos_part(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)


def neg_part(x: np.ndarray) -> np.ndarray:
    return np.maximum(-x, 0.0)
