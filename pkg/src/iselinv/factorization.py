"""Exact and incomplete LDL^T factorization of complex-symmetric matrices.

Columns are computed left to right.  Column ``j`` starts from ``A(:, j)``
scattered into a dense workspace and subtracts ``L(:, k) D(k) L(j, k)`` for
every ``k`` in the row structure of ``j``; entries that fall outside the
requested pattern are the dropped entries ``E`` and satisfy
``L~ D~ L~^T = A + E`` exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .sparse import SparseSymmetric, all_pairs_distance, build_from_triplets
from .symbolic import FillPattern, fill_pattern_exact, symbolic_levels

__all__ = [
    "PIVOT_RELATIVE_FLOOR",
    "PivotBreakdown",
    "HypothesisViolated",
    "LdltFactors",
    "DroppedEntries",
    "ldlt_exact",
    "ldlt_incomplete",
    "ldlt_incomplete_tol",
    "gershgorin_norm",
    "aposteriori_inverse_bound",
    "ranges",
]

PIVOT_RELATIVE_FLOOR = 1e-12

# E is stored like any other symmetric matrix: lower triangle, zero diagonal.
DroppedEntries = SparseSymmetric


class PivotBreakdown(ArithmeticError):
    """A pivot ``D(j, j)`` fell below the breakdown floor."""

    def __init__(self, column: int, pivot: complex, floor: float, pole: int | None = None):
        self.column = column
        self.pivot = pivot
        self.floor = floor
        self.pole = pole
        where = f"column {column + 1}"
        if pole is not None:
            where = f"pole {pole + 1}, {where}"
        super().__init__(
            f"pivot breakdown at {where}: |D| = {abs(pivot):.3e} < {floor:.3e}; "
            "a leading submatrix is (nearly) singular"
        )


class HypothesisViolated(ValueError):
    pass


def ranges(starts: np.ndarray, lengths: np.ndarray) -> np.ndarray:
    """Concatenation of ``arange(s, s + l)`` for all pairs, without a Python loop."""
    total = int(lengths.sum())
    if total == 0:
        return np.zeros(0, dtype=np.int64)
    offsets = np.cumsum(lengths) - lengths
    return np.arange(total, dtype=np.int64) + np.repeat(starts - offsets, lengths)


@dataclass(frozen=True, eq=False)
class LdltFactors:
    """Unit lower-triangular ``L`` on ``pattern`` and diagonal ``D``.

    ``lvals`` is aligned with ``pattern.indices``; the unit diagonal of ``L``
    is implicit.  ``flops`` counts the multiply-adds of the column updates.
    """

    pattern: FillPattern
    lvals: np.ndarray
    d: np.ndarray
    incomplete: bool
    flops: int = 0

    @property
    def n(self) -> int:
        return self.pattern.n

    def column(self, j: int) -> tuple[np.ndarray, np.ndarray]:
        s, e = self.pattern.indptr[j], self.pattern.indptr[j + 1]
        return self.pattern.indices[s:e], self.lvals[s:e]

    def l_matrix(self) -> sp.csc_matrix:
        p = self.pattern
        rows = np.concatenate([p.indices, np.arange(self.n)])
        cols = np.concatenate([p.col_of, np.arange(self.n)])
        vals = np.concatenate([self.lvals, np.ones(self.n, dtype=complex)])
        return sp.csc_matrix((vals, (rows, cols)), shape=(self.n, self.n))

    def reconstruct(self) -> np.ndarray:
        """Dense ``L D L^T``."""
        L = self.l_matrix().toarray()
        return (L * self.d) @ L.T

    def solve(self, b: np.ndarray) -> np.ndarray:
        """Solve ``L D L^T x = b`` for one or several right-hand sides."""
        x = np.array(b, dtype=complex, copy=True)
        squeeze = x.ndim == 1
        if squeeze:
            x = x[:, None]
        for j in range(self.n):
            rows, lv = self.column(j)
            if rows.size:
                x[rows] -= np.outer(lv, x[j])
        x /= self.d[:, None]
        for j in range(self.n - 1, -1, -1):
            rows, lv = self.column(j)
            if rows.size:
                x[j] -= lv @ x[rows]
        return x[:, 0] if squeeze else x

    @cached_property
    def max_abs_l(self) -> float:
        return float(np.abs(self.lvals).max()) if self.lvals.size else 0.0


def _factorize(a: SparseSymmetric, pattern: FillPattern, track_dropped: bool,
               tol: float | None = None):
    if pattern.n != a.n:
        raise ValueError(f"pattern of size {pattern.n} does not match matrix of size {a.n}")
    n = a.n
    indptr, indices = pattern.indptr, pattern.indices
    rowptr, tcols, tpos = pattern.row_structure
    lvals = np.zeros(pattern.nnz, dtype=complex)
    d = np.zeros(n, dtype=complex)
    w = np.zeros(n, dtype=complex)
    floor = PIVOT_RELATIVE_FLOOR * a.max_abs()
    keep = np.ones(pattern.nnz, dtype=bool) if tol is not None else None
    e_rows, e_cols, e_vals = [], [], []
    flops = 0

    for j in range(n):
        s, e = indptr[j], indptr[j + 1]
        rows_j = indices[s:e]
        ar, av = a.column(j)
        w[ar] = av
        ks = tcols[rowptr[j] : rowptr[j + 1]]
        rows = None
        if ks.size:
            ps = tpos[rowptr[j] : rowptr[j + 1]]
            ljk = lvals[ps]
            coef = ljk * d[ks]
            w[j] -= ljk @ coef
            starts = ps + 1
            lengths = indptr[ks + 1] - starts
            idx = ranges(starts, lengths)
            if idx.size:
                rows = indices[idx]
                np.subtract.at(w, rows, lvals[idx] * np.repeat(coef, lengths))
            flops += idx.size + ks.size
        dj = w[j]
        if not abs(dj) >= floor:
            raise PivotBreakdown(j, complex(dj), floor)
        d[j] = dj
        col = w[rows_j] / dj
        if track_dropped and rows is not None:
            touched = np.unique(rows)
            out = touched[~np.isin(touched, rows_j, assume_unique=True)]
            if out.size:
                e_rows.append(out)
                e_cols.append(np.full(out.size, j))
                e_vals.append(-w[out])
        if tol is not None:
            small = (np.abs(col) < tol) & (pattern.levels[s:e] > 0)
            if small.any():
                if track_dropped:
                    e_rows.append(rows_j[small])
                    e_cols.append(np.full(int(small.sum()), j))
                    e_vals.append(-w[rows_j[small]])
                col[small] = 0
                keep[s:e] &= ~small
        lvals[s:e] = col
        w[ar] = 0
        w[j] = 0
        if rows is not None:
            w[rows] = 0

    if keep is not None:
        counts = np.bincount(pattern.col_of[keep], minlength=n)
        pattern = FillPattern(n, np.concatenate([[0], np.cumsum(counts)]),
                              indices[keep].copy(), pattern.levels[keep].copy(),
                              cutoff=None, tolerance=tol)
        lvals = lvals[keep]
    dropped = None
    if track_dropped:
        if e_rows:
            dropped = build_from_triplets(n, rows=np.concatenate(e_rows),
                                          cols=np.concatenate(e_cols),
                                          vals=np.concatenate(e_vals))
        else:
            dropped = build_from_triplets(n, [])
    return lvals, d, flops, pattern, dropped


def ldlt_exact(a: SparseSymmetric, pattern: FillPattern | None = None) -> LdltFactors:
    """Exact ``A = L D L^T`` on the full fill pattern (computed if not given).

    Raises PivotBreakdown if a pivot drops below ``1e-12 * max|A|``, i.e. a
    leading principal submatrix is numerically singular.
    """
    if pattern is None:
        pattern = fill_pattern_exact(a)
    elif not pattern.is_exact:
        raise ValueError("ldlt_exact needs the exact fill pattern")
    lvals, d, flops, pattern, _ = _factorize(a, pattern, track_dropped=False)
    return LdltFactors(pattern, lvals, d, incomplete=False, flops=flops)


def ldlt_incomplete(a: SparseSymmetric, pattern: FillPattern | int,
                    track_dropped: bool = True) -> tuple[LdltFactors, SparseSymmetric | None]:
    """Level-of-fill incomplete factorization ``L~ D~ L~^T = A + E``.

    ``pattern`` is either a truncated FillPattern or the cutoff ``c`` itself.
    Returns the factors and, when ``track_dropped``, the dropped entries ``E``.
    """
    if not isinstance(pattern, FillPattern):
        pattern = symbolic_levels(a, int(pattern))
    lvals, d, flops, pattern, dropped = _factorize(a, pattern, track_dropped)
    return LdltFactors(pattern, lvals, d, incomplete=not pattern.is_exact, flops=flops), dropped


def ldlt_incomplete_tol(a: SparseSymmetric, tau: float, track_dropped: bool = True,
                        pattern: FillPattern | None = None):
    """Threshold-dropping incomplete factorization.

    Factor entries with ``|L~(i, j)| < tau`` are dropped after they are
    computed; their contribution ``-L~(i, j) D~(j)`` is recorded in ``E`` so
    that ``L~ D~ L~^T = A + E`` still holds.  Entries of ``nz(A)`` are
    always kept, so ``tau = inf`` gives an ILU(0)-shaped factor.
    """
    if tau < 0:
        raise ValueError(f"drop tolerance must be non-negative, got {tau}")
    if pattern is None:
        pattern = fill_pattern_exact(a)
    lvals, d, flops, pattern, dropped = _factorize(a, pattern, track_dropped, tol=tau)
    return LdltFactors(pattern, lvals, d, incomplete=tau > 0, flops=flops), dropped


def gershgorin_norm(e: SparseSymmetric) -> float:
    """Upper bound for ``||E||_2``: the largest absolute row sum."""
    if e.nnz == 0:
        return 0.0
    return float(np.abs(e.to_scipy()).sum(axis=1).max())


def aposteriori_inverse_bound(e: SparseSymmetric, g: float, a: SparseSymmetric,
                              delta: float, chunk: int = 4096) -> np.ndarray:
    """Rate-level bound on ``|A^{-1} - (A + E)^{-1}|`` over ``nz(A)``.

    For every stored lower entry ``(i, j)`` of ``A`` (order of
    ``a.triplets()``) returns

        sum_{p,q} exp(-g (d(i,p) + d(q,j))) |E(p,q)|
            + ||E||^2 / (delta^2 (delta - ||E||)),

    with ``||E||`` estimated by Gershgorin and the decay prefactor set to 1.
    ``delta`` is the distance from the shift to the spectral set.
    """
    rows, cols, _ = a.triplets()
    if e.nnz == 0:
        return np.zeros(rows.size)
    enorm = gershgorin_norm(e)
    if enorm >= delta:
        raise HypothesisViolated(
            f"Gershgorin estimate ||E|| <= {enorm:.3e} is not below delta = {delta:.3e}"
        )
    tail = enorm**2 / (delta**2 * (delta - enorm))
    full = abs(e.to_scipy()).tocsr()
    support = np.unique(np.concatenate([e.indices, e.col_of]))
    esub = full[support][:, support].toarray()
    dist = all_pairs_distance(a, support)
    u = np.exp(-g * dist)
    wmat = esub @ u
    out = np.empty(rows.size)
    for s in range(0, rows.size, chunk):
        r = rows[s : s + chunk]
        c = cols[s : s + chunk]
        out[s : s + chunk] = np.einsum("sk,sk->k", u[:, r], wmat[:, c])
    return out + tail
