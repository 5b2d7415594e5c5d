"""Selected inversion: entries of ``A^{-1}`` on the pattern of the factors.

Columns are processed right to left.  For column ``j`` with structure
``r`` the update is

    B(r, j) = -B(r, r) L(r, j)
    B(j, j) = 1 / D(j) - B(j, r) L(r, j)

and only entries of ``B`` already on the pattern are read.  On the exact
fill pattern those reads are always available; on an incomplete pattern a
missing ``B(i, k)`` is read as zero and counted.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .factorization import LdltFactors, ranges
from .sparse import SparseSymmetric, build_from_triplets
from .symbolic import FillPattern, symbolic_levels

__all__ = [
    "SelectedInverse",
    "DroppedInverseEntries",
    "ClosednessReport",
    "selinv_exact",
    "selinv_incomplete",
    "closedness_audit",
    "aposteriori_selinv_bound",
]

DroppedInverseEntries = SparseSymmetric


@dataclass(frozen=True, eq=False)
class SelectedInverse:
    """Symmetric ``B`` stored on ``pattern`` (strict lower part) plus its diagonal."""

    pattern: FillPattern
    bvals: np.ndarray
    bdiag: np.ndarray
    exact: bool
    absent_reads: int = 0
    flops: int = 0
    absent_by_column: np.ndarray = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return self.pattern.n

    def get(self, i: int, j: int) -> complex:
        if i == j:
            return complex(self.bdiag[i])
        if i < j:
            i, j = j, i
        p = self.pattern.find([i], [j])[0]
        if p < 0:
            raise KeyError(f"({i}, {j}) is not on the selected pattern")
        return complex(self.bvals[p])

    def values_at(self, rows, cols) -> np.ndarray:
        """Entries at ``(rows, cols)``; NaN where the position is not stored."""
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        lo, hi = np.minimum(rows, cols), np.maximum(rows, cols)
        out = np.full(rows.shape, np.nan, dtype=complex)
        diag = lo == hi
        out[diag] = self.bdiag[lo[diag]]
        pos = self.pattern.find(hi[~diag], lo[~diag])
        vals = np.where(pos >= 0, self.bvals[np.maximum(pos, 0)], np.nan)
        out[~diag] = vals
        return out

    def to_symmetric(self) -> SparseSymmetric:
        n = self.n
        rows = np.concatenate([self.pattern.indices, np.arange(n)])
        cols = np.concatenate([self.pattern.col_of, np.arange(n)])
        vals = np.concatenate([self.bvals, self.bdiag])
        keep = vals != 0
        return build_from_triplets(n, rows=rows[keep], cols=cols[keep], vals=vals[keep])

    def to_dense(self) -> np.ndarray:
        """Dense matrix with unstored entries set to zero."""
        out = np.zeros((self.n, self.n), dtype=complex)
        r, c = self.pattern.indices, self.pattern.col_of
        out[r, c] = self.bvals
        out[c, r] = self.bvals
        out[np.arange(self.n), np.arange(self.n)] = self.bdiag
        return out


@dataclass(frozen=True)
class ClosednessReport:
    exact_pattern: bool
    reads: int
    absent_reads: int
    columns_with_absent: tuple[int, ...]

    @property
    def closed(self) -> bool:
        return self.absent_reads == 0

    def summary(self) -> str:
        kind = "exact" if self.exact_pattern else "incomplete"
        return (f"{kind} pattern: {self.reads} reads, {self.absent_reads} of absent entries "
                f"in {len(self.columns_with_absent)} columns")


def _nz_pattern(pattern: FillPattern) -> SparseSymmetric:
    """Structure of ``A`` recovered from the level-0 entries of a factor pattern."""
    keep = pattern.levels == 0
    n = pattern.n
    rows = np.concatenate([pattern.indices[keep], np.arange(n)])
    cols = np.concatenate([pattern.col_of[keep], np.arange(n)])
    return build_from_triplets(n, rows=rows, cols=cols, vals=np.ones(rows.size))


def _selinv(f: LdltFactors, track_dropped: bool):
    pat = f.pattern
    n = pat.n
    indptr, indices = pat.indptr, pat.indices
    bvals = np.zeros(pat.nnz, dtype=complex)
    bdiag = np.zeros(n, dtype=complex)
    posmap = np.full(n, -1, dtype=np.int64)
    absent = np.zeros(n, dtype=np.int64)
    reads = 0
    flops = 0
    full = None
    f_rows, f_cols, f_vals = [], [], []
    if track_dropped:
        full = symbolic_levels(_nz_pattern(pat), None)

    for j in range(n - 1, -1, -1):
        s, e = indptr[j], indptr[j + 1]
        rt = indices[s:e]
        x = f.lvals[s:e]
        m = rt.size
        if m == 0:
            bdiag[j] = 1.0 / f.d[j]
            continue
        # gather set: r~ alone, or all of r when the dropped entries are wanted
        if full is not None:
            gset = full.column(j)
            sel = np.searchsorted(gset, rt)
        else:
            gset = rt
            sel = np.arange(m)
        g = gset.size
        posmap[gset] = np.arange(g)
        starts = indptr[gset]
        lengths = indptr[gset + 1] - starts
        idx = ranges(starts, lengths)
        rows = indices[idx]
        owner = np.repeat(np.arange(g), lengths)
        pm = posmap[rows]
        hit = pm >= 0
        M = np.zeros((g, g), dtype=complex)
        M[pm[hit], owner[hit]] = bvals[idx[hit]]
        M[owner[hit], pm[hit]] = bvals[idx[hit]]
        M[np.arange(g), np.arange(g)] = bdiag[gset]
        posmap[gset] = -1

        # reads inside r~ x r~ below the diagonal
        in_rt = np.zeros(g, dtype=bool)
        in_rt[sel] = True
        found = int(np.count_nonzero(in_rt[pm[hit]] & in_rt[owner[hit]]))
        needed = m * (m - 1) // 2
        reads += needed + m
        absent[j] = needed - found

        y = M[:, sel] @ x
        flops += m * m
        bvals[s:e] = -y[sel]
        bdiag[j] = 1.0 / f.d[j] + y[sel] @ x
        if full is not None and g > m:
            out = np.ones(g, dtype=bool)
            out[sel] = False
            fcol = np.zeros(n, dtype=complex)
            fcol[gset[out]] = y[out]
            # F(j, j) = F(j, r~) L(r~, j); F(j, r~) was never written, so this is 0
            fjj = fcol[rt] @ x
            nzf = out & (y != 0)
            f_rows.append(gset[nzf])
            f_cols.append(np.full(int(nzf.sum()), j))
            f_vals.append(y[nzf])
            if fjj != 0:
                f_rows.append(np.array([j]))
                f_cols.append(np.array([j]))
                f_vals.append(np.array([fjj]))

    dropped = None
    if track_dropped:
        if f_rows:
            dropped = build_from_triplets(n, rows=np.concatenate(f_rows),
                                          cols=np.concatenate(f_cols),
                                          vals=np.concatenate(f_vals))
        else:
            dropped = build_from_triplets(n, [])
    inv = SelectedInverse(pat, bvals, bdiag, exact=not f.incomplete,
                          absent_reads=int(absent.sum()), flops=flops,
                          absent_by_column=absent)
    return inv, dropped, reads


def selinv_exact(f: LdltFactors) -> SelectedInverse:
    """Entries of ``A^{-1}`` on the exact fill pattern of ``f``."""
    if f.incomplete or not f.pattern.is_exact:
        raise ValueError("selinv_exact needs factors on the exact fill pattern")
    inv, _, _ = _selinv(f, track_dropped=False)
    return inv


def selinv_incomplete(f: LdltFactors, track_dropped: bool = False):
    """Incomplete selected inversion on the pattern of ``f``.

    Returns ``(B, F)``.  ``F`` collects ``B(r \\ r~, r~) L~(r~, j)`` for the
    rows ``r`` of the exact fill column outside the kept rows ``r~``; it is
    ``None`` unless ``track_dropped``.  Tracking recomputes the exact fill
    structure from the level-0 entries of the pattern.
    """
    inv, dropped, _ = _selinv(f, track_dropped)
    return inv, dropped


def closedness_audit(f: LdltFactors) -> ClosednessReport:
    """Count reads of ``B`` entries that are not on the pattern of ``f``."""
    inv, _, reads = _selinv(f, track_dropped=False)
    cols = tuple(int(j) for j in np.flatnonzero(inv.absent_by_column))
    return ClosednessReport(f.pattern.is_exact, reads, inv.absent_reads, cols)


def _level_weights(levels: FillPattern, g: float) -> sp.csr_matrix:
    n = levels.n
    w = np.exp(-g * levels.levels.astype(float))
    low = sp.csr_matrix((w, (levels.indices, levels.col_of)), shape=(n, n))
    return low


def aposteriori_selinv_bound(F: SparseSymmetric, levels: FillPattern, g: float,
                             on: FillPattern | None = None):
    """Rate-level bound on ``|A~^{-1} - B|`` from the dropped entries ``F``.

    With ``W(p, q) = exp(-g level(p, q))`` (diagonal 1, zero where the level
    is unknown) the bound at ``(i, j)`` is

        sum_{q > j} |F(i, q)| W(q, j)  +  sum_{p, q > j} W(i, p) |F(p, q)| W(q, j).

    ``levels`` must contain every off-diagonal position of ``F``.  Returns a
    dense ``(n, n)`` array, or, with ``on``, a pair ``(lower, diag)`` aligned
    with ``on.indices`` and the diagonal.
    """
    n = levels.n
    if F.n != n:
        raise ValueError(f"F has size {F.n} but the level pattern has size {n}")
    off = F.indices != F.col_of
    if off.any():
        pos = levels.find(F.indices[off], F.col_of[off])
        if (pos < 0).any():
            k = int(np.flatnonzero(pos < 0)[0])
            i, j = F.indices[off][k], F.col_of[off][k]
            raise ValueError(
                f"entry ({i + 1}, {j + 1}) of F is not covered by the level pattern; "
                "recompute levels with a larger cutoff"
            )
    low = _level_weights(levels, g)
    strict = low.tocsc()
    wfull = (low + low.T + sp.identity(n, format="csr")).tocsr()
    absf = abs(F.to_scipy()).tocsr()
    x = (absf @ strict).toarray()
    bound = x + (wfull @ sp.csr_matrix(np.tril(x, -1))).toarray()
    if on is None:
        return bound
    return bound[on.indices, on.col_of], np.diag(bound).copy()
