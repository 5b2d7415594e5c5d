"""Level-of-fill and (incomplete) fill patterns of the LDL^T factor.

The level of an entry ``(i, j)`` is the length of the shortest fill path
between ``i`` and ``j`` minus one, clamped at zero; a fill path only passes
through vertices numbered below both endpoints.  Levels are produced by the
ILU(k) recurrence ``lev(i,j) = min_k lev(i,k) + lev(j,k) + 1`` over
eliminated ``k < j``, evaluated column by column.
"""

from __future__ import annotations

import csv
import math
from collections import deque
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .sparse import SparseSymmetric

__all__ = [
    "LEVEL_MAX",
    "FillPattern",
    "symbolic_levels",
    "fill_pattern_exact",
    "fill_path_oracle",
    "fill_path_levels",
]

LEVEL_MAX = np.iinfo(np.int16).max


@dataclass(frozen=True, eq=False)
class FillPattern:
    """Strictly-lower sparsity pattern of ``L`` with per-entry levels.

    The diagonal is implicit (level 0).  ``cutoff`` is the level bound used
    to build the pattern, or ``None`` for the exact fill pattern.  Patterns
    produced by threshold dropping carry their ``tolerance`` instead.
    """

    n: int
    indptr: np.ndarray
    indices: np.ndarray
    levels: np.ndarray
    cutoff: int | None = None
    tolerance: float | None = None

    def __post_init__(self):
        for name in ("indptr", "indices", "levels"):
            getattr(self, name).setflags(write=False)

    @property
    def nnz(self) -> int:
        return int(self.indptr[-1])

    @property
    def is_exact(self) -> bool:
        return self.cutoff is None and self.tolerance is None

    def column(self, j: int) -> np.ndarray:
        return self.indices[self.indptr[j] : self.indptr[j + 1]]

    def column_levels(self, j: int) -> np.ndarray:
        return self.levels[self.indptr[j] : self.indptr[j + 1]]

    @cached_property
    def col_of(self) -> np.ndarray:
        return np.repeat(np.arange(self.n), np.diff(self.indptr))

    @cached_property
    def keys(self) -> np.ndarray:
        """Sorted int64 keys ``col * n + row`` of the stored entries."""
        return self.col_of.astype(np.int64) * self.n + self.indices

    def find(self, rows, cols) -> np.ndarray:
        """Flat positions of strictly-lower entries ``(rows, cols)``; -1 if absent."""
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        q = cols * self.n + rows
        pos = np.searchsorted(self.keys, q)
        pos = np.minimum(pos, max(self.nnz - 1, 0))
        hit = self.nnz > 0
        found = (self.keys[pos] == q) if hit else np.zeros(q.shape, dtype=bool)
        return np.where(found, pos, -1)

    @cached_property
    def row_structure(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Transposed structure ``(rowptr, cols, pos)``.

        ``cols[rowptr[i]:rowptr[i+1]]`` are the columns ``k < i`` with
        ``(i, k)`` in the pattern, ascending, and ``pos`` their flat positions.
        """
        order = np.lexsort((self.col_of, self.indices))
        counts = np.bincount(self.indices, minlength=self.n)
        rowptr = np.concatenate([[0], np.cumsum(counts)])
        return rowptr, self.col_of[order], order

    def level_of(self, i: int, j: int) -> float:
        """Level of ``(i, j)``; ``inf`` when the entry is outside the pattern."""
        if i == j:
            return 0
        if i < j:
            i, j = j, i
        p = self.find([i], [j])[0]
        return float(self.levels[p]) if p >= 0 else math.inf

    def entries(self) -> set[tuple[int, int]]:
        return set(zip(self.indices.tolist(), self.col_of.tolist()))

    def level_dict(self) -> dict[tuple[int, int], int]:
        return dict(zip(zip(self.indices.tolist(), self.col_of.tolist()), self.levels.tolist()))

    def max_level(self) -> int:
        return int(self.levels.max()) if self.nnz else 0

    def restrict(self, cutoff: int) -> "FillPattern":
        """Sub-pattern of entries with level <= cutoff.

        Exact levels are shortest fill-path lengths, so filtering them gives
        the same pattern as running the truncated recurrence directly.
        """
        if self.tolerance is not None:
            raise ValueError("a threshold-dropped pattern has no complete level information")
        if self.cutoff is not None and cutoff > self.cutoff:
            raise ValueError(f"cannot widen a cutoff-{self.cutoff} pattern to {cutoff}")
        keep = self.levels <= cutoff
        counts = np.bincount(self.col_of[keep], minlength=self.n)
        indptr = np.concatenate([[0], np.cumsum(counts)])
        return FillPattern(self.n, indptr, self.indices[keep].copy(),
                           self.levels[keep].copy(), cutoff)

    def factorization_flops(self) -> int:
        """Multiply-adds of the left-looking factorization on this pattern.

        Entry ``(j, k)`` of a column with ``len`` entries updates the
        ``len - p - 1`` entries below it plus the pivot, which sums to
        ``len (len + 1) / 2`` per column.
        """
        ln = np.diff(self.indptr).astype(np.int64)
        return int((ln * (ln + 1) // 2).sum())

    def selinv_flops(self) -> int:
        """Multiply-adds of selected inversion: one dense ``len x len`` product per column."""
        ln = np.diff(self.indptr).astype(np.int64)
        return int((ln * ln).sum())

    def to_csv(self, path) -> None:
        """Rows ``i, j, level`` (1-based, lower triangle, diagonal omitted)."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["i", "j", "level"])
            for i, j, lev in zip(self.indices.tolist(), self.col_of.tolist(), self.levels.tolist()):
                w.writerow([i + 1, j + 1, lev])


def symbolic_levels(a: SparseSymmetric, cutoff: int | None = None) -> FillPattern:
    """Level-of-fill pattern ``{(i, j) : level(i, j) <= cutoff}``.

    ``cutoff=None`` gives the exact fill pattern with all levels.
    """
    if cutoff is not None and cutoff < 0:
        raise ValueError(f"cutoff must be non-negative, got {cutoff}")
    n = a.n
    bound = LEVEL_MAX if cutoff is None else min(cutoff, LEVEL_MAX)
    col_rows: list[np.ndarray] = []
    col_levs: list[np.ndarray] = []
    # row_k[i], row_p[i]: finished columns k containing row i, and i's slot in column k
    row_k: list[list[int]] = [[] for _ in range(n)]
    row_p: list[list[int]] = [[] for _ in range(n)]
    unset = np.iinfo(np.int64).max
    work = np.full(n, unset, dtype=np.int64)

    for j in range(n):
        rows_a, _ = a.column(j)
        rows_a = rows_a[rows_a > j]
        seg_rows = [rows_a]
        seg_levs = [np.zeros(rows_a.size, dtype=np.int64)]
        for k, p in zip(row_k[j], row_p[j]):
            r = col_rows[k]
            lv = col_levs[k]
            seg_rows.append(r[p + 1 :])
            seg_levs.append(lv[p + 1 :] + (int(lv[p]) + 1))
        rows = np.concatenate(seg_rows)
        if rows.size:
            np.minimum.at(work, rows, np.concatenate(seg_levs))
            tail = work[j + 1 :]
            hit = np.flatnonzero(tail <= bound)
            levs = tail[hit]
            work[rows] = unset
            rows = hit + (j + 1)
        else:
            levs = np.zeros(0, dtype=np.int64)
        col_rows.append(rows)
        col_levs.append(levs)
        for q, i in enumerate(rows.tolist()):
            row_k[i].append(j)
            row_p[i].append(q)

    counts = np.fromiter((r.size for r in col_rows), dtype=np.int64, count=n)
    indptr = np.concatenate([[0], np.cumsum(counts)])
    indices = np.concatenate(col_rows) if n else np.zeros(0, dtype=np.int64)
    levels = np.concatenate(col_levs) if n else np.zeros(0, dtype=np.int64)
    return FillPattern(n, indptr, indices.astype(np.int64),
                       np.minimum(levels, LEVEL_MAX).astype(np.int16), cutoff)


def fill_pattern_exact(a: SparseSymmetric) -> FillPattern:
    """Structural nonzeros of the exact factor ``L`` (barring cancellation)."""
    return symbolic_levels(a, None)


def fill_path_oracle(a: SparseSymmetric, i: int, j: int) -> float:
    """Level of ``(i, j)`` by breadth-first search over admissible paths.

    Intermediate vertices must be numbered below ``min(i, j)``.  Returns
    ``inf`` if no fill path exists.
    """
    if i == j:
        return 0
    lo = min(i, j)
    adj = a.adjacency
    dist = {i: 0}
    queue = deque([i])
    while queue:
        v = queue.popleft()
        for u in adj.indices[adj.indptr[v] : adj.indptr[v + 1]].tolist():
            if u == j:
                # the path has dist[v] + 1 edges
                return dist[v]
            if u < lo and u not in dist:
                dist[u] = dist[v] + 1
                queue.append(u)
    return math.inf


def fill_path_levels(a: SparseSymmetric) -> dict[tuple[int, int], int]:
    """All finite levels ``{(i, j): level}`` with ``i > j``, by brute force."""
    out = {}
    for i in range(a.n):
        for j in range(i):
            lev = fill_path_oracle(a, i, j)
            if lev != math.inf:
                out[(i, j)] = int(lev)
    return out
