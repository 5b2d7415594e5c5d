"""Complex-symmetric sparse matrices, the toy Hamiltonian and dense oracles.

Only the lower triangle (diagonal included) is stored, column by column, in
flat compressed-sparse-column arrays.  Indices are 0-based throughout the
library; the CLI and Matrix Market files are 1-based.
"""

from __future__ import annotations

import warnings

from collections import deque
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
import scipy.io
import scipy.linalg
import scipy.sparse as sp

__all__ = [
    "ORACLE_CAP",
    "OracleCapExceeded",
    "SingularMatrixError",
    "SparseSymmetric",
    "MeshSpec",
    "build_from_triplets",
    "from_dense",
    "toy_hamiltonian",
    "shift",
    "graph_distance",
    "distances_from",
    "all_pairs_distance",
    "dense_eigendecomposition",
    "dense_inverse",
    "random_complex_symmetric",
    "read_matrix_market",
    "write_matrix_market",
]

ORACLE_CAP = 2048


class OracleCapExceeded(ValueError):
    """Raised when a dense oracle is asked to handle a matrix above ORACLE_CAP."""


class SingularMatrixError(ValueError):
    pass


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class SparseSymmetric:
    """Sparse complex-symmetric matrix, lower triangle stored by columns.

    ``indptr[j]:indptr[j+1]`` addresses the rows ``i >= j`` of column ``j`` in
    ``indices`` (strictly increasing) and their values in ``data``.
    """

    n: int
    indptr: np.ndarray
    indices: np.ndarray
    data: np.ndarray

    def __post_init__(self):
        for name in ("indptr", "indices", "data"):
            _frozen(getattr(self, name))

    @property
    def nnz(self) -> int:
        """Number of stored (lower-triangle) entries."""
        return int(self.indptr[-1])

    def column(self, j: int) -> tuple[np.ndarray, np.ndarray]:
        s, e = self.indptr[j], self.indptr[j + 1]
        return self.indices[s:e], self.data[s:e]

    def lookup(self, i: int, j: int) -> complex:
        if not (0 <= i < self.n and 0 <= j < self.n):
            raise IndexError(f"entry ({i + 1}, {j + 1}) outside a {self.n}x{self.n} matrix")
        if i < j:
            i, j = j, i
        rows, vals = self.column(j)
        p = np.searchsorted(rows, i)
        if p < rows.size and rows[p] == i:
            return complex(vals[p])
        return 0j

    @cached_property
    def col_of(self) -> np.ndarray:
        """Column index of every stored entry (aligned with ``indices``)."""
        return np.repeat(np.arange(self.n), np.diff(self.indptr))

    def diagonal(self) -> np.ndarray:
        d = np.zeros(self.n, dtype=complex)
        on_diag = self.indices == self.col_of
        d[self.col_of[on_diag]] = self.data[on_diag]
        return d

    def triplets(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Lower-triangle ``(rows, cols, values)``."""
        return self.indices, self.col_of, self.data

    def to_scipy(self) -> sp.csc_matrix:
        """Full (both triangles) scipy matrix."""
        r, c, v = self.triplets()
        off = r != c
        rows = np.concatenate([r, c[off]])
        cols = np.concatenate([c, r[off]])
        vals = np.concatenate([v, v[off]])
        return sp.csc_matrix((vals, (rows, cols)), shape=(self.n, self.n))

    def to_dense(self) -> np.ndarray:
        return self.to_scipy().toarray()

    def matvec(self, x: np.ndarray) -> np.ndarray:
        return self.to_scipy() @ x

    def max_abs(self) -> float:
        return float(np.abs(self.data).max()) if self.nnz else 0.0

    @cached_property
    def adjacency(self) -> sp.csr_matrix:
        """Boolean adjacency of G(A) without self loops, both directions."""
        r, c, _ = self.triplets()
        off = r != c
        rows = np.concatenate([r[off], c[off]])
        cols = np.concatenate([c[off], r[off]])
        adj = sp.csr_matrix(
            (np.ones(rows.size, dtype=bool), (rows, cols)), shape=(self.n, self.n)
        )
        adj.sum_duplicates()
        return adj

    def neighbors(self, v: int) -> np.ndarray:
        adj = self.adjacency
        return adj.indices[adj.indptr[v] : adj.indptr[v + 1]]

    def nonzero_mask(self) -> tuple[np.ndarray, np.ndarray]:
        """``(rows, cols)`` of the lower-triangle entries, i.e. nz(A) with i >= j."""
        return self.indices.copy(), self.col_of.copy()


def build_from_triplets(
    n: int, entries: Iterable[tuple[int, int, complex]] | None = None, *,
    rows: Sequence[int] | np.ndarray | None = None,
    cols: Sequence[int] | np.ndarray | None = None,
    vals: Sequence[complex] | np.ndarray | None = None,
) -> SparseSymmetric:
    """Assemble a symmetric matrix from 0-based triplets.

    Triplets may address either triangle; upper-triangle ones are mirrored.
    Repeated positions are summed.  If the same off-diagonal pair is given
    in both orientations with different totals the input is not symmetric
    and a ValueError is raised.  Explicit zeros are removed.
    """
    if entries is not None:
        entries = list(entries)
        rows = [e[0] for e in entries]
        cols = [e[1] for e in entries]
        vals = [e[2] for e in entries]
    r = np.asarray(rows if rows is not None else [], dtype=np.int64)
    c = np.asarray(cols if cols is not None else [], dtype=np.int64)
    v = np.asarray(vals if vals is not None else [], dtype=complex)
    if not (r.shape == c.shape == v.shape):
        raise ValueError("rows, cols and values must have the same length")
    bad = (r < 0) | (r >= n) | (c < 0) | (c >= n)
    if bad.any():
        k = int(np.flatnonzero(bad)[0])
        raise IndexError(f"entry ({r[k] + 1}, {c[k] + 1}) outside a {n}x{n} matrix")

    lower = r >= c
    if (~lower).any():
        lo = _summed(n, r[lower], c[lower], v[lower])
        up = _summed(n, c[~lower], r[~lower], v[~lower])
        both = _pattern(lo).multiply(_pattern(up))
        if both.nnz:
            if abs(lo.multiply(both) - up.multiply(both)).max() > 0:
                raise ValueError("conflicting values for A(i,j) and A(j,i)")
            # both orientations describe the same entry: count it once
            up = up - up.multiply(both)
        m = (lo + up).tocoo()
        r, c, v = m.row, m.col, m.data
    lo_r = np.maximum(r, c)
    lo_c = np.minimum(r, c)
    m = sp.coo_matrix((v, (lo_r, lo_c)), shape=(n, n)).tocsc()
    m.sum_duplicates()
    m.eliminate_zeros()
    m.sort_indices()
    return SparseSymmetric(
        n=n,
        indptr=m.indptr.astype(np.int64),
        indices=m.indices.astype(np.int64),
        data=m.data.astype(complex),
    )


def _summed(n, r, c, v) -> sp.csr_matrix:
    m = sp.coo_matrix((v, (r, c)), shape=(n, n)).tocsr()
    m.sum_duplicates()
    return m


def _pattern(m: sp.csr_matrix) -> sp.csr_matrix:
    p = m.copy()
    p.data = np.ones_like(p.data)
    return p


def from_dense(a: np.ndarray, tol: float = 0.0) -> SparseSymmetric:
    """Lower triangle of a dense symmetric array; entries with ``|a| <= tol`` dropped."""
    a = np.asarray(a)
    r, c = np.nonzero(np.tril(np.abs(a) > tol))
    return build_from_triplets(a.shape[0], rows=r, cols=c, vals=a[r, c])


@dataclass(frozen=True)
class MeshSpec:
    """Periodic (or open) Cartesian mesh with ``m`` vertices per axis.

    Vertices are numbered lexicographically with the last coordinate
    varying fastest.
    """

    dim: int
    m: int
    periodic: bool = True

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise ValueError(f"dim must be 1, 2 or 3, got {self.dim}")
        if self.m < 2:
            raise ValueError(f"mesh side must be at least 2, got {self.m}")

    @property
    def n(self) -> int:
        return self.m**self.dim

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.m,) * self.dim

    def coordinates(self) -> np.ndarray:
        """``(n, dim)`` array of vertex coordinates in numbering order."""
        return np.stack(np.unravel_index(np.arange(self.n), self.shape), axis=1)

    def edges(self) -> np.ndarray:
        """Unique undirected nearest-neighbour edges as an ``(E, 2)`` array, lower index first."""
        idx = np.arange(self.n).reshape(self.shape)
        pairs = []
        for axis in range(self.dim):
            if self.periodic:
                nb = np.roll(idx, -1, axis=axis)
                pairs.append(np.stack([idx.ravel(), nb.ravel()], axis=1))
            else:
                sl_a = [slice(None)] * self.dim
                sl_b = [slice(None)] * self.dim
                sl_a[axis] = slice(0, -1)
                sl_b[axis] = slice(1, None)
                pairs.append(np.stack([idx[tuple(sl_a)].ravel(), idx[tuple(sl_b)].ravel()], axis=1))
        e = np.concatenate(pairs)
        e = e[e[:, 0] != e[:, 1]]
        e = np.sort(e, axis=1)
        return np.unique(e, axis=0)

    def graph(self) -> SparseSymmetric:
        """Mesh adjacency with unit off-diagonal entries and a zero diagonal."""
        e = self.edges()
        return build_from_triplets(self.n, rows=e[:, 1], cols=e[:, 0], vals=np.ones(len(e)))


def toy_hamiltonian(spec: MeshSpec) -> SparseSymmetric:
    """Chequerboard tight-binding Hamiltonian on a periodic mesh.

    Diagonal entries alternate ``(-1)**(x_1 + ... + x_d)`` and each
    nearest-neighbour pair is coupled by ``-1/(2 d)``.  On an ``m = 2`` torus
    the two wrap-around links of a vertex land on the same neighbour; the
    entry is stored once and not doubled.
    """
    if spec.m % 2:
        raise ValueError(
            f"toy Hamiltonian needs an even mesh side (got m={spec.m}): the "
            "chequerboard diagonal would clash across the periodic seam"
        )
    coords = spec.coordinates()
    diag = np.where(coords.sum(axis=1) % 2 == 0, 1.0, -1.0)
    e = spec.edges()
    n = spec.n
    rows = np.concatenate([np.arange(n), e[:, 1]])
    cols = np.concatenate([np.arange(n), e[:, 0]])
    vals = np.concatenate([diag, np.full(len(e), -1.0 / (2 * spec.dim))])
    return build_from_triplets(n, rows=rows, cols=cols, vals=vals)


def shift(a: SparseSymmetric, z: complex) -> SparseSymmetric:
    """Return ``A - z I``."""
    r, c, v = a.triplets()
    n = a.n
    if z == 0:
        return a
    rows = np.concatenate([r, np.arange(n)])
    cols = np.concatenate([c, np.arange(n)])
    vals = np.concatenate([v, np.full(n, -complex(z))])
    return build_from_triplets(n, rows=rows, cols=cols, vals=vals)


def distances_from(a: SparseSymmetric, source: int) -> np.ndarray:
    """Graph distance from ``source`` to every vertex; ``inf`` when unreachable."""
    adj = a.adjacency
    dist = np.full(a.n, np.inf)
    dist[source] = 0
    queue = deque([source])
    while queue:
        v = queue.popleft()
        nb = adj.indices[adj.indptr[v] : adj.indptr[v + 1]]
        fresh = nb[np.isinf(dist[nb])]
        dist[fresh] = dist[v] + 1
        queue.extend(fresh.tolist())
    return dist


def graph_distance(a: SparseSymmetric, i: int, j: int) -> float:
    """Number of edges on a shortest path between ``i`` and ``j`` in G(A)."""
    if i == j:
        return 0
    return distances_from(a, i)[j]


def all_pairs_distance(a: SparseSymmetric, sources: np.ndarray | None = None) -> np.ndarray:
    """Unweighted shortest-path lengths, rows indexed by ``sources`` (default: all)."""
    from scipy.sparse.csgraph import shortest_path

    return shortest_path(a.adjacency, unweighted=True, directed=False, indices=sources)


def _check_cap(n: int) -> None:
    if n > ORACLE_CAP:
        raise OracleCapExceeded(f"dense oracle limited to n <= {ORACLE_CAP}, got n={n}")


def dense_eigendecomposition(a: np.ndarray | SparseSymmetric, symmetric_real: bool = True):
    """Eigenvalues (ascending) and eigenvectors of a dense matrix.

    The real-symmetric path uses the symmetric eigensolver on the real part;
    otherwise the general solver is used and eigenpairs are sorted by the
    real part of the eigenvalue.
    """
    if isinstance(a, SparseSymmetric):
        a = a.to_dense()
    a = np.asarray(a)
    _check_cap(a.shape[0])
    if symmetric_real:
        if np.iscomplexobj(a):
            if np.abs(a.imag).max(initial=0.0) > 0:
                raise ValueError("matrix is not real; use symmetric_real=False")
            a = a.real
        return np.linalg.eigh(a)
    w, v = np.linalg.eig(a)
    order = np.argsort(w.real, kind="stable")
    return w[order], v[:, order]


def dense_inverse(a: np.ndarray | SparseSymmetric) -> np.ndarray:
    """Brute-force inverse through a pivoted LU factorization."""
    if isinstance(a, SparseSymmetric):
        a = a.to_dense()
    a = np.asarray(a, dtype=complex)
    _check_cap(a.shape[0])
    if not np.any(a.imag):
        # real arithmetic is several times cheaper and gives the same answer
        a = a.real
    with warnings.catch_warnings():
        # singularity is reported below with our own error
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(a, check_finite=False)
    u = np.abs(np.diag(lu))
    scale = max(np.abs(a).max(), np.finfo(float).tiny)
    if u.min() <= a.shape[0] * np.finfo(float).eps * scale:
        raise SingularMatrixError("matrix is singular to working precision")
    getri, getri_lwork = scipy.linalg.get_lapack_funcs(("getri", "getri_lwork"), (lu,))
    lwork, _ = getri_lwork(a.shape[0])
    inv, info = getri(lu, piv, lwork=int(lwork.real))
    if info != 0:
        raise SingularMatrixError(f"inversion failed (LAPACK info={info})")
    return inv.astype(complex)


def random_complex_symmetric(n: int, density: float, rng: np.random.Generator,
                             diag_shift: float = 4.0) -> SparseSymmetric:
    """Random well-conditioned complex-symmetric test matrix.

    Off-diagonal entries are uniform on the unit square in C; the diagonal
    is made dominant by adding ``diag_shift`` times the largest row sum,
    which keeps every leading submatrix comfortably invertible.
    """
    mask = np.tril(rng.random((n, n)) < density, -1)
    r, c = np.nonzero(mask)
    v = rng.uniform(-1, 1, r.size) + 1j * rng.uniform(-1, 1, r.size)
    rowsum = np.zeros(n)
    np.add.at(rowsum, r, np.abs(v))
    np.add.at(rowsum, c, np.abs(v))
    d = (diag_shift * max(rowsum.max(), 1.0)) * (1 + 0.5 * rng.random(n)) * np.exp(
        1j * rng.uniform(-0.3, 0.3, n)
    )
    return build_from_triplets(
        n,
        rows=np.concatenate([r, np.arange(n)]),
        cols=np.concatenate([c, np.arange(n)]),
        vals=np.concatenate([v, d]),
    )


def write_matrix_market(path, a: SparseSymmetric, comment: str = "") -> None:
    """Coordinate format, symmetric, lower triangle, 1-based."""
    r, c, v = a.triplets()
    real = not np.iscomplexobj(v) or np.abs(v.imag).max(initial=0.0) == 0
    vals = v.real if real else v
    m = sp.coo_matrix((vals, (r, c)), shape=(a.n, a.n))
    scipy.io.mmwrite(path, m, comment=comment, field="real" if real else "complex",
                     symmetry="symmetric")


def read_matrix_market(path) -> SparseSymmetric:
    m = scipy.io.mmread(path)
    if not sp.issparse(m):
        m = sp.coo_matrix(m)
    m = m.tocoo()
    if m.shape[0] != m.shape[1]:
        raise ValueError(f"matrix must be square, got {m.shape}")
    # mmread expands symmetric files; keep the lower triangle only
    keep = m.row >= m.col
    return build_from_triplets(m.shape[0], rows=m.row[keep], cols=m.col[keep],
                               vals=m.data[keep])
