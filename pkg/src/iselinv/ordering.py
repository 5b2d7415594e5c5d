"""Fill-reducing vertex orders: nested dissection and matrix permutation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse.csgraph import connected_components, shortest_path

from .sparse import MeshSpec, SparseSymmetric, build_from_triplets

__all__ = [
    "Permutation",
    "natural_order",
    "nested_dissection_cartesian",
    "nested_dissection_general",
    "permute",
    "read_permutation",
    "write_permutation",
]

# Cartesian blocks no wider than this along every axis are numbered lexicographically.
CARTESIAN_BASE_SIDE = 3
# General-graph components at or below this size are not split further.
GENERAL_BASE_SIZE = 3


@dataclass(frozen=True, eq=False)
class Permutation:
    """Bijection on ``range(n)``; ``forward[old] == new`` and ``inverse[new] == old``."""

    forward: np.ndarray
    inverse: np.ndarray

    def __post_init__(self):
        n = self.forward.size
        if self.inverse.size != n or not np.array_equal(self.inverse[self.forward], np.arange(n)):
            raise ValueError("forward and inverse maps are not mutually inverse bijections")
        self.forward.setflags(write=False)
        self.inverse.setflags(write=False)

    @classmethod
    def from_order(cls, order) -> "Permutation":
        """Build from the list of old indices in their new order."""
        inverse = np.asarray(order, dtype=np.int64)
        n = inverse.size
        if not np.array_equal(np.sort(inverse), np.arange(n)):
            raise ValueError("order is not a permutation of range(n)")
        forward = np.empty(n, dtype=np.int64)
        forward[inverse] = np.arange(n)
        return cls(forward, inverse)

    @classmethod
    def identity(cls, n: int) -> "Permutation":
        return cls.from_order(np.arange(n))

    @property
    def n(self) -> int:
        return self.forward.size

    def __len__(self) -> int:
        return self.n

    def inverted(self) -> "Permutation":
        return Permutation(self.inverse.copy(), self.forward.copy())


def natural_order(n: int) -> Permutation:
    return Permutation.identity(n)


def _box_vertices(spec: MeshSpec, box) -> np.ndarray:
    axes = [(np.arange(size) + start) % spec.m for start, size in box]
    grids = np.meshgrid(*axes, indexing="ij")
    return np.sort(np.ravel_multi_index([g.ravel() for g in grids], spec.shape))


def _dissect_box(spec: MeshSpec, box, periodic, out: list) -> None:
    sizes = [size for _, size in box]
    if max(sizes) <= CARTESIAN_BASE_SIDE:
        out.append(_box_vertices(spec, box))
        return
    # longest axis, ties broken towards the fastest-varying coordinate
    axis = max(range(len(sizes)), key=lambda a: (sizes[a], a))
    start, size = box[axis]
    half = size // 2
    if periodic[axis]:
        # a ring must be cut twice: at the seam and in the middle
        seps = [(start, 1), (start + half, 1)]
        parts = [(start + 1, half - 1), (start + half + 1, size - half - 1)]
    else:
        seps = [(start + half, 1)]
        parts = [(start, half), (start + half + 1, size - half - 1)]
    periodic = list(periodic)
    periodic[axis] = False
    for p_start, p_size in parts:
        if p_size > 0:
            sub = list(box)
            sub[axis] = (p_start, p_size)
            _dissect_box(spec, sub, periodic, out)
    sep = []
    for s_start, s_size in seps:
        sub = list(box)
        sub[axis] = (s_start, s_size)
        sep.append(_box_vertices(spec, sub))
    out.append(np.sort(np.concatenate(sep)))


def nested_dissection_cartesian(spec: MeshSpec) -> Permutation:
    """Nested dissection of a 2D/3D Cartesian mesh with plane separators.

    Each step cuts the longest remaining axis with a one-vertex-thick plane
    at offset ``size // 2`` (the first half gets the extra vertex on even
    sides).  A periodic axis is cut at its seam and in the middle on first
    contact, after which it is treated as open.  Separators are numbered
    after both halves, lexicographically within themselves.
    """
    if spec.dim == 1:
        raise ValueError("nested dissection is not used in one dimension; use the natural order")
    box = [(0, spec.m)] * spec.dim
    out: list[np.ndarray] = []
    _dissect_box(spec, box, [spec.periodic] * spec.dim, out)
    return Permutation.from_order(np.concatenate(out))


def _bfs_levels(adj, source: int) -> np.ndarray:
    return shortest_path(adj, unweighted=True, directed=False, indices=source)


def _pseudo_peripheral(adj) -> tuple[int, np.ndarray]:
    v = 0
    dist = _bfs_levels(adj, v)
    ecc = dist.max()
    while True:
        far = np.flatnonzero(dist == ecc)
        deg = np.diff(adj.indptr)[far]
        u = int(far[np.argmin(deg)])
        du = _bfs_levels(adj, u)
        if du.max() <= ecc:
            return v, dist
        v, dist, ecc = u, du, du.max()


def _dissect_graph(adj, vertices: np.ndarray, out: list) -> None:
    ncomp, labels = connected_components(adj, directed=False)
    for comp in range(ncomp):
        members = np.flatnonzero(labels == comp)
        glob = vertices[members]
        if members.size <= GENERAL_BASE_SIZE:
            out.append(np.sort(glob))
            continue
        sub = adj[members][:, members]
        _, dist = _pseudo_peripheral(sub)
        depth = int(dist.max())
        counts = np.bincount(dist.astype(np.int64), minlength=depth + 1)
        # median level: first level whose cumulative count reaches half
        t = int(np.searchsorted(np.cumsum(counts), members.size / 2.0))
        t = min(t, depth)
        sep = dist == t
        left = dist < t
        right = dist > t
        for part in (left, right):
            idx = np.flatnonzero(part)
            if idx.size:
                _dissect_graph(sub[idx][:, idx], glob[idx], out)
        out.append(np.sort(glob[sep]))


def nested_dissection_general(a: SparseSymmetric) -> Permutation:
    """Nested dissection of G(A) with BFS level-set separators.

    Connected components are ordered one after another.  Inside a component
    the separator is the median BFS level seen from a pseudo-peripheral
    vertex, so both sides contain at most half of the vertices.
    """
    out: list[np.ndarray] = []
    _dissect_graph(a.adjacency.tocsr(), np.arange(a.n), out)
    order = np.concatenate(out) if out else np.zeros(0, dtype=np.int64)
    return Permutation.from_order(order)


def permute(a: SparseSymmetric, p: Permutation) -> SparseSymmetric:
    """Return ``P A P^T``, i.e. the matrix with ``B[p(i), p(j)] = A[i, j]``."""
    if p.n != a.n:
        raise ValueError(f"permutation of length {p.n} applied to a matrix of size {a.n}")
    r, c, v = a.triplets()
    return build_from_triplets(a.n, rows=p.forward[r], cols=p.forward[c], vals=v)


def write_permutation(path, p: Permutation) -> None:
    """One 1-based target index per line, line ``k`` for old vertex ``k``."""
    np.savetxt(path, p.forward + 1, fmt="%d")


def read_permutation(path) -> Permutation:
    fwd = np.loadtxt(path, dtype=np.int64, ndmin=1) - 1
    inverse = np.empty_like(fwd)
    inverse[fwd] = np.arange(fwd.size)
    return Permutation(fwd, inverse)
