import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from iselinv import MeshSpec, build_from_triplets, dense_eigendecomposition, dense_inverse, graph_distance, shift, toy_hamiltonian
from iselinv.sparse import (
    ORACLE_CAP,
    OracleCapExceeded,
    SingularMatrixError,
    all_pairs_distance,
    random_complex_symmetric,
    read_matrix_market,
    write_matrix_market,
)

from conftest import random_graph_matrix

TWO_BANDS = [(-math.sqrt(2), -1.0), (1.0, math.sqrt(2))]


def test_build_tridiagonal_block():
    a = build_from_triplets(2, [(0, 0, 3), (1, 0, -1), (1, 1, 3)])
    assert np.array_equal(a.to_dense(), np.array([[3, -1], [-1, 3]]))


def test_build_sums_duplicates():
    a = build_from_triplets(2, [(0, 0, 1), (0, 0, 2)])
    assert a.nnz == 1
    assert a.lookup(0, 0) == 3


def test_build_rejects_out_of_range():
    with pytest.raises(IndexError):
        build_from_triplets(2, [(2, 0, 1)])


def test_build_mirrors_upper_and_rejects_conflicts():
    a = build_from_triplets(3, [(0, 2, 5.0), (1, 1, 1.0)])
    assert a.lookup(2, 0) == a.lookup(0, 2) == 5.0
    same = build_from_triplets(2, [(0, 1, 2.0), (1, 0, 2.0)])
    assert same.lookup(1, 0) == 2.0
    with pytest.raises(ValueError):
        build_from_triplets(2, [(0, 1, 1.0), (1, 0, 2.0)])


def test_build_drops_explicit_zeros():
    a = build_from_triplets(3, [(1, 0, 0.0), (2, 2, 1.0)])
    assert a.nnz == 1


def test_toy_1d_m6_entries(chain6):
    d = chain6.to_dense().real
    assert np.array_equal(np.diag(d), [1, -1, 1, -1, 1, -1])
    for i in range(6):
        assert d[i, (i + 1) % 6] == -0.5
    assert d[0, 5] == -0.5
    assert np.count_nonzero(d) == 6 + 12


def test_toy_2d_m2_neighbour_links():
    h = toy_hamiltonian(MeshSpec(2, 2))
    d = h.to_dense().real
    # on the 2x2 torus both wrap links of an axis reach the same neighbour
    for v in range(4):
        nb = np.flatnonzero(d[v] != 0)
        nb = nb[nb != v]
        assert len(nb) == 2
        assert np.all(d[v, nb] == -0.25)


def test_toy_rejects_odd_side():
    with pytest.raises(ValueError):
        toy_hamiltonian(MeshSpec(2, 5))


def in_two_bands(x, tol):
    return any(lo - tol <= x <= hi + tol for lo, hi in TWO_BANDS)


def test_toy_1d_m100_spectrum_in_two_bands():
    h = toy_hamiltonian(MeshSpec(1, 100))
    evals, _ = dense_eigendecomposition(h)
    assert all(in_two_bands(x, 1e-10) for x in evals)
    assert 0.98 > -1 and not in_two_bands(0.98, 0)


@pytest.mark.parametrize("dim,m", [(1, 8), (1, 20), (2, 4), (2, 6), (3, 4)])
def test_toy_off_diagonal_row_sum(dim, m):
    h = toy_hamiltonian(MeshSpec(dim, m))
    d = h.to_dense().real
    np.fill_diagonal(d, 0.0)
    off = np.array([math.fsum(row) for row in d])
    assert np.all(off == -1.0)


def test_toy_2d_spectrum_in_two_bands():
    h = toy_hamiltonian(MeshSpec(2, 8))
    evals, _ = dense_eigendecomposition(h)
    assert all(in_two_bands(x, 1e-10) for x in evals)


def test_shift_examples(chain6):
    same = shift(chain6, 0)
    assert np.array_equal(same.to_dense(), chain6.to_dense())
    zero = build_from_triplets(3, [])
    s = shift(zero, 1 + 2j)
    assert np.array_equal(s.to_dense(), np.diag([-1 - 2j] * 3))


def test_graph_distance_examples(chain6):
    assert graph_distance(chain6, 5, 2) == 3
    assert graph_distance(chain6, 2, 5) == 3
    for i in range(6):
        assert graph_distance(chain6, i, i) == 0
    two = build_from_triplets(2, [(0, 0, 1), (1, 1, 1)])
    assert graph_distance(two, 0, 1) == math.inf


def test_all_pairs_distance_matches_chain_formula():
    h = toy_hamiltonian(MeshSpec(1, 20))
    dist = all_pairs_distance(h)
    i, j = np.meshgrid(np.arange(20), np.arange(20), indexing="ij")
    k = np.abs(i - j)
    assert np.array_equal(dist, np.minimum(k, 20 - k))


def test_eigendecomposition_examples():
    evals, evecs = dense_eigendecomposition(np.diag([1.0, 2.0, 3.0]))
    assert np.allclose(evals, [1, 2, 3])
    assert np.allclose(np.abs(evecs), np.eye(3))
    evals, _ = dense_eigendecomposition(np.array([[0.0, 1.0], [1.0, 0.0]]))
    assert np.allclose(evals, [-1, 1])


def test_eigendecomposition_residual(rng):
    a = rng.standard_normal((40, 40))
    a = a + a.T
    evals, evecs = dense_eigendecomposition(a)
    assert np.all(np.diff(evals) >= 0)
    assert np.abs(a @ evecs - evecs * evals).max() <= 1e-10 * np.abs(a).max() * 40


def test_dense_inverse_examples():
    assert np.array_equal(dense_inverse(np.eye(3)), np.eye(3))
    assert np.allclose(dense_inverse(np.diag([2.0, 4.0])), np.diag([0.5, 0.25]))


def test_dense_inverse_antipodal_minimum(chain6):
    inv = dense_inverse(shift(toy_hamiltonian(MeshSpec(1, 6)), 0.98))
    # same-parity comparisons: the chequerboard makes odd and even distances differ
    row = np.abs(inv[0])
    assert row[0] > row[2]
    assert row[1] > row[3]
    assert np.isclose(row[1], row[5]) and np.isclose(row[2], row[4])


def test_dense_inverse_residual(rng):
    a = random_graph_matrix(rng, 60).to_dense()
    inv = dense_inverse(a)
    assert np.abs(a @ inv - np.eye(60)).max() < 1e-10


def test_dense_inverse_singular():
    with pytest.raises(SingularMatrixError):
        dense_inverse(np.array([[1.0, 2.0], [2.0, 4.0]]))


def test_oracle_cap():
    big = build_from_triplets(ORACLE_CAP + 1, rows=[0], cols=[0], vals=[1.0])
    with pytest.raises(OracleCapExceeded):
        dense_inverse(big)
    with pytest.raises(OracleCapExceeded):
        dense_eigendecomposition(big)


def test_matrix_market_round_trip(tmp_path, rng):
    a = random_complex_symmetric(30, 0.2, rng)
    path = tmp_path / "a.mtx"
    write_matrix_market(path, a)
    b = read_matrix_market(path)
    assert np.array_equal(a.to_dense(), b.to_dense())
    h = toy_hamiltonian(MeshSpec(2, 4))
    write_matrix_market(path, h)
    assert np.array_equal(read_matrix_market(path).to_dense(), h.to_dense())


@settings(max_examples=30, deadline=None)
@given(n=st.integers(1, 80), seed=st.integers(0, 2**32 - 1))
def test_symmetric_lookup_and_matvec(n, seed):
    rng = np.random.default_rng(seed)
    a = random_graph_matrix(rng, n)
    r, c, _ = a.triplets()
    for i, j in list(zip(r, c))[:50]:
        assert a.lookup(i, j) == a.lookup(j, i)
    x = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    dense = a.to_dense()
    assert np.abs(a.matvec(x) - dense @ x).max() <= 1e-13 * max(1.0, np.abs(dense).sum(axis=1).max())
