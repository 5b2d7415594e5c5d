import csv

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from iselinv import (
    MeshSpec,
    build_from_triplets,
    fill_path_oracle,
    fill_pattern_exact,
    ldlt_exact,
    ldlt_incomplete,
    nested_dissection_cartesian,
    permute,
    selinv_incomplete,
    symbolic_levels,
    toy_hamiltonian,
)
from iselinv.symbolic import fill_path_levels

from conftest import dense_ldlt, random_graph_matrix


def nz_lower(a):
    r, c, _ = a.triplets()
    keep = r > c
    return set(zip(r[keep].tolist(), c[keep].tolist()))


def oracle_set(a, cutoff):
    return {k for k, lev in fill_path_levels(a).items() if lev <= cutoff}


def test_chain6_levels(chain6):
    # 1-based (6,2), (6,3), (6,4) are 0-based (5,1), (5,2), (5,3)
    pat = symbolic_levels(chain6)
    assert pat.level_of(5, 1) == 1
    assert pat.level_of(5, 2) == 2
    assert pat.level_of(5, 3) == 3
    assert pat.level_of(4, 2) == float("inf")


def test_chain6_cutoff_one(chain6):
    pat = symbolic_levels(chain6, 1)
    assert pat.entries() == nz_lower(chain6) | {(5, 1)}


def test_chain6_exact_fill(chain6):
    fill = fill_pattern_exact(chain6).entries() - nz_lower(chain6)
    assert fill == {(5, 1), (5, 2), (5, 3)}
    assert (4, 2) not in fill_pattern_exact(chain6).entries()


def test_chain6_oracle_values(chain6):
    assert fill_path_oracle(chain6, 5, 3) == 3
    assert fill_path_oracle(chain6, 3, 5) == 3
    assert fill_path_oracle(chain6, 1, 0) == 0
    assert fill_path_oracle(chain6, 4, 2) == float("inf")


def test_cutoff_zero_is_nz(rng):
    a = random_graph_matrix(rng, 30)
    assert symbolic_levels(a, 0).entries() == nz_lower(a)


def test_open_tridiagonal_has_no_fill():
    h = toy_hamiltonian(MeshSpec(1, 12, periodic=False))
    pat = fill_pattern_exact(h)
    assert pat.entries() == nz_lower(h)
    assert pat.max_level() == 0


def test_random_12_vertex_graph_matches_oracle():
    a = random_graph_matrix(np.random.default_rng(7), 12, p=0.25)
    exact = fill_pattern_exact(a)
    assert exact.level_dict() == fill_path_levels(a)
    for i in range(12):
        for j in range(i):
            assert exact.level_of(i, j) == fill_path_oracle(a, i, j)


def test_negative_cutoff_rejected(chain6):
    with pytest.raises(ValueError):
        symbolic_levels(chain6, -1)


@settings(max_examples=40, deadline=None)
@given(n=st.integers(1, 40), seed=st.integers(0, 2**32 - 1), c=st.integers(0, 6))
def test_levels_match_oracle_and_nest(n, seed, c):
    a = random_graph_matrix(np.random.default_rng(seed), n)
    pc = symbolic_levels(a, c)
    assert pc.entries() == oracle_set(a, c)
    assert pc.entries() <= symbolic_levels(a, c + 1).entries()
    exact = fill_pattern_exact(a)
    assert symbolic_levels(a).entries() == exact.entries()
    restricted = exact.restrict(c)
    assert restricted.entries() == pc.entries()
    assert np.array_equal(restricted.levels, pc.levels)
    assert nz_lower(a) <= pc.entries()
    assert pc.nnz == 0 or pc.levels.max() <= c
    assert all(pc.level_of(i, j) == 0 for i, j in nz_lower(a))


@settings(max_examples=25, deadline=None)
@given(n=st.integers(2, 40), seed=st.integers(0, 2**32 - 1))
def test_exact_pattern_closure(n, seed):
    a = random_graph_matrix(np.random.default_rng(seed), n)
    pat = fill_pattern_exact(a)
    entries = pat.entries()
    for j in range(n):
        col = pat.column(j)
        for x in range(col.size):
            for y in range(x):
                assert (int(col[x]), int(col[y])) in entries


@settings(max_examples=25, deadline=None)
@given(n=st.integers(2, 30), seed=st.integers(0, 2**32 - 1))
def test_numeric_factor_inside_exact_pattern(n, seed):
    a = random_graph_matrix(np.random.default_rng(seed), n)
    l, _ = dense_ldlt(a.to_dense())
    rows, cols = np.nonzero(np.tril(np.abs(l), -1) > 1e-13)
    assert set(zip(rows.tolist(), cols.tolist())) <= fill_pattern_exact(a).entries()


def test_restrict_rejects_widening(chain6):
    with pytest.raises(ValueError):
        symbolic_levels(chain6, 1).restrict(2)


def test_to_csv(tmp_path, chain6):
    path = tmp_path / "pat.csv"
    symbolic_levels(chain6).to_csv(path)
    with open(path) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["i", "j", "level"]
    assert ["6", "4", "3"] in rows[1:]
    assert len(rows) - 1 == fill_pattern_exact(chain6).nnz


@pytest.mark.parametrize("cutoff", [None, 0, 2, 5])
def test_flop_formulas_match_kernels(cutoff):
    spec = MeshSpec(2, 12)
    h = permute(toy_hamiltonian(spec), nested_dissection_cartesian(spec))
    a = build_from_triplets(h.n, rows=h.triplets()[0], cols=h.triplets()[1],
                            vals=h.triplets()[2] - 0.98 * (h.triplets()[0] == h.triplets()[1]))
    pat = symbolic_levels(a, cutoff)
    if cutoff is None:
        f = ldlt_exact(a, pat)
    else:
        f, _ = ldlt_incomplete(a, pat, track_dropped=False)
    inv, _ = selinv_incomplete(f)
    assert f.flops == pat.factorization_flops()
    assert inv.flops == pat.selinv_flops()
