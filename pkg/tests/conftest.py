import numpy as np
import pytest

from iselinv import MeshSpec, build_from_triplets, toy_hamiltonian


def random_graph_matrix(rng, n, p=None, complex_values=True, diag=None):
    """Random symmetric sparsity with random values and a dominant diagonal."""
    if p is None:
        p = rng.uniform(0.03, 0.3)
    mask = np.triu(rng.random((n, n)) < p, 1)
    r, c = np.nonzero(mask)
    v = rng.standard_normal(r.size)
    if complex_values:
        v = v + 1j * rng.standard_normal(r.size)
    dv = np.full(n, 2.0 + 2.0 * np.sqrt(n * p)) if diag is None else np.full(n, diag)
    if complex_values:
        dv = dv + 0.5j
    rows = np.concatenate([r, np.arange(n)])
    cols = np.concatenate([c, np.arange(n)])
    return build_from_triplets(n, rows=rows, cols=cols, vals=np.concatenate([v, dv]))


def dense_ldlt(a):
    """Unstructured dense LDL^T, used as an independent reference."""
    a = np.array(a, dtype=complex)
    n = a.shape[0]
    l = np.eye(n, dtype=complex)
    d = np.zeros(n, dtype=complex)
    for j in range(n):
        d[j] = a[j, j] - np.sum(l[j, :j] ** 2 * d[:j])
        for i in range(j + 1, n):
            l[i, j] = (a[i, j] - np.sum(l[i, :j] * l[j, :j] * d[:j])) / d[j]
    return l, d


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def chain6():
    # periodic 6-vertex chain in natural order
    return toy_hamiltonian(MeshSpec(1, 6))


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
