"""Acceptance criteria, one test each.

Every test records a ``PASS``/``FAIL`` line with the measured quantity and
its runtime; the lines are printed together in the terminal summary.
"""

import math
import time
from contextlib import contextmanager

import numpy as np
import pytest

from iselinv import (
    circle_contour_poles,
    closedness_audit,
    dense_inverse,
    fermi_dirac,
    fill_path_oracle,
    fit_decay_rate,
    green_single_interval,
    green_two_intervals,
    ldlt_exact,
    ldlt_incomplete,
    pexsi_evaluate,
    selinv_exact,
    selinv_incomplete,
    symbolic_levels,
)
from iselinv.pexsi import dense_pole_sum
from iselinv.sparse import all_pairs_distance, random_complex_symmetric
from iselinv.studies import fit_convergence_rate, loglog_slope, toy_problem
from iselinv.symbolic import fill_path_levels

import conftest
from conftest import random_graph_matrix

pytestmark = pytest.mark.acceptance

R2 = math.sqrt(2.0)


@contextmanager
def criterion(number, title, limit):
    """Time the block; the body fills ``state`` with ``ok`` and ``detail``."""
    state = {"ok": False, "detail": ""}
    t0 = time.perf_counter()
    try:
        yield state
    finally:
        elapsed = time.perf_counter() - t0
        in_time = elapsed < limit
        ok = state["ok"] and in_time
        line = (f"{'PASS' if ok else 'FAIL'} criterion {number}: {title}; {state['detail']}; "
                f"{elapsed:.1f}s (limit {limit:g}s)")
        conftest.ACCEPTANCE_LINES.append(line)
        print(line)
        state["in_time"] = in_time


def random_suite():
    rng = np.random.default_rng(2024)
    return [random_complex_symmetric(n, min(1.0, 6.0 / n), rng) for n in (50, 200, 400)]


def test_reconstruction_identity():
    with criterion(1, "reconstruction ||LDL^T - A||_max / ||A||_max <= 1e-12", 5) as st:
        worst = 0.0
        for a in random_suite():
            f = ldlt_exact(a)
            worst = max(worst, np.abs(f.reconstruct() - a.to_dense()).max() / a.max_abs())
        st["ok"] = worst <= 1e-12
        st["detail"] = f"worst {worst:.2e}"
    assert st["ok"] and st["in_time"]


def test_selected_inversion_correctness():
    with criterion(2, "exact selected inversion vs dense inverse on fnz <= 1e-10 relative", 10) as st:
        worst, violations = 0.0, 0
        for a in random_suite():
            f = ldlt_exact(a)
            inv = selinv_exact(f)
            ref = dense_inverse(a)
            p = inv.pattern
            err = max(np.abs(ref[p.indices, p.col_of] - inv.bvals).max(initial=0),
                      np.abs(np.diag(ref) - inv.bdiag).max())
            worst = max(worst, err / np.abs(ref).max())
            violations += closedness_audit(f).absent_reads
        st["ok"] = worst <= 1e-10 and violations == 0
        st["detail"] = f"worst relative {worst:.2e}, closedness violations {violations}"
    assert st["ok"] and st["in_time"]


def test_incompleteness_identity():
    with criterion(3, "L~D~L~^T = A + E on toy 2D m=16, c = 0..6", 5) as st:
        a = toy_problem(2, 16).shifted(0.98)
        dense = a.to_dense()
        worst = 0.0
        for c in range(7):
            f, e = ldlt_incomplete(a, c)
            worst = max(worst, np.abs(f.reconstruct() - dense - e.to_dense()).max() / a.max_abs())
        st["ok"] = worst <= 1e-13
        st["detail"] = f"worst {worst:.2e}"
    assert st["ok"] and st["in_time"]


def test_dropped_entry_levels():
    with criterion(4, "every E nonzero has c < level <= 2c+1", 10) as st:
        matrices = [toy_problem(2, 16).shifted(0.98)]
        rng = np.random.default_rng(99)
        matrices += [random_graph_matrix(rng, int(rng.integers(8, 65))) for _ in range(20)]
        total = inside = 0
        for a in matrices:
            exact = symbolic_levels(a)
            for c in range(1, 7):
                _, e = ldlt_incomplete(a, c)
                r, col, _ = e.triplets()
                pos = exact.find(r, col)
                lev = np.where(pos >= 0, exact.levels[pos], -1)
                total += lev.size
                inside += int(np.count_nonzero((lev > c) & (lev <= 2 * c + 1)))
        st["ok"] = total > 0 and inside == total
        st["detail"] = f"{inside}/{total} entries inside the window"
    assert st["ok"] and st["in_time"]


def test_symbolic_oracle_equivalence():
    with criterion(5, "symbolic levels equal the fill-path oracle, 200 graphs n <= 64, c = 0..8", 30) as st:
        rng = np.random.default_rng(5)
        mismatches = 0
        for k in range(200):
            n = int(rng.integers(2, 65))
            a = random_graph_matrix(rng, n, p=rng.uniform(0.02, 0.15))
            oracle = fill_path_levels(a)
            c = k % 9
            want = {key for key, lev in oracle.items() if lev <= c}
            got = symbolic_levels(a, c)
            if got.entries() != want or any(oracle[key] != lev for key, lev in got.level_dict().items()):
                mismatches += 1
        # spot-check the pairwise oracle itself against the bulk one
        a = random_graph_matrix(rng, 20, p=0.15)
        bulk = fill_path_levels(a)
        for i in range(20):
            for j in range(i):
                if bulk.get((i, j), math.inf) != fill_path_oracle(a, i, j):
                    mismatches += 1
        st["ok"] = mismatches == 0
        st["detail"] = f"{mismatches} mismatching graphs"
    assert st["ok"] and st["in_time"]


def test_localization_rates():
    with criterion(6, "toy 2D m=48 z=0.98 decay rates within 15% of g", 60) as st:
        prob = toy_problem(2, 48)
        z = 0.98
        g = green_two_intervals(-R2, -1, 1, R2, z)
        a = prob.shifted(z)
        f = ldlt_exact(a)
        rate_l = fit_decay_rate(f.lvals, f.pattern.levels, fit_range=(10, 40)).rate
        rng = np.random.default_rng(0)
        cols = np.sort(rng.choice(a.n, 64, replace=False))
        rhs = np.zeros((a.n, cols.size))
        rhs[cols, np.arange(cols.size)] = 1.0
        inv = f.solve(rhs)
        dist = all_pairs_distance(a, cols).T
        rate_inv = fit_decay_rate(inv, dist, fit_range=(10, 40)).rate
        dev_l, dev_inv = rate_l / g - 1, rate_inv / g - 1
        st["ok"] = abs(dev_l) <= 0.15 and abs(dev_inv) <= 0.15
        st["detail"] = (f"g={g:.4f}, L vs level {rate_l:.4f} ({dev_l:+.1%}), "
                        f"inverse vs distance {rate_inv:.4f} ({dev_inv:+.1%})")
    assert st["ok"] and st["in_time"]


def convergence_errors(prob, z, cutoffs):
    a = prob.shifted(z)
    ref = dense_inverse(a)
    rows, cols, _ = a.triplets()
    exact = symbolic_levels(a)
    errs = []
    for c in cutoffs:
        f, _ = ldlt_incomplete(a, exact.restrict(c), track_dropped=False)
        b, _ = selinv_incomplete(f)
        errs.append(np.abs(ref[rows, cols] - b.values_at(rows, cols)).max())
    return np.array(errs)


def test_convergence_rate():
    with criterion(7, "convergence slope within 25% of 2g (2D m=32 z=0.98; 3D m=12 z=0)", 120) as st:
        out = []
        for dim, m, z, cutoffs in ((2, 32, 0.98, range(0, 31)), (3, 12, 0.0, range(0, 17))):
            prob = toy_problem(dim, m)
            g = prob.spectral.green(z)
            cs = np.array(list(cutoffs))
            rate = fit_convergence_rate(cs, convergence_errors(prob, z, cs), window=(1e-12, 1e-2))
            out.append((dim, rate / (2 * g)))
        st["ok"] = all(abs(r - 1) <= 0.25 for _, r in out)
        st["detail"] = ", ".join(f"{d}D rate/2g={r:.3f}" for d, r in out)
    assert st["ok"] and st["in_time"]


def test_chain_stagnation():
    with criterion(8, "1D m=100 z=0.98: slope 2g for c <= 45, plateau within 50x, E at (n, c+2)", 30) as st:
        prob = toy_problem(1, 100)
        z = 0.98
        g = prob.spectral.green(z)
        a = prob.shifted(z)
        n = a.n
        ref = dense_inverse(a)
        rows, cols, _ = a.triplets()
        cs = np.arange(0, n - 3)
        errs, e_ok = [], True
        for c in cs:
            f, e = ldlt_incomplete(a, int(c))
            r, col, _ = e.triplets()
            e_ok &= list(zip(r.tolist(), col.tolist())) == [(n - 1, int(c) + 1)]
            b, _ = selinv_incomplete(f)
            errs.append(np.abs(ref[rows, cols] - b.values_at(rows, cols)).max())
        errs = np.array(errs)
        early = cs <= 45
        slope = -np.polyfit(cs[early], np.log(errs[early]), 1)[0] / (2 * g)
        plateau = math.exp(-g * (n - 2))
        late = errs[cs > (n - 4) / 2] / plateau
        st["ok"] = bool(e_ok) and abs(slope - 1) <= 0.10 and late.max() <= 50 and late.min() >= 1 / 50
        st["detail"] = (f"slope/2g={slope:.4f}, plateau ratio {late.min():.1f}..{late.max():.1f}, "
                        f"E two-entry structure {'ok' if e_ok else 'broken'}")
    assert st["ok"] and st["in_time"]


def pattern_flops(prob, c):
    pat = symbolic_levels(prob.hp, c)
    return pat.factorization_flops() + pat.selinv_flops()


def test_flop_scaling():
    with criterion(9, "flop-count slopes: n (2D c=4) 1.0+-0.2, c (2D m=32) 1.0+-0.5, c (3D m=16) 3.0+-0.5", 120) as st:
        sizes = [16, 22, 32, 46, 64, 90, 128]
        ns = [m * m for m in sizes]
        slope_n = loglog_slope(ns, [pattern_flops(toy_problem(2, m), 4) for m in sizes])
        p2 = toy_problem(2, 32)
        exact2 = symbolic_levels(p2.hp)
        c2 = np.arange(6, 21)
        f2 = [exact2.restrict(int(c)).factorization_flops() + exact2.restrict(int(c)).selinv_flops() for c in c2]
        slope_c2 = loglog_slope(c2, f2)
        p3 = toy_problem(3, 16)
        c3 = np.arange(4, 11)
        f3 = [pattern_flops(p3, int(c)) for c in c3]
        slope_c3 = loglog_slope(c3, f3)
        st["ok"] = abs(slope_n - 1) <= 0.2 and abs(slope_c2 - 1) <= 0.5 and abs(slope_c3 - 3) <= 0.5
        st["detail"] = f"n slope {slope_n:.3f}, 2D c slope {slope_c2:.3f}, 3D c slope {slope_c3:.3f}"
    assert st["ok"] and st["in_time"]


def test_pexsi_assembly():
    with criterion(10, "8-pole circle contour on 1D m=60 matches dense pole sum to 1e-8, real to 1e-12", 10) as st:
        prob = toy_problem(1, 60)
        poles = circle_contour_poles(8, -1.2, 0.5, lambda x: fermi_dirac(x, 5.0))
        rep = pexsi_evaluate(prob.h, poles)
        ref = np.diag(dense_pole_sum(prob.h, poles))
        rel = np.abs(rep.rho - ref).max() / np.abs(ref).max()
        imag = rep.imag_max()
        st["ok"] = poles.is_conjugate_closed() and rel <= 1e-8 and imag <= 1e-12
        st["detail"] = f"relative {rel:.1e}, max imaginary {imag:.1e}"
    assert st["ok"] and st["in_time"]


def test_green_function_suite():
    with criterion(11, "Green's functions: closed forms 1e-12, path independence 1e-8, merged gap 1e-3", 10) as st:
        closed = max(abs(green_single_interval(-1, 1, 1.25) - math.log(2)),
                     abs(green_single_interval(-1, 1, 2j) - math.log(2 + math.sqrt(5))))
        path = 0.0
        for z in (0.98, 0.3 + 0.2j, 2j, -1.7 + 0.4j):
            vals = [green_two_intervals(-R2, -1, 1, R2, z, height=h) for h in (0.5, 1.0, 3.0, 10.0)]
            path = max(path, max(vals) - min(vals))
        merged = abs(green_two_intervals(-1, -1e-3, 1e-3, 1, 2j) - green_single_interval(-1, 1, 2j))
        st["ok"] = closed <= 1e-12 and path <= 1e-8 and merged <= 1e-3
        st["detail"] = f"closed-form {closed:.1e}, path spread {path:.1e}, merged gap {merged:.1e}"
    assert st["ok"] and st["in_time"]
