"""Experiment drivers behind ``iselinv study``.

Each study returns a :class:`StudyTable`; its CSV starts with one comment
line echoing the configuration, then a header row.  Apart from wall-clock
columns the output depends only on the configuration and seed.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .factorization import ldlt_exact, ldlt_incomplete
from .localization import SpectralSet, bin_maxima, fit_decay_rate, toy_spectral_set
from .ordering import Permutation, nested_dissection_cartesian, permute
from .pexsi import circle_contour_poles, fermi_dirac, pexsi_evaluate
from .selinv import selinv_incomplete
from .sparse import (
    ORACLE_CAP,
    MeshSpec,
    OracleCapExceeded,
    SparseSymmetric,
    all_pairs_distance,
    dense_inverse,
    shift,
    toy_hamiltonian,
)
from .symbolic import symbolic_levels

__all__ = [
    "STUDY_KINDS",
    "StudyConfig",
    "StudyTable",
    "ToyProblem",
    "toy_problem",
    "loglog_slope",
    "fit_convergence_rate",
    "run_study",
    "run_localization_study",
    "run_convergence_study",
    "run_periodic1d_study",
    "run_scaling_study",
    "run_pexsi_study",
]

STUDY_KINDS = ("localization", "convergence", "nscaling", "cscaling", "periodic1d", "pexsi")
SAMPLED_COLUMNS = 64


@dataclass
class StudyConfig:
    kind: str
    dim: int = 2
    m: int = 16
    z: complex = 0.98
    cutoffs: list[int] = field(default_factory=list)
    reps: int = 3
    out: str | None = None
    seed: int = 0
    sizes: list[int] = field(default_factory=list)
    timing: bool = True
    fit_range: tuple[int, int] | None = None
    poles: int = 8
    beta: float = 5.0
    e_fermi: float = 0.0
    center: float = -1.2
    radius: float = 0.5

    def __post_init__(self):
        if self.kind not in STUDY_KINDS:
            raise ValueError(f"unknown study {self.kind!r}; choose from {', '.join(STUDY_KINDS)}")
        self.z = complex(self.z)
        cs = list(self.cutoffs)
        if any(c < 0 for c in cs) or any(b <= a for a, b in zip(cs, cs[1:])):
            raise ValueError(f"cutoffs must be non-negative and strictly ascending, got {cs}")
        if self.kind in ("nscaling", "cscaling") and self.timing and self.reps < 3:
            raise ValueError("timing studies need at least 3 repetitions")

    def echo(self) -> dict:
        d = asdict(self)
        d["z"] = [self.z.real, self.z.imag]
        return d


@dataclass
class StudyTable:
    config: StudyConfig
    columns: list[str]
    rows: list[list]
    summary: dict = field(default_factory=dict)

    def column(self, name: str) -> np.ndarray:
        k = self.columns.index(name)
        return np.array([r[k] for r in self.rows])

    def to_csv(self, fh=None) -> str:
        buf = io.StringIO() if fh is None else fh
        buf.write("# config: " + json.dumps(self.config.echo(), sort_keys=True) + "\n")
        if self.summary:
            buf.write("# summary: " + json.dumps(self.summary, sort_keys=True) + "\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        w.writerows(self.rows)
        return buf.getvalue() if fh is None else ""

    def write(self, path=None) -> None:
        path = path or self.config.out
        if path is None:
            raise ValueError("no output path")
        with open(path, "w", newline="") as fh:
            self.to_csv(fh)


@dataclass(frozen=True, eq=False)
class ToyProblem:
    spec: MeshSpec
    h: SparseSymmetric
    order: Permutation
    hp: SparseSymmetric
    spectral: SpectralSet

    def shifted(self, z: complex) -> SparseSymmetric:
        return shift(self.hp, z)


def toy_problem(dim: int, m: int) -> ToyProblem:
    """Toy Hamiltonian in its factorization order: nested dissection in 2D
    and 3D, the natural chain order in 1D."""
    spec = MeshSpec(dim, m)
    h = toy_hamiltonian(spec)
    order = Permutation.identity(spec.n) if dim == 1 else nested_dissection_cartesian(spec)
    return ToyProblem(spec, h, order, permute(h, order), toy_spectral_set())


def loglog_slope(x, y) -> float:
    return float(np.polyfit(np.log(np.asarray(x, float)), np.log(np.asarray(y, float)), 1)[0])


def fit_convergence_rate(cs, errs, window=(1e-12, 1e-2), max_c: int | None = None) -> float:
    """Negated slope of ``log(err)`` against ``c`` over errors inside ``window``."""
    cs = np.asarray(cs, float)
    errs = np.asarray(errs, float)
    sel = (errs >= window[0]) & (errs <= window[1])
    if max_c is not None:
        sel &= cs <= max_c
    if np.count_nonzero(sel) < 3:
        raise ValueError(f"only {np.count_nonzero(sel)} errors inside {window}")
    return -float(np.polyfit(cs[sel], np.log(errs[sel]), 1)[0])


def _check_z(prob: ToyProblem, z: complex) -> float:
    if prob.spectral.contains(z):
        raise ValueError(f"z = {z} lies in the spectral set")
    return prob.spectral.green(z)


def run_localization_study(cfg: StudyConfig) -> StudyTable:
    """Per-distance maxima of ``|L|`` against level and ``|A^{-1}|`` against
    graph distance, with the predicted ``exp(-g k)`` envelope."""
    prob = toy_problem(cfg.dim, cfg.m)
    g = _check_z(prob, cfg.z)
    a = prob.shifted(cfg.z)
    fac = ldlt_exact(a)
    n = a.n
    if n <= ORACLE_CAP:
        inv = dense_inverse(a)
        dist = all_pairs_distance(a)
    else:
        rng = np.random.default_rng(cfg.seed)
        cols = np.sort(rng.choice(n, SAMPLED_COLUMNS, replace=False))
        rhs = np.zeros((n, cols.size))
        rhs[cols, np.arange(cols.size)] = 1.0
        inv = fac.solve(rhs)
        dist = all_pairs_distance(a, cols).T
    rows = []
    summary = {"g": g}
    for kind, mags, dists in (("level", fac.lvals, fac.pattern.levels),
                              ("distance", inv, dist)):
        ks, vals = bin_maxima(mags, dists)
        for k, v in zip(ks.tolist(), vals.tolist()):
            rows.append([kind, k, v, math.exp(-g * k)])
        try:
            fit = fit_decay_rate(mags, dists, cfg.fit_range)
            summary[f"rate_{kind}"] = fit.rate
        except ValueError as exc:
            summary[f"rate_{kind}"] = None
            summary[f"rate_{kind}_error"] = str(exc)
    return StudyTable(cfg, ["distance_kind", "distance", "max_abs", "predicted"], rows, summary)


def _nz_error(ref: np.ndarray, rows, cols, vals) -> float:
    return float(np.abs(ref[rows, cols] - vals).max())


def _convergence_rows(prob: ToyProblem, z: complex, cutoffs):
    a = prob.shifted(z)
    if a.n > ORACLE_CAP:
        raise OracleCapExceeded(
            f"n = {a.n} exceeds the dense oracle cap {ORACLE_CAP}; convergence studies do not subsample"
        )
    ainv = dense_inverse(a)
    exact = symbolic_levels(a)
    rows_h, cols_h, _ = prob.hp.triplets()
    adense = a.to_dense()
    out = []
    for c in cutoffs:
        pat = exact.restrict(c)
        fac, e = ldlt_incomplete(a, pat, track_dropped=True)
        b, _ = selinv_incomplete(fac)
        at_inv = dense_inverse(adense + e.to_dense()) if e.nnz else ainv
        err_f = _nz_error(ainv, rows_h, cols_h, at_inv[rows_h, cols_h])
        err_s = _nz_error(ainv, rows_h, cols_h, b.values_at(rows_h, cols_h))
        out.append((c, err_f, err_s, e))
    return out


def run_convergence_study(cfg: StudyConfig) -> StudyTable:
    """Errors on ``nz(H)`` of ``(A+E)^{-1}`` and of ``B`` against ``A^{-1}``
    for each cutoff, beside the reference ``exp(-2 g c)``."""
    prob = toy_problem(cfg.dim, cfg.m)
    g = _check_z(prob, cfg.z)
    cutoffs = cfg.cutoffs or list(range(0, 2 * cfg.m))
    rows = [[c, ef, es, math.exp(-2 * g * c)]
            for c, ef, es, _ in _convergence_rows(prob, cfg.z, cutoffs)]
    table = StudyTable(cfg, ["c", "err_factorization", "err_selinv", "bound"], rows, {"g": g})
    try:
        table.summary["rate_selinv"] = fit_convergence_rate(table.column("c"), table.column("err_selinv"))
    except ValueError:
        table.summary["rate_selinv"] = None
    return table


def run_periodic1d_study(cfg: StudyConfig) -> StudyTable:
    """Convergence on the periodic chain, where the two wrap-around links
    make the error stall once ``c`` passes about ``n / 2``."""
    prob = toy_problem(1, cfg.m)
    g = _check_z(prob, cfg.z)
    n = prob.spec.n
    cutoffs = cfg.cutoffs or list(range(0, n - 3))
    rows = []
    for c, ef, es, e in _convergence_rows(prob, cfg.z, cutoffs):
        r, cc, _ = e.triplets()
        where = ";".join(f"({i + 1},{j + 1})" for i, j in zip(r.tolist(), cc.tolist()))
        bound = math.exp(-2 * g * (c + 1)) if c <= (n - 4) / 2 else math.exp(-g * (n - 2))
        rows.append([c, ef, es, bound, 2 * e.nnz, where])
    return StudyTable(cfg, ["c", "err_factorization", "err_selinv", "bound", "e_nnz", "e_entries"],
                      rows, {"g": g, "plateau": math.exp(-g * (n - 2))})


def _timed(fn, reps: int) -> float:
    best = math.inf
    for _ in range(reps):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def _scaling_row(prob: ToyProblem, pattern, z: complex, cfg: StudyConfig):
    flops_f = pattern.factorization_flops()
    flops_s = pattern.selinv_flops()
    wall = float("nan")
    if cfg.timing:
        a = prob.shifted(z)

        def work():
            fac, _ = ldlt_incomplete(a, pattern, track_dropped=False)
            selinv_incomplete(fac)

        wall = _timed(work, cfg.reps)
    return flops_f, flops_s, wall


def run_scaling_study(cfg: StudyConfig) -> StudyTable:
    """Flop counts (and minimum-of-``reps`` wall time) of factorization plus
    selected inversion, either over mesh sizes at one cutoff (``nscaling``)
    or over cutoffs at one mesh size (``cscaling``)."""
    cols = ["n", "c", "wall_seconds", "flops_factorization", "flops_selinv", "flop_count"]
    rows = []
    if cfg.kind == "nscaling":
        c = cfg.cutoffs[0] if cfg.cutoffs else 4
        sizes = cfg.sizes or [16, 22, 32, 46, 64]
        for m in sizes:
            prob = toy_problem(cfg.dim, m)
            pat = symbolic_levels(prob.hp, c)
            ff, fs, wall = _scaling_row(prob, pat, cfg.z, cfg)
            rows.append([prob.spec.n, c, wall, ff, fs, ff + fs])
        table = StudyTable(cfg, cols, rows)
        table.summary["slope_flops_vs_n"] = loglog_slope(table.column("n"), table.column("flop_count"))
    else:
        prob = toy_problem(cfg.dim, cfg.m)
        exact = symbolic_levels(prob.hp)
        cutoffs = cfg.cutoffs or list(range(1, exact.max_level() + 1))
        for c in cutoffs:
            pat = exact.restrict(c)
            ff, fs, wall = _scaling_row(prob, pat, cfg.z, cfg)
            rows.append([prob.spec.n, c, wall, ff, fs, ff + fs])
        table = StudyTable(cfg, cols, rows)
        table.summary["slope_flops_vs_c"] = loglog_slope(table.column("c"), table.column("flop_count"))
    if cfg.timing and len(rows) > 1:
        x = table.column("n") if cfg.kind == "nscaling" else table.column("c")
        table.summary["slope_wall"] = loglog_slope(x, table.column("wall_seconds"))
    return table


def run_pexsi_study(cfg: StudyConfig) -> StudyTable:
    """Density from a Fermi-Dirac circle contour, exact against each cutoff."""
    prob = toy_problem(cfg.dim, cfg.m)
    poles = circle_contour_poles(cfg.poles, cfg.center, cfg.radius,
                                 lambda x: fermi_dirac(x, cfg.beta, cfg.e_fermi))
    ref = pexsi_evaluate(prob.h, poles, None, prob.order)
    gmin = min(prob.spectral.green(z) for z in poles.poles)
    cutoffs = cfg.cutoffs or list(range(0, 2 * cfg.m, 2))
    rows = []
    for c in cutoffs:
        rep = pexsi_evaluate(prob.h, poles, c, prob.order)
        err = float(np.abs(rep.rho - ref.rho).max())
        rows.append([c, err, rep.n_electrons.real, math.exp(-2 * gmin * c)])
    return StudyTable(cfg, ["c", "rho_err_max", "n_electrons", "bound"], rows,
                      {"n_electrons_exact": ref.n_electrons.real, "g_min": gmin})


def run_study(cfg: StudyConfig) -> StudyTable:
    runners = {
        "localization": run_localization_study,
        "convergence": run_convergence_study,
        "periodic1d": run_periodic1d_study,
        "nscaling": run_scaling_study,
        "cscaling": run_scaling_study,
        "pexsi": run_pexsi_study,
    }
    return runners[cfg.kind](cfg)
