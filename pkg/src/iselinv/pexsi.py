"""Pole-expansion driver.

Evaluates selected entries of ``r(H) = sum_k w_k (H - z_k I)^{-1}`` by one
(incomplete) factorization and selected inversion per pole.  The ordering
and symbolic pattern depend only on the structure of ``H`` and are shared
by all poles.
"""

from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .factorization import PivotBreakdown, ldlt_exact, ldlt_incomplete
from .ordering import Permutation, permute
from .selinv import selinv_exact, selinv_incomplete
from .sparse import SparseSymmetric, build_from_triplets, dense_eigendecomposition, shift
from .symbolic import fill_pattern_exact, symbolic_levels

__all__ = [
    "PoleExpansion",
    "PoleDiagnostics",
    "QuantityReport",
    "DensityResult",
    "fermi_dirac",
    "dense_density_oracle",
    "circle_contour_poles",
    "pexsi_evaluate",
    "dense_pole_sum",
]

POLE_CSV_HEADER = ["re_w", "im_w", "re_z", "im_z"]


@dataclass(frozen=True, eq=False)
class PoleExpansion:
    weights: np.ndarray
    poles: np.ndarray

    def __post_init__(self):
        w = np.atleast_1d(np.asarray(self.weights, dtype=complex))
        z = np.atleast_1d(np.asarray(self.poles, dtype=complex))
        if w.shape != z.shape or w.ndim != 1:
            raise ValueError("weights and poles must be 1-D arrays of equal length")
        if w.size < 1:
            raise ValueError("a pole expansion needs at least one pole")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "poles", z)

    @property
    def q(self) -> int:
        return self.poles.size

    def __len__(self) -> int:
        return self.q

    def __add__(self, other: "PoleExpansion") -> "PoleExpansion":
        return PoleExpansion(np.concatenate([self.weights, other.weights]),
                             np.concatenate([self.poles, other.poles]))

    def subset(self, idx) -> "PoleExpansion":
        return PoleExpansion(self.weights[idx], self.poles[idx])

    def evaluate(self, x) -> np.ndarray:
        """Scalar rational function ``sum_k w_k / (x - z_k)``."""
        x = np.asarray(x, dtype=complex)
        return np.sum(self.weights / (x[..., None] - self.poles), axis=-1)

    def is_conjugate_closed(self, tol: float = 1e-12) -> bool:
        for w, z in zip(self.weights, self.poles):
            k = np.argmin(np.abs(self.poles - np.conj(z)))
            if abs(self.poles[k] - np.conj(z)) > tol or abs(self.weights[k] - np.conj(w)) > tol:
                return False
        return True

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh)
            out.writerow(POLE_CSV_HEADER)
            for w, z in zip(self.weights, self.poles):
                out.writerow([repr(float(x)) for x in (w.real, w.imag, z.real, z.imag)])

    @classmethod
    def from_csv(cls, path) -> "PoleExpansion":
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        if not rows or set(POLE_CSV_HEADER) - set(rows[0]):
            raise ValueError(f"pole file needs the columns {','.join(POLE_CSV_HEADER)}")
        w = [complex(float(r["re_w"]), float(r["im_w"])) for r in rows]
        z = [complex(float(r["re_z"]), float(r["im_z"])) for r in rows]
        return cls(np.array(w), np.array(z))


def fermi_dirac(e, beta: float, e_fermi: float = 0.0):
    """Occupation ``1 / (1 + exp(beta (E - E_F)))``.

    Real input goes through the logistic function and cannot overflow.  For
    complex input the exponent's real part is clamped to ``[-700, 700]``.
    """
    if not beta > 0:
        raise ValueError(f"beta must be positive, got {beta}")
    e = np.asarray(e)
    if np.iscomplexobj(e):
        x = beta * (e - e_fermi)
        x = np.clip(x.real, -700.0, 700.0) + 1j * x.imag
        out = 1.0 / (1.0 + np.exp(x))
    else:
        out = expit(-beta * (e.astype(float) - e_fermi))
    return out[()] if out.ndim == 0 else out


@dataclass(frozen=True, eq=False)
class DensityResult:
    density: np.ndarray
    n_electrons: float
    e_total: float
    eigenvalues: np.ndarray


def dense_density_oracle(h, beta: float, e_fermi: float = 0.0) -> DensityResult:
    """``f(H)``, ``N = sum f(E_k)`` and ``E = sum E_k f(E_k)`` by eigendecomposition."""
    dense = h.to_dense() if isinstance(h, SparseSymmetric) else np.asarray(h)
    if np.iscomplexobj(dense):
        if np.abs(dense.imag).max(initial=0.0) > 0:
            raise ValueError("the density oracle needs a real symmetric H")
        dense = dense.real
    evals, evecs = dense_eigendecomposition(dense)
    occ = fermi_dirac(evals, beta, e_fermi)
    rho = (evecs * occ) @ evecs.T
    return DensityResult(rho, float(occ.sum()), float((evals * occ).sum()), evals)


def circle_contour_poles(q: int, center: complex, radius: float, f) -> PoleExpansion:
    """Trapezoid rule for the Cauchy integral of ``f`` over a circle.

    Nodes sit at angles ``2 pi (k + 1/2) / q`` so none lies on the real
    axis and they come in conjugate pairs when ``center`` is real.  For
    ``x`` inside the circle ``sum_k w_k / (x - z_k)`` converges to ``f(x)``
    geometrically in ``q``.
    """
    if q < 4:
        raise ValueError(f"need at least 4 poles, got {q}")
    if not radius > 0:
        raise ValueError(f"radius must be positive, got {radius}")
    theta = 2.0 * np.pi * (np.arange(q) + 0.5) / q
    offsets = radius * np.exp(1j * theta)
    z = complex(center) + offsets
    fz = np.asarray([complex(f(zk)) for zk in z])
    return PoleExpansion(-fz * offsets / q, z)


@dataclass(frozen=True)
class PoleDiagnostics:
    index: int
    weight: complex
    pole: complex
    cutoff: int | None
    pattern_nnz: int
    flops: int
    absent_reads: int
    dropped_max: float | None = None
    dropped_nnz: int | None = None

    def as_dict(self) -> dict:
        return {
            "index": self.index,
            "weight": [self.weight.real, self.weight.imag],
            "pole": [self.pole.real, self.pole.imag],
            "cutoff": self.cutoff,
            "pattern_nnz": self.pattern_nnz,
            "flops": self.flops,
            "absent_reads": self.absent_reads,
            "dropped_max": self.dropped_max,
            "dropped_nnz": self.dropped_nnz,
        }


@dataclass(frozen=True, eq=False)
class QuantityReport:
    """Assembled quantities; every array is in the original vertex numbering."""

    rho: np.ndarray
    n_electrons: complex
    e_total: complex
    entries: SparseSymmetric
    poles: tuple[PoleDiagnostics, ...] = field(default=())

    def imag_max(self) -> float:
        return float(max(np.abs(self.rho.imag).max(initial=0.0),
                         np.abs(self.entries.data.imag).max(initial=0.0)))

    def as_dict(self) -> dict:
        return {
            "n_electrons": [self.n_electrons.real, self.n_electrons.imag],
            "e_total": [self.e_total.real, self.e_total.imag],
            "rho_real": self.rho.real.tolist(),
            "rho_imag_max": float(np.abs(self.rho.imag).max(initial=0.0)),
            "poles": [p.as_dict() for p in self.poles],
        }


def _one_pole(k, w, z, hp, pattern, cutoff, track):
    a = shift(hp, z)
    dropped = None
    try:
        if cutoff is None:
            fac = ldlt_exact(a, pattern)
            inv = selinv_exact(fac)
        else:
            fac, dropped = ldlt_incomplete(a, pattern, track_dropped=track)
            inv, _ = selinv_incomplete(fac)
    except PivotBreakdown as exc:
        raise PivotBreakdown(exc.column, exc.pivot, exc.floor, pole=k) from None
    rows, cols, _ = hp.triplets()
    vals = inv.values_at(rows, cols)
    diag = PoleDiagnostics(
        k, complex(w), complex(z), cutoff, fac.pattern.nnz, fac.flops + inv.flops,
        inv.absent_reads,
        dropped_max=None if dropped is None else dropped.max_abs(),
        dropped_nnz=None if dropped is None else dropped.nnz,
    )
    return inv.bdiag, vals, diag


def pexsi_evaluate(h: SparseSymmetric, poles: PoleExpansion, cutoff: int | None = None,
                   order: Permutation | None = None, energy_poles: PoleExpansion | None = None,
                   track_dropped: bool = False, workers: int = 1) -> QuantityReport:
    """Selected entries of ``r(H)`` on ``nz(H)`` plus density, count and energy.

    ``cutoff=None`` runs exact factorization and selected inversion.  The
    energy uses ``energy_poles`` when given and ``sum_{ij} H(i,j) r(H)(i,j)``
    over ``nz(H)`` otherwise.  Per-pole results are reduced in pole order,
    so the output does not depend on ``workers``.
    """
    if order is None:
        order = Permutation.identity(h.n)
    hp = permute(h, order)
    pattern = fill_pattern_exact(hp) if cutoff is None else symbolic_levels(hp, cutoff)

    def run(expansion):
        jobs = list(enumerate(zip(expansion.weights, expansion.poles)))

        def work(job):
            k, (w, z) = job
            return _one_pole(k, w, z, hp, pattern, cutoff, track_dropped)

        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(work, jobs))
        else:
            results = [work(job) for job in jobs]
        diag = np.zeros(h.n, dtype=complex)
        vals = np.zeros(hp.nnz, dtype=complex)
        for (_, (w, _)), (bd, bv, _) in zip(jobs, results):
            diag += w * bd
            vals += w * bv
        return diag, vals, tuple(r[2] for r in results)

    diag, vals, diags = run(poles)
    rows, cols, hvals = hp.triplets()
    if energy_poles is not None:
        ediag, _, _ = run(energy_poles)
        e_total = complex(ediag.sum())
    else:
        off = rows != cols
        e_total = complex((hvals * vals).sum() + (hvals[off] * vals[off]).sum())
    inv = order.inverse
    entries = build_from_triplets(h.n, rows=inv[rows], cols=inv[cols], vals=vals)
    rho = diag[order.forward]
    return QuantityReport(rho, complex(rho.sum()), e_total, entries, diags)


def dense_pole_sum(h: SparseSymmetric, poles: PoleExpansion) -> np.ndarray:
    """Dense ``sum_k w_k (H - z_k I)^{-1}``, for testing."""
    from .sparse import dense_inverse

    out = np.zeros((h.n, h.n), dtype=complex)
    for w, z in zip(poles.weights, poles.poles):
        out += w * dense_inverse(shift(h, z))
    return out
