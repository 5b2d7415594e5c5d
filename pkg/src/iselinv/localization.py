"""Green's functions of real interval sets and empirical decay rates.

``g_E(z)`` is the exponential rate at which polynomial approximations of
``1/(x - z)`` converge on ``E``; it is also the predicted decay rate of
``|(H - zI)^{-1}(i, j)|`` in graph distance and of ``|L(i, j)|`` in level
of fill.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import integrate

from .sparse import SparseSymmetric, all_pairs_distance
from .symbolic import FillPattern

__all__ = [
    "QUAD_TOL",
    "MAGNITUDE_FLOOR",
    "QuadratureError",
    "InsufficientBins",
    "SpectralSet",
    "toy_spectral_set",
    "green_single_interval",
    "green_two_intervals",
    "predicted_bounds",
    "DecayFit",
    "bin_maxima",
    "fit_decay_rate",
]

QUAD_TOL = 1e-10
MAGNITUDE_FLOOR = 1e-14


class QuadratureError(ArithmeticError):
    pass


class InsufficientBins(ValueError):
    pass


@dataclass(frozen=True)
class SpectralSet:
    """Sorted union of disjoint closed real intervals."""

    intervals: tuple[tuple[float, float], ...]

    def __post_init__(self):
        ivs = tuple((float(a), float(b)) for a, b in self.intervals)
        if not ivs:
            raise ValueError("a spectral set needs at least one interval")
        for a, b in ivs:
            if not a < b:
                raise ValueError(f"degenerate or reversed interval [{a}, {b}]")
        for (_, b0), (a1, _) in zip(ivs, ivs[1:]):
            if not b0 < a1:
                raise ValueError("intervals must be sorted and disjoint")
        object.__setattr__(self, "intervals", ivs)

    @classmethod
    def parse(cls, text: str) -> "SpectralSet":
        """``"a,b"`` or ``"a,b,c,d"``."""
        vals = [float(v) for v in text.split(",")]
        if len(vals) % 2:
            raise ValueError(f"need an even number of endpoints, got {len(vals)}")
        return cls(tuple(zip(vals[::2], vals[1::2])))

    @property
    def endpoints(self) -> tuple[float, ...]:
        return tuple(x for iv in self.intervals for x in iv)

    def contains(self, z: complex) -> bool:
        z = complex(z)
        return z.imag == 0 and any(a <= z.real <= b for a, b in self.intervals)

    def distance(self, z: complex) -> float:
        """``min |z - x|`` over ``x`` in the set."""
        z = complex(z)
        return min(abs(z - min(max(z.real, a), b)) for a, b in self.intervals)

    @cached_property
    def _s(self) -> float:
        a, b, c, d = self.endpoints
        return _two_interval_s(a, b, c, d)

    def green(self, z: complex) -> float:
        if len(self.intervals) == 1:
            (a, b), = self.intervals
            return green_single_interval(a, b, z)
        if len(self.intervals) == 2:
            return _green_two(self.endpoints, self._s, z)
        raise NotImplementedError("Green's functions are implemented for one or two intervals")


def toy_spectral_set() -> SpectralSet:
    """Spectral set of the alternating-sign mesh Hamiltonian in any dimension."""
    r = math.sqrt(2.0)
    return SpectralSet(((-r, -1.0), (1.0, r)))


def _sqrt_star(x: complex, w: complex) -> complex:
    """Square root of ``x`` on the same side as ``w``, i.e. ``Re(conj(w) s) >= 0``.

    Deciding by the sign of a product rather than by ``arg`` keeps the
    choice stable when ``x`` sits on the branch cut with a signed zero.
    """
    s = np.sqrt(complex(x))
    return s if (np.conj(w) * s).real >= 0 else -s


def green_single_interval(a: float, b: float, z: complex) -> float:
    """Green's function of ``[a, b]`` with pole at infinity."""
    if not a < b:
        raise ValueError(f"need a < b, got [{a}, {b}]")
    w = 2.0 / (b - a) * (complex(z) - (b + a) / 2.0)
    if w.imag == 0 and -1.0 <= w.real <= 1.0:
        return 0.0
    return max(0.0, math.log(abs(w + _sqrt_star(w * w - 1.0, w))))


def _quad(fun, lo, hi, what):
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            re, e1 = integrate.quad(lambda t: fun(t).real, lo, hi, epsabs=QUAD_TOL,
                                    epsrel=QUAD_TOL, limit=400)
            im, e2 = integrate.quad(lambda t: fun(t).imag, lo, hi, epsabs=QUAD_TOL,
                                    epsrel=QUAD_TOL, limit=400)
        except integrate.IntegrationWarning as exc:
            raise QuadratureError(f"quadrature for {what} did not converge: {exc}") from None
    return complex(re, im), max(e1, e2)


def _two_interval_s(a, b, c, d) -> float:
    # u = b + (c - b) sin^2(t) removes the endpoint singularities on (b, c)
    def weight(t):
        u = b + (c - b) * math.sin(t) ** 2
        return 2.0 / math.sqrt((u - a) * (d - u)), u

    num, _ = _quad(lambda t: complex(weight(t)[0] * weight(t)[1]), 0.0, math.pi / 2, "s")
    den, _ = _quad(lambda t: complex(weight(t)[0]), 0.0, math.pi / 2, "s")
    return num.real / den.real


def _green_two(ends, s, z, height: float | None = None) -> float:
    a, b, c, d = ends
    z = complex(z)
    if z.imag < 0:
        z = z.conjugate()
    if z.imag == 0 and (a <= z.real <= b or c <= z.real <= d):
        return 0.0
    if height is None:
        height = max(1.0, d - a)

    def rest(u):
        return np.sqrt(u - b) * np.sqrt(u - c) * np.sqrt(u - d)

    # leg 1: u = a + i t^2, t in [0, sqrt(height)]
    phase = 2j * np.exp(-1j * np.pi / 4)

    def leg1(t):
        u = a + 1j * t * t
        return phase * (s - u) / rest(u)

    top = a + 1j * height

    # leg 2: u = z + (top - z) t^2 runs from top (t = 1) to z (t = 0); the
    # quadratic clustering at z absorbs a nearby endpoint singularity
    def leg2(t):
        u = z + (top - z) * t * t
        return -2.0 * t * (top - z) * (s - u) / (np.sqrt(u - a) * rest(u))

    i1, _ = _quad(leg1, 0.0, math.sqrt(height), "the vertical leg")
    i2, _ = _quad(leg2, 0.0, 1.0, "the leg to z")
    # principal square roots along an upper half-plane path give -g
    return max(0.0, -(i1 + i2).real)


def green_two_intervals(a: float, b: float, c: float, d: float, z: complex,
                        height: float | None = None) -> float:
    """Green's function of ``[a, b] U [c, d]`` by quadrature.

    The integral runs from ``a`` up to ``a + i*height`` and then straight to
    ``z`` (reflected into the upper half-plane).  ``height`` only selects the
    path; the value does not depend on it.
    """
    if not a < b < c < d:
        raise ValueError(f"need a < b < c < d, got {a}, {b}, {c}, {d}")
    return _green_two((a, b, c, d), _two_interval_s(a, b, c, d), z, height)


def predicted_bounds(a: SparseSymmetric, spectral: SpectralSet, z: complex, mode: str,
                     pattern: FillPattern | None = None) -> np.ndarray:
    """Rate bound ``exp(-g d)`` with ``d`` the graph distance or the level of fill.

    ``mode="inverse"`` returns an ``(n, n)`` array, or values at the lower
    entries of ``pattern`` when one is given.  ``mode="factor"`` needs the
    pattern and returns values aligned with ``pattern.indices``.
    """
    if spectral.contains(z):
        raise ValueError(f"z = {z} lies in the spectral set")
    g = spectral.green(z)
    if mode == "inverse":
        dist = all_pairs_distance(a)
        out = np.exp(-g * dist)
        if pattern is not None:
            return out[pattern.indices, pattern.col_of]
        return out
    if mode == "factor":
        if pattern is None:
            raise ValueError("mode='factor' needs a fill pattern with levels")
        return np.exp(-g * pattern.levels.astype(float))
    raise ValueError(f"mode must be 'inverse' or 'factor', got {mode!r}")


@dataclass(frozen=True)
class DecayFit:
    distances: np.ndarray
    maxima: np.ndarray
    rate: float
    slope: float
    intercept: float
    fit_range: tuple[int, int]
    residual: float

    def rows(self):
        for k, v in zip(self.distances.tolist(), self.maxima.tolist()):
            yield k, v


def bin_maxima(magnitudes, distances, floor: float = MAGNITUDE_FLOOR):
    """Largest magnitude per integer distance, dropping infinite distances
    and bins whose maximum is below ``floor``."""
    mag = np.abs(np.asarray(magnitudes, dtype=complex)).ravel()
    dist = np.asarray(distances, dtype=float).ravel()
    if mag.shape != dist.shape:
        raise ValueError("magnitudes and distances must have the same shape")
    ok = np.isfinite(dist)
    k = dist[ok].astype(np.int64)
    m = mag[ok]
    if k.size == 0:
        return np.zeros(0, dtype=np.int64), np.zeros(0)
    best = np.zeros(k.max() + 1)
    seen = np.zeros(k.max() + 1, dtype=bool)
    np.maximum.at(best, k, m)
    seen[k] = True
    keep = seen & (best >= floor)
    ks = np.flatnonzero(keep)
    return ks, best[ks]


def fit_decay_rate(magnitudes, distances, fit_range: tuple[int, int] | None = None,
                   floor: float = MAGNITUDE_FLOOR, min_bins: int = 5) -> DecayFit:
    """Least-squares exponential rate of the per-distance maxima.

    The slope of ``log(max |entry|)`` against distance is fitted over the
    bins inside ``fit_range`` (inclusive); the rate is the negated slope,
    clipped at zero.
    """
    ks, vals = bin_maxima(magnitudes, distances, floor)
    lo, hi = fit_range if fit_range is not None else (int(ks.min(initial=0)), int(ks.max(initial=0)))
    sel = (ks >= lo) & (ks <= hi)
    if np.count_nonzero(sel) < min_bins:
        raise InsufficientBins(
            f"only {np.count_nonzero(sel)} distance bins above {floor:g} in [{lo}, {hi}]; "
            f"need {min_bins}"
        )
    x = ks[sel].astype(float)
    y = np.log(vals[sel])
    (slope, intercept), res, *_ = np.polyfit(x, y, 1, full=True)
    residual = float(res[0]) if res.size else 0.0
    return DecayFit(ks, vals, max(0.0, -float(slope)), float(slope), float(intercept),
                    (lo, hi), residual)
