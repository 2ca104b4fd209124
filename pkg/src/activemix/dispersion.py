"""Penrose-type stability analysis of the inviscid mode equation.

The dispersion function is

    F(lambda) = -(3/4) int_{-1}^{1} z^2 (1 - z^2) / (lambda + i z) dz,   Re lambda > 0,

and an unstable eigenmode exists exactly when ``F`` takes the value
``eps / gamma`` in the right half-plane.  By the argument principle those
values are the points encircled by the boundary curve ``b -> F(i b)``.
"""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .errors import ConvergenceError, DomainError

__all__ = [
    "CriticalConstants",
    "DispersionScan",
    "pv_integral",
    "cauchy_integral",
    "boundary_F",
    "halfplane_F",
    "halfplane_F_closed",
    "find_bc",
    "gamma_from_bc",
    "curve_samples",
    "winding_number",
    "spectral_condition",
    "find_unstable_root",
    "write_curve_csv",
    "MARGINAL_TOL",
]

MARGINAL_TOL = 1e-8
REFERENCE_BC = 0.62375  # published four-digit value, used by the CLI self-check


def _pv_closed(b):
    b = np.asarray(b, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        log = np.log(np.abs((1.0 - b) / (1.0 + b)))
        tail = np.where(np.abs(b) == 1.0, 0.0, (b**4 - b**2) * log)
    return 2.0 * b**3 - 4.0 / 3.0 * b + tail


def pv_integral(b):
    """Principal value ``PV int_{-1}^{1} z^2 (1 - z^2) / (b + z) dz`` for ``|b| < 1``."""
    arr = np.asarray(b, dtype=float)
    if np.any(np.abs(arr) >= 1.0):
        raise DomainError("pv_integral needs |b| < 1")
    out = _pv_closed(arr)
    return out if out.ndim else float(out)


def cauchy_integral(b):
    """``int_{-1}^{1} z^2 (1 - z^2) / (b + z) dz`` for any real ``b`` (PV inside).

    The same closed form holds on both sides of ``|b| = 1``; the log
    singularity at ``b = +-1`` is cancelled by ``b^4 - b^2``.
    """
    out = _pv_closed(b)
    return out if out.ndim else float(out)


def _pv_derivative(b):
    return 8.0 * b * b - 4.0 / 3.0 + (4.0 * b**3 - 2.0 * b) * math.log((1.0 - b) / (1.0 + b))


def boundary_F(b):
    """``F(i b)``: real part ``-(3 pi/4) b^2 (1-b^2)`` inside ``|b| < 1``, plus ``(3i/4)`` times the integral."""
    b = np.asarray(b, dtype=float)
    re = np.where(np.abs(b) < 1.0, -0.75 * np.pi * b**2 * (1.0 - b**2), 0.0)
    out = re + 0.75j * _pv_closed(b)
    return out if out.ndim else complex(out)


def _q(z):
    return z * z * (1.0 - z * z)


def halfplane_F(lam: complex, epsabs: float = 1e-13) -> complex:
    """``F(lambda)`` for ``Re lambda > 0`` by adaptive quadrature."""
    lam = complex(lam)
    if lam.real <= 0:
        raise DomainError("halfplane_F needs Re(lambda) > 0")
    a, b = lam.real, lam.imag
    # 1/(lam + i z) = (a - i (b + z)) / (a^2 + (b + z)^2)
    pts = [-b] if -1.0 < -b < 1.0 else None
    opts = dict(epsabs=epsabs, epsrel=1e-13, limit=400, points=pts)
    re = integrate.quad(lambda z: _q(z) * a / (a * a + (b + z) ** 2), -1.0, 1.0, **opts)[0]
    im = integrate.quad(lambda z: -_q(z) * (b + z) / (a * a + (b + z) ** 2), -1.0, 1.0, **opts)[0]
    return -0.75 * complex(re, im)


def _halfplane_dF(lam: complex) -> complex:
    """``F'(lambda) = (3/4) int q(z) / (lambda + i z)^2 dz``."""
    a, b = lam.real, lam.imag
    pts = [-b] if -1.0 < -b < 1.0 else None
    opts = dict(epsabs=1e-13, epsrel=1e-12, limit=400, points=pts)

    def part(z, which):
        w = 1.0 / complex(a, b + z) ** 2
        return _q(z) * (w.real if which == 0 else w.imag)

    with warnings.catch_warnings():
        # only steers Newton; roundoff warnings near the axis are harmless here
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        re = integrate.quad(part, -1.0, 1.0, args=(0,), **opts)[0]
        im = integrate.quad(part, -1.0, 1.0, args=(1,), **opts)[0]
    return 0.75 * complex(re, im)


def halfplane_F_closed(lam: complex) -> complex:
    """Closed form of :func:`halfplane_F` (polynomial division plus a complex log)."""
    w = -1j * complex(lam)  # F = (3i/4) int q(z)/(z + w) dz
    logs = np.log(1.0 + w) - np.log(w - 1.0)
    return complex(0.75j * (2.0 * w**3 - 4.0 / 3.0 * w + (w**2 - w**4) * logs))


@dataclass(frozen=True)
class CriticalConstants:
    b_c: float
    gamma_c: float


def gamma_from_bc(b_c: float) -> float:
    return 4.0 / (3.0 * math.pi * b_c**2 * (1.0 - b_c**2))


def find_bc(lo: float = 0.1, hi: float = 0.99, tol: float = 1e-13) -> CriticalConstants:
    """Positive root of the principal-value integral, by bisection then Newton."""
    flo = _pv_closed(lo)
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        fm = _pv_closed(mid)
        if np.sign(fm) == np.sign(flo):
            lo, flo = mid, fm
        else:
            hi = mid
        if hi - lo < 1e-6:
            break
    b = 0.5 * (lo + hi)
    for _ in range(50):
        step = float(_pv_closed(b)) / _pv_derivative(b)
        b -= step
        if abs(step) < tol:
            break
    return CriticalConstants(b, gamma_from_bc(b))


# ---------------------------------------------------------------------------
# winding number
# ---------------------------------------------------------------------------


def curve_samples(n_base: int = 4096, b_c: float | None = None, tail_max: float = 1e6) -> np.ndarray:
    """Sample points ``b`` covering the whole imaginary axis.

    Inside ``|b| < 1`` a tanh map clusters nodes at ``+-1``; extra nodes
    cluster around ``+-b_c``; the tails are geometric out to ``tail_max``.
    """
    b_c = find_bc().b_c if b_c is None else b_c
    s = np.linspace(-1.0, 1.0, n_base)
    inner = np.tanh(4.0 * s) / np.tanh(4.0)
    inner = inner[1:-1]
    near = b_c + np.tanh(np.linspace(-3.0, 3.0, n_base // 8)) * 0.05
    tail = 1.0 + np.geomspace(1e-12, tail_max, n_base // 4)
    b = np.concatenate([inner, near, -near, tail, -tail, [-1.0, 1.0, -b_c, 0.0, b_c]])
    return np.unique(b)


def winding_number(values: np.ndarray, point: complex) -> int:
    """Winding number of the closed polygon ``values`` about ``point``."""
    d = np.asarray(values) - point
    ang = np.angle(np.append(d[1:], d[:1]) / d)
    return int(round(ang.sum() / (2.0 * np.pi)))


def _distance_to_polygon(values: np.ndarray, point: complex) -> float:
    a = np.asarray(values)
    b = np.append(a[1:], a[:1])
    ab = b - a
    denom = np.abs(ab) ** 2
    with np.errstate(invalid="ignore", divide="ignore"):
        s = np.clip(np.real((point - a) * np.conj(ab)) / denom, 0.0, 1.0)
    s = np.where(denom > 0, s, 0.0)
    return float(np.min(np.abs(a + s * ab - point)))


@dataclass
class DispersionScan:
    gamma: float
    swimmer_sign: int
    b_samples: np.ndarray
    F_values: np.ndarray
    winding_number: int
    verdict: str
    distance: float
    roots: list = field(default_factory=list)

    @property
    def point(self) -> complex:
        return self.swimmer_sign / self.gamma


def spectral_condition(gamma: float, swimmer_sign: int, n_base: int = 4096, max_doublings: int = 4):
    """Stability verdict (``"stable"``, ``"unstable"`` or ``"marginal"``) and the scan.

    The winding number of ``b -> F(i b)`` about ``eps / gamma`` is recomputed
    with doubled sampling until two consecutive values agree.
    """
    if not gamma > 0:
        raise DomainError("spectral_condition needs gamma > 0")
    if swimmer_sign not in (1, -1):
        raise DomainError("swimmer_sign must be +1 or -1")
    point = swimmer_sign / gamma
    tail_max = max(1e6, 1e3 * gamma)
    bc = find_bc().b_c
    prev = None
    n = n_base
    for _ in range(max_doublings + 1):
        b = curve_samples(n, bc, tail_max)
        F = boundary_F(b)
        wn = winding_number(F, point)
        if wn == prev:
            break
        prev = wn
        n *= 2
    dist = _distance_to_polygon(F, point)
    if dist < MARGINAL_TOL:
        verdict = "marginal"
    else:
        verdict = "stable" if wn == 0 else "unstable"
    return verdict, DispersionScan(gamma, swimmer_sign, b, F, wn, verdict, dist)


def find_unstable_root(gamma: float, swimmer_sign: int = -1, max_iter: int = 200, tol: float = 1e-10):
    """Root of ``F(lambda) = eps / gamma`` with ``Re lambda > 0`` and ``Im lambda >= 0``.

    Returns ``None`` when the spectral condition holds.  Newton's method is
    seeded from a coarse scan of ``|F - eps/gamma|`` above ``i b_c``.
    """
    verdict, _ = spectral_condition(gamma, swimmer_sign)
    if verdict != "unstable":
        return None
    target = swimmer_sign / gamma
    bc = find_bc().b_c
    best, seed = np.inf, complex(1e-3, bc)
    for a in np.geomspace(1e-3, 2.0, 24):
        for b in np.linspace(0.0, 1.2, 25):
            val = abs(halfplane_F_closed(complex(a, b)) - target)
            if val < best:
                best, seed = val, complex(a, b)
    lam = seed
    for _ in range(max_iter):
        res = halfplane_F(lam) - target
        if abs(res) < tol:
            break
        step = res / _halfplane_dF(lam)
        new = lam - step
        while new.real <= 0:  # stay in the half-plane where F is defined
            step *= 0.5
            new = lam - step
        lam = new
    else:
        raise ConvergenceError("Newton iteration for the unstable root did not converge", last=lam)
    if abs(halfplane_F(lam) - target) >= tol:
        raise ConvergenceError("unstable root residual above tolerance", last=lam)
    return complex(lam.real, abs(lam.imag))


def write_curve_csv(path, scan: DispersionScan) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["b", "reF", "imF"])
        for b, F in zip(scan.b_samples, scan.F_values):
            w.writerow([repr(float(b)), repr(float(F.real)), repr(float(F.imag))])
