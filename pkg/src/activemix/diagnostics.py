"""Measurement tools: hypocoercive energy, interpolation gap, adapted vector
field, oscillatory integrals over the sphere, and decay-rate fitters."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from . import harmonics as hm
from .errors import ConfigurationError, DomainError, InsufficientDataError

__all__ = [
    "EnergyConstants",
    "CutoffSpec",
    "FitReport",
    "energy",
    "energy_lower_bound",
    "interpolation_gap",
    "alpha_beta",
    "vector_field_norms",
    "clenshaw_curtis",
    "oscillatory_integral",
    "windowed_maxima",
    "fit_power_law",
    "fit_exponential",
    "scaling_slope",
    "half_life",
    "hypo_b0",
]


@dataclass(frozen=True)
class EnergyConstants:
    """Weights of the time-dependent energy, ``a = b^(2/3)``, ``c = 32 b^2 / a``."""

    b: float = 0.01

    def __post_init__(self):
        if not 0 < self.b < 1:
            raise DomainError("b must lie in (0, 1)")

    @property
    def a(self) -> float:
        return self.b ** (2.0 / 3.0)

    @property
    def c(self) -> float:
        return 32.0 * self.b**2 / self.a

    @property
    def growth_constant(self) -> float:
        """``16 b^2 / a + 2 c``, the coefficient of ``nu^2 t^3 ||psi||^2`` in the energy bound."""
        return 16.0 * self.b**2 / self.a + 2.0 * self.c


def hypo_b0(delta: float = 1.0) -> float:
    """Largest ``b`` with ``(3/2 + 2 delta) 16 b^(4/3) + 2 b^(4/3) + 8 b^2 <= b / 2``."""
    def excess(b):
        return (1.5 + 2 * delta) * 16 * b ** (4 / 3) + 2 * b ** (4 / 3) + 8 * b * b - 0.5 * b

    lo, hi = 1e-18, 1.0
    for _ in range(200):
        mid = math.sqrt(lo * hi)
        if excess(mid) <= 0:
            lo = mid
        else:
            hi = mid
    return lo


def _parts(field, grid):
    if grid is None:
        grid = hm.QuadratureGrid.for_field(field.lmax + 1, field.mmax, extra=1)
    return (field.norm(), hm.grad_norm(field), hm.sin_weighted_norm(field, grid),
            hm.mixed_inner(field, grid))


def energy(field: hm.SphericalField, t: float, nu: float, constants: EnergyConstants = EnergyConstants(),
           grid: hm.QuadratureGrid | None = None) -> float:
    """``E = 1/2 [||psi||^2 + a nu t ||grad psi||^2 + 2 b nu t^2 mixed + c nu t^3 ||sin psi||^2]``."""
    if t < 0 or nu < 0:
        raise DomainError("energy needs t >= 0 and nu >= 0")
    l2, g, s, mixed = _parts(field, grid)
    k = constants
    return 0.5 * (l2**2 + k.a * nu * t * g**2 + 2 * k.b * nu * t**2 * mixed + k.c * nu * t**3 * s**2)


def energy_lower_bound(field, t, nu, constants=EnergyConstants(), grid=None) -> float:
    """Coercivity floor ``1/2 [||psi||^2 + (a nu t/2)||grad psi||^2 + (c nu t^3/2)||sin psi||^2]``."""
    l2, g, s, _ = _parts(field, grid)
    k = constants
    return 0.5 * (l2**2 + 0.5 * k.a * nu * t * g**2 + 0.5 * k.c * nu * t**3 * s**2)


def interpolation_gap(g: hm.SphericalField, sigma: float, grid: hm.QuadratureGrid | None = None) -> float:
    """``sigma/2 ||grad g||^2 + 2 ||grad(p.e) g||^2 - sigma^(1/2) ||g||^2`` (non-negative)."""
    if not 0 < sigma <= 1:
        raise DomainError("sigma must lie in (0, 1]")
    if grid is None:
        grid = hm.QuadratureGrid.for_field(g.lmax, g.mmax, extra=1)
    sw = hm.sin_weighted_norm(g, grid)
    return 0.5 * sigma * hm.grad_norm(g) ** 2 + 2.0 * sw**2 - math.sqrt(sigma) * g.norm() ** 2


def alpha_beta(nu: float, t):
    """Coefficients of the viscosity-adapted vector field.

    ``alpha = cosh(s t)``, ``beta = sinh(s t) / s`` with ``s = sqrt(-2 i nu)``
    (principal branch), so ``beta' = alpha`` and ``alpha' = -2 i nu beta``.
    """
    t = np.asarray(t, dtype=float)
    if nu < 0 or np.any(t < 0):
        raise DomainError("alpha_beta needs nu >= 0 and t >= 0")
    if nu == 0:
        alpha, beta = np.ones_like(t, dtype=complex), t.astype(complex)
    else:
        s = np.sqrt(-2j * nu)
        alpha = np.cosh(s * t)
        beta = np.sinh(s * t) / s
    if alpha.ndim == 0:
        return complex(alpha), complex(beta)
    return alpha, beta


@dataclass(frozen=True)
class CutoffSpec:
    """Polar cutoff: 1 for ``theta <= theta1``, 0 for ``theta >= theta2``, quintic blend."""

    theta1: float = math.pi / 2
    theta2: float = 3 * math.pi / 4

    def __post_init__(self):
        if not 0 <= self.theta1 < self.theta2 <= math.pi:
            raise DomainError("cutoff needs 0 <= theta1 < theta2 <= pi")

    def __call__(self, theta):
        s = np.clip((np.asarray(theta) - self.theta1) / (self.theta2 - self.theta1), 0.0, 1.0)
        return 1.0 - s**3 * (10.0 - 15.0 * s + 6.0 * s * s)


def _dphi(field: hm.SphericalField) -> hm.SphericalField:
    return field.with_coeffs(1j * field.orders * field.coeffs)


def vector_field_norms(field: hm.SphericalField, nu: float, t: float, cutoff: CutoffSpec = CutoffSpec(),
                       grid: hm.QuadratureGrid | None = None):
    """Norms of ``X = alpha grad psi + i beta grad(p.e) psi``.

    Returns ``(||X chi||, ||X||, max |X| over theta <= theta1)``.
    """
    if grid is None:
        grid = hm.QuadratureGrid.for_field(field.lmax + 1, field.mmax, extra=8)
    grid.check(field.lmax + 1, field.mmax)
    alpha, beta = alpha_beta(nu, t)
    st = grid.sin_theta[:, None]
    psi = hm.synthesize(field, grid)
    d_theta = hm.synthesize(hm.apply_sin_dtheta(field), grid) / st
    d_phi = hm.synthesize(_dphi(field), grid) / st
    # grad(p.e) = -sin(theta) e_theta
    x_theta = alpha * d_theta - 1j * beta * st * psi
    x_phi = alpha * d_phi
    mag2 = np.abs(x_theta) ** 2 + np.abs(x_phi) ** 2
    chi = cutoff(grid.theta)[:, None]
    norm_chi = math.sqrt(max(float(grid.integrate(chi**2 * mag2).real), 0.0))
    norm = math.sqrt(max(float(grid.integrate(mag2).real), 0.0))
    window = grid.theta <= cutoff.theta1
    pole_max = float(np.sqrt(mag2[window].max())) if window.any() else 0.0
    return norm_chi, norm, pole_max


# ---------------------------------------------------------------------------
# oscillatory integrals
# ---------------------------------------------------------------------------


def clenshaw_curtis(n: int):
    """Nodes and weights of the ``(n+1)``-point Clenshaw-Curtis rule on ``[-1, 1]``."""
    if n < 1:
        raise DomainError("Clenshaw-Curtis needs n >= 1")
    k = np.arange(n + 1)
    x = np.cos(np.pi * k / n)
    w = np.zeros(n + 1)
    for i in k:
        acc = 1.0
        for j in range(1, n // 2 + 1):
            bj = 1.0 if 2 * j == n else 2.0
            acc -= bj * math.cos(2 * j * i * math.pi / n) / (4 * j * j - 1)
        w[i] = acc * (1.0 if i in (0, n) else 2.0) / n
    return x, w


_CC_ORDER = 32
_CC = clenshaw_curtis(_CC_ORDER)


def _required_panels(t: float, lmax: int) -> int:
    return int(math.ceil((abs(t) + lmax) / 8.0)) + 1


def oscillatory_integral(F: hm.SphericalField, t: float, panels: int | None = None) -> complex:
    """``I(t) = int_{S^2} e^{i t p.e} F(p) dp``.

    With ``dp = d(gamma) dz`` the azimuthal integral keeps only ``m = 0``,
    leaving ``int_{-1}^{1} e^{i z t} F0(z) dz`` with ``F0 = 2 pi sum a_l0 P_l(z)``.
    That 1-D integral uses composite Clenshaw-Curtis with panels growing with ``t``.
    """
    need = _required_panels(t, F.lmax)
    if panels is None:
        panels = need
    elif panels < need:
        raise ConfigurationError(f"{panels} panels under-resolve t={t}, lmax={F.lmax}; need {need}")
    x, w = _CC
    edges = np.linspace(-1.0, 1.0, panels + 1)
    mid = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * (edges[1:] - edges[:-1])
    z = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    wz = (half[:, None] * w[None, :]).ravel()
    P = hm.normalized_legendre(F.lmax, 0, z)[0]
    f0 = 2.0 * np.pi * (F.block(0) @ P)
    return complex(np.sum(wz * np.exp(1j * t * z) * f0))


# ---------------------------------------------------------------------------
# fits
# ---------------------------------------------------------------------------


@dataclass
class FitReport:
    """Least-squares fit of a decay law on a time window."""

    window: tuple
    model: str
    exponent_or_rate: float
    amplitude: float
    residual: float
    channel: str = ""
    n_points: int = 0

    @property
    def acceptable(self) -> bool:
        return math.isfinite(self.residual) and self.residual <= 0.1

    def to_dict(self) -> dict:
        d = asdict(self)
        d["window"] = list(self.window)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def windowed_maxima(t, y, window, period: float = 2 * math.pi):
    """Maxima of ``y`` over consecutive windows of length ``period`` inside ``window``."""
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    t0, t1 = window
    ts, ys = [], []
    start = t0
    while start + period <= t1 + 1e-9:
        m = (t >= start) & (t < start + period)
        if m.any():
            i = np.argmax(y[m])
            ts.append(t[m][i])
            ys.append(y[m][i])
        start += period
    return np.array(ts), np.array(ys)


def _select(t, y, window, envelope, period, log_correction=False):
    t = np.asarray(t, dtype=float)
    y = np.abs(np.asarray(y, dtype=float))
    t0, t1 = window
    if not t1 > t0 >= 0:
        raise DomainError("fit window needs t1 > t0 >= 0")
    if log_correction:
        y = y / np.log(2.0 + t)
    if envelope:
        t, y = windowed_maxima(t, y, window, period)
    else:
        m = (t >= t0) & (t <= t1)
        t, y = t[m], y[m]
    ok = y > 0
    t, y = t[ok], y[ok]
    if t.size < 8:
        raise InsufficientDataError(f"only {t.size} usable points in window {window}")
    return t, y


def _linfit(x, ly):
    slope, icpt = np.polyfit(x, ly, 1)
    resid = ly - (slope * x + icpt)
    return slope, icpt, float(np.sqrt(np.mean(resid**2)))


def fit_power_law(t, y, window, envelope: bool = False, period: float = 2 * math.pi,
                  log_correction: bool = False, channel: str = "") -> FitReport:
    """Fit ``y ~ A (1+t)^-p``; reports ``p`` (positive for decay).

    ``log_correction`` divides by ``ln(2+t)`` first; ``envelope`` fits the
    windowed maxima instead of the raw samples.
    """
    ts, ys = _select(t, y, window, envelope, period, log_correction)
    slope, icpt, res = _linfit(np.log1p(ts), np.log(ys))
    model = "power_log" if log_correction else "power"
    return FitReport(tuple(float(w) for w in window), model, -slope, math.exp(icpt), res, channel, ts.size)


def fit_exponential(t, y, window, envelope: bool = False, period: float = 2 * math.pi,
                    channel: str = "") -> FitReport:
    """Fit ``y ~ A exp(-r t)``; reports ``r`` (negative for growth)."""
    ts, ys = _select(t, y, window, envelope, period)
    slope, icpt, res = _linfit(ts, np.log(ys))
    return FitReport(tuple(float(w) for w in window), "exponential", -slope, math.exp(icpt), res, channel,
                     ts.size)


def scaling_slope(x, y) -> float:
    """Slope of ``log y`` against ``log x``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 2:
        raise InsufficientDataError("scaling slope needs at least two points")
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def half_life(t, y) -> float:
    """First time ``y`` falls to half its initial value (linear interpolation)."""
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    target = 0.5 * y[0]
    below = np.nonzero(y <= target)[0]
    if below.size == 0:
        return math.inf
    i = below[0]
    if i == 0:
        return float(t[0])
    return float(t[i - 1] + (y[i - 1] - target) * (t[i] - t[i - 1]) / (y[i - 1] - y[i]))
