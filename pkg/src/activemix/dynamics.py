"""Time evolution of a single Fourier mode of the linearized suspension model.

In the frame ``k = e`` the mode ``psi(t, p)`` obeys

    d/dt psi = L1 psi + L2bar . u[psi],    L1 = -i cos(theta) + nu * Laplace_p,

with the velocity moment ``u`` and forcing profile ``L2bar`` from
:mod:`activemix.harmonics`.  ``L1`` is advanced by Crank-Nicolson on the
block-tridiagonal coefficient matrix; the rank-two forcing is added with an
explicit midpoint predictor.
"""
from __future__ import annotations

import csv
import functools
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy import integrate
from scipy.linalg import lapack

from . import harmonics as hm
from .errors import ConfigurationError, ConsistencyError, DivergedRunError, DomainError

__all__ = [
    "PhysicalParams",
    "ModeConfig",
    "Trace",
    "rescale",
    "resolution_floor",
    "default_datum",
    "random_datum",
    "SemigroupStepper",
    "thomas_solve",
    "step_semigroup",
    "pointwise_inviscid",
    "evolve_free",
    "evolve_coupled",
    "build_source",
    "build_kernel",
    "analytic_inviscid_kernel",
    "default_kernel_horizon",
    "DIVERGENCE_THRESHOLD",
]

DIVERGENCE_THRESHOLD = 1e12
MAX_DT = 0.1


# ---------------------------------------------------------------------------
# parameters
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PhysicalParams:
    """Dimensional parameters before rescaling."""

    swim_speed: float
    wavenumber: float
    aspect_factor: float
    stress_amplitude: float
    diffusion: float = 0.0
    torus_size: float = 2.0 * np.pi

    def __post_init__(self):
        if self.wavenumber == 0:
            raise DomainError("the k = 0 mode is pure heat flow; need |k| > 0")
        if self.swim_speed <= 0 or self.wavenumber < 0 or self.torus_size <= 0:
            raise ConfigurationError("swim speed, |k| and torus size must be positive")
        if not 0 < self.aspect_factor <= 1:
            raise ConfigurationError("aspect factor must lie in (0, 1]")
        if self.stress_amplitude == 0:
            raise ConfigurationError("stress amplitude must be nonzero")
        if self.diffusion < 0:
            raise ConfigurationError("diffusion must be non-negative")

    @property
    def gamma_bound(self) -> float:
        """Largest coupling over all modes on the torus (``|k| >= 2 pi / L``)."""
        return self.aspect_factor * abs(self.stress_amplitude) * self.torus_size / (
            2.0 * np.pi * self.swim_speed
        )


def rescale(phys: PhysicalParams) -> dict:
    """Dimensionless ``gamma``, ``nu`` and swimmer sign of one mode."""
    scale = phys.swim_speed * abs(phys.wavenumber)
    if scale == 0:
        raise DomainError("|k| must be nonzero")
    gamma = phys.aspect_factor * abs(phys.stress_amplitude) / scale
    if not math.isfinite(gamma):
        raise ConfigurationError("derived coupling is not finite")
    return {
        "gamma": gamma,
        "nu": phys.diffusion / scale,
        "swimmer_sign": 1 if phys.stress_amplitude > 0 else -1,
    }


def resolution_floor(t_end: float, nu: float) -> float:
    """Minimum ``lmax`` for a run to ``t_end``.

    Free transport to time ``T`` fills degrees up to about ``T``; diffusion
    caps the filamentation near ``nu^-1/2``.
    """
    if nu <= 0:
        return 1.5 * t_end + 32.0
    return min(1.5 * t_end, 4.0 / math.sqrt(nu)) + 32.0


def default_kernel_horizon(nu: float) -> float:
    return 200.0 if nu <= 0 else 3.0 / math.sqrt(nu)


@dataclass(frozen=True)
class ModeConfig:
    gamma: float
    nu: float
    swimmer_sign: int
    lmax: int
    mmax: int = 2
    dt: float = 5e-3
    t_end: float = 10.0
    output_stride: int = 1
    sobolev_exponents: tuple = (-1.5,)
    energy_b: float = 0.01

    def __post_init__(self):
        object.__setattr__(self, "sobolev_exponents", tuple(float(s) for s in self.sobolev_exponents))
        if self.gamma < 0:
            raise ConfigurationError("gamma must be >= 0")
        if self.nu < 0:
            raise ConfigurationError("nu must be >= 0")
        if self.swimmer_sign not in (1, -1):
            raise ConfigurationError("swimmer_sign must be +1 or -1")
        if not 0 < self.dt <= MAX_DT:
            raise ConfigurationError(f"dt must lie in (0, {MAX_DT}]")
        if self.t_end <= 0:
            raise ConfigurationError("t_end must be positive")
        if self.output_stride < 1:
            raise ConfigurationError("output_stride must be >= 1")
        if self.mmax < 1:
            raise ConfigurationError("mmax must be >= 1 to carry the velocity moment")
        floor = max(2.0, resolution_floor(self.t_end, self.nu))
        if self.lmax < floor:
            raise ConfigurationError(
                f"lmax={self.lmax} below the resolution floor {floor:.1f} "
                f"for t_end={self.t_end}, nu={self.nu}"
            )

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))

    @property
    def sample_dt(self) -> float:
        return self.dt * self.output_stride

    def times(self) -> np.ndarray:
        n = self.n_steps // self.output_stride
        return self.sample_dt * np.arange(n + 1)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["sobolev_exponents"] = list(self.sobolev_exponents)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModeConfig":
        known = {k: d[k] for k in cls.__dataclass_fields__ if k in d}
        return cls(**known)


def default_datum(lmax: int = 2, mmax: int = 2) -> hm.SphericalField:
    """Unit-norm multiple of ``sin(theta) cos(theta) cos(phi)``."""
    r = 1.0 / math.sqrt(2.0)
    return hm.SphericalField.from_dict(lmax, mmax, {(2, 1): -r, (2, -1): r})


def random_datum(lmax: int, mmax: int, seed: int, degree: int = 24) -> hm.SphericalField:
    """Seeded smooth datum with ``(1+l)^-4`` spectrum, unit norm."""
    rng = np.random.default_rng(seed)
    f = hm.SphericalField.random_smooth(min(degree, lmax), mmax, rng).resized(lmax, mmax)
    return f / f.norm()


# ---------------------------------------------------------------------------
# Crank-Nicolson semigroup
# ---------------------------------------------------------------------------


def thomas_solve(lower, diag, upper, rhs):
    """Reference Thomas algorithm for a tridiagonal system (no pivoting).

    ``lower[i]`` multiplies ``x[i]`` in row ``i+1``; ``upper[i]`` multiplies
    ``x[i+1]`` in row ``i``.
    """
    n = len(diag)
    dtype = np.result_type(lower, diag, upper, rhs)
    cp = np.zeros(n, dtype=dtype)
    dp = np.zeros(n, dtype=dtype)
    cp[0] = upper[0] / diag[0] if n > 1 else 0
    dp[0] = rhs[0] / diag[0]
    for i in range(1, n):
        denom = diag[i] - lower[i - 1] * cp[i - 1]
        if i < n - 1:
            cp[i] = upper[i] / denom
        dp[i] = (rhs[i] - lower[i - 1] * dp[i - 1]) / denom
    x = np.zeros(n, dtype=dtype)
    x[-1] = dp[-1]
    for i in range(n - 2, -1, -1):
        x[i] = dp[i] - cp[i] * x[i + 1]
    return x


class SemigroupStepper:
    """Prefactored Crank-Nicolson step for ``exp(dt L1)`` on a fixed layout.

    The block-diagonal (in ``m``) tridiagonal system is factored once with
    LAPACK ``zgttrf``; each step is a tridiagonal matvec plus ``zgttrs``.
    """

    def __init__(self, lmax: int, mmax: int, nu: float, dt: float, advection: bool = True):
        self.lmax, self.mmax, self.nu, self.dt = lmax, mmax, nu, dt
        ls, ms, offs = hm._layout(lmax, mmax)
        self.size = ls.size
        self.offsets = offs
        c = hm.cos_offdiagonal(lmax, mmax) if advection else np.zeros(self.size - 1)
        diff = -nu * ls * (ls + 1.0)
        h = 0.5 * dt
        self.adv_off = -1j * c
        self.diff_diag = diff
        self.rhs_diag = (1.0 + h * diff).astype(complex)
        self.rhs_off = h * self.adv_off
        lhs_diag = (1.0 - h * diff).astype(complex)
        lhs_off = -h * self.adv_off
        dl, d, du, du2, ipiv, info = lapack.zgttrf(lhs_off.copy(), lhs_diag, lhs_off.copy())
        if info != 0:
            raise ConsistencyError(f"Crank-Nicolson matrix is singular (info={info})")
        self._lu = (dl, d, du, du2, ipiv)

    def apply_generator(self, x: np.ndarray) -> np.ndarray:
        """``L1 x`` within the truncated basis."""
        y = self.diff_diag * x
        y[:-1] += self.adv_off * x[1:]
        y[1:] += self.adv_off * x[:-1]
        return y

    def explicit_half(self, x: np.ndarray) -> np.ndarray:
        """``(I + dt/2 L1) x``."""
        y = self.rhs_diag * x
        y[:-1] += self.rhs_off * x[1:]
        y[1:] += self.rhs_off * x[:-1]
        return y

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        x, info = lapack.zgttrs(*self._lu, rhs)
        if info != 0:
            raise ConsistencyError(f"zgttrs failed (info={info})")
        return x

    def step(self, x: np.ndarray) -> np.ndarray:
        return self.solve(self.explicit_half(x))


@functools.lru_cache(maxsize=16)
def _stepper(lmax, mmax, nu, dt, advection=True) -> SemigroupStepper:
    return SemigroupStepper(lmax, mmax, nu, dt, advection)


def step_semigroup(field: hm.SphericalField, nu: float, dt: float, advection: bool = True):
    """One Crank-Nicolson step of ``exp(dt L1)``.

    ``advection=False`` switches off the ``-i cos(theta)`` term (pure heat flow).
    """
    st = _stepper(field.lmax, field.mmax, float(nu), float(dt), bool(advection))
    return field.with_coeffs(st.step(np.array(field.coeffs)))


def pointwise_inviscid(field: hm.SphericalField, t: float, grid: hm.QuadratureGrid | None = None,
                       lmax: int | None = None) -> hm.SphericalField:
    """Exact ``nu = 0`` free evolution: multiply by ``exp(-i t cos(theta))``.

    The product is projected back onto degrees ``<= lmax`` (default: the
    input ``lmax``) by quadrature.
    """
    lmax = field.lmax if lmax is None else lmax
    need = max(lmax, field.lmax) + int(math.ceil(abs(t))) + 16
    if grid is None:
        grid = hm.QuadratureGrid(need, 2 * min(field.mmax, field.lmax) + 1)
    if grid.n_theta < need:
        raise ConfigurationError(
            f"n_theta={grid.n_theta} cannot resolve exp(-i t cos) at t={t}; need n_theta >= {need}"
        )
    vals = hm.synthesize(field, grid) * np.exp(-1j * t * grid.z)[:, None]
    return hm.analyze(vals, grid, lmax, field.mmax)


# ---------------------------------------------------------------------------
# traces
# ---------------------------------------------------------------------------

_BASE_COLUMNS = ["t", "re_ux", "im_ux", "re_uy", "im_uy", "l2", "h1grad", "sinw", "mixed_re", "energy"]


def _sob_column(s: float) -> str:
    return f"sob_{s:g}"


@dataclass
class Trace:
    """Sampled time series of one evolution."""

    t: np.ndarray
    u: np.ndarray
    l2: np.ndarray
    h1grad: np.ndarray
    sinw: np.ndarray
    mixed_re: np.ndarray
    energy: np.ndarray
    sobolev: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        n = len(self.t)
        for name in ("u", "l2", "h1grad", "sinw", "mixed_re", "energy"):
            if len(getattr(self, name)) != n:
                raise ConsistencyError(f"trace channel {name} has wrong length")
        if n > 1 and not np.all(np.diff(self.t) > 0):
            raise ConsistencyError("trace times must be strictly increasing")

    @property
    def u_abs(self) -> np.ndarray:
        return np.linalg.norm(self.u, axis=1)

    def channel(self, name: str) -> np.ndarray:
        if name in ("u", "u_abs", "abs_u"):
            return self.u_abs
        if name.startswith("sob_"):
            return self.sobolev[float(name[4:])]
        if name in _BASE_COLUMNS:
            idx = _BASE_COLUMNS.index(name)
            if 1 <= idx <= 4:
                comp = self.u[:, (idx - 1) // 2]
                return comp.real if idx % 2 else comp.imag
            return getattr(self, name)
        raise KeyError(f"unknown trace channel {name!r}")

    def truncated(self, n: int) -> "Trace":
        return Trace(self.t[:n], self.u[:n], self.l2[:n], self.h1grad[:n], self.sinw[:n],
                     self.mixed_re[:n], self.energy[:n],
                     {s: v[:n] for s, v in self.sobolev.items()}, dict(self.meta))

    def to_csv(self, path) -> None:
        sob = sorted(self.sobolev)
        with open(path, "w", newline="") as fh:
            if self.meta:
                fh.write("# " + json.dumps(self.meta, sort_keys=True) + "\n")
            w = csv.writer(fh)
            w.writerow(_BASE_COLUMNS + [_sob_column(s) for s in sob])
            for i in range(len(self.t)):
                row = [self.t[i], self.u[i, 0].real, self.u[i, 0].imag, self.u[i, 1].real,
                       self.u[i, 1].imag, self.l2[i], self.h1grad[i], self.sinw[i],
                       self.mixed_re[i], self.energy[i]] + [self.sobolev[s][i] for s in sob]
                w.writerow([repr(float(x)) for x in row])

    @classmethod
    def from_csv(cls, path) -> "Trace":
        meta = {}
        with open(path) as fh:
            lines = fh.read().splitlines()
        if lines and lines[0].startswith("#"):
            meta = json.loads(lines[0][1:])
            lines = lines[1:]
        header = lines[0].split(",")
        data = np.array([[float(x) for x in ln.split(",")] for ln in lines[1:] if ln.strip()])
        data = data.reshape(-1, len(header))
        col = {name: data[:, i] for i, name in enumerate(header)}
        u = np.column_stack([col["re_ux"] + 1j * col["im_ux"], col["re_uy"] + 1j * col["im_uy"]])
        sob = {float(n[4:]): col[n] for n in header if n.startswith("sob_")}
        return cls(col["t"], u, col["l2"], col["h1grad"], col["sinw"], col["mixed_re"],
                   col["energy"], sob, meta)


class _Sampler:
    """Spectral diagnostics on the flat coefficient layout."""

    def __init__(self, lmax, mmax, nu, exponents, energy_b):
        ls, ms, offs = hm._layout(lmax, mmax)
        self.lap = ls * (ls + 1.0)
        self.sob = {s: (1.0 + self.lap) ** s for s in exponents}
        self.cos_off = hm.cos_offdiagonal(lmax, mmax)
        # c_{lmax,m}: outflow of the top degree under cos-multiplication
        top = ls == lmax
        self.top = top
        self.top_coef = hm._cos_coef(ls[top], ms[top])
        self.ls = ls.astype(float)
        self.nu = nu
        self.i21 = offs[1] + 1
        self.i2m1 = offs[-1] + 1
        b = energy_b
        self.a = b ** (2.0 / 3.0)
        self.b = b
        self.c = 32.0 * b * b / self.a
        self.rows = []

    def velocity(self, x, eps):
        return hm._velocity_xy(x[self.i21], x[self.i2m1], eps)

    def record(self, t, x, eps):
        a2 = np.abs(x) ** 2
        l2sq = a2.sum()
        grad2 = (self.lap * a2).sum()
        cx = np.zeros_like(x)
        cx[:-1] += self.cos_off * x[1:]
        cx[1:] += self.cos_off * x[:-1]
        cos2 = (np.abs(cx) ** 2).sum() + (np.abs(self.top_coef * x[self.top]) ** 2).sum()
        sin2 = max(l2sq - cos2, 0.0)
        # <psi, sin d_theta psi> restricted to the stored degrees
        sx = np.zeros_like(x)
        sx[1:] += self.ls[:-1] * self.cos_off * x[:-1]
        sx[:-1] -= (self.ls[1:] + 1.0) * self.cos_off * x[1:]
        mixed = float(np.real(-1j * np.vdot(sx, x)))
        nu = self.nu
        energy = 0.5 * (l2sq + self.a * nu * t * grad2 + 2 * self.b * nu * t**2 * mixed
                        + self.c * nu * t**3 * sin2)
        sob = [math.sqrt((w * a2).sum()) for w in self.sob.values()]
        u = self.velocity(x, eps)
        self.rows.append((t, u, math.sqrt(l2sq), math.sqrt(grad2), math.sqrt(sin2), mixed, energy, sob))
        return u

    def trace(self, meta) -> Trace:
        cols = list(zip(*self.rows))
        sob = np.array(cols[7]).reshape(len(self.rows), len(self.sob))
        return Trace(np.array(cols[0]), np.array(cols[1]).reshape(-1, 2), np.array(cols[2]),
                     np.array(cols[3]), np.array(cols[4]), np.array(cols[5]), np.array(cols[6]),
                     {s: sob[:, i].copy() for i, s in enumerate(self.sob)}, meta)


def _prepare(config: ModeConfig, psi: hm.SphericalField) -> np.ndarray:
    return np.array(psi.resized(config.lmax, config.mmax).coeffs)


def evolve_free(config: ModeConfig, psi_in: hm.SphericalField, advection: bool = True) -> Trace:
    """Free semigroup run (coupling ignored) recorded as a trace."""
    return _march(config, psi_in, coupled=False, advection=advection)


def evolve_coupled(config: ModeConfig, psi_in: hm.SphericalField, raise_on_divergence: bool = True,
                   return_state: bool = False):
    """IMEX march of the coupled mode equation.

    On overflow (``|u| > 1e12`` or non-finite state) a :class:`DivergedRunError`
    carrying the partial trace is raised; with ``raise_on_divergence=False``
    the partial trace is returned and ``meta['diverged_at']`` is set.
    """
    if psi_in.norm() == 0:
        raise ConfigurationError("initial datum must be nonzero")
    return _march(config, psi_in, coupled=config.gamma != 0, raise_on_divergence=raise_on_divergence,
                  return_state=return_state)


def _march(config, psi_in, coupled, advection=True, raise_on_divergence=True, return_state=False):
    st = _stepper(config.lmax, config.mmax, float(config.nu), float(config.dt), bool(advection))
    samp = _Sampler(config.lmax, config.mmax, config.nu, config.sobolev_exponents, config.energy_b)
    eps = config.swimmer_sign
    dt = config.dt
    x = _prepare(config, psi_in)
    i21, i2m1 = samp.i21, samp.i2m1
    meta = {"config": config.to_dict(), "coupled": bool(coupled)}
    samp.record(0.0, x, eps)

    def forcing(a21, a2m1):
        u = hm._velocity_xy(a21, a2m1, eps)
        return hm._l2bar_coeffs(u, config.gamma)

    stride = config.output_stride
    n_steps = (config.n_steps // stride) * stride
    for n in range(1, n_steps + 1):
        rhs = st.explicit_half(x)
        if coupled:
            g21, g2m1 = forcing(x[i21], x[i2m1])
            lx21 = st.diff_diag[i21] * x[i21] + st.adv_off[i21 - 1] * x[i21 - 1] + st.adv_off[i21] * x[i21 + 1]
            lx2m1 = (st.diff_diag[i2m1] * x[i2m1] + st.adv_off[i2m1 - 1] * x[i2m1 - 1]
                     + st.adv_off[i2m1] * x[i2m1 + 1])
            p21 = x[i21] + 0.5 * dt * (lx21 + g21)
            p2m1 = x[i2m1] + 0.5 * dt * (lx2m1 + g2m1)
            g21, g2m1 = forcing(p21, p2m1)
            rhs[i21] += dt * g21
            rhs[i2m1] += dt * g2m1
        x = st.solve(rhs)
        if n % stride == 0:
            u = samp.record(n * dt, x, eps)
            bad = not np.all(np.isfinite(u)) or np.linalg.norm(u) > DIVERGENCE_THRESHOLD
            if bad or not np.isfinite(x[i21]):
                samp.rows.pop()
                meta["diverged_at"] = n * dt
                tr = samp.trace(meta)
                if raise_on_divergence:
                    raise DivergedRunError(f"run diverged at t={n * dt:g}", time=n * dt, trace=tr)
                return (tr, None) if return_state else tr
    tr = samp.trace(meta)
    if return_state:
        return tr, hm.SphericalField(config.lmax, config.mmax, x)
    return tr


# ---------------------------------------------------------------------------
# Volterra data
# ---------------------------------------------------------------------------


def _check_tgrid(config, tgrid):
    if tgrid is None:
        return config.times()
    tgrid = np.asarray(tgrid, dtype=float)
    h = config.sample_dt
    expect = h * np.arange(tgrid.size)
    if tgrid[0] != 0 or not np.allclose(tgrid, expect, rtol=0, atol=1e-9 * max(1.0, tgrid[-1])):
        raise ConfigurationError(f"time grid must be uniform from 0 with spacing dt*stride = {h}")
    if tgrid[-1] > config.t_end * (1 + 1e-12):
        raise ConfigurationError("time grid extends beyond config.t_end")
    return tgrid


def _free_velocity(config, psi, n_samples, advection=True):
    st = _stepper(config.lmax, config.mmax, float(config.nu), float(config.dt), bool(advection))
    x = _prepare(config, psi)
    offs = hm._layout(config.lmax, config.mmax)[2]
    i21, i2m1 = offs[1] + 1, offs[-1] + 1
    eps = config.swimmer_sign
    out = np.empty((n_samples, 2), dtype=complex)
    out[0] = hm._velocity_xy(x[i21], x[i2m1], eps)
    for k in range(1, n_samples):
        for _ in range(config.output_stride):
            x = st.step(x)
        out[k] = hm._velocity_xy(x[i21], x[i2m1], eps)
    return out


def build_source(config: ModeConfig, psi_in: hm.SphericalField, tgrid=None):
    """``U(t) = u[exp(t L1) psi_in]`` on the time grid; returns ``(t, U)``."""
    t = _check_tgrid(config, tgrid)
    return t, _free_velocity(config, psi_in, t.size)


def build_kernel(config: ModeConfig, tgrid=None):
    """Matrix kernel ``K(t) v = -u[exp(t L1)(L2bar . v)]`` on the ``k``-perp plane.

    Returns ``(t, K)`` with ``K`` of shape ``(n, 2, 2)``.  The kernel is
    checked to be a multiple of the identity and stored as ``kappa(t) I``.
    """
    t = _check_tgrid(config, tgrid)
    K = np.zeros((t.size, 2, 2), dtype=complex)
    if config.gamma == 0:
        return t, K
    for j, v in enumerate(np.eye(2)):
        profile = hm.l2bar_project(v, config.gamma, config.lmax, config.mmax)
        K[:, :, j] = -_free_velocity(config, profile, t.size)
    scale = np.abs(K[:, 0, 0]).max()
    offdiag = max(np.abs(K[:, 0, 1]).max(), np.abs(K[:, 1, 0]).max())
    spread = np.abs(K[:, 0, 0] - K[:, 1, 1]).max()
    if max(offdiag, spread) >= 1e-8 * scale:
        raise ConsistencyError(
            f"kernel is not isotropic: off-diagonal {offdiag:.3e}, diagonal spread {spread:.3e}, "
            f"scale {scale:.3e}"
        )
    kappa = 0.5 * (K[:, 0, 0] + K[:, 1, 1])
    return t, kappa[:, None, None] * np.eye(2)


def analytic_inviscid_kernel(gamma: float, swimmer_sign: int, t):
    """``kappa(t) = (3 gamma eps / 4) int_{-1}^{1} z^2 (1 - z^2) e^{-i z t} dz`` in closed form.

    The integrand is even in ``z`` so ``kappa`` is real.
    """
    t = np.asarray(t, dtype=float)
    pref = 0.75 * gamma * swimmer_sign
    out = np.empty_like(t)
    small = np.abs(t) < 0.5
    ts = t[small]
    # series: int z^2(1-z^2) cos(zt) dz = sum_k (-1)^k t^2k/(2k)! * 2*(1/(2k+3) - 1/(2k+5))
    acc = np.zeros_like(ts)
    term = np.ones_like(ts)
    for k in range(12):
        acc += term * 2.0 * (1.0 / (2 * k + 3) - 1.0 / (2 * k + 5))
        term = -term * ts * ts / ((2 * k + 1) * (2 * k + 2))
    out[small] = acc
    tl = t[~small]
    s, c = np.sin(tl), np.cos(tl)
    # 2 int_0^1 (z^2 - z^4) cos(zt) dz via repeated integration by parts
    i2 = 2 * (s / tl + 2 * c / tl**2 - 2 * s / tl**3)
    i4 = 2 * (s / tl + 4 * c / tl**2 - 12 * s / tl**3 - 24 * c / tl**4 + 24 * s / tl**5)
    out[~small] = i2 - i4
    result = pref * out
    return result if result.ndim else float(result)
