"""Scalar fields on the unit sphere in an orthonormal spherical-harmonic basis.

Coefficients use the orthonormal convention ``int |Y_l^m|^2 dp = 1`` with the
Condon-Shortley phase, so ``Y_l^{-m} = (-1)^m conj(Y_l^m)``.  The polar axis is
the wave direction ``e = (0, 0, 1)``; ``z = cos(theta) = p . e``.

Storage is m-major: blocks ``m = -M..M`` (``M = min(mmax, lmax)``), each block
holding degrees ``l = |m|..lmax``.  Operators that never couple different
``m`` (multiplication by ``cos(theta)``, the Laplace-Beltrami operator) are
then block tridiagonal in the flat array.
"""
from __future__ import annotations

import functools
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, DataError

__all__ = [
    "SphericalField",
    "QuadratureGrid",
    "VelocitySample",
    "n_coeffs",
    "normalized_legendre",
    "synthesize",
    "analyze",
    "apply_cos_multiply",
    "apply_sin_dtheta",
    "apply_laplacian",
    "sobolev_norm",
    "grad_norm",
    "sin_weighted_norm",
    "mixed_inner",
    "sin_weighted_norm_spectral",
    "mixed_inner_spectral",
    "cos_offdiagonal",
    "velocity_from_field",
    "l2bar_project",
    "save_field",
    "load_field",
]

FOUR_PI = 4.0 * np.pi
# x z = S/2 (-Y_2^1 + Y_2^-1),  y z = (i S/2)(Y_2^1 + Y_2^-1)
_S21 = np.sqrt(8.0 * np.pi / 15.0)


def n_coeffs(lmax: int, mmax: int) -> int:
    """Number of stored coefficients, ``sum_l (2 min(l, mmax) + 1)``."""
    M = min(mmax, lmax)
    return (2 * M + 1) * (lmax + 1) - M * (M + 1)


@functools.lru_cache(maxsize=64)
def _layout(lmax: int, mmax: int):
    """Degree/order arrays and block offsets of the flat m-major layout."""
    M = min(mmax, lmax)
    ls, ms, offsets = [], [], {}
    pos = 0
    for m in range(-M, M + 1):
        offsets[m] = pos
        block = np.arange(abs(m), lmax + 1)
        ls.append(block)
        ms.append(np.full(block.size, m))
        pos += block.size
    ls = np.concatenate(ls)
    ms = np.concatenate(ms)
    ls.setflags(write=False)
    ms.setflags(write=False)
    return ls, ms, offsets


def _cos_coef(l, m):
    """c_{l,m} with cos(theta) Y_l^m = c_{l,m} Y_{l+1}^m + c_{l-1,m} Y_{l-1}^m."""
    l = np.asarray(l, dtype=float)
    m = np.asarray(m, dtype=float)
    num = (l + 1.0) ** 2 - m**2
    den = (2.0 * l + 1.0) * (2.0 * l + 3.0)
    return np.sqrt(np.clip(num, 0.0, None) / den)


@dataclass(frozen=True, eq=False)
class SphericalField:
    """Band-limited complex field ``psi(p) = sum a_lm Y_l^m(p)``."""

    lmax: int
    mmax: int
    coeffs: np.ndarray

    def __post_init__(self):
        if self.lmax < 0 or self.mmax < 0:
            raise ConfigurationError("lmax and mmax must be non-negative")
        c = np.asarray(self.coeffs, dtype=complex)
        if c.shape != (n_coeffs(self.lmax, self.mmax),):
            raise ConfigurationError(
                f"expected {n_coeffs(self.lmax, self.mmax)} coefficients for "
                f"(lmax={self.lmax}, mmax={self.mmax}), got shape {c.shape}"
            )
        if not np.all(np.isfinite(c)):
            raise DataError("field coefficients must be finite")
        c = c.copy()
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    # construction -------------------------------------------------------
    @classmethod
    def zeros(cls, lmax: int, mmax: int) -> "SphericalField":
        return cls(lmax, mmax, np.zeros(n_coeffs(lmax, mmax), dtype=complex))

    @classmethod
    def from_dict(cls, lmax: int, mmax: int, entries: dict) -> "SphericalField":
        """Build from ``{(l, m): value}``."""
        c = np.zeros(n_coeffs(lmax, mmax), dtype=complex)
        for (l, m), value in entries.items():
            c[cls._index(lmax, mmax, l, m)] = value
        return cls(lmax, mmax, c)

    @classmethod
    def basis(cls, l: int, m: int, lmax: int | None = None, mmax: int | None = None):
        lmax = l if lmax is None else lmax
        mmax = abs(m) if mmax is None else mmax
        return cls.from_dict(lmax, mmax, {(l, m): 1.0})

    @classmethod
    def random_smooth(cls, lmax: int, mmax: int, rng: np.random.Generator, decay: float = 4.0):
        """Coefficients ``(1+l)^-decay`` times unit-modulus complex noise."""
        ls, _, _ = _layout(lmax, mmax)
        phases = np.exp(2j * np.pi * rng.random(ls.size))
        return cls(lmax, mmax, phases * (1.0 + ls) ** (-decay))

    @staticmethod
    def _index(lmax, mmax, l, m):
        M = min(mmax, lmax)
        if not (0 <= l <= lmax and abs(m) <= min(l, M)):
            raise KeyError(f"(l={l}, m={m}) not stored for lmax={lmax}, mmax={mmax}")
        return _layout(lmax, mmax)[2][m] + (l - abs(m))

    # access -------------------------------------------------------------
    @property
    def degrees(self) -> np.ndarray:
        return _layout(self.lmax, self.mmax)[0]

    @property
    def orders(self) -> np.ndarray:
        return _layout(self.lmax, self.mmax)[1]

    def __getitem__(self, key):
        l, m = key
        try:
            return self.coeffs[self._index(self.lmax, self.mmax, l, m)]
        except KeyError:
            return 0j

    def block(self, m: int) -> np.ndarray:
        """Coefficients of order ``m`` for ``l = |m|..lmax``."""
        off = _layout(self.lmax, self.mmax)[2][m]
        return self.coeffs[off : off + self.lmax + 1 - abs(m)]

    def resized(self, lmax: int, mmax: int | None = None) -> "SphericalField":
        """Truncate or zero-pad to a new (lmax, mmax)."""
        mmax = self.mmax if mmax is None else mmax
        out = np.zeros(n_coeffs(lmax, mmax), dtype=complex)
        ls, ms, _ = _layout(self.lmax, self.mmax)
        keep = (ls <= lmax) & (np.abs(ms) <= mmax)
        M = min(mmax, lmax)
        offs = _layout(lmax, mmax)[2]
        table = np.array([offs[m] for m in range(-M, M + 1)], dtype=int)
        dest = table[ms[keep] + M] + ls[keep] - np.abs(ms[keep])
        out[dest] = self.coeffs[keep]
        return SphericalField(lmax, mmax, out)

    def with_coeffs(self, coeffs) -> "SphericalField":
        return SphericalField(self.lmax, self.mmax, coeffs)

    def norm(self) -> float:
        """L^2(S^2) norm (Parseval)."""
        return float(np.linalg.norm(self.coeffs))

    def inner(self, other: "SphericalField") -> complex:
        """``<self, other>`` with the conjugate on ``other``."""
        a, b = _common(self, other)
        return complex(np.vdot(b.coeffs, a.coeffs))

    # arithmetic ---------------------------------------------------------
    def __add__(self, other):
        a, b = _common(self, other)
        return a.with_coeffs(a.coeffs + b.coeffs)

    def __sub__(self, other):
        a, b = _common(self, other)
        return a.with_coeffs(a.coeffs - b.coeffs)

    def __mul__(self, scalar):
        return self.with_coeffs(self.coeffs * scalar)

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return self.with_coeffs(self.coeffs / scalar)

    def __neg__(self):
        return self.with_coeffs(-self.coeffs)


def _common(a: SphericalField, b: SphericalField):
    lmax, mmax = max(a.lmax, b.lmax), max(a.mmax, b.mmax)
    if (a.lmax, a.mmax) != (lmax, mmax):
        a = a.resized(lmax, mmax)
    if (b.lmax, b.mmax) != (lmax, mmax):
        b = b.resized(lmax, mmax)
    return a, b


# ---------------------------------------------------------------------------
# quadrature and transforms
# ---------------------------------------------------------------------------


def normalized_legendre(lmax: int, mmax: int, z: np.ndarray) -> np.ndarray:
    """Orthonormal associated Legendre functions.

    Returns ``P[m, l, j]`` for ``0 <= m <= mmax``, ``0 <= l <= lmax`` such that
    ``Y_l^m(theta, phi) = P[m, l] e^{i m phi}`` (zero where ``l < m``).
    """
    z = np.asarray(z, dtype=float)
    M = min(mmax, lmax)
    s = np.sqrt(np.clip(1.0 - z * z, 0.0, None))
    P = np.zeros((M + 1, lmax + 1, z.size))
    pmm = np.full(z.size, 1.0 / np.sqrt(FOUR_PI))
    for m in range(M + 1):
        if m > 0:
            pmm = -np.sqrt((2.0 * m + 1.0) / (2.0 * m)) * s * pmm
        P[m, m] = pmm
        if m + 1 <= lmax:
            P[m, m + 1] = np.sqrt(2.0 * m + 3.0) * z * pmm
        for l in range(m + 2, lmax + 1):
            a = np.sqrt((4.0 * l * l - 1.0) / (l * l - m * m))
            b = np.sqrt(((l - 1.0) ** 2 - m * m) / (4.0 * (l - 1.0) ** 2 - 1.0))
            P[m, l] = a * (z * P[m, l - 1] - b * P[m, l - 2])
    return P


class QuadratureGrid:
    """Gauss-Legendre nodes in ``z = cos(theta)`` times uniform nodes in ``phi``."""

    def __init__(self, n_theta: int, n_phi: int):
        if n_theta < 1 or n_phi < 1:
            raise ConfigurationError("grid sizes must be positive")
        self.n_theta = int(n_theta)
        self.n_phi = int(n_phi)
        z, w = np.polynomial.legendre.leggauss(self.n_theta)
        self.z = z
        self.w_theta = w
        self.theta = np.arccos(z)
        self.sin_theta = np.sqrt(1.0 - z * z)
        self.phi = 2.0 * np.pi * np.arange(self.n_phi) / self.n_phi
        self.w_phi = 2.0 * np.pi / self.n_phi
        self._legendre = {}

    @classmethod
    def for_field(cls, lmax: int, mmax: int, extra: int = 1) -> "QuadratureGrid":
        """Smallest grid that integrates quadratic forms of the field exactly."""
        M = min(mmax, lmax)
        return cls(lmax + 1 + extra, 2 * M + 1 + 2 * extra)

    @property
    def weights(self) -> np.ndarray:
        """Quadrature weights on the ``(n_theta, n_phi)`` node array."""
        return np.outer(self.w_theta, np.full(self.n_phi, self.w_phi))

    def check(self, lmax: int, mmax: int, extra: int = 0):
        M = min(mmax, lmax)
        if self.n_theta < lmax + 1 + extra or self.n_phi < 2 * M + 1:
            raise ConfigurationError(
                f"grid ({self.n_theta}, {self.n_phi}) too coarse for lmax={lmax}, "
                f"mmax={mmax}: need n_theta >= {lmax + 1 + extra}, n_phi >= {2 * M + 1}"
            )

    def legendre(self, lmax: int, mmax: int) -> np.ndarray:
        key = (lmax, min(mmax, lmax))
        if key not in self._legendre:
            self._legendre[key] = normalized_legendre(lmax, mmax, self.z)
        return self._legendre[key]

    def points(self) -> np.ndarray:
        """Cartesian node coordinates, shape ``(n_theta, n_phi, 3)``."""
        st = self.sin_theta[:, None]
        return np.stack(
            np.broadcast_arrays(st * np.cos(self.phi), st * np.sin(self.phi), self.z[:, None]),
            axis=-1,
        )

    def integrate(self, values: np.ndarray):
        return np.einsum("j,jk->", self.w_theta, values) * self.w_phi


def synthesize(field: SphericalField, grid: QuadratureGrid) -> np.ndarray:
    """Grid values ``sum a_lm Y_l^m`` at every node, shape ``(n_theta, n_phi)``."""
    grid.check(field.lmax, field.mmax)
    P = grid.legendre(field.lmax, field.mmax)
    M = min(field.mmax, field.lmax)
    spec = np.zeros((grid.n_theta, grid.n_phi), dtype=complex)
    for m in range(-M, M + 1):
        Pm = P[abs(m), abs(m) :]
        if m < 0 and m % 2:
            Pm = -Pm
        spec[:, m % grid.n_phi] += field.block(m) @ Pm
    return np.fft.ifft(spec, axis=1) * grid.n_phi


def analyze(
    values: np.ndarray, grid: QuadratureGrid, lmax: int | None = None, mmax: int | None = None
) -> SphericalField:
    """Project grid values onto ``Y_l^m`` by quadrature of ``value * conj(Y)``."""
    values = np.asarray(values)
    if values.shape != (grid.n_theta, grid.n_phi):
        raise DataError(f"values shape {values.shape} does not match grid")
    if not np.all(np.isfinite(values)):
        raise DataError("grid values must be finite")
    lmax = grid.n_theta - 1 if lmax is None else lmax
    mmax = (grid.n_phi - 1) // 2 if mmax is None else mmax
    grid.check(lmax, mmax)
    M = min(mmax, lmax)
    g = np.fft.fft(values, axis=1) * grid.w_phi
    P = grid.legendre(lmax, mmax)
    out = np.empty(n_coeffs(lmax, mmax), dtype=complex)
    offs = _layout(lmax, mmax)[2]
    for m in range(-M, M + 1):
        Pm = P[abs(m), abs(m) :]
        if m < 0 and m % 2:
            Pm = -Pm
        out[offs[m] : offs[m] + lmax + 1 - abs(m)] = Pm @ (grid.w_theta * g[:, m % grid.n_phi])
    return SphericalField(lmax, mmax, out)


# ---------------------------------------------------------------------------
# elementary operators
# ---------------------------------------------------------------------------


def cos_offdiagonal(lmax: int, mmax: int) -> np.ndarray:
    """Off-diagonal of the truncated ``cos(theta)`` operator in flat layout.

    Entry ``k`` couples flat positions ``k`` and ``k+1``; it is zero across
    block boundaries, so the full operator is one symmetric tridiagonal matrix.
    """
    ls, ms, _ = _layout(lmax, mmax)
    off = _cos_coef(ls[:-1], ms[:-1])
    off[ms[:-1] != ms[1:]] = 0.0
    return off


def apply_cos_multiply(field: SphericalField) -> SphericalField:
    """Exact product ``cos(theta) * psi``; the result has ``lmax + 1``."""
    out = field.resized(field.lmax + 1)
    a = out.coeffs
    off = cos_offdiagonal(out.lmax, out.mmax)
    b = np.zeros_like(a)
    b[1:] += off * a[:-1]
    b[:-1] += off * a[1:]
    return out.with_coeffs(b)


def apply_sin_dtheta(field: SphericalField) -> SphericalField:
    """Exact ``sin(theta) d/dtheta psi``; the result has ``lmax + 1``.

    Uses ``sin(theta) dY_l^m/dtheta = l c_{l,m} Y_{l+1}^m - (l+1) c_{l-1,m} Y_{l-1}^m``.
    """
    out = field.resized(field.lmax + 1)
    a = out.coeffs
    ls, ms, _ = _layout(out.lmax, out.mmax)
    off = cos_offdiagonal(out.lmax, out.mmax)
    b = np.zeros_like(a)
    # degree l feeds l+1 with weight l c_l, and l-1 with weight -(l+1) c_{l-1}
    b[1:] += ls[:-1] * off * a[:-1]
    b[:-1] -= ls[1:] * off * a[1:] + off * a[1:]
    return out.with_coeffs(b)


def apply_laplacian(field: SphericalField) -> SphericalField:
    ls = field.degrees
    return field.with_coeffs(-ls * (ls + 1.0) * field.coeffs)


def sobolev_norm(field: SphericalField, s: float) -> float:
    """``(sum (1 + l(l+1))^s |a_lm|^2)^(1/2)``; ``s`` may be negative."""
    ls = field.degrees
    w = (1.0 + ls * (ls + 1.0)) ** s
    return float(np.sqrt(np.sum(w * np.abs(field.coeffs) ** 2)))


def grad_norm(field: SphericalField) -> float:
    ls = field.degrees
    return float(np.sqrt(np.sum(ls * (ls + 1.0) * np.abs(field.coeffs) ** 2)))


def sin_weighted_norm(field: SphericalField, grid: QuadratureGrid) -> float:
    """``||sin(theta) psi||``, which equals ``||grad(p.e) psi||``."""
    grid.check(field.lmax, field.mmax, extra=1)
    v = synthesize(field, grid)
    return float(np.sqrt(grid.integrate(grid.sin_theta[:, None] ** 2 * np.abs(v) ** 2)))


def mixed_inner(field: SphericalField, grid: QuadratureGrid) -> float:
    """``Re <i grad(p.e) psi, grad psi>  = -Re int i sin(theta) psi conj(d_theta psi)``."""
    grid.check(field.lmax + 1, field.mmax)
    v = synthesize(field, grid)
    sdv = synthesize(apply_sin_dtheta(field), grid)
    return float(np.real(grid.integrate(-1j * v * np.conj(sdv))))


def sin_weighted_norm_spectral(field: SphericalField) -> float:
    """Spectral twin of :func:`sin_weighted_norm` via ``sin^2 = 1 - cos^2``."""
    c = apply_cos_multiply(field).norm()
    return float(np.sqrt(max(field.norm() ** 2 - c * c, 0.0)))


def mixed_inner_spectral(field: SphericalField) -> float:
    """Spectral twin of :func:`mixed_inner`."""
    sd = apply_sin_dtheta(field)
    return float(np.real(-1j * field.resized(sd.lmax).inner(sd)))


# ---------------------------------------------------------------------------
# velocity moment and forcing profile
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class VelocitySample:
    """Macroscopic velocity ``u`` in the frame ``k = e = (0, 0, 1)``."""

    u: np.ndarray

    def __post_init__(self):
        u = np.asarray(self.u, dtype=complex).reshape(-1)
        if u.size == 2:
            u = np.append(u, 0.0)
        if u.shape != (3,):
            raise DataError("velocity must have 2 or 3 components")
        if u[2] != 0:
            raise DataError("velocity must be orthogonal to k = e")
        u.setflags(write=False)
        object.__setattr__(self, "u", u)

    @property
    def xy(self) -> np.ndarray:
        return self.u[:2]

    def __abs__(self):
        return float(np.linalg.norm(self.u))


def _velocity_xy(a21, a2m1, swimmer_sign):
    mx = 0.5 * _S21 * (a2m1 - a21)
    my = -0.5j * _S21 * (a21 + a2m1)
    return 1j * swimmer_sign * np.array([mx, my])


def velocity_from_field(field: SphericalField, swimmer_sign: int) -> VelocitySample:
    """``u = i eps P_{e-perp} int psi p (p.e) dp``.

    Only the ``(2, +-1)`` coefficients contribute.
    """
    if field.lmax < 2 or field.mmax < 1:
        raise ConfigurationError("velocity_from_field needs lmax >= 2 and mmax >= 1")
    return VelocitySample(_velocity_xy(field[2, 1], field[2, -1], swimmer_sign))


def _l2bar_coeffs(v, gamma):
    """(a_{2,1}, a_{2,-1}) of ``(3 i gamma / 4 pi)(p.e)(P p).v``."""
    vx, vy = v[0], v[1]
    pref = 3j * gamma / FOUR_PI
    a21 = pref * 0.5 * _S21 * (-vx + 1j * vy)
    a2m1 = pref * 0.5 * _S21 * (vx + 1j * vy)
    return a21, a2m1


def l2bar_project(v, gamma: float, lmax: int = 2, mmax: int = 1) -> SphericalField:
    """Field ``p -> (3 i gamma / 4 pi)(p.e)(P_{e-perp} p) . v``, supported on ``(2, +-1)``."""
    if not isinstance(v, VelocitySample):
        v = VelocitySample(v)
    a21, a2m1 = _l2bar_coeffs(v.u, gamma)
    return SphericalField.from_dict(max(lmax, 2), max(mmax, 1), {(2, 1): a21, (2, -1): a2m1})


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def save_field(field: SphericalField, path) -> None:
    """Write ``(l, m, re, im)`` rows after an ``(lmax, mmax)`` header.

    ``.csv`` paths are text; anything else is flat little-endian float64.
    """
    path = Path(path)
    rows = np.column_stack([field.degrees, field.orders, field.coeffs.real, field.coeffs.imag])
    if path.suffix == ".csv":
        with open(path, "w") as fh:
            fh.write("lmax,mmax\n")
            fh.write(f"{field.lmax},{field.mmax}\n")
            fh.write("l,m,re,im\n")
            for l, m, re, im in rows:
                fh.write(f"{int(l)},{int(m)},{float(re)!r},{float(im)!r}\n")
    else:
        header = np.array([field.lmax, field.mmax], dtype="<f8")
        np.concatenate([header, rows.astype("<f8").ravel()]).tofile(path)


def load_field(path) -> SphericalField:
    path = Path(path)
    if path.suffix == ".csv":
        with open(path) as fh:
            lines = fh.read().splitlines()
        lmax, mmax = (int(x) for x in lines[1].split(","))
        rows = np.array([[float(x) for x in ln.split(",")] for ln in lines[3:] if ln.strip()])
    else:
        flat = np.fromfile(path, dtype="<f8")
        lmax, mmax = int(flat[0]), int(flat[1])
        rows = flat[2:].reshape(-1, 4)
    entries = {(int(l), int(m)): re + 1j * im for l, m, re, im in rows}
    return SphericalField.from_dict(lmax, mmax, entries)
