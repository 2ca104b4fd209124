"""Convolution Volterra equations ``u + K * u = v`` on a uniform grid.

Everything here is generic in the matrix size ``n`` (1 to 3).  The
discretization is the product trapezoidal rule, second order for smooth
kernels.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConsistencyError, DataError, DegenerateInputError, DomainError

__all__ = [
    "VolterraProblem",
    "WeightSpec",
    "DecayReport",
    "solve",
    "resolvent",
    "convolve",
    "reconstruct",
    "laplace_transform",
    "laplace_tail_bound",
    "check_weighted_decay",
    "write_series_csv",
    "read_series_csv",
]


def _as_matrix_samples(kernel) -> np.ndarray:
    k = np.asarray(kernel, dtype=complex)
    if k.ndim == 1:
        k = k[:, None, None]
    if k.ndim != 3 or k.shape[1] != k.shape[2]:
        raise DataError(f"kernel samples must have shape (N, n, n); got {k.shape}")
    return k


def _as_vector_samples(source) -> np.ndarray:
    v = np.asarray(source, dtype=complex)
    if v.ndim == 1:
        v = v[:, None]
    if v.ndim != 2:
        raise DataError(f"source samples must have shape (N, n); got {v.shape}")
    return v


@dataclass(frozen=True, eq=False)
class VolterraProblem:
    """Sampled kernel ``K(t_j)`` and source ``v(t_j)`` with ``t_j = j dt``."""

    dt: float
    kernel: np.ndarray
    source: np.ndarray

    def __post_init__(self):
        k = _as_matrix_samples(self.kernel)
        v = _as_vector_samples(self.source)
        if self.dt <= 0:
            raise DataError("dt must be positive")
        if k.shape[0] != v.shape[0] or k.shape[0] < 2:
            raise DataError("kernel and source need equal length >= 2")
        if k.shape[1] != v.shape[1] or not 1 <= k.shape[1] <= 3:
            raise DataError("matrix size must match the source and lie in 1..3")
        if not (np.all(np.isfinite(k)) and np.all(np.isfinite(v))):
            raise DataError("kernel and source must be finite")
        object.__setattr__(self, "kernel", k)
        object.__setattr__(self, "source", v)

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.kernel.shape[0])

    @classmethod
    def from_csv(cls, kernel_path, source_path) -> "VolterraProblem":
        tk, k = read_series_csv(kernel_path)
        tv, v = read_series_csv(source_path)
        if tk.shape != tv.shape or not np.allclose(tk, tv):
            raise DataError("kernel and source files use different time grids")
        return cls(float(tk[1] - tk[0]), k, v)

    def to_csv(self, kernel_path, source_path) -> None:
        write_series_csv(kernel_path, self.times, self.kernel)
        write_series_csv(source_path, self.times, self.source)


def _is_scalar_multiple(k: np.ndarray) -> bool:
    n = k.shape[1]
    if n == 1:
        return True
    eye = np.eye(n, dtype=bool)
    if np.any(k[:, ~eye]):
        return False
    d = np.diagonal(k, axis1=1, axis2=2)
    return bool(np.all(d == d[:, :1]))


def _march(k: np.ndarray, rhs: np.ndarray, dt: float) -> np.ndarray:
    """Solve ``x_j + dt sum' K_{j-i} x_i = rhs_j`` for vector or matrix ``x``."""
    N, n = k.shape[0], k.shape[1]
    step = np.eye(n) + 0.5 * dt * k[0]
    if abs(np.linalg.det(step)) < 1e-14 * max(1.0, np.abs(step).max()) ** n:
        raise ConsistencyError("step matrix I + dt/2 K(0) is singular at t = 0")
    step_inv = np.linalg.inv(step)
    x = np.zeros_like(rhs)
    x[0] = rhs[0]
    scalar = _is_scalar_multiple(k)
    kap = k[:, 0, 0]
    flat = x.reshape(N, -1)
    for j in range(1, N):
        if scalar:
            # sum_{i=1}^{j-1} kappa_{j-i} x_i as one dot product
            acc = 0.5 * kap[j] * flat[0]
            if j > 1:
                acc = acc + kap[j - 1 : 0 : -1] @ flat[1:j]
            acc = acc.reshape(rhs.shape[1:])
        else:
            acc = 0.5 * (k[j] @ x[0])
            if j > 1:
                if x.ndim == 2:
                    acc = acc + np.einsum("iab,ib->a", k[j - 1 : 0 : -1], x[1:j])
                else:
                    acc = acc + np.einsum("iab,ibc->ac", k[j - 1 : 0 : -1], x[1:j])
        x[j] = step_inv @ (rhs[j] - dt * acc)
        if not np.all(np.isfinite(x[j])):
            raise ConsistencyError(f"Volterra march overflowed at t = {j * dt:g}")
    return x


def solve(problem: VolterraProblem) -> np.ndarray:
    """Product-trapezoidal solution ``u_j``, shape ``(N, n)``."""
    return _march(problem.kernel, problem.source, problem.dt)


def resolvent(kernel, dt: float) -> np.ndarray:
    """Resolvent ``R`` with ``R + K * R = K``, shape ``(N, n, n)``."""
    k = _as_matrix_samples(kernel)
    return _march(k, k.copy(), dt)


def convolve(a, b, dt: float) -> np.ndarray:
    """Trapezoidal ``(a * b)(t_j) = int_0^{t_j} a(t_j - s) b(s) ds``.

    ``a`` holds matrices ``(N, n, n)``; ``b`` holds vectors ``(N, n)`` or
    matrices ``(N, n, n)``.
    """
    a = _as_matrix_samples(a)
    b = np.asarray(b, dtype=complex)
    vec = b.ndim == 1 or b.ndim == 2
    if b.ndim == 1:
        b = b[:, None]
    N = a.shape[0]
    out = np.zeros(b.shape, dtype=complex)
    sub = "iab,ib->a" if vec else "iab,ibc->ac"
    for j in range(1, N):
        acc = 0.5 * np.einsum(sub, a[j : j + 1], b[:1]) + 0.5 * np.einsum(sub, a[:1], b[j : j + 1])
        if j > 1:
            acc = acc + np.einsum(sub, a[j - 1 : 0 : -1], b[1:j])
        out[j] = dt * acc
    return out


def reconstruct(R, source, dt: float) -> np.ndarray:
    """``u = v - R * v``."""
    v = _as_vector_samples(source)
    return v - convolve(R, v, dt)


def laplace_transform(samples, dt: float, z: complex):
    """Trapezoidal ``int_0^T e^{-z t} f(t) dt`` with zero tail beyond ``T``."""
    f = np.asarray(samples, dtype=complex)
    N = f.shape[0]
    w = np.full(N, dt)
    w[0] = w[-1] = 0.5 * dt
    w = w * np.exp(-z * dt * np.arange(N))
    return np.tensordot(w, f, axes=(0, 0))


def laplace_tail_bound(samples, dt: float, z: complex) -> float:
    """Size estimate of the discarded tail ``int_T^inf e^{-z t} f(t) dt``.

    Assumes ``|f|`` keeps decaying like ``t^-2`` beyond the horizon.
    """
    f = np.asarray(samples, dtype=complex)
    T = dt * (f.shape[0] - 1)
    fT = float(np.abs(f[-1]).max())
    if z.real > 0:
        return fT * math.exp(-z.real * T) / z.real
    return fT * T


@dataclass(frozen=True)
class WeightSpec:
    """Weight ``(1+t)^alpha`` or ``(1+t)^alpha / ln(2+t)``."""

    kind: str = "power"
    alpha: float = 2.0

    def __post_init__(self):
        if self.kind not in ("power", "power_log"):
            raise DomainError(f"unknown weight kind {self.kind!r}")
        if not self.alpha > 1:
            raise DomainError("the decay weight needs alpha > 1")

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        w = (1.0 + t) ** self.alpha
        if self.kind == "power_log":
            w = w / np.log(2.0 + t)
        return w


@dataclass(frozen=True)
class DecayReport:
    ratio: float
    ratio_half: float
    horizon_stable: bool

    @property
    def relative_change(self) -> float:
        return abs(self.ratio - self.ratio_half) / self.ratio_half


def _weighted_sup(x, w):
    x = np.asarray(x)
    mag = np.abs(x) if x.ndim == 1 else np.linalg.norm(x.reshape(x.shape[0], -1), axis=1)
    return float(np.max(w * mag))


def check_weighted_decay(u, v, weight: WeightSpec, dt: float) -> DecayReport:
    """``sup w|u| / sup w|v|`` on ``[0, T]`` and on ``[0, T/2]``.

    ``horizon_stable`` is set when the two ratios differ by less than 10%.
    """
    u = np.asarray(u)
    v = np.asarray(v)
    if u.shape[0] != v.shape[0]:
        raise DataError("u and v must share the time grid")
    N = u.shape[0]
    t = dt * np.arange(N)
    w = weight(t)
    half = N // 2 + 1
    den, den_half = _weighted_sup(v, w), _weighted_sup(v[:half], w[:half])
    if den == 0 or den_half == 0:
        raise DegenerateInputError("weighted sup of the source vanishes")
    ratio = _weighted_sup(u, w) / den
    ratio_half = _weighted_sup(u[:half], w[:half]) / den_half
    return DecayReport(ratio, ratio_half, abs(ratio - ratio_half) < 0.1 * ratio_half)


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------


def write_series_csv(path, t, values) -> None:
    """Columns ``t`` then ``re``/``im`` of each entry in row-major order."""
    values = np.asarray(values, dtype=complex)
    shape = values.shape[1:]
    idx = list(np.ndindex(*shape)) if shape else [()]
    names = ["t"]
    for ix in idx:
        tag = "[" + ",".join(str(i) for i in ix) + "]"
        names += [f"re{tag}", f"im{tag}"]
    flat = values.reshape(values.shape[0], -1)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(names)
        for j in range(values.shape[0]):
            row = [float(t[j])]
            for c in flat[j]:
                row += [c.real, c.imag]
            w.writerow([repr(float(x)) for x in row])


def read_series_csv(path):
    with open(path) as fh:
        r = csv.reader(fh)
        names = next(r)
        data = np.array([[float(x) for x in row] for row in r if row])
    tags = names[1::2]
    dims = [tuple(int(i) for i in tag[3:-1].split(",")) if tag[3:-1] else () for tag in tags]
    shape = tuple(max(d[k] for d in dims) + 1 for k in range(len(dims[0]))) if dims[0] else ()
    vals = data[:, 1::2] + 1j * data[:, 2::2]
    return data[:, 0], vals.reshape((data.shape[0],) + shape)
