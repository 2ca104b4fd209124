import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from activemix import dispersion as disp
from activemix import dynamics as dyn
from activemix import volterra as vt
from activemix.errors import DataError, DegenerateInputError, DomainError


def _grid(dt, T):
    return dt * np.arange(int(round(T / dt)) + 1)


def test_zero_kernel_returns_source(rng):
    v = rng.normal(size=(50, 2)) + 1j * rng.normal(size=(50, 2))
    u = vt.solve(vt.VolterraProblem(0.1, np.zeros((50, 2, 2)), v))
    assert np.array_equal(u, v)
    assert np.abs(vt.resolvent(np.zeros((50, 2, 2)), 0.1)).max() == 0


def test_exponential_kernel_unit_source():
    t = _grid(1e-3, 10.0)
    u = vt.solve(vt.VolterraProblem(1e-3, np.exp(-t), np.ones_like(t)))[:, 0]
    assert np.abs(u - 0.5 * (1 + np.exp(-2 * t))).max() <= 1e-6


def test_exponential_resolvent():
    c = 1.0
    t = _grid(1e-3, 10.0)
    R = vt.resolvent(c * np.exp(-t), 1e-3)[:, 0, 0]
    assert np.abs(R - c * np.exp(-(1 + c) * t)).max() <= 1e-6


def test_resolvent_reconstruction(rng):
    t = _grid(1e-2, 5.0)
    K = np.exp(-t)[:, None, None] * np.array([[1.0, 0.3], [-0.2, 0.5]])
    v = np.column_stack([np.cos(t), np.sin(2 * t) + 1j])
    u = vt.solve(vt.VolterraProblem(1e-2, K, v))
    R = vt.resolvent(K, 1e-2)
    assert np.abs(vt.reconstruct(R, v, 1e-2) - u).max() < 1e-3


def test_linearity(rng):
    t = _grid(1e-2, 3.0)
    K = np.cos(t) * np.exp(-t)
    v1 = rng.normal(size=t.size)
    v2 = rng.normal(size=t.size) * 1j
    s = lambda v: vt.solve(vt.VolterraProblem(1e-2, K, v))
    assert np.abs(s(v1 + v2) - s(v1) - s(v2)).max() < 1e-12


def test_matrix_path_equals_scalar_path():
    t = _grid(1e-2, 4.0)
    k = np.exp(-t) * np.cos(3 * t)
    v = np.column_stack([np.ones_like(t), t])
    u_mat = vt.solve(vt.VolterraProblem(1e-2, k[:, None, None] * np.eye(2), v))
    K_pert = k[:, None, None] * np.eye(2)
    K_pert[:, 0, 1] = 1e-300  # forces the general branch
    u_gen = vt.solve(vt.VolterraProblem(1e-2, K_pert, v))
    assert np.abs(u_mat - u_gen).max() < 1e-12


def test_problem_validation():
    with pytest.raises(DataError):
        vt.VolterraProblem(0.1, np.zeros(5), np.zeros(4))
    with pytest.raises(DataError):
        vt.VolterraProblem(0.1, np.full(5, np.nan), np.zeros(5))
    with pytest.raises(DataError):
        vt.VolterraProblem(-0.1, np.zeros(5), np.zeros(5))


def test_laplace_transform():
    t = _grid(1e-3, 40.0)
    assert abs(vt.laplace_transform(np.exp(-t), 1e-3, 1.0) - 0.5) < 1e-6
    assert vt.laplace_transform(np.zeros(10), 0.1, 1.0) == 0


def test_laplace_of_model_kernel():
    gamma, eps = 1.0, -1
    t = _grid(1e-3, 60.0)
    kap = dyn.analytic_inviscid_kernel(gamma, eps, t)
    for lam in (1.0, 1 + 1j, 2 - 1j):
        num = vt.laplace_transform(kap, 1e-3, lam)
        assert abs(num - (-gamma * eps * disp.halfplane_F(lam))) < 1e-4


def test_resolvent_l1_horizon_stable():
    dt = 1e-2
    norms = []
    for T in (100.0, 200.0):
        t = _grid(dt, T)
        R = vt.resolvent(dyn.analytic_inviscid_kernel(1.0, -1, t), dt)[:, 0, 0]
        norms.append(np.trapezoid(np.abs(R), dx=dt))
    assert math.isfinite(norms[1]) and abs(norms[1] - norms[0]) < 0.01 * norms[0]


def test_weighted_decay_identity_and_errors():
    t = _grid(0.1, 20.0)
    v = (1 + t) ** -2.0
    rep = vt.check_weighted_decay(v, v, vt.WeightSpec(), 0.1)
    assert rep.ratio == 1 and rep.horizon_stable
    with pytest.raises(DegenerateInputError):
        vt.check_weighted_decay(v, 0 * v, vt.WeightSpec(), 0.1)
    with pytest.raises(DomainError):
        vt.WeightSpec(alpha=1.0)


def test_weighted_decay_exponential_kernel():
    dt = 1e-2
    t = _grid(dt, 100.0)
    v = (1 + t) ** -2.0
    u = vt.solve(vt.VolterraProblem(dt, np.exp(-t), v))
    rep = vt.check_weighted_decay(u, v, vt.WeightSpec("power", 2.0), dt)
    assert math.isfinite(rep.ratio) and rep.ratio < 2


def test_weighted_decay_model_problem():
    mc = dyn.ModeConfig(gamma=1.0, nu=0.0, swimmer_sign=-1, lmax=632, dt=1e-2, t_end=400.0, output_stride=5)
    t, K = dyn.build_kernel(mc)
    _, U = dyn.build_source(mc, dyn.default_datum(632, 2))
    u = vt.solve(vt.VolterraProblem(mc.sample_dt, K, U))
    rep = vt.check_weighted_decay(u, U, vt.WeightSpec("power", 2.0), mc.sample_dt)
    assert math.isfinite(rep.ratio) and rep.horizon_stable


def test_series_csv_round_trip(tmp_path):
    t = _grid(0.5, 3.0)
    K = (np.arange(t.size)[:, None, None] * (1 + 2j)) * np.ones((1, 2, 2))
    vt.write_series_csv(tmp_path / "k.csv", t, K)
    t2, K2 = vt.read_series_csv(tmp_path / "k.csv")
    assert np.array_equal(t2, t) and np.array_equal(K2, K)
    prob = vt.VolterraProblem(0.5, K, np.ones((t.size, 2)))
    prob.to_csv(tmp_path / "a.csv", tmp_path / "b.csv")
    back = vt.VolterraProblem.from_csv(tmp_path / "a.csv", tmp_path / "b.csv")
    assert back.dt == 0.5 and np.array_equal(back.kernel, prob.kernel)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.1, 3.0), st.floats(0.2, 2.0))
def test_exponential_resolvent_family(c, a):
    # kernel c e^{-a t} has resolvent c e^{-(a+c) t}
    dt = 5e-3
    t = _grid(dt, 5.0)
    R = vt.resolvent(c * np.exp(-a * t), dt)[:, 0, 0]
    assert np.abs(R - c * np.exp(-(a + c) * t)).max() < 1e-4 * c
