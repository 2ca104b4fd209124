import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import special

from activemix import harmonics as hm
from activemix.errors import ConfigurationError, DataError

SQ4PI = math.sqrt(4 * math.pi)


def _field(lmax, mmax, seed, decay=1.0):
    return hm.SphericalField.random_smooth(lmax, mmax, np.random.default_rng(seed), decay=decay)


def test_storage_length():
    for lmax, mmax in [(0, 0), (5, 2), (8, 8), (10, 20)]:
        expect = sum(2 * min(l, mmax) + 1 for l in range(lmax + 1))
        assert hm.n_coeffs(lmax, mmax) == expect
        assert hm.SphericalField.zeros(lmax, mmax).coeffs.size == expect


def test_rejects_nonfinite_and_bad_shape():
    with pytest.raises(DataError):
        hm.SphericalField(1, 1, np.array([np.nan, 0, 0, 0]))
    with pytest.raises(ConfigurationError):
        hm.SphericalField(2, 1, np.zeros(3))


def test_grid_weights_sum():
    g = hm.QuadratureGrid(37, 11)
    assert abs(g.weights.sum() - 4 * math.pi) < 1e-12


def test_synthesize_y00_constant():
    g = hm.QuadratureGrid(8, 5)
    v = hm.synthesize(hm.SphericalField.basis(0, 0, 4, 2), g)
    assert np.allclose(v, 1 / SQ4PI, atol=1e-14)
    assert np.all(hm.synthesize(hm.SphericalField.zeros(4, 2), g) == 0)


def test_synthesize_matches_double_sum(rng):
    f = _field(8, 8, 1)
    g = hm.QuadratureGrid(9, 17)
    vals = hm.synthesize(f, g)
    for _ in range(10):
        i, k = rng.integers(g.n_theta), rng.integers(g.n_phi)
        ref = sum(f[l, m] * special.sph_harm_y(l, m, g.theta[i], g.phi[k])
                  for l in range(9) for m in range(-l, l + 1))
        assert abs(vals[i, k] - ref) < 1e-12


def test_analyze_constant_and_cos():
    g = hm.QuadratureGrid(6, 5)
    a = hm.analyze(np.full((6, 5), 1 / SQ4PI), g, 4, 2)
    expect = hm.SphericalField.basis(0, 0, 4, 2)
    assert np.abs(a.coeffs - expect.coeffs).max() < 1e-12
    vals = np.sqrt(3) * g.z[:, None] / SQ4PI * np.ones((1, 5))
    a = hm.analyze(vals, g, 4, 2)
    assert abs(a[1, 0] - 1) < 1e-12
    assert np.abs(a.coeffs).sum() - 1 < 1e-12


def test_round_trip_lmax32():
    f = _field(32, 32, 2)
    g = hm.QuadratureGrid.for_field(32, 32)
    back = hm.analyze(hm.synthesize(f, g), g, 32, 32)
    assert np.abs(back.coeffs - f.coeffs).max() < 1e-10


@pytest.mark.parametrize("lmax", [4, 16, 64])
def test_parseval(lmax):
    f = _field(lmax, min(lmax, 6), lmax)
    g = hm.QuadratureGrid.for_field(lmax, min(lmax, 6))
    quad = math.sqrt(g.integrate(np.abs(hm.synthesize(f, g)) ** 2).real)
    assert abs(quad - f.norm()) < 1e-10
    assert abs(hm.sobolev_norm(f, 0) - quad) < 1e-10


def test_cos_multiply_y00():
    out = hm.apply_cos_multiply(hm.SphericalField.basis(0, 0))
    assert abs(out[1, 0] - 1 / math.sqrt(3)) < 1e-15
    # <cos^2> over the uniform density
    twice = hm.apply_cos_multiply(out)
    assert abs(twice[0, 0] / SQ4PI * SQ4PI - 1 / 3) < 1e-14
    assert hm.apply_cos_multiply(hm.SphericalField.zeros(3, 1)).norm() == 0


def test_cos_multiply_matches_grid():
    f = _field(12, 4, 3)
    out = hm.apply_cos_multiply(f)
    g = hm.QuadratureGrid.for_field(13, 4)
    ref = hm.analyze(g.z[:, None] * hm.synthesize(f, g), g, 13, 4)
    assert np.abs(out.coeffs - ref.coeffs).max() < 1e-12


def test_sin_dtheta_matches_finite_difference():
    f = _field(10, 3, 4)
    sd = hm.apply_sin_dtheta(f)
    th = np.array([0.3, 1.1, 2.0])
    ph = np.array([0.2, 4.0, 1.3])
    h = 1e-5

    def ev(field, t):
        return sum(field[l, m] * special.sph_harm_y(l, m, t, ph)
                   for l in range(field.lmax + 1) for m in range(-min(l, field.mmax), min(l, field.mmax) + 1))

    fd = np.sin(th) * (ev(f, th + h) - ev(f, th - h)) / (2 * h)
    assert np.abs(ev(sd, th) - fd).max() < 1e-8


def test_laplacian():
    out = hm.apply_laplacian(hm.SphericalField.basis(2, 1, 3, 2))
    assert abs(out[2, 1] + 6) < 1e-15 and abs(out.norm() - 6) < 1e-14
    assert hm.apply_laplacian(hm.SphericalField.basis(0, 0)).norm() == 0
    f = _field(9, 3, 5)
    assert (-hm.apply_laplacian(f).inner(f)).real >= 0


def test_norm_values():
    y00 = hm.SphericalField.basis(0, 0, 3, 1)
    g = hm.QuadratureGrid.for_field(4, 1, extra=2)
    assert hm.sobolev_norm(y00, 2.7) == pytest.approx(1.0)
    assert hm.sobolev_norm(hm.SphericalField.basis(1, 0), 1) == pytest.approx(math.sqrt(3))
    assert hm.grad_norm(y00) == 0
    assert hm.grad_norm(hm.SphericalField.basis(1, 0)) == pytest.approx(math.sqrt(2))
    assert hm.sin_weighted_norm(y00, g) ** 2 == pytest.approx(2 / 3, abs=1e-14)
    assert abs(hm.mixed_inner(y00, g)) < 1e-14


def test_spectral_twins_agree():
    f = _field(20, 5, 6)
    g = hm.QuadratureGrid.for_field(21, 5, extra=2)
    assert abs(hm.sin_weighted_norm(f, g) - hm.sin_weighted_norm_spectral(f)) < 1e-12
    assert abs(hm.mixed_inner(f, g) - hm.mixed_inner_spectral(f)) < 1e-12


def test_velocity_uniform_is_zero():
    f = hm.SphericalField.from_dict(4, 2, {(0, 0): SQ4PI / (4 * math.pi)})
    assert abs(hm.velocity_from_field(f, -1)) == 0


def test_velocity_quadrature_oracle():
    g = hm.QuadratureGrid(8, 7)
    st_ = g.sin_theta[:, None]
    vals = st_ * g.z[:, None] * np.cos(g.phi)[None, :]
    f = hm.analyze(vals, g, 4, 2)
    u = hm.velocity_from_field(f, +1).u
    assert np.abs(u - np.array([1j * 4 * math.pi / 15, 0, 0])).max() < 1e-14
    # brute force: u = i eps P int psi p (p.e)
    p = g.points()
    ref = 1j * np.array([g.integrate(vals * p[..., 0] * p[..., 2]), g.integrate(vals * p[..., 1] * p[..., 2])])
    assert np.abs(u[:2] - ref).max() < 1e-14


def test_velocity_ignores_other_coefficients(rng):
    base = _field(6, 3, 7)
    c = np.array(base.coeffs)
    keep = [base._index(6, 3, 2, 1), base._index(6, 3, 2, -1)]
    noise = rng.normal(size=c.size) + 1j * rng.normal(size=c.size)
    noise[keep] = 0
    u0 = hm.velocity_from_field(base, -1).u
    u1 = hm.velocity_from_field(base.with_coeffs(c + noise), -1).u
    assert np.array_equal(u0, u1)
    only_others = base.with_coeffs(noise)
    assert abs(hm.velocity_from_field(only_others, 1)) == 0


def test_l2bar_profile():
    assert hm.l2bar_project([0, 0], 1.0).norm() == 0
    f = hm.l2bar_project([1.0, 0.0], 1.0, lmax=4, mmax=2)
    support = {(int(l), int(m)) for l, m, c in zip(f.degrees, f.orders, f.coeffs) if c != 0}
    assert support == {(2, 1), (2, -1)}
    g = hm.QuadratureGrid(8, 7)
    ref = 3j / (4 * math.pi) * g.sin_theta[:, None] * g.z[:, None] * np.cos(g.phi)[None, :]
    assert np.abs(hm.synthesize(f, g) - ref).max() < 1e-12


@pytest.mark.parametrize("eps", [1, -1])
def test_l2bar_velocity_composition(eps):
    gamma = 1.7
    for v in ([1, 0], [0, 1], [0.3 - 1j, 2j]):
        u = hm.velocity_from_field(hm.l2bar_project(v, gamma), eps).xy
        assert np.abs(u + gamma * eps / 5 * np.asarray(v)).max() < 1e-14


def test_save_load(tmp_path):
    f = _field(7, 3, 8)
    for name in ("f.csv", "f.bin"):
        hm.save_field(f, tmp_path / name)
        g = hm.load_field(tmp_path / name)
        assert (g.lmax, g.mmax) == (7, 3)
        assert np.array_equal(g.coeffs, f.coeffs)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 24), st.integers(0, 6), st.integers(0, 2**31))
def test_cos_self_adjoint(lmax, mmax, seed):
    f = _field(lmax, mmax, seed)
    g = _field(lmax, mmax, seed + 1)
    lhs = hm.apply_cos_multiply(f).inner(g.resized(lmax + 1))
    rhs = f.resized(lmax + 1).inner(hm.apply_cos_multiply(g))
    assert abs(lhs - rhs) < 1e-12


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 30), st.integers(0, 4), st.integers(0, 2**31), st.floats(-2, 2))
def test_sobolev_monotone_in_s(lmax, mmax, seed, s):
    f = _field(lmax, mmax, seed)
    assert hm.sobolev_norm(f, s) <= hm.sobolev_norm(f, s + 0.5) * (1 + 1e-14)


@settings(max_examples=30, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3), st.sampled_from([1, 2, 3, 4]))
def test_l2bar_orthogonal_elsewhere(a, b, c, d, lmax_extra):
    f = hm.l2bar_project([a + 1j * b, c + 1j * d], 1.3, lmax=2 + lmax_extra, mmax=2)
    other = (np.abs(f.orders) != 1) | (f.degrees != 2)
    assert np.all(f.coeffs[other] == 0)
