"""Pointwise Euler physics: EOS, fluxes, Jacobians, Roe averages, wave speeds."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from shockfem import physics
from shockfem.physics import (GAMMA, RHO, MX, MY, RHOE, InadmissibleStateError,
                              conserved_from_primitive, flux, flux_jacobian,
                              pressure, primitive_from_conserved, roe_average,
                              sound_speed, spectral_radius, wave_speeds)

rng = np.random.default_rng(20260825)


def random_states(n, rho_range=(0.05, 5.0), v_max=4.0, p_range=(0.05, 8.0),
                  seed=None):
    r = np.random.default_rng(seed) if seed is not None else rng
    rho = r.uniform(*rho_range, n)
    vel = r.uniform(-v_max, v_max, (n, 2))
    p = r.uniform(*p_range, n)
    return conserved_from_primitive(rho, vel, p)


def test_pressure_roundtrip():
    u = random_states(200, seed=1)
    rho, vel, p = primitive_from_conserved(u)
    back = conserved_from_primitive(rho, vel, p)
    assert np.allclose(back, u, rtol=1e-14, atol=1e-14)


def test_pressure_known_value():
    # rho=1, v=(2,0), p=1: rhoE = 1/0.4 + 2 = 4.5 and p recovers exactly
    u = np.array([1.0, 2.0, 0.0, 4.5])
    assert pressure(u) == pytest.approx(1.0, abs=1e-14)
    assert sound_speed(u) == pytest.approx(np.sqrt(1.4), abs=1e-14)


def test_check_admissible_raises():
    bad = np.array([[1.0, 0.0, 0.0, 2.5], [1.0, 3.0, 0.0, 2.5]])
    with pytest.raises(InadmissibleStateError) as exc:
        physics.check_admissible(bad)
    assert exc.value.nodes.tolist() == [1]
    assert not physics.is_admissible(bad)
    assert physics.is_admissible(bad[:1])


def test_flux_jacobian_matches_fd():
    u = random_states(50, seed=2)
    d = rng.uniform(-1.0, 1.0, (50, 2))
    a = flux_jacobian(u, d)
    h = 1e-7
    for c in range(4):
        du = np.zeros(4)
        du[c] = h
        fn_p = np.einsum("nkd,nd->nk", flux(u + du), d)
        fn_m = np.einsum("nkd,nd->nk", flux(u - du), d)
        assert np.allclose(a[:, :, c], (fn_p - fn_m) / (2 * h),
                           rtol=1e-6, atol=1e-6)


def test_flux_homogeneity():
    # ideal gas: f(u) = f'(u) u componentwise in each direction
    u = random_states(100, seed=3)
    for d in (np.array([1.0, 0.0]), np.array([0.0, 1.0]), np.array([0.6, -0.8])):
        a = flux_jacobian(u, d)
        fn = np.einsum("nkd,d->nk", flux(u), d)
        assert np.allclose(np.einsum("nkc,nc->nk", a, u), fn,
                           rtol=1e-12, atol=1e-12)


def test_roe_average_frozen_sod_values():
    left = np.array([1.0, 0.0, 0.0, 2.5])
    right = np.array([0.125, 0.0, 0.0, 0.25])
    avg = roe_average(left, right)
    assert float(avg.rho) == pytest.approx(0.3535533905932738, abs=1e-15)
    assert float(avg.H) == pytest.approx(3.3171572875253807, abs=1e-14)
    assert float(avg.c_s) == pytest.approx(1.1518953576649886, abs=1e-14)


def test_roe_average_consistency():
    # identical states: the average is the state itself
    u = random_states(100, seed=4)
    avg = roe_average(u, u)
    assert np.allclose(avg.conserved(), u, rtol=1e-13, atol=1e-13)


def test_roe_flux_difference_property():
    # A(roe)(u_j - u_i) = (f(u_j) - f(u_i)) . n, the defining Roe identity
    ui = random_states(200, seed=5)
    uj = random_states(200, seed=6)
    d = rng.standard_normal((200, 2))
    avg = roe_average(ui, uj)
    a = flux_jacobian(avg.conserved(), d)
    lhs = np.einsum("nkc,nc->nk", a, uj - ui)
    rhs = np.einsum("nkd,nd->nk", flux(uj) - flux(ui), d)
    assert np.allclose(lhs, rhs, rtol=1e-9, atol=1e-9)


def test_wave_speeds_match_dense_eigensolver():
    # criterion-level property: 10^3 random state pairs
    n = 1000
    ui = random_states(n, seed=7)
    uj = random_states(n, seed=8)
    d = np.random.default_rng(9).standard_normal((n, 2))
    avg = roe_average(ui, uj)
    lam = np.sort(wave_speeds(avg, d), axis=1)
    a = flux_jacobian(avg.conserved(), d)
    eig = np.sort(np.linalg.eigvals(a).real, axis=1)
    scale = np.abs(lam).max(axis=1, keepdims=True) + 1.0
    assert np.max(np.abs(lam - eig) / scale) < 1e-8


def test_spectral_radius_dominates_wave_speeds():
    n = 500
    ui = random_states(n, seed=10)
    uj = random_states(n, seed=11)
    d = np.random.default_rng(12).standard_normal((n, 2))
    avg = roe_average(ui, uj)
    lam = wave_speeds(avg, d)
    rad = spectral_radius(avg, d, eps_h=0.0)
    assert np.all(rad >= np.abs(lam).max(axis=1) - 1e-12)
    # smoothing only increases the bound
    assert np.all(spectral_radius(avg, d, eps_h=1e-3) >= rad - 1e-15)


@given(st.floats(0.05, 5.0), st.floats(-4.0, 4.0), st.floats(-4.0, 4.0),
       st.floats(0.05, 8.0))
@settings(max_examples=200, deadline=None)
def test_admissibility_of_primitive_states(rho, vx, vy, p):
    u = conserved_from_primitive(rho, np.array([vx, vy]), p)
    assert physics.is_admissible(u)
    assert pressure(u) == pytest.approx(p, rel=1e-10, abs=1e-12)


def test_complex_step_compatibility():
    # flux accepts complex perturbations: imag part / h approximates directional
    # derivative of the flux
    u = random_states(20, seed=13).astype(complex)
    v = np.random.default_rng(14).standard_normal((20, 4))
    h = 1e-100
    f = flux(u + 1j * h * v)
    a = flux_jacobian(u.real, np.array([1.0, 0.0]))
    got = f.imag[:, :, 0] / h
    want = np.einsum("nkc,nc->nk", a, v)
    assert np.allclose(got, want, rtol=1e-12, atol=1e-12)
