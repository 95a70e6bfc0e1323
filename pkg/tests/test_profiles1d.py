import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from liouville_lab.geometry import make_disk, rasterize
from liouville_lab.nonlinearity import BistableNonlinearity, make_truncated
from liouville_lab.profiles1d import (
    ProfileError,
    radialize,
    shoot_omega,
    shoot_omega_delta,
    shoot_U,
    solve_traveling_wave,
)

NL = BistableNonlinearity(theta=0.3, amplitude=1.0)


@pytest.fixture(scope="module")
def omega():
    return shoot_omega(NL)


def test_omega_initial_slope(omega):
    # sqrt(2 F(1)) with F(1) = 1/30
    assert omega.values[0] == 0.0
    assert omega.derivs[0] == pytest.approx(math.sqrt(1.0 / 15.0), abs=1e-12)
    assert omega.derivs[0] == pytest.approx(0.258199, abs=1e-6)


def test_omega_hamiltonian_and_limit(omega):
    assert omega.hamiltonian_drift <= 1e-8
    assert float(omega(40.0)) > 1 - 1e-6
    assert np.all(np.diff(omega.values) >= 0)
    assert np.all(omega.values <= 1.0)


def test_omega_matches_independent_ivp(omega):
    sol = solve_ivp(
        lambda x, y: [y[1], -NL.scalar_f(y[0])],
        (0, 8), [0.0, math.sqrt(1 / 15)], rtol=1e-11, atol=1e-13, dense_output=True,
    )
    xs = np.linspace(0, 8, 81)
    # the separatrix is unstable, so compare only on the early stretch
    np.testing.assert_allclose(omega(xs), sol.sol(xs)[0], atol=1e-6)


def test_omega_zero_left_of_origin(omega):
    assert float(omega(-1.0)) == 0.0


def test_U_shares_orbit(omega):
    u = shoot_U(NL)
    np.testing.assert_array_equal(u.values, omega.values)


def test_omega_delta_below_omega_and_plateau(omega):
    tnl = make_truncated(NL, 0.1)
    wd = shoot_omega_delta(tnl)
    assert wd.limit == pytest.approx(0.95)
    assert float(wd(40.0)) > 0.95 - 1e-6
    xs = np.linspace(0, 30, 601)
    assert np.all(wd(xs) <= omega(xs) + 1e-12)


def test_coarse_step_rejected_or_certified():
    # a sloppy step may fail, but a returned profile always carries the certificate
    try:
        prof = shoot_omega(NL, step=0.2)
    except ProfileError:
        return
    assert prof.hamiltonian_drift <= 1e-8


@pytest.mark.parametrize("theta", [0.1, 0.2, 0.3, 0.4])
def test_wave_speed_closed_form(theta):
    nl = BistableNonlinearity(theta, 1.0)
    wave = solve_traveling_wave(nl)
    exact = (1 - 2 * theta) / math.sqrt(2)
    assert wave.speed == pytest.approx(exact, rel=1e-2)
    ref = 1.0 / (1.0 + np.exp(wave.xi / math.sqrt(2)))
    assert np.max(np.abs(wave.profile - ref)) < 1e-3


def test_wave_speed_scales_with_amplitude():
    nl = BistableNonlinearity(0.3, 10.0)
    wave = solve_traveling_wave(nl, domain_half_length=8.0, step=0.005)
    assert wave.speed == pytest.approx(math.sqrt(5.0) * 0.4, rel=1e-2)


def test_wave_is_monotone_and_normalized():
    wave = solve_traveling_wave(NL)
    assert np.all(np.diff(wave.profile) <= 0)
    assert float(wave(0.0)) == pytest.approx(0.5, abs=1e-3)
    assert float(wave(-100.0)) == 1.0 and float(wave(100.0)) == 0.0


def test_wave_bad_bracket():
    with pytest.raises(ProfileError):
        solve_traveling_wave(NL, c_bracket=(0.5, 0.6))


def test_radialize_on_disk_mask(omega):
    mask = rasterize(make_disk(1.0, 0.1), 0.1, R_outer=4.0)
    field = radialize(omega, 1.0, mask)
    r = np.hypot(mask.active_x, mask.active_y)
    np.testing.assert_allclose(field.values, omega(r - 1.0), atol=1e-14)
    assert field.boundary_value == 1.0
    with pytest.raises(ValueError):
        radialize(omega, -0.5, mask)
