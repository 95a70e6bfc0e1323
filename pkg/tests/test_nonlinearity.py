import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from liouville_lab.nonlinearity import (
    BistableNonlinearity,
    NonlinearityError,
    eval_F,
    eval_f,
    eval_G,
    make_truncated,
)

NL = BistableNonlinearity(theta=0.3, amplitude=1.0)
thetas = st.floats(min_value=0.02, max_value=0.48)
amps = st.floats(min_value=0.1, max_value=20.0)


def test_f_exact_zeros():
    assert eval_f(NL, 0.0) == 0.0
    assert eval_f(NL, 1.0) == 0.0
    assert eval_f(NL, NL.theta) == 0.0


def test_f_midpoint_value():
    # 0.5 * 0.5 * (0.5 - 0.3)
    assert eval_f(NL, 0.5) == pytest.approx(0.05, abs=1e-15)


def test_slopes_at_stable_zeros():
    assert NL.slope_at_zero == pytest.approx(-0.3)
    assert NL.slope_at_one == pytest.approx(-0.7)
    assert NL.df(0.0) == pytest.approx(-0.3)
    assert NL.df(1.0) == pytest.approx(-0.7)


def test_linear_extension_outside_unit_interval():
    s = np.array([-2.0, -0.1, 1.1, 3.0])
    expected = np.array([0.6, 0.03, -0.07, -1.4])
    np.testing.assert_allclose(NL.f(s), expected, atol=1e-14)
    # C1 across the junctions
    for s0 in (0.0, 1.0):
        left = (NL.f(s0) - NL.f(s0 - 1e-7)) / 1e-7
        right = (NL.f(s0 + 1e-7) - NL.f(s0)) / 1e-7
        assert left == pytest.approx(right, abs=1e-6)


def test_sign_pattern_on_fine_grid():
    s = np.linspace(0, 1, 1002)[1:-1]
    vals = NL.f(s)
    assert np.all(vals[s < NL.theta] < 0)
    assert np.all(vals[s > NL.theta] > 0)


def test_F_closed_form_and_quadrature():
    assert eval_F(NL, 0.0) == 0.0
    assert eval_F(NL, 1.0) == pytest.approx(1.0 / 30.0, rel=1e-14)
    q, _ = quad(lambda s: s * (1 - s) * (s - 0.3), 0, 1, epsabs=1e-14)
    assert eval_F(NL, 1.0) == pytest.approx(q, rel=1e-12)


def test_F_minimum_at_theta():
    eps = 1e-4
    assert eval_F(NL, NL.theta) < eval_F(NL, NL.theta - eps)
    assert eval_F(NL, NL.theta) < eval_F(NL, NL.theta + eps)


def test_G_identity_and_values():
    assert eval_G(NL, 0.0) == 0.0
    assert eval_G(NL, 1.0) == pytest.approx(-1.0 / 30.0, rel=1e-13)
    t = np.linspace(-0.5, 1.5, 2001)
    np.testing.assert_allclose(NL.G(t), NL.F(1 - t) - NL.F(1.0), atol=1e-12, rtol=0)
    # C1 across the extension points
    for t0 in (0.0, 1.0):
        d = (NL.G(t0 + 1e-7) - NL.G(t0 - 1e-7)) / 2e-7
        assert d == pytest.approx(float(NL.g(t0)), abs=1e-6)


@pytest.mark.parametrize("t", [0.1, 0.37, 0.5, 0.81, 1.0])
def test_G_matches_quadrature_of_g(t):
    q, _ = quad(lambda s: -NL.scalar_f(1 - s), 0, t, epsabs=1e-14)
    assert eval_G(NL, t) == pytest.approx(q, abs=1e-10)


def test_rejects_non_positive_mass():
    with pytest.raises(NonlinearityError):
        BistableNonlinearity(theta=0.5)
    with pytest.raises(NonlinearityError):
        BistableNonlinearity(theta=0.7)
    with pytest.raises(NonlinearityError):
        BistableNonlinearity(theta=0.3, amplitude=0.0)
    with pytest.raises(NonlinearityError):
        BistableNonlinearity(theta=0.3, kind="quintic")


def test_config_round_trip():
    nl = BistableNonlinearity.from_config({"kind": "cubic", "theta": 0.2, "amplitude": 3.0})
    assert BistableNonlinearity.from_config(nl.to_config()) == nl


@settings(max_examples=40, deadline=None)
@given(thetas, amps)
def test_positive_mass_whenever_constructed(theta, a):
    nl = BistableNonlinearity(theta, a)
    assert nl.mass > 0
    assert nl.mass == pytest.approx(a * (1 - 2 * theta) / 12.0, rel=1e-12)


# truncation ---------------------------------------------------------------


def test_truncation_plateau_zero():
    tnl = make_truncated(NL, 0.1)
    assert tnl.f(0.95) == pytest.approx(0.0, abs=1e-15)
    assert tnl.plateau == pytest.approx(0.95)


def test_truncation_equal_on_untouched_interval():
    tnl = make_truncated(NL, 0.1)
    assert tnl.f(0.85) == NL.f(0.85)
    s = np.linspace(0, 0.9, 1000)
    assert np.array_equal(tnl.f(s), NL.f(s))


def test_truncation_rejects_large_delta():
    with pytest.raises(NonlinearityError):
        make_truncated(NL, 0.8)
    with pytest.raises(NonlinearityError):
        make_truncated(NL, 0.0)


def test_truncation_is_C1_and_negative_past_plateau():
    tnl = make_truncated(NL, 0.1)
    s = np.linspace(0.951, 1.0, 200)
    assert np.all(tnl.f(s) < 0)
    for s0 in (0.9, 0.95):
        # central difference across a jump in f'' is off by O(step), a kink would be O(1)
        d = (tnl.f(s0 + 1e-7) - tnl.f(s0 - 1e-7)) / 2e-7
        assert d == pytest.approx(float(tnl.df(s0)), abs=1e-4)


def test_truncated_mass_by_quadrature():
    tnl = make_truncated(NL, 0.1)
    q, _ = quad(lambda s: float(tnl.f(s)), 0, 0.95, epsabs=1e-13, points=[0.9])
    assert tnl.mass == pytest.approx(q, abs=1e-11)
    assert tnl.mass > 0
    assert float(tnl.F(0.95)) == pytest.approx(q, abs=1e-11)


@settings(max_examples=40, deadline=None)
@given(thetas, amps, st.floats(min_value=0.01, max_value=0.95))
def test_truncation_below_f_everywhere(theta, a, frac):
    nl = BistableNonlinearity(theta, a)
    delta = frac * (1 - theta)
    try:
        tnl = make_truncated(nl, delta)
    except NonlinearityError:
        # only allowed when the truncated mass is not positive
        s = np.linspace(0, 1 - delta / 2, 4001)
        lift = nl.scalar_f(1 - delta / 2)
        assert theta >= 1 - delta or np.trapezoid(nl.f(s), s) - lift * delta / 2 < 1e-3 * a
        return
    s = np.linspace(-0.2, 1.2, 2001)
    assert np.all(tnl.f(s) <= nl.f(s) + 1e-15)
    assert math.isclose(float(tnl.f(1 - delta / 2)), 0.0, abs_tol=1e-14)
