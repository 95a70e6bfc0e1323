"""The ten acceptance criteria, with their tolerances and time budgets.

Heavy computations are shared through module-scoped fixtures; each fixture
records its own wall time so budgets are checked against the work they cover.
"""
import json
import math
import time

import numpy as np
import pytest
from oracles import brute_dir_convex, brute_star, random_polygons

from liouville_lab.energy import build_v0, energy, energy_gradient, minimize_local, to_solution
from liouville_lab.experiments.config import parse_scenario
from liouville_lab.experiments.runner import run_scenario
from liouville_lab.geometry import (
    CounterexampleParams,
    ObstacleBoundary,
    boundary_distance_C0,
    boundary_distance_C1,
    is_directionally_convex,
    is_star_shaped,
    make_comb,
    make_counterexample,
    make_disk,
    make_spiky_disk,
    rasterize,
)
from liouville_lab.nonlinearity import BistableNonlinearity
from liouville_lab.profiles1d import radialize, shoot_omega, shoot_omega_delta, solve_traveling_wave
from liouville_lab.solver import (
    BLOCKED,
    INVADED,
    Field2D,
    check_subsolution_order,
    classify_solution,
    disk_region,
    run_invasion,
    solve_steady,
    steady_residual,
)

THETA = 0.3
NL1 = BistableNonlinearity(THETA, 1.0)
# the blocking construction needs a short decay length against the unit-size cavity
NL10 = BistableNonlinearity(THETA, 10.0)
R_OUTER = 8.0

_CONVERGED: dict[str, Field2D] = {}


def _timed(fn, *args, **kw):
    t0 = time.perf_counter()
    out = fn(*args, **kw)
    return out, time.perf_counter() - t0


def _steady_disk(h):
    mask = rasterize(make_disk(1.0, h), h, R_OUTER, decay_length=NL1.decay_length)
    u = solve_steady(mask, NL1, radialize(shoot_omega(NL1), 1.0, mask))
    return mask, u


@pytest.fixture(scope="module")
def disk_pair():
    (coarse, t1) = _timed(_steady_disk, 0.05)
    (fine, t2) = _timed(_steady_disk, 0.025)
    _CONVERGED["disk h=0.05"] = coarse[1]
    _CONVERGED["disk h=0.025"] = fine[1]
    return coarse, fine, t1 + t2


def _steady_family(b, h=0.05):
    mask = rasterize(b, h, R_OUTER, decay_length=NL1.decay_length)
    return solve_steady(mask, NL1, radialize(shoot_omega(NL1), b.max_radius(), mask))


@pytest.fixture(scope="module")
def counterexample():
    t0 = time.perf_counter()
    p = CounterexampleParams(R0=1.0, R1=1.0, R2=2.0, beta1=1.0, eta=0.1)
    h = 0.025
    mask = rasterize(make_counterexample(p, h), h, R_OUTER, decay_length=NL10.decay_length)
    sc = p.scaled()
    v, rep = minimize_local(mask, NL10, build_v0(mask, p), region=disk_region(mask, sc["center"], sc["R2"]))
    u = to_solution(mask, v)
    us = solve_steady(mask, NL10, u)
    _CONVERGED["counterexample h=0.025"] = us
    elapsed = time.perf_counter() - t0
    return p, mask, v, rep, u, us, elapsed


# 1 -------------------------------------------------------------------------------------


@pytest.mark.criterion(1, "shooting certificate for omega (Hamiltonian drift, limit, < 1 s)")
def test_criterion_01_shooting_certificate():
    omega, dt = _timed(shoot_omega, NL1, step=1e-3)
    drift = np.max(np.abs(0.5 * omega.derivs**2 + NL1.F(omega.values) - NL1.F(1.0)))
    assert drift <= 1e-8
    assert float(omega(40.0)) > 1 - 1e-6
    assert dt < 1.0


# 2 -------------------------------------------------------------------------------------


@pytest.mark.criterion(2, "wave speed and profile against the closed form, theta in {0.1,...,0.4}, < 5 s")
def test_criterion_02_wave_speed():
    t0 = time.perf_counter()
    for theta in (0.1, 0.2, 0.3, 0.4):
        wave = solve_traveling_wave(BistableNonlinearity(theta, 1.0))
        exact = (1 - 2 * theta) / math.sqrt(2)
        assert abs(wave.speed - exact) <= 0.01 * exact
        # both profiles are pinned at phi(0) = 1/2, so the shift is zero
        ref = 1.0 / (1.0 + np.exp(wave.xi / math.sqrt(2)))
        assert np.max(np.abs(wave.profile - ref)) <= 1e-3
    assert time.perf_counter() - t0 < 5.0


# 3 -------------------------------------------------------------------------------------


@pytest.mark.criterion(3, "energy gradient vs central differences, 20 fields at h in {0.1, 0.05}, < 10 s")
def test_criterion_03_gradient_check():
    t0 = time.perf_counter()
    worst = 0.0
    for h in (0.1, 0.05):
        mask = rasterize(make_disk(1.0, h), h, R_OUTER)
        rng = np.random.default_rng(20 + int(1 / h))
        eps = 1e-5
        for _ in range(20):
            w = Field2D(mask, rng.uniform(0, 1, mask.n_active), boundary_value=0.0)
            d = rng.standard_normal(mask.n_active)
            fd = (energy(mask, NL1, w.with_values(w.values + eps * d))
                  - energy(mask, NL1, w.with_values(w.values - eps * d))) / (2 * eps)
            exact = float(np.dot(energy_gradient(mask, NL1, w).values, d))
            worst = max(worst, abs(fd - exact) / abs(exact))
    assert worst <= 1e-6
    assert time.perf_counter() - t0 < 10.0


# 4 -------------------------------------------------------------------------------------


@pytest.mark.criterion(4, "disk: INVADED, min u >= 0.99, refinement change <= 5e-3, < 2 min")
def test_criterion_04_liouville_disk(disk_pair):
    (mask_c, uc), (mask_f, uf), elapsed = disk_pair
    rep = classify_solution(uc, NL1)
    assert rep.verdict == INVADED
    assert uc.min() >= 0.99
    assert abs(uc.min() - uf.min()) <= 5e-3
    assert elapsed < 120.0


# 5 -------------------------------------------------------------------------------------


@pytest.mark.criterion(5, "spiky disk and comb at eps in {0.02, 0.05}: certified non-convex shapes, INVADED, < 10 min")
def test_criterion_05_robustness():
    t0 = time.perf_counter()
    for eps in (0.02, 0.05):
        spiky = make_spiky_disk(1.0, eps, h=0.05)
        assert not is_star_shaped(spiky)
        u = _steady_family(spiky)
        _CONVERGED[f"spiky eps={eps}"] = u
        assert classify_solution(u, NL1).verdict == INVADED

        comb = make_comb(eps, h=0.05)
        assert not is_directionally_convex(comb, (0.0, 1.0))
        u = _steady_family(comb)
        _CONVERGED[f"comb eps={eps}"] = u
        assert classify_solution(u, NL1).verdict == INVADED
    assert time.perf_counter() - t0 < 600.0


# 6 -------------------------------------------------------------------------------------


@pytest.mark.criterion(6, "counterexample: nontrivial minimizer, BLOCKED steady state, stalled invasion, < 20 min")
def test_criterion_06_counterexample(counterexample):
    p, mask, v, rep, u, us, elapsed = counterexample
    t0 = time.perf_counter()
    # (a)
    assert rep.status == "SUCCESS" and rep.nontrivial
    assert rep.strictly_decreasing and rep.J_value < rep.J_initial
    # (b)
    assert np.max(np.abs(steady_residual(mask, NL10, u))) <= 1e-6
    cls = classify_solution(us, NL10)
    assert cls.verdict == BLOCKED and cls.min_value <= THETA
    # (c)
    sc = p.scaled()
    probe = disk_region(mask, sc["center"], sc["R1"])
    wave = solve_traveling_wave(NL10)
    res = run_invasion(mask, NL10, wave, t_end=30.0, dt=0.05, probe=probe, record_every=10)
    late = res.times >= 0.5 * res.times[-1]
    assert np.all(res.probe_min[late] <= THETA)
    assert res.stalled(THETA)
    _CONVERGED["invasion final state"] = res.final
    assert elapsed + time.perf_counter() - t0 < 1200.0


# 7 -------------------------------------------------------------------------------------


@pytest.mark.criterion(7, "comparison with the truncated subsolution on the disk: gap >= -10 h^2 for delta = 0.1")
def test_criterion_07_comparison(disk_pair):
    (mask, u), _, _ = disk_pair
    wd = shoot_omega_delta(NL1.truncated(0.1))
    chk = check_subsolution_order(u, wd, 1.0)
    assert chk.worst_gap >= -10 * mask.h**2
    assert chk.holds


# 8 -------------------------------------------------------------------------------------


@pytest.mark.criterion(8, "geometry certificates and predicate/brute-force agreement on 50 polygons")
def test_criterion_08_geometry():
    disk = is_star_shaped(make_disk(1.0, 0.05))
    assert disk.verdict and disk.center is not None
    assert not is_star_shaped(make_spiky_disk(1.0, 0.1, h=0.05))
    assert is_directionally_convex(make_comb(0.0), (0.0, 1.0))
    assert not is_directionally_convex(make_comb(0.05), (0.0, 1.0))
    cx = make_counterexample(CounterexampleParams())
    assert not is_star_shaped(cx)
    assert not is_directionally_convex(cx, (1.0, 0.0))
    for poly in random_polygons(50):
        b = ObstacleBoundary.from_shapely(poly)
        assert bool(is_star_shaped(b)) == brute_star(poly)
        assert bool(is_directionally_convex(b, (0.0, 1.0))) == brute_dir_convex(poly, (0.0, 1.0))
        assert bool(is_directionally_convex(b, (1.0, 0.0))) == brute_dir_convex(poly, (1.0, 0.0))


# 9 -------------------------------------------------------------------------------------


@pytest.mark.criterion(9, "counterexample family converges in C0 (>= 4x from eps 0.4 to 0.1) but not C1 (>= 1 rad)")
def test_criterion_09_c0_not_c1():
    h = 0.025
    limit = make_disk(1.0, h)
    d0, d1 = {}, {}
    for eps in (0.1, 0.2, 0.4, 1.0):
        b = make_counterexample(CounterexampleParams(eps=eps), h)
        d0[eps] = boundary_distance_C0(b, limit, h / 4)
        d1[eps] = boundary_distance_C1(b, limit, h / 4)
    assert d0[0.4] / d0[0.1] >= 4.0
    assert all(d >= 1.0 for d in d1.values())
    assert d0[0.1] < d0[0.2] < d0[0.4] < d0[1.0]


# 10 ------------------------------------------------------------------------------------


@pytest.mark.criterion(10, "converged fields lie in (0, 1]; fixed-seed reruns are byte-identical")
def test_criterion_10_bounds_and_determinism(disk_pair, counterexample, tmp_path):
    assert len(_CONVERGED) >= 3
    for name, u in _CONVERGED.items():
        assert np.all(u.values > 0.0), name
        assert np.all(u.values <= 1.0), name
    doc = {
        "name": "repeat",
        "kind": "energy_min",
        "nonlinearity": {"kind": "cubic", "theta": THETA, "amplitude": 10.0},
        "obstacle": {"family": "counterexample", "eta": [0.1]},
        "grid": {"h": 0.04, "R_outer": R_OUTER},
        "energy": {"n_probes": 2},
        "seed": 7,
    }
    runs = [run_scenario(parse_scenario(json.loads(json.dumps(doc))), tmp_path / k) for k in "ab"]
    for rel in ("summary.csv", "eps1_eta0.1_h0.04/u.csv", "eps1_eta0.1_h0.04/v.vtk",
                "eps1_eta0.1_h0.04/energy_report.json"):
        assert (runs[0].run_dir / rel).read_bytes() == (runs[1].run_dir / rel).read_bytes(), rel
    assert runs[0].rows[0]["verdict"] == BLOCKED
