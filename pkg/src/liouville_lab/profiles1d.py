"""One-dimensional monotone profiles and the planar traveling wave.

``shoot_omega`` integrates ``w'' = -f(w)``, ``w(0) = 0``, ``w'(0) = sqrt(2 F(1))``.
That initial slope puts the orbit on the separatrix of the saddle at 1, so
``0.5 w'^2 + F(w) = F(1)`` along it; the drift of this quantity is the accuracy
certificate.  The separatrix is unstable in forward integration, so once the
profile is within ``PLATEAU_SWITCH`` of its limit the remaining tail is
continued on the linearised stable manifold ``limit - w ~ exp(-kappa xi)``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from .nonlinearity import BistableNonlinearity, TruncatedNonlinearity

PLATEAU_SWITCH = 1e-5
HAMILTONIAN_TOL = 1e-8


class ProfileError(RuntimeError):
    pass


@dataclass
class Profile1D:
    xi: np.ndarray
    values: np.ndarray
    derivs: np.ndarray
    limit: float
    decay: float
    hamiltonian_drift: float = 0.0

    def __post_init__(self):
        self._spline = CubicHermiteSpline(self.xi, self.values, self.derivs, extrapolate=False)

    @property
    def xi_max(self) -> float:
        return float(self.xi[-1])

    def __call__(self, s):
        """Evaluate the profile; 0 for ``s < 0``, exponential tail past ``xi_max``."""
        s = np.asarray(s, dtype=float)
        out = np.zeros_like(s)
        inside = (s >= 0.0) & (s <= self.xi_max)
        out[inside] = self._spline(s[inside])
        beyond = s > self.xi_max
        if np.any(beyond):
            gap = self.limit - self.values[-1]
            out[beyond] = self.limit - gap * np.exp(-self.decay * (s[beyond] - self.xi_max))
        return out[()] if out.ndim == 0 else out

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["xi", "value"])
            for x, v in zip(self.xi, self.values):
                writer.writerow([f"{x:.10g}", f"{v:.17g}"])


@dataclass
class WaveSolution:
    speed: float
    xi: np.ndarray
    profile: np.ndarray
    residual: float
    bracket_width: float

    def __call__(self, s):
        """phi(s) on the stored grid, clamped to 1 / 0 beyond its ends."""
        s = np.asarray(s, dtype=float)
        # np.interp wants increasing abscissae; the profile is decreasing in value only
        return np.interp(s, self.xi, self.profile, left=1.0, right=0.0)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["xi", "value"])
            for x, v in zip(self.xi, self.profile):
                writer.writerow([f"{x:.10g}", f"{v:.17g}"])


def _shoot(reaction, limit: float, mass: float, kappa: float, step: float, xi_max: float) -> Profile1D:
    if step <= 0.0:
        raise ValueError("step must be positive")
    if mass <= 0.0:
        raise ProfileError("profile needs a positive primitive at the plateau")
    f = reaction.scalar_f
    n = int(round(xi_max / step))
    xi = np.arange(n + 1) * step

    w, p = 0.0, math.sqrt(2.0 * mass)
    ws, ps = [w], [p]
    h, h2, h6 = step, 0.5 * step, step / 6.0
    k = 0
    while k < n and limit - w > PLATEAU_SWITCH:
        k1w, k1p = p, -f(w)
        k2w, k2p = p + h2 * k1p, -f(w + h2 * k1w)
        k3w, k3p = p + h2 * k2p, -f(w + h2 * k2w)
        k4w, k4p = p + h * k3p, -f(w + h * k3w)
        w += h6 * (k1w + 2.0 * k2w + 2.0 * k3w + k4w)
        p += h6 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p)
        if p <= 0.0 or w >= limit:
            raise ProfileError(
                f"profile left the separatrix at xi={xi[k + 1]:.4g} (w={w:.6g}, w'={p:.3g}); "
                "reduce the step"
            )
        ws.append(w)
        ps.append(p)
        k += 1

    values = np.empty(n + 1)
    derivs = np.empty(n + 1)
    values[: k + 1] = ws
    derivs[: k + 1] = ps
    if k < n:
        gap = limit - w
        tail = gap * np.exp(-kappa * (xi[k + 1 :] - xi[k]))
        values[k + 1 :] = limit - tail
        derivs[k + 1 :] = kappa * tail

    drift = float(np.max(np.abs(0.5 * derivs**2 + reaction.F(values) - mass)))
    prof = Profile1D(xi, values, derivs, limit, kappa, drift)
    _validate_profile(prof, xi_max)
    return prof


def _validate_profile(prof: Profile1D, xi_max: float) -> None:
    if prof.values[0] != 0.0:
        raise ProfileError("profile must start at 0")
    if np.any(prof.derivs <= 0.0) or np.any(np.diff(prof.values) < 0.0):
        raise ProfileError("profile is not monotone; reduce the step")
    if np.any(prof.values > prof.limit):
        raise ProfileError("profile overshoots its limit")
    if prof.hamiltonian_drift > HAMILTONIAN_TOL:
        raise ProfileError(
            f"Hamiltonian drift {prof.hamiltonian_drift:.3e} exceeds {HAMILTONIAN_TOL:g}; reduce the step"
        )
    if prof.limit - prof.values[-1] > 1e-6:
        raise ProfileError(
            f"profile reaches only {prof.values[-1]:.8f} at xi={xi_max:g}; increase xi_max"
        )


def shoot_omega(nl: BistableNonlinearity, step: float = 1e-3, xi_max: float = 40.0) -> Profile1D:
    kappa = math.sqrt(-nl.slope_at_one)
    return _shoot(nl, 1.0, nl.mass, kappa, step, xi_max)


def shoot_omega_delta(tnl: TruncatedNonlinearity, step: float = 1e-3, xi_max: float = 40.0) -> Profile1D:
    kappa = math.sqrt(-tnl.slope_at_plateau)
    return _shoot(tnl, tnl.plateau, tnl.mass, kappa, step, xi_max)


def shoot_U(nl: BistableNonlinearity, step: float = 1e-3, xi_max: float = 40.0) -> Profile1D:
    """The increasing profile used in the far-field subsolution; same orbit as omega."""
    return shoot_omega(nl, step, xi_max)


# --- traveling wave -------------------------------------------------------

_SADDLE_OFFSET = 1e-6


def _wave_rates(nl: BistableNonlinearity, c):
    # phi = 1 - psi near 1: psi'' + c psi' + f'(1) psi = 0, growing root
    lam_one = (-c + np.sqrt(c * c - 4.0 * nl.slope_at_one)) / 2.0
    # near 0: phi'' + c phi' + f'(0) phi = 0, decaying root
    mu_zero = (-c - np.sqrt(c * c - 4.0 * nl.slope_at_zero)) / 2.0
    return lam_one, mu_zero


def _shooting_functional(nl: BistableNonlinearity, speeds: np.ndarray, step: float, max_length: float):
    """Signed miss of the connecting orbit for each trial speed.

    Negative (phi' at the crossing of 0) when the orbit undershoots through 0,
    positive (phi where it turns back, or where it can no longer reach 0 by
    the energy bound) when it stops short of 0, exactly 0 when it is still
    approaching 0 after ``max_length``.
    """
    c = np.asarray(speeds, dtype=float)
    lam, _ = _wave_rates(nl, c)
    phi = np.full(c.shape, 1.0 - _SADDLE_OFFSET)
    dphi = -lam * _SADDLE_OFFSET
    out = np.zeros(c.shape)
    alive = np.ones(c.shape, dtype=bool)
    a, th = nl.amplitude, nl.theta

    # orbits are classified before phi leaves [0, 1], so the bare cubic is enough
    def rhs(y, yp):
        return yp, -c * yp - a * y * (1.0 - y) * (y - th)

    h, h2, h6 = step, 0.5 * step, step / 6.0
    for it in range(int(max_length / step)):
        k1a, k1b = rhs(phi, dphi)
        k2a, k2b = rhs(phi + h2 * k1a, dphi + h2 * k1b)
        k3a, k3b = rhs(phi + h2 * k2a, dphi + h2 * k2b)
        k4a, k4b = rhs(phi + h * k3a, dphi + h * k3b)
        phi = phi + h6 * (k1a + 2.0 * k2a + 2.0 * k3a + k4a)
        dphi = dphi + h6 * (k1b + 2.0 * k2b + 2.0 * k3b + k4b)
        under = alive & (phi < 0.0)
        turned = alive & ~under & (dphi >= 0.0)
        if it % 10 == 0:
            # 0.5 phi'^2 + F(phi) only decreases along orbits and is >= 0 at phi = 0
            turned |= alive & ~under & (0.5 * dphi**2 + nl.F(phi) < 0.0)
        out[under] = dphi[under]
        out[turned] = phi[turned]
        alive &= ~(under | turned)
        if not alive.any():
            break
        # park finished orbits on the unstable zero so they stay bounded
        phi[~alive] = th
        dphi[~alive] = 0.0
    stalled = alive & (phi > 1e-9)
    out[stalled] = phi[stalled]
    return out


def _trace_wave(nl: BistableNonlinearity, c: float, step: float, max_length: float):
    lam, _ = _wave_rates(nl, c)
    phi, dphi = 1.0 - _SADDLE_OFFSET, -lam * _SADDLE_OFFSET
    xs, ps, ds = [0.0], [phi], [dphi]
    f = nl.scalar_f
    h = step
    x = 0.0
    while x < max_length:
        k1a, k1b = dphi, -c * dphi - f(phi)
        k2a = dphi + 0.5 * h * k1b
        k2b = -c * k2a - f(phi + 0.5 * h * k1a)
        k3a = dphi + 0.5 * h * k2b
        k3b = -c * k3a - f(phi + 0.5 * h * k2a)
        k4a = dphi + h * k3b
        k4b = -c * k4a - f(phi + h * k3a)
        phi_n = phi + h / 6.0 * (k1a + 2 * k2a + 2 * k3a + k4a)
        dphi_n = dphi + h / 6.0 * (k1b + 2 * k2b + 2 * k3b + k4b)
        if phi_n <= 1e-7 or dphi_n >= 0.0:
            break
        phi, dphi = phi_n, dphi_n
        x += h
        xs.append(x)
        ps.append(phi)
        ds.append(dphi)
    return np.array(xs), np.array(ps), np.array(ds)


def solve_traveling_wave(
    nl: BistableNonlinearity,
    domain_half_length: float = 20.0,
    step: float = 0.02,
    c_bracket: tuple[float, float] | None = None,
    tol: float = 1e-8,
    samples_per_round: int = 8,
) -> WaveSolution:
    """Speed and profile of the front connecting 1 (left) to 0 (right).

    The speed is located by repeated bracketing: each round evaluates the
    shooting functional at ``samples_per_round`` interior points and keeps
    the sub-interval holding the single sign change.
    """
    if c_bracket is None:
        # bistable fronts are slower than 2 sqrt(sup f(s)/s)
        s = np.linspace(1e-3, 1.0, 1000)
        c_bracket = (0.0, 2.0 * math.sqrt(max(np.max(nl.f(s) / s), 1e-12)))
    lo, hi = map(float, c_bracket)
    max_length = 40.0 * max(nl.decay_length, 1.0 / math.sqrt(-nl.slope_at_zero)) + 200.0 * step
    f_lo, f_hi = _shooting_functional(nl, np.array([lo, hi]), step, max_length)
    if not (f_lo < 0.0 < f_hi):
        raise ProfileError(
            f"speed bracket [{lo:g}, {hi:g}] has no sign change: "
            f"functional = {f_lo:.4g} at {lo:g}, {f_hi:.4g} at {hi:g}"
        )
    while hi - lo >= tol:
        cs = np.linspace(lo, hi, samples_per_round + 2)[1:-1]
        vals = _shooting_functional(nl, cs, step, max_length)
        signs = np.sign(vals)
        if np.any(np.diff(signs) < 0):
            raise ProfileError("shooting functional changes sign more than once in the bracket")
        if np.any(signs == 0):
            root = cs[np.argmax(signs == 0)]
            lo = hi = root
            break
        pos = np.nonzero(signs > 0)[0]
        k = pos[0] if pos.size else len(cs)
        lo = cs[k - 1] if k > 0 else lo
        hi = cs[k] if k < len(cs) else hi
    speed = 0.5 * (lo + hi)

    xs, ps, ds = _trace_wave(nl, speed, step, max_length)
    # drop the end where the orbit starts peeling off the stable manifold of 0
    tail = ps > 1e-5
    xs, ps, ds = xs[tail], ps[tail], ds[tail]
    i_half = np.searchsorted(-ps, -0.5)
    x_half = xs[i_half - 1] + (ps[i_half - 1] - 0.5) / (ps[i_half - 1] - ps[i_half]) * step
    xs = xs - x_half

    L = float(domain_half_length)
    grid = np.arange(-L, L + 0.5 * step, step)
    lam, mu = _wave_rates(nl, speed)
    phi = np.interp(grid, xs, ps)
    left = grid < xs[0]
    phi[left] = 1.0 - (1.0 - ps[0]) * np.exp(lam * (grid[left] - xs[0]))
    right = grid > xs[-1]
    phi[right] = ps[-1] * np.exp(mu * (grid[right] - xs[-1]))

    # residual of phi'' + c phi' + f(phi) on the traced part
    d2 = -speed * ds - nl.f(ps)
    res = np.gradient(ds, step)[1:-1] - d2[1:-1]
    residual = float(np.max(np.abs(res))) if res.size else 0.0

    # strictness is only checkable where float64 still separates phi from 0 and 1
    resolved = (phi[:-1] > 1e-12) & (phi[:-1] < 1.0 - 1e-12)
    if np.any(np.diff(phi) > 0.0) or np.any(np.diff(phi)[resolved] >= 0.0):
        raise ProfileError("traveling-wave profile is not strictly decreasing")
    if phi[0] <= 1.0 - 1e-3 or phi[-1] >= 1e-3:
        raise ProfileError(
            f"half length {L:g} too short: phi(-L)={phi[0]:.6f}, phi(L)={phi[-1]:.2e}"
        )
    return WaveSolution(speed, grid, phi, residual, hi - lo)


def radialize(p: Profile1D, shift: float, mask, boundary_value: float | None = None):
    """Field ``x -> p(|x| - shift)`` on the active nodes of ``mask`` (0 inside the shift radius)."""
    from .solver import Field2D

    if shift < 0.0:
        raise ValueError("shift must be non-negative")
    r = np.hypot(mask.active_x, mask.active_y)
    vals = np.where(r >= shift, p(np.maximum(r - shift, 0.0)), 0.0)
    bv = p.limit if boundary_value is None else boundary_value
    return Field2D(mask, vals, boundary_value=bv)


def write_profile_csv(profile, path: str | Path) -> None:
    profile.to_csv(path)
