"""Bistable reaction terms.

The cubic ``f(s) = a s (1 - s)(s - theta)`` is the only built-in family.  Outside
``[0, 1]`` it is continued by its tangent lines at the stable zeros so that
Newton iterates which briefly leave the unit interval still see a C^1 function.

``g(v) = -f(1 - v)`` and its primitive ``G`` describe the same problem after the
substitution ``v = 1 - u`` used by the energy module.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate


class NonlinearityError(ValueError):
    """Raised when parameters do not give a bistable, positive-mass reaction."""


@dataclass(frozen=True)
class BistableNonlinearity:
    theta: float
    amplitude: float = 1.0
    kind: str = "cubic"

    def __post_init__(self):
        if self.kind != "cubic":
            raise NonlinearityError(f"unsupported nonlinearity kind {self.kind!r}")
        if not 0.0 < self.theta < 1.0:
            raise NonlinearityError(f"theta must lie in (0, 1), got {self.theta}")
        if self.amplitude <= 0.0:
            raise NonlinearityError(f"amplitude must be positive, got {self.amplitude}")
        if self.theta >= 0.5:
            raise NonlinearityError(
                f"theta={self.theta} gives F(1) = a(1-2theta)/12 <= 0 (no positive mass)"
            )

    @classmethod
    def from_config(cls, block: dict) -> "BistableNonlinearity":
        return cls(
            theta=float(block["theta"]),
            amplitude=float(block.get("amplitude", 1.0)),
            kind=block.get("kind", "cubic"),
        )

    def to_config(self) -> dict:
        return {"kind": self.kind, "theta": self.theta, "amplitude": self.amplitude}

    @property
    def plateau(self) -> float:
        """Upper stable zero reached by the monotone profiles."""
        return 1.0

    @property
    def slope_at_zero(self) -> float:
        return -self.amplitude * self.theta

    @property
    def slope_at_one(self) -> float:
        return -self.amplitude * (1.0 - self.theta)

    @property
    def mass(self) -> float:
        """F(1), the integral of f over [0, 1]."""
        return self.amplitude * (1.0 - 2.0 * self.theta) / 12.0

    @property
    def decay_length(self) -> float:
        """Length scale on which 1 - u relaxes next to the stable state 1."""
        return 1.0 / math.sqrt(-self.slope_at_one)

    def f(self, s):
        s = np.asarray(s, dtype=float)
        a, th = self.amplitude, self.theta
        inner = a * s * (1.0 - s) * (s - th)
        out = np.where(s < 0.0, self.slope_at_zero * s, inner)
        out = np.where(s > 1.0, self.slope_at_one * (s - 1.0), out)
        return out[()] if out.ndim == 0 else out

    def df(self, s):
        s = np.asarray(s, dtype=float)
        a, th = self.amplitude, self.theta
        inner = a * (-3.0 * s * s + 2.0 * (1.0 + th) * s - th)
        out = np.where(s < 0.0, self.slope_at_zero, inner)
        out = np.where(s > 1.0, self.slope_at_one, out)
        return out[()] if out.ndim == 0 else out

    def F(self, s):
        s = np.asarray(s, dtype=float)
        a, th = self.amplitude, self.theta
        inner = a * (-0.25 * s**4 + (1.0 + th) / 3.0 * s**3 - 0.5 * th * s**2)
        out = np.where(s < 0.0, 0.5 * self.slope_at_zero * s * s, inner)
        out = np.where(s > 1.0, self.mass + 0.5 * self.slope_at_one * (s - 1.0) ** 2, out)
        return out[()] if out.ndim == 0 else out

    def g(self, v):
        return -self.f(1.0 - np.asarray(v, dtype=float))

    def dg(self, v):
        return self.df(1.0 - np.asarray(v, dtype=float))

    def G(self, t):
        """Primitive of ``g`` with ``G(0) = 0``; equals ``F(1 - t) - F(1)`` without the cancellation."""
        t = np.asarray(t, dtype=float)
        a, k = self.amplitude, 1.0 - self.theta
        inner = -a * (0.5 * k * t * t - (1.0 + k) / 3.0 * t**3 + 0.25 * t**4)
        out = np.where(t < 0.0, 0.5 * self.slope_at_one * t * t, inner)
        out = np.where(t > 1.0, 0.5 * self.slope_at_zero * (t - 1.0) ** 2 - self.mass, out)
        return out[()] if out.ndim == 0 else out

    def scalar_f(self, s: float) -> float:
        # plain-float path for the 1D integrators
        if s < 0.0:
            return self.slope_at_zero * s
        if s > 1.0:
            return self.slope_at_one * (s - 1.0)
        return self.amplitude * s * (1.0 - s) * (s - self.theta)

    def truncated(self, delta: float) -> "TruncatedNonlinearity":
        return make_truncated(self, delta)


def _smoothstep(t):
    t = np.clip(t, 0.0, 1.0)
    return t * t * (3.0 - 2.0 * t)


def _smoothstep_integral(t):
    # integral of the smoothstep from 0 to t, continued linearly past t = 1
    tc = np.clip(t, 0.0, 1.0)
    return tc**3 - 0.5 * tc**4 + np.maximum(t - 1.0, 0.0)


@dataclass(frozen=True)
class TruncatedNonlinearity:
    """``f_delta = f - b`` with ``b`` a C^1 cubic ramp on ``[1 - delta, 1 - delta/2]``.

    ``b`` is zero below ``1 - delta`` and equals ``f(1 - delta/2)`` from
    ``1 - delta/2`` on, so ``f_delta`` agrees with ``f`` on ``[0, 1 - delta]``,
    vanishes at ``1 - delta/2``, never exceeds ``f``, and is a piecewise cubic
    with matching slopes at the knots.
    """

    base: BistableNonlinearity
    delta: float
    _lift: float = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "_lift", float(self.base.f(1.0 - 0.5 * self.delta)))

    @property
    def theta(self) -> float:
        return self.base.theta

    @property
    def plateau(self) -> float:
        return 1.0 - 0.5 * self.delta

    @property
    def slope_at_plateau(self) -> float:
        return float(self.df(self.plateau))

    def _ramp_arg(self, s):
        return (np.asarray(s, dtype=float) - (1.0 - self.delta)) / (0.5 * self.delta)

    def f(self, s):
        return self.base.f(s) - self._lift * _smoothstep(self._ramp_arg(s))

    def df(self, s):
        t = np.clip(self._ramp_arg(s), 0.0, 1.0)
        return self.base.df(s) - self._lift * 6.0 * t * (1.0 - t) / (0.5 * self.delta)

    def F(self, s):
        ramp = 0.5 * self.delta * _smoothstep_integral(self._ramp_arg(s))
        return self.base.F(s) - self._lift * ramp

    def scalar_f(self, s: float) -> float:
        t = (s - (1.0 - self.delta)) / (0.5 * self.delta)
        t = min(max(t, 0.0), 1.0)
        return self.base.scalar_f(s) - self._lift * t * t * (3.0 - 2.0 * t)

    @property
    def mass(self) -> float:
        """F_delta at the plateau; positive for every admitted delta."""
        return float(self.F(self.plateau))


def make_truncated(nl: BistableNonlinearity, delta: float) -> TruncatedNonlinearity:
    if not delta > 0.0:
        raise NonlinearityError(f"delta must be positive, got {delta}")
    if 1.0 - delta <= nl.theta:
        raise NonlinearityError(
            f"1 - delta = {1.0 - delta:g} must exceed theta = {nl.theta:g}"
        )
    tnl = TruncatedNonlinearity(nl, float(delta))
    top = tnl.plateau

    mass, _ = integrate.quad(lambda s: float(tnl.f(s)), 0.0, top, points=[nl.theta, 1.0 - delta])
    if mass <= 0.0:
        raise NonlinearityError(
            f"delta={delta:g}: integral of f_delta over [0, {top:g}] is {mass:.3e} <= 0"
        )

    s = np.linspace(0.0, 1.0, 1001)[1:-1]
    fd = tnl.f(s)
    if np.any(fd > nl.f(s)):
        raise NonlinearityError(f"delta={delta:g}: f_delta exceeds f")
    below = s < nl.theta
    middle = (s > nl.theta) & (s < top)
    above = s > top
    if np.any(fd[below] >= 0.0) or np.any(fd[middle] <= 0.0) or np.any(fd[above] >= 0.0):
        raise NonlinearityError(
            f"delta={delta:g}: f_delta lost the bistable sign pattern "
            f"(need 1 - delta/2 beyond the maximum of f)"
        )
    if tnl.slope_at_plateau >= 0.0:
        raise NonlinearityError(f"delta={delta:g}: f_delta'(1 - delta/2) must be negative")
    return tnl


def eval_f(nl, s):
    return nl.f(s)


def eval_F(nl, s):
    return nl.F(s)


def eval_G(nl, t):
    return nl.G(t)
