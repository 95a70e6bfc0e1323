"""Steady and parabolic bistable problems on a masked grid.

All operators come from ``GridMask.operator``: with stiffness K, lumped
areas m and Dirichlet coupling B, the discrete Laplacian is
``-(K u - B g) / m`` for boundary data g.  K is a symmetric M-matrix, which
gives the discrete maximum principle for the semi-implicit parabolic step.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu, spsolve

from .geometry.grid import GridMask
from .nonlinearity import BistableNonlinearity

INVADED, BLOCKED, INDETERMINATE = "INVADED", "BLOCKED", "INDETERMINATE"
BOUND_TOL = 1e-12
# initial guesses may come from other solvers converged to ~1e-8
INIT_TOL = 1e-8


class SolverError(RuntimeError):
    pass


class ConvergenceError(SolverError):
    pass


class MaximumPrincipleError(SolverError):
    pass


class StepRejected(SolverError):
    pass


@dataclass
class Field2D:
    """Values on the active nodes of ``mask``.

    ``boundary_value`` is the Dirichlet datum: a scalar, or one value per node
    of ``mask.operator().dirichlet_nodes``.
    """

    mask: GridMask
    values: np.ndarray
    boundary_value: float | np.ndarray = 1.0
    residual: float = math.nan
    iterations: int = 0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.mask.n_active,):
            raise ValueError(f"expected {self.mask.n_active} active values, got {self.values.shape}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field values must be finite")

    @classmethod
    def constant(cls, mask: GridMask, value: float, boundary_value: float = 1.0) -> "Field2D":
        return cls(mask, np.full(mask.n_active, float(value)), boundary_value)

    def with_values(self, values, **kw) -> "Field2D":
        kw.setdefault("boundary_value", self.boundary_value)
        return Field2D(self.mask, values, **kw)

    def boundary_vector(self, clamp: bool = True) -> np.ndarray:
        nd = len(self.mask.operator(clamp).dirichlet_nodes)
        if np.isscalar(self.boundary_value):
            return np.full(nd, float(self.boundary_value))
        bv = np.asarray(self.boundary_value, dtype=float)
        if not clamp:
            return bv[:0]
        return bv

    def full_grid(self, fill: float = math.nan) -> np.ndarray:
        """Values on the whole node array; Dirichlet nodes carry their data, obstacle nodes ``fill``."""
        out = self.mask.to_grid(self.values, fill)
        op = self.mask.operator(True)
        flat = out.reshape(-1)
        flat[op.dirichlet_nodes] = self.boundary_vector(True)
        return out

    def min(self) -> float:
        return float(self.values.min())

    def argmin_location(self) -> tuple[float, float]:
        k = int(np.argmin(self.values))
        return float(self.mask.active_x[k]), float(self.mask.active_y[k])

    def symmetry_defect(self) -> float:
        """Largest ``|u(x1, x2) - u(x1, -x2)|`` over nodes whose mirror is active."""
        mi = self.mask.mirror_index
        ok = mi >= 0
        return float(np.max(np.abs(self.values[ok] - self.values[mi[ok]]), initial=0.0))

    def to_vtk(self, path, name: str = "u") -> None:
        from .io import write_vtk

        write_vtk(self, path, name)

    def to_csv(self, path, name: str = "u") -> None:
        from .io import write_field_csv

        write_field_csv(self, path, name)


@dataclass(frozen=True)
class SolverConfig:
    newton_tol: float = 1e-10
    max_newton: int = 50
    damping: float = 0.5
    min_step: float = 2.0**-20
    armijo_c: float = 1e-4
    fallback_flow_dt: float | None = None
    fallback_steps: int = 40
    fallback_rounds: int = 12
    clamp: bool = True

    def __post_init__(self):
        for name in ("newton_tol", "max_newton", "damping", "min_step", "fallback_steps", "fallback_rounds"):
            if getattr(self, name) <= 0:
                raise ValueError(f"SolverConfig.{name} must be positive")
        if not self.damping < 1:
            raise ValueError("SolverConfig.damping must lie in (0, 1)")
        if self.fallback_flow_dt is not None and self.fallback_flow_dt <= 0:
            raise ValueError("SolverConfig.fallback_flow_dt must be positive")

    @classmethod
    def from_config(cls, block: dict | None) -> "SolverConfig":
        block = dict(block or {})
        known = set(cls.__dataclass_fields__)
        extra = set(block) - known
        if extra:
            raise ValueError(f"unknown solver options: {sorted(extra)}")
        return cls(**block)

    def flow_dt(self, h: float) -> float:
        return self.fallback_flow_dt if self.fallback_flow_dt is not None else 0.2 * h * h / 4.0


@dataclass
class ClassificationReport:
    verdict: str
    min_value: float
    argmin: tuple[float, float]
    residual: float
    thresholds: dict

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "min_value": self.min_value,
            "argmin_x": self.argmin[0],
            "argmin_y": self.argmin[1],
            "residual": self.residual,
            **{f"threshold_{k}": v for k, v in self.thresholds.items()},
        }


# discrete operators ---------------------------------------------------------


def apply_laplacian(mask: GridMask, u: Field2D, clamp: bool = True) -> Field2D:
    """Discrete Laplacian of ``u`` with Neumann walls and the field's Dirichlet data."""
    op = mask.operator(clamp)
    lap = -(op.stiffness @ u.values - op.coupling @ u.boundary_vector(clamp)) / op.mass
    return Field2D(mask, lap, boundary_value=0.0)


def steady_residual(mask: GridMask, nl: BistableNonlinearity, u: Field2D, clamp: bool = True) -> np.ndarray:
    """Nodewise ``-Lap_h u - f(u)``."""
    op = mask.operator(clamp)
    return (op.stiffness @ u.values - op.coupling @ u.boundary_vector(clamp)) / op.mass - nl.f(u.values)


def _wnorm(r: np.ndarray, m: np.ndarray) -> float:
    return float(np.sqrt(np.dot(m, r * r)))


def _check_bounds(values: np.ndarray, what: str, strict_positive: bool = False, tol: float = BOUND_TOL) -> None:
    lo, hi = float(values.min()), float(values.max())
    if hi > 1.0 + tol or lo < -tol or (strict_positive and lo <= 0.0):
        raise MaximumPrincipleError(f"{what}: values span [{lo:.3e}, {hi:.3e}], outside the admissible range")


def stability_budget(nl: BistableNonlinearity) -> float:
    """Largest dt for which ``s + dt f(s)`` maps [0, 1] into itself."""
    return 1.0 / (nl.amplitude * max(nl.theta, 1.0 - nl.theta))


def _parabolic_factor(mask: GridMask, dt: float, clamp: bool):
    key = ("parabolic", float(dt), clamp)
    cache = mask.cache()
    if key not in cache:
        op = mask.operator(clamp)
        A = (sp.diags(op.mass / dt) + op.stiffness).tocsc()
        cache[key] = splu(A)
    return cache[key]


def step_parabolic(
    mask: GridMask, nl: BistableNonlinearity, u: Field2D, dt: float, clamp: bool = True, check: bool = True
) -> Field2D:
    """One step of ``(u+ - u)/dt - Lap_h u+ = f(u)``."""
    if dt <= 0:
        raise StepRejected("dt must be positive")
    if check and dt > stability_budget(nl) * (1 + 1e-12):
        raise StepRejected(f"dt={dt:g} exceeds the stability budget {stability_budget(nl):g}")
    op = mask.operator(clamp)
    rhs = op.mass * (u.values / dt + nl.f(u.values)) + op.coupling @ u.boundary_vector(clamp)
    new = _parabolic_factor(mask, dt, clamp).solve(rhs)
    if check:
        try:
            _check_bounds(new, "parabolic step")
        except MaximumPrincipleError as exc:
            raise StepRejected(str(exc)) from exc
    return u.with_values(new)


# steady problem ------------------------------------------------------------


def _newton(mask, nl, u, cfg: SolverConfig, history: list, merit: list):
    op = mask.operator(cfg.clamp)
    g = u.boundary_vector(cfg.clamp)
    m = op.mass
    x = u.values.copy()

    def resid(v):
        return (op.stiffness @ v - op.coupling @ g) / m - nl.f(v)

    r = resid(x)
    rn = _wnorm(r, m)
    for it in range(cfg.max_newton + 1):
        sup = float(np.abs(r).max())
        history.append(sup)
        merit.append(rn)
        if sup <= cfg.newton_tol:
            return x, sup, it, True
        if it == cfg.max_newton:
            break
        J = (op.stiffness - sp.diags(m * nl.df(x))).tocsc()
        d = spsolve(J, -m * r)
        lam = 1.0
        while lam >= cfg.min_step:
            trial = x + lam * d
            rt = resid(trial)
            rtn = _wnorm(rt, m)
            if rtn <= (1.0 - cfg.armijo_c * lam) * rn:
                break
            lam *= cfg.damping
        else:
            return x, sup, it, False
        if not rtn < rn:
            raise SolverError("Newton residual failed to decrease under Armijo damping")
        x, r, rn = trial, rt, rtn
    return x, float(np.abs(r).max()), cfg.max_newton, False


def gradient_flow(
    mask: GridMask, nl: BistableNonlinearity, u: Field2D, dt: float, steps: int, clamp: bool = True,
    grow: float = 1.0,
) -> Field2D:
    """Semi-implicit flow; ``dt`` is multiplied by ``grow`` after each step, capped at the stability budget."""
    cap = stability_budget(nl)
    for _ in range(steps):
        u = step_parabolic(mask, nl, u, min(dt, cap), clamp=clamp)
        dt *= grow
    return u


def solve_steady(
    mask: GridMask, nl: BistableNonlinearity, u_init: Field2D, cfg: SolverConfig | None = None
) -> Field2D:
    """Damped Newton for ``-Lap_h u = f(u)``, with gradient-flow fallback when Newton stalls."""
    cfg = cfg or SolverConfig()
    _check_bounds(u_init.values, "initial guess", tol=INIT_TOL)
    history: list[float] = []
    merit: list[float] = []
    u = u_init
    dt = cfg.flow_dt(mask.h)
    total = 0
    for rnd in range(cfg.fallback_rounds + 1):
        x, sup, its, ok = _newton(mask, nl, u, cfg, history, merit)
        total += its
        if ok:
            # a residual of size newton_tol allows an O(newton_tol) overshoot of the plateau
            _check_bounds(x, "converged steady state", strict_positive=True,
                          tol=max(BOUND_TOL, 10.0 * cfg.newton_tol))
            # rounding can leave the plateau a few ulps above 1; keep the snap only if it stays converged
            snapped = np.minimum(x, 1.0)
            r_snap = float(np.abs(steady_residual(mask, nl, u.with_values(snapped), cfg.clamp)).max())
            if r_snap <= cfg.newton_tol:
                x, sup = snapped, r_snap
            out = u.with_values(x, residual=sup, iterations=total)
            out.meta.update({"newton_history": history, "newton_merit": merit, "fallback_rounds": rnd})
            return out
        if rnd == cfg.fallback_rounds:
            break
        # flow from the last admissible state; Newton iterates may have left [0, 1]
        start = u if (x.min() < -BOUND_TOL or x.max() > 1 + BOUND_TOL) else u.with_values(x)
        u = gradient_flow(mask, nl, start, dt, cfg.fallback_steps, clamp=cfg.clamp, grow=2.0)
        dt = min(dt * 2.0 ** cfg.fallback_steps, stability_budget(nl))
    raise ConvergenceError(
        f"steady solve did not converge: residual {history[-1]:.3e} after {total} Newton steps "
        f"and {cfg.fallback_rounds} fallback rounds"
    )


# comparison and classification -----------------------------------------------


@dataclass
class OrderCheck:
    holds: bool
    worst_gap: float
    location: tuple[float, float]
    tol: float


def check_subsolution_order(u: Field2D, p, R0: float, tol_order: float | None = None) -> OrderCheck:
    """Check ``u(x) >= p(|x| - R0) - tol_order`` on active nodes with ``|x| >= R0``."""
    mask = u.mask
    tol = 10.0 * mask.h**2 if tol_order is None else tol_order
    r = np.hypot(mask.active_x, mask.active_y)
    sel = r >= R0
    if not sel.any():
        return OrderCheck(True, math.inf, (math.nan, math.nan), tol)
    gap = u.values[sel] - p(r[sel] - R0)
    k = int(np.argmin(gap))
    loc = (float(mask.active_x[sel][k]), float(mask.active_y[sel][k]))
    worst = float(gap[k])
    return OrderCheck(worst >= -tol, worst, loc, tol)


def classify_values(values, x, y, theta: float, residual: float = math.nan, tol_liouville: float = 1e-2):
    k = int(np.argmin(values))
    mn = float(values[k])
    if mn > 1.0 - tol_liouville:
        verdict = INVADED
    elif mn <= theta:
        verdict = BLOCKED
    else:
        verdict = INDETERMINATE
    return ClassificationReport(
        verdict, mn, (float(x[k]), float(y[k])), residual,
        {"invaded_above": 1.0 - tol_liouville, "blocked_at_or_below": theta},
    )


def classify_solution(
    u: Field2D, nl: BistableNonlinearity, tol_liouville: float = 1e-2, region: np.ndarray | None = None
) -> ClassificationReport:
    """INVADED if min u > 1 - tol, BLOCKED if min u <= theta, else INDETERMINATE.

    ``region`` optionally restricts the minimum to a boolean subset of active nodes.
    """
    sel = np.ones(u.mask.n_active, dtype=bool) if region is None else np.asarray(region, dtype=bool)
    return classify_values(
        u.values[sel], u.mask.active_x[sel], u.mask.active_y[sel], nl.theta, u.residual, tol_liouville
    )


# parabolic invasion -----------------------------------------------------------


@dataclass
class InvasionResult:
    times: np.ndarray
    probe_min: np.ndarray
    mass: np.ndarray
    front: np.ndarray
    final: Field2D
    report: ClassificationReport
    speed: float
    front_start: float

    def stalled(self, theta: float) -> bool:
        """Probe minimum stays at or below ``theta`` over the second half of the run."""
        late = self.times >= 0.5 * self.times[-1]
        return bool(np.all(self.probe_min[late] <= theta))

    def to_csv(self, path) -> None:
        from .io import write_series_csv

        write_series_csv(path, {"t": self.times, "probe_min": self.probe_min, "mass": self.mass})


def front_position(u: Field2D, level: float = 0.5) -> float:
    """Leftmost ``level`` crossing of ``u`` along the x2 = 0 row, scanning left to right."""
    mask = u.mask
    grid = u.full_grid()
    j = int(np.argmin(np.abs(mask.coords)))
    row = grid[:, j]
    x = mask.coords
    ok = np.isfinite(row)
    xs, vs = x[ok], row[ok]
    below = np.nonzero(vs < level)[0]
    if len(below) == 0:
        return math.inf
    k = below[0]
    if k == 0:
        return float(xs[0])
    v0, v1 = vs[k - 1], vs[k]
    return float(xs[k - 1] + (v0 - level) / (v0 - v1) * (xs[k] - xs[k - 1]))


def run_invasion(
    mask: GridMask,
    nl: BistableNonlinearity,
    wave,
    t_end: float,
    cfg: SolverConfig | None = None,
    dt: float = 0.05,
    probe: np.ndarray | None = None,
    record_every: int = 1,
    front_start: float | None = None,
    tol_liouville: float = 1e-2,
) -> InvasionResult:
    """March the planar front ``phi(x1 - front - c t)`` past the obstacle.

    The Dirichlet ring follows the unobstructed wave, so far from the obstacle
    the front moves as it would in free space.  ``probe`` selects the active
    nodes whose minimum is recorded (default: all).
    """
    cfg = cfg or SolverConfig()
    if t_end <= 0:
        raise ValueError("t_end must be positive")
    x_front = -(mask.R_outer - 2.0) if front_start is None else front_start
    op = mask.operator(True)
    xd = mask._XY[0].reshape(-1)[op.dirichlet_nodes]
    sel = np.ones(mask.n_active, dtype=bool) if probe is None else np.asarray(probe, dtype=bool)
    if not sel.any():
        raise ValueError("probe region is empty")

    def ring(t):
        return wave(xd - x_front - wave.speed * t)

    u = Field2D(mask, wave(mask.active_x - x_front), boundary_value=ring(0.0))
    n_steps = int(math.ceil(t_end / dt - 1e-9))
    times, mins, masses, fronts = [0.0], [u.values[sel].min()], [op.mass @ u.values], [front_position(u)]
    for k in range(1, n_steps + 1):
        t = k * dt
        u = Field2D(mask, u.values, boundary_value=ring(t))
        u = step_parabolic(mask, nl, u, dt)
        if k % record_every == 0 or k == n_steps:
            times.append(t)
            mins.append(u.values[sel].min())
            masses.append(op.mass @ u.values)
            fronts.append(front_position(u))
    times, mins, masses, fronts = map(np.asarray, (times, mins, masses, fronts))
    report = classify_solution(u, nl, tol_liouville, region=sel)
    speed = _front_speed(times, fronts, x_front, mask)
    u.meta["t_end"] = float(times[-1])
    return InvasionResult(times, mins, masses, fronts, u, report, speed, x_front)


def _front_speed(times, fronts, x_front, mask) -> float:
    # fit over the window where the front is well inside the domain and left of the origin
    ok = np.isfinite(fronts) & (fronts > x_front + 0.5) & (fronts < -0.5 * mask.R_outer + 2.0)
    ok &= times > 0.1 * times[-1]
    if ok.sum() < 3:
        ok = np.isfinite(fronts) & (times > 0)
        if ok.sum() < 2:
            return math.nan
    slope = np.polyfit(times[ok], fronts[ok], 1)[0]
    return float(slope)


def shadow_region(mask: GridMask, x_min: float, x_max: float, half_width: float) -> np.ndarray:
    """Active nodes in the box ``x_min <= x1 <= x_max, |x2| <= half_width``."""
    x, y = mask.active_x, mask.active_y
    return (x >= x_min) & (x <= x_max) & (np.abs(y) <= half_width)


def disk_region(mask: GridMask, center, radius: float) -> np.ndarray:
    return np.hypot(mask.active_x - center[0], mask.active_y - center[1]) <= radius


__all__ = [
    "BLOCKED",
    "INDETERMINATE",
    "INVADED",
    "ClassificationReport",
    "ConvergenceError",
    "Field2D",
    "InvasionResult",
    "MaximumPrincipleError",
    "OrderCheck",
    "SolverConfig",
    "SolverError",
    "StepRejected",
    "apply_laplacian",
    "check_subsolution_order",
    "classify_solution",
    "disk_region",
    "front_position",
    "gradient_flow",
    "run_invasion",
    "shadow_region",
    "solve_steady",
    "stability_budget",
    "step_parabolic",
    "steady_residual",
]
