"""Discrete energy for the transformed problem ``-Lap v = g(v)`` and its local minimization.

The energy uses the same weights as the solver operator:

    J(w) = 1/2 sum_edges w_ij (w_i - w_j)^2 + 1/2 sum_rim w_ik (w_i - b_k)^2 - sum_i m_i G(w_i)

so its gradient is exactly ``m * (-Lap_h w - g(w))``, the solver residual in
the variable ``v = 1 - u`` scaled by the nodal areas.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components
from scipy.sparse.linalg import splu

from .geometry.families import CounterexampleParams
from .geometry.grid import GridMask
from .nonlinearity import BistableNonlinearity
from .solver import BOUND_TOL, Field2D

# Gauss-Legendre nodes/weights on [0, 1]; exact for the cubic g on [0, 1]
_GL_X = 0.5 + 0.5 * np.array([-math.sqrt(0.6), 0.0, math.sqrt(0.6)])
_GL_W = np.array([5.0, 8.0, 5.0]) / 18.0


class EnergyError(RuntimeError):
    def __init__(self, message: str, report: "EnergyReport | None" = None, v: Field2D | None = None):
        super().__init__(message)
        self.report = report
        self.v = v


class BallExitError(EnergyError):
    pass


class StagnationError(EnergyError):
    pass


@dataclass
class EnergyReport:
    status: str
    J_value: float
    J_initial: float
    H1_distance_to_v0: float
    delta_ball: float
    gradient_norm: float
    iterations: int
    gap_zero: float
    gap_one: float
    nontrivial: bool
    stable: bool | None = None
    J_history: list = field(default_factory=list)
    decrements: list = field(default_factory=list)

    def to_dict(self, history: bool = False) -> dict:
        d = asdict(self)
        if not history:
            d.pop("J_history")
            d.pop("decrements")
        return d

    @property
    def strictly_decreasing(self) -> bool:
        """Every accepted step lowered J (decrements are computed without cancellation)."""
        return all(d < 0 for d in self.decrements)

    def to_json(self, history: bool = False) -> str:
        return json.dumps(self.to_dict(history), indent=2, sort_keys=True)


@dataclass(frozen=True)
class MinimizeConfig:
    tol: float = 1e-8
    max_iter: int = 5000
    armijo_c: float = 1e-4
    min_step: float = 2.0**-30
    nontrivial_tol: float = 1e-2
    clamp: bool = True

    @classmethod
    def from_config(cls, block: dict | None) -> "MinimizeConfig":
        block = dict(block or {})
        extra = set(block) - set(cls.__dataclass_fields__)
        if extra:
            raise ValueError(f"unknown minimization options: {sorted(extra)}")
        return cls(**block)


def _bvec(w: Field2D, clamp: bool) -> np.ndarray:
    return w.boundary_vector(clamp)


def energy(mask: GridMask, nl: BistableNonlinearity, w: Field2D, clamp: bool = True, reaction: bool = True) -> float:
    """Discrete J of ``w``; ``reaction=False`` drops the potential term (Dirichlet energy only)."""
    op = mask.operator(clamp)
    x = w.values
    e = op.edges
    J = 0.5 * float(np.dot(op.edge_weights, (x[e[:, 0]] - x[e[:, 1]]) ** 2))
    if len(op.dirichlet_weights):
        b = _bvec(w, clamp)
        de = op.dirichlet_edges
        J += 0.5 * float(np.dot(op.dirichlet_weights, (x[de[:, 0]] - b[de[:, 1]]) ** 2))
    if reaction:
        J -= float(np.dot(op.mass, nl.G(x)))
    return J


def _gradient(op, nl, x, b, reaction=True):
    grad = op.stiffness @ x - op.coupling @ b
    if reaction:
        grad = grad - op.mass * nl.g(x)
    return grad


def energy_gradient(
    mask: GridMask, nl: BistableNonlinearity, w: Field2D, clamp: bool = True, reaction: bool = True
) -> Field2D:
    """Nodewise partial derivatives of ``energy``: ``m * (-Lap_h w - g(w))``."""
    op = mask.operator(clamp)
    return Field2D(mask, _gradient(op, nl, w.values, _bvec(w, clamp), reaction), boundary_value=0.0)


def energy_change(op, nl, x, s, grad) -> float:
    """``J(x + s) - J(x)`` evaluated without cancellation against J itself."""
    quad = float(np.dot(grad, s)) + 0.5 * float(np.dot(s, op.stiffness @ s))
    # integral of g over [x, x+s] minus g(x) s, by 3-point Gauss-Legendre
    gx = nl.g(x)
    inc = sum(wq * (nl.g(x + xq * s) - gx) for xq, wq in zip(_GL_X, _GL_W))
    return quad - float(np.dot(op.mass, inc * s))


def h1_norm(mask: GridMask, w, clamp: bool = True) -> float:
    """Discrete H1 norm ``sqrt(w.(K + M) w)``; the rim is treated as zero."""
    op = mask.operator(clamp)
    x = w.values if isinstance(w, Field2D) else np.asarray(w)
    return math.sqrt(float(np.dot(x, op.stiffness @ x) + np.dot(op.mass, x * x)))


def v0_profile(s, R1: float, R2: float):
    """Value of v0 at offset ``s = x1 - x1^0`` inside the cavity component: 1, then a ramp to 0."""
    s = np.asarray(s, dtype=float)
    inner = (2 * R1 + R2) / 3.0
    outer = (R1 + 2 * R2) / 3.0
    ramp = 3.0 / (R2 - R1) * (outer - s)
    return np.where(s <= inner, 1.0, np.where(s >= outer, 0.0, ramp))


def build_v0(mask: GridMask, p: CounterexampleParams) -> Field2D:
    """Initial state: 1 in the cavity side of ``B_R2(x0)``, a ramp across the annulus, 0 elsewhere."""
    ob = mask.obstacle
    if ob is not None and ob.meta.get("family") == "counterexample" and ob.meta.get("params") != p:
        raise ValueError("mask was rasterized from a different counterexample")
    sc = p.scaled()
    cx, cy = sc["center"]
    R1, R2 = sc["R1"], sc["R2"]
    x, y = mask.active_x, mask.active_y
    ball = _cavity_component(mask, np.hypot(x - cx, y - cy) < R2, (cx, cy))
    vals = np.where(ball, v0_profile(x - cx, R1, R2), 0.0)
    return Field2D(mask, vals, boundary_value=0.0, meta={"center": (cx, cy), "R1": R1, "R2": R2})


def _cavity_component(mask: GridMask, inside: np.ndarray, center) -> np.ndarray:
    """Nodes of ``inside`` connected to the node nearest ``center``.

    Polygonal arcs are inscribed, so isolated nodes just outside the outer
    wall can fall inside ``B_R2(x0)``; they are not part of the cavity.
    """
    if not inside.any():
        return inside
    op = mask.operator(True)
    e = op.edges
    keep = inside[e[:, 0]] & inside[e[:, 1]]
    n = mask.n_active
    g = sp.coo_matrix((np.ones(keep.sum()), (e[keep, 0], e[keep, 1])), shape=(n, n))
    _, labels = connected_components(g, directed=False)
    d = np.hypot(mask.active_x - center[0], mask.active_y - center[1])
    seed = int(np.argmin(np.where(inside, d, np.inf)))
    return inside & (labels == labels[seed])


def _preconditioner(mask: GridMask, sigma: float, clamp: bool):
    key = ("h1prec", float(sigma), clamp)
    cache = mask.cache()
    if key not in cache:
        op = mask.operator(clamp)
        cache[key] = splu((op.stiffness + sp.diags(sigma * op.mass)).tocsc())
    return cache[key]


def _gaps(v: np.ndarray, region: np.ndarray | None):
    sel = v if region is None or not np.any(region) else v[region]
    return float(np.max(np.abs(sel))), float(np.max(np.abs(sel - 1.0)))


def _descend(mask, nl, v: Field2D, cfg: MinimizeConfig, v0=None, delta_ball=math.inf, region=None,
             keep_history=True):
    op = mask.operator(cfg.clamp)
    b = _bvec(v, cfg.clamp)
    # the Hessian near the stable states is K + a*theta*M (v ~ 1) or K + a*(1-theta)*M (v ~ 0)
    P = _preconditioner(mask, nl.amplitude * nl.theta, cfg.clamp)
    x = v.values.copy()
    J = energy(mask, nl, v, cfg.clamp)
    J0 = J
    hist = [J]
    drops: list[float] = []
    grad = _gradient(op, nl, x, b)
    res = float(np.max(np.abs(grad / op.mass)))
    ref = x.copy() if v0 is None else v0.values
    dist = h1_norm(mask, x - ref, cfg.clamp)
    lam0 = 1.0
    it = 0

    def report(status):
        gz, go = _gaps(x, region)
        nontriv = gz > cfg.nontrivial_tol and go > cfg.nontrivial_tol
        return EnergyReport(status, J, J0, dist, delta_ball, res, it, gz, go, nontriv,
                            J_history=hist if keep_history else [], decrements=drops if keep_history else [])

    while res > cfg.tol:
        if it >= cfg.max_iter:
            raise StagnationError(f"no convergence in {cfg.max_iter} iterations (residual {res:.3e})",
                                  report("STAGNATED"), v.with_values(x))
        d = -P.solve(grad)
        slope = float(np.dot(grad, d))
        if not slope < 0:
            raise StagnationError("preconditioned gradient is not a descent direction", report("STAGNATED"),
                                  v.with_values(x))
        lam = lam0
        while True:
            dJ = energy_change(op, nl, x, lam * d, grad)
            if dJ <= cfg.armijo_c * lam * slope:
                break
            lam *= 0.5
            if lam < cfg.min_step:
                raise StagnationError(f"line search failed at residual {res:.3e}", report("STAGNATED"),
                                      v.with_values(x))
        if not dJ < 0:
            raise StagnationError("energy did not decrease", report("STAGNATED"), v.with_values(x))
        x = x + lam * d
        J += dJ
        hist.append(J)
        drops.append(dJ)
        it += 1
        lam0 = min(1.0, 2.0 * lam)
        grad = _gradient(op, nl, x, b)
        res = float(np.max(np.abs(grad / op.mass)))
        dist = h1_norm(mask, x - ref, cfg.clamp)
        if dist >= delta_ball:
            raise BallExitError(
                f"iterate left the H1 ball: distance {dist:.4g} >= {delta_ball:.4g} after {it} steps",
                report("BALL_EXIT"), v.with_values(x))
    return x, report("SUCCESS")


def minimize_local(
    mask: GridMask,
    nl: BistableNonlinearity,
    v0: Field2D,
    delta_ball: float | None = None,
    cfg: MinimizeConfig | None = None,
    region: np.ndarray | None = None,
) -> tuple[Field2D, EnergyReport]:
    """Preconditioned descent of J from ``v0``, failing if the iterate leaves the H1 ball around ``v0``.

    Returns ``(v, report)``; a stationary but trivial ``v`` (all zero or all
    one on ``region``) is returned with status ``TRIVIAL``.
    """
    cfg = cfg or MinimizeConfig()
    if delta_ball is None:
        n0 = h1_norm(mask, v0, cfg.clamp)
        delta_ball = 0.5 * n0 if n0 > 0 else math.inf
    if delta_ball <= 0:
        raise ValueError("delta_ball must be positive")
    x, rep = _descend(mask, nl, v0, cfg, v0=v0, delta_ball=delta_ball, region=region)
    if not rep.nontrivial:
        rep.status = "TRIVIAL"
    v = v0.with_values(x, residual=rep.gradient_norm, iterations=rep.iterations)
    return v, rep


def euler_lagrange_residual(mask: GridMask, nl: BistableNonlinearity, v: Field2D, clamp: bool = True) -> float:
    """Sup norm of ``-Lap_h v - g(v)``."""
    op = mask.operator(clamp)
    return float(np.max(np.abs(_gradient(op, nl, v.values, _bvec(v, clamp)) / op.mass)))


def to_solution(mask: GridMask, v: Field2D) -> Field2D:
    """``u = 1 - v``; the rim value 0 of v becomes the far-field value 1 of u."""
    bv = v.boundary_value
    ub = 1.0 - (np.asarray(bv) if not np.isscalar(bv) else float(bv))
    u = 1.0 - v.values
    # v a few ulps below 0 is rounding, not an overshoot of the plateau
    if u.max() <= 1.0 + BOUND_TOL:
        u = np.minimum(u, 1.0)
    return Field2D(mask, u, boundary_value=ub, residual=v.residual, iterations=v.iterations)


def random_bumps(mask: GridMask, n: int, rng: np.random.Generator, region: np.ndarray | None = None,
                 width: tuple[float, float] | None = None) -> np.ndarray:
    """Sum of ``n`` Gaussian bumps with random signs, centres on active nodes (in ``region`` if given)."""
    x, y = mask.active_x, mask.active_y
    pool = np.nonzero(region)[0] if region is not None and np.any(region) else np.arange(mask.n_active)
    lo, hi = width or (3.0 * mask.h, 12.0 * mask.h)
    out = np.zeros(mask.n_active)
    for _ in range(n):
        k = pool[rng.integers(len(pool))]
        s = rng.uniform(lo, hi)
        out += rng.choice([-1.0, 1.0]) * np.exp(-((x - x[k]) ** 2 + (y - y[k]) ** 2) / (2 * s * s))
    return out


def probe_distances(
    mask: GridMask,
    nl: BistableNonlinearity,
    v: Field2D,
    n_probes: int = 8,
    magnitude: float | None = None,
    seed: int = 0,
    cfg: MinimizeConfig | None = None,
    region: np.ndarray | None = None,
) -> list[float]:
    """Sup distance to ``v`` after flowing back from each of ``n_probes`` random perturbations."""
    cfg = cfg or MinimizeConfig(tol=1e-10)
    if magnitude is None:
        magnitude = 0.05 * 0.5 * max(h1_norm(mask, v, cfg.clamp), 1.0)
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n_probes):
        w = random_bumps(mask, 3, rng, region)
        w *= magnitude / h1_norm(mask, w, cfg.clamp)
        try:
            x, _ = _descend(mask, nl, v.with_values(v.values + w), cfg, keep_history=False)
            out.append(float(np.max(np.abs(x - v.values))))
        except EnergyError:
            out.append(math.inf)
    return out


def stability_probe(
    mask: GridMask,
    nl: BistableNonlinearity,
    v: Field2D,
    n_probes: int = 8,
    magnitude: float | None = None,
    seed: int = 0,
    tol: float = 1e-6,
    cfg: MinimizeConfig | None = None,
    region: np.ndarray | None = None,
) -> bool:
    """True iff every perturbed copy of ``v`` flows back to within ``tol`` of it (not a spectral certificate)."""
    d = probe_distances(mask, nl, v, n_probes, magnitude, seed, cfg, region)
    return bool(all(x <= tol for x in d))


__all__ = [
    "BallExitError",
    "EnergyError",
    "EnergyReport",
    "MinimizeConfig",
    "StagnationError",
    "build_v0",
    "energy",
    "energy_change",
    "energy_gradient",
    "euler_lagrange_residual",
    "h1_norm",
    "minimize_local",
    "probe_distances",
    "random_bumps",
    "stability_probe",
    "to_solution",
    "v0_profile",
]
