"""Parametric obstacle families.

The limit bodies are a disk (star-shaped) and a rounded rectangle
(directionally convex with respect to the horizontal axis).  Their perturbed
versions carry thin tilted protrusions of length ``eps`` and width ``eps**2``,
tilted so that no centre sees both walls of every protrusion (spiky disk) and
so that vertical lines cross body and tooth in two pieces (comb).

``make_counterexample`` builds a ball joined by a corridor to an annulus whose
far side is cut by a narrow channel into the enclosed cavity.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from shapely import affinity
from shapely.geometry import LineString, Point, Polygon, box
from shapely.ops import unary_union

from .boundary import GeometryError, ObstacleBoundary


def _quad_segs(radius: float, h: float) -> int:
    # vertices every h/2 of arc
    return max(4, int(math.ceil(0.5 * math.pi * radius / (0.5 * h))))


def _disk_polygon(center, radius: float, h: float) -> Polygon:
    n = max(16, int(math.ceil(2.0 * math.pi * radius / (0.5 * h))))
    t = 2.0 * math.pi * np.arange(n) / n
    return Polygon(np.column_stack([center[0] + radius * np.cos(t), center[1] + radius * np.sin(t)]))


def make_disk(R0: float = 1.0, h: float = 0.05) -> ObstacleBoundary:
    return ObstacleBoundary.from_shapely(
        _disk_polygon((0.0, 0.0), R0, h), symmetric=True, name=f"disk(R0={R0:g})",
        meta={"family": "disk", "R0": R0},
    )


def _spike(base: np.ndarray, direction: np.ndarray, reach: float, half_width: float, inset: float):
    # capsule from slightly inside the body out to distance `reach` (cap included)
    start = base - inset * direction
    end = base + max(reach - half_width, 0.0) * direction
    return LineString([start, end]).buffer(half_width, quad_segs=6)


def make_spiky_disk(
    R0: float = 1.0, eps: float = 0.1, n_spikes: int = 4, h: float = 0.05, tilt: float = math.pi / 4
) -> ObstacleBoundary:
    """Disk with ``n_spikes`` thin tilted protrusions sticking out by ``eps``."""
    if eps < 0:
        raise GeometryError("eps must be non-negative")
    disk = _disk_polygon((0.0, 0.0), R0, h)
    if eps == 0:
        return make_disk(R0, h)
    half_width = 0.5 * eps * eps
    parts = [disk]
    for k in range(n_spikes):
        alpha = math.pi * (2 * k + 1) / n_spikes
        sign = math.copysign(1.0, math.sin(alpha)) if abs(math.sin(alpha)) > 1e-12 else 0.0
        phi = alpha + sign * tilt
        base = R0 * np.array([math.cos(alpha), math.sin(alpha)])
        d = np.array([math.cos(phi), math.sin(phi)])
        # length along d whose far end sits eps outside the circle
        c = math.cos(sign * tilt)
        reach = -R0 * c + math.sqrt((R0 * c) ** 2 + 2.0 * R0 * eps + eps * eps)
        parts.append(_spike(base, d, reach, half_width, inset=2.0 * half_width + 0.01 * R0))
    body = unary_union(parts)
    return ObstacleBoundary.from_shapely(
        body, corner_radius=half_width, symmetric=True,
        name=f"spiky_disk(R0={R0:g},eps={eps:g},n={n_spikes})",
        meta={"family": "spiky_disk", "R0": R0, "eps": eps, "n_spikes": n_spikes},
    )


def make_comb(
    eps: float = 0.1,
    width: float = 2.0,
    height: float = 1.0,
    n_teeth: int = 5,
    h: float = 0.05,
    tilt: float = math.pi / 4,
) -> ObstacleBoundary:
    """Rounded rectangle with tilted teeth of length ``eps`` on its long sides."""
    if eps < 0:
        raise GeometryError("eps must be non-negative")
    r = 0.1 * height
    core = box(-0.5 * width + r, -0.5 * height + r, 0.5 * width - r, 0.5 * height - r)
    body = core.buffer(r, quad_segs=_quad_segs(r, h))
    # resample straight sides at h/2 so predicates and rasterization see enough vertices
    body = body.segmentize(0.5 * h)
    if eps > 0:
        half_width = 0.5 * eps * eps
        xs = np.linspace(-0.5 * width + 2 * r, 0.5 * width - 2 * r, n_teeth)
        parts = [body]
        for x in xs:
            for side in (1.0, -1.0):
                base = np.array([x, side * 0.5 * height])
                d = np.array([math.sin(tilt), side * math.cos(tilt)])
                reach = eps / math.cos(tilt)
                parts.append(_spike(base, d, reach, half_width, inset=2.0 * half_width + 0.01 * height))
        body = unary_union(parts)
    return ObstacleBoundary.from_shapely(
        body, corner_radius=r, symmetric=True, name=f"comb(eps={eps:g})",
        meta={"family": "comb", "eps": eps, "width": width, "height": height},
    )


@dataclass(frozen=True)
class CounterexampleParams:
    R0: float = 1.0
    R1: float = 1.0
    R2: float = 2.0
    beta1: float = 1.0
    eta: float = 0.1
    eps: float = 1.0
    corridor_half_width: float | None = None

    def __post_init__(self):
        if not 0 < self.R1 < self.R2:
            raise GeometryError(f"need 0 < R1 < R2, got R1={self.R1}, R2={self.R2}")
        if not 0 < self.eta < 0.25 * (self.R2 - self.R1):
            raise GeometryError(f"need 0 < eta < (R2-R1)/4, got eta={self.eta}")
        if self.beta1 <= 0 or self.R0 <= 0:
            raise GeometryError("R0 and beta1 must be positive")
        if not 0 < self.eps <= 1:
            raise GeometryError(f"eps must lie in (0, 1], got {self.eps}")

    @property
    def center(self) -> tuple[float, float]:
        """Annulus centre of the unscaled body K_1."""
        return (self.R0 + self.R2 + self.beta1, 0.0)

    @property
    def half_corridor(self) -> float:
        if self.corridor_half_width is not None:
            return self.corridor_half_width
        return min(0.5 * (self.R2 - self.R1), 0.5 * self.R0)

    @property
    def channel_half_width(self) -> float:
        # midpoint of the [eta, 2 eta] sandwich
        return 1.5 * self.eta

    def scaled(self) -> dict:
        """Centre, radii and channel of the perturbation after scaling by eps about (R0, 0)."""
        e = self.eps
        cx = self.R0 + e * (self.center[0] - self.R0)
        return {
            "center": (cx, 0.0),
            "R1": e * self.R1,
            "R2": e * self.R2,
            "channel_half_width": e * self.channel_half_width,
            "eta": e * self.eta,
        }

    def with_eps(self, eps: float) -> "CounterexampleParams":
        return replace(self, eps=eps)


def make_counterexample(p: CounterexampleParams, h: float | None = None) -> ObstacleBoundary:
    """Ball, corridor and channel-cut annulus; the perturbation is scaled by ``p.eps``.

    Scaling acts on corridor and annulus about the contact point ``(R0, 0)``, so
    the family shrinks onto the ball ``B_R0`` as ``eps -> 0``.
    """
    res = 0.05 if h is None else h
    x0 = p.center[0]
    ring = _disk_polygon((x0, 0.0), p.R2, res).difference(_disk_polygon((x0, 0.0), p.R1, res))
    channel = box(x0, -p.channel_half_width, x0 + p.R2 + 1.0, p.channel_half_width)
    ring = ring.difference(channel)
    wc = p.half_corridor
    corridor = box(p.R0 - 0.2 * wc, -wc, x0 - p.R2 + 0.2 * wc, wc)
    perturbation = unary_union([ring, corridor])
    if p.eps != 1.0:
        perturbation = affinity.scale(perturbation, p.eps, p.eps, origin=(p.R0, 0.0))
    ball = _disk_polygon((0.0, 0.0), p.R0, res)
    body = unary_union([ball, perturbation])

    r = p.eps * min(0.25 * p.eta, res)
    qs = _quad_segs(r, res)
    # opening rounds convex corners, closing rounds concave ones
    body = body.buffer(-r, quad_segs=qs).buffer(r, quad_segs=qs)
    body = body.buffer(r, quad_segs=qs).buffer(-r, quad_segs=qs)
    body = body.simplify(1e-4 * r, preserve_topology=True)
    if body.geom_type != "Polygon" or len(body.interiors) != 0:
        raise GeometryError("counterexample body is not a single simply connected polygon")
    sc = p.scaled()
    return ObstacleBoundary.from_shapely(
        body,
        corner_radius=r,
        passage_width=2.0 * sc["channel_half_width"],
        symmetric=True,
        name=f"counterexample(eta={p.eta:g},eps={p.eps:g})",
        meta={"family": "counterexample", "params": p},
    )


def make_family(name: str, eps: float, params: dict, h: float = 0.05) -> ObstacleBoundary:
    """Look up an obstacle family by config name."""
    params = dict(params)
    if name == "disk":
        return make_disk(params.get("R0", 1.0), h)
    if name == "spiky_disk":
        return make_spiky_disk(params.get("R0", 1.0), eps, int(params.get("n_spikes", 4)), h)
    if name == "comb":
        return make_comb(eps, params.get("width", 2.0), params.get("height", 1.0),
                         int(params.get("n_teeth", 5)), h)
    if name == "counterexample":
        return make_counterexample(CounterexampleParams(eps=eps, **params), h)
    if name == "none":
        return ObstacleBoundary.empty()
    raise GeometryError(f"unknown obstacle family {name!r}")


FAMILIES = ("disk", "spiky_disk", "comb", "counterexample", "none")
