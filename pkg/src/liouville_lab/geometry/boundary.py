from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import shapely
from shapely.geometry import LinearRing, MultiPolygon, Polygon
from shapely.geometry.polygon import orient


class GeometryError(ValueError):
    pass


def _signed_area(loop: np.ndarray) -> float:
    x, y = loop[:, 0], loop[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


@dataclass(frozen=True)
class ObstacleBoundary:
    """Closed polygonal loops bounding a compact obstacle K.

    Loops are stored without repeating the first vertex.  Outer loops run
    counter-clockwise and hole loops clockwise, so the outward normal of K on
    edge ``p -> q`` is always ``(dy, -dx) / |q - p|``.

    ``passage_width`` is the narrowest free passage the generator built into the
    obstacle (a channel, for instance); rasterization refuses grids that do not
    resolve it.  ``symmetric`` marks obstacles that are mirror symmetric in x2.
    """

    loops: tuple
    corner_radius: float = 0.0
    passage_width: float = float("inf")
    symmetric: bool = False
    name: str = ""
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        loops = tuple(np.asarray(lp, dtype=float) for lp in self.loops)
        for lp in loops:
            if lp.ndim != 2 or lp.shape[1] != 2 or len(lp) < 3:
                raise GeometryError("each loop needs at least three 2D vertices")
            if not LinearRing(lp).is_simple:
                raise GeometryError(f"loop with {len(lp)} vertices is not simple")
        object.__setattr__(self, "loops", loops)

    # construction ------------------------------------------------------

    @classmethod
    def empty(cls) -> "ObstacleBoundary":
        return cls(loops=(), name="empty")

    @classmethod
    def from_shapely(cls, geom, **kwargs) -> "ObstacleBoundary":
        polys = list(geom.geoms) if isinstance(geom, MultiPolygon) else [geom]
        loops = []
        for poly in polys:
            if poly.is_empty:
                continue
            poly = orient(poly, sign=1.0)
            loops.append(np.asarray(poly.exterior.coords)[:-1])
            loops.extend(np.asarray(ring.coords)[:-1] for ring in poly.interiors)
        return cls(loops=tuple(loops), **kwargs)

    # derived geometry --------------------------------------------------

    @property
    def is_empty(self) -> bool:
        return len(self.loops) == 0

    @property
    def vertices(self) -> np.ndarray:
        if self.is_empty:
            return np.zeros((0, 2))
        return np.concatenate(self.loops)

    def edges(self) -> tuple[np.ndarray, np.ndarray]:
        """Start and end points of every edge, all loops concatenated."""
        if self.is_empty:
            return np.zeros((0, 2)), np.zeros((0, 2))
        starts = np.concatenate(self.loops)
        ends = np.concatenate([np.roll(lp, -1, axis=0) for lp in self.loops])
        return starts, ends

    def normals(self) -> np.ndarray:
        p, q = self.edges()
        d = q - p
        n = np.column_stack([d[:, 1], -d[:, 0]])
        return n / np.linalg.norm(n, axis=1, keepdims=True)

    def to_shapely(self):
        if self.is_empty:
            return Polygon()
        outers = [lp for lp in self.loops if _signed_area(lp) > 0]
        holes = [lp for lp in self.loops if _signed_area(lp) < 0]
        polys = []
        for outer in outers:
            shell = Polygon(outer)
            inner = [h for h in holes if shell.contains(Polygon(h).representative_point())]
            polys.append(Polygon(outer, inner))
        return polys[0] if len(polys) == 1 else MultiPolygon(polys)

    def contains(self, x, y) -> np.ndarray:
        """Closed-set membership of points in K."""
        if self.is_empty:
            return np.zeros(np.shape(x), dtype=bool)
        return shapely.intersects_xy(self.to_shapely(), x, y)

    def max_radius(self) -> float:
        v = self.vertices
        return float(np.max(np.hypot(v[:, 0], v[:, 1]))) if len(v) else 0.0

    def check_orientation(self) -> bool:
        """Outward normals point away from K at every edge midpoint."""
        p, q = self.edges()
        mid = 0.5 * (p + q)
        step = 1e-7 * max(1.0, self.max_radius())
        probe = mid + step * self.normals()
        return not np.any(self.contains(probe[:, 0], probe[:, 1]))

    def densify(self, spacing: float) -> tuple[np.ndarray, np.ndarray]:
        """Points along every edge at most ``spacing`` apart, with the owning edge normal."""
        p, q = self.edges()
        nrm = self.normals()
        lengths = np.linalg.norm(q - p, axis=1)
        counts = np.maximum(1, np.ceil(lengths / spacing).astype(int))
        idx = np.repeat(np.arange(len(p)), counts)
        offsets = np.arange(counts.sum()) - np.repeat(np.cumsum(counts) - counts, counts)
        t = offsets / counts[idx]
        pts = p[idx] + t[:, None] * (q[idx] - p[idx])
        return pts, nrm[idx]

    # serialization -----------------------------------------------------

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["loop", "x", "y"])
            for k, lp in enumerate(self.loops):
                for x, y in lp:
                    writer.writerow([k, f"{x:.12g}", f"{y:.12g}"])

    @classmethod
    def from_csv(cls, path: str | Path, **kwargs) -> "ObstacleBoundary":
        rows: dict[int, list] = {}
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                rows.setdefault(int(row["loop"]), []).append((float(row["x"]), float(row["y"])))
        return cls(loops=tuple(np.array(rows[k]) for k in sorted(rows)), **kwargs)
