"""Independent brute-force oracles shared by the geometry and acceptance tests."""
import numpy as np
from shapely import affinity
from shapely.geometry import LineString, MultiPoint, Polygon, box
from shapely.ops import unary_union


def _random_polygon(rng, k):
    if k % 6 == 4:
        pts = rng.uniform(-1, 1, (6, 2))
        return MultiPoint(np.vstack([pts, pts * [1, -1]])).convex_hull
    if k % 6 == 5:
        parts = []
        for _ in range(rng.integers(2, 4)):
            x0 = rng.uniform(-1, 0.6)
            parts.append(box(x0, -rng.uniform(0.1, 0.8), x0 + rng.uniform(0.2, 0.8), rng.uniform(0.1, 0.8)))
        return unary_union(parts)
    if k % 4 == 2:
        return MultiPoint(rng.uniform(-1, 1, (8, 2))).convex_hull
    if k % 4 == 3:
        hull = MultiPoint(rng.uniform(-1, 1, (10, 2))).convex_hull
        notch = affinity.rotate(box(-0.15, -0.6, 0.15, 0.6), rng.uniform(0, 180))
        return hull.difference(affinity.translate(notch, *rng.uniform(-0.6, 0.6, 2)))
    if k % 4 == 0:
        n = rng.integers(5, 13)
        ang = np.sort(rng.uniform(0, 2 * np.pi, n))
        r = rng.uniform(0.25, 1.0, n)
        return Polygon(np.column_stack([r * np.cos(ang), r * np.sin(ang)]))
    parts = []
    for _ in range(rng.integers(2, 4)):
        w, hh = rng.uniform(0.2, 1.0, 2)
        piece = affinity.rotate(box(-w / 2, -hh / 2, w / 2, hh / 2), rng.uniform(0, 180))
        parts.append(affinity.translate(piece, *rng.uniform(-0.5, 0.5, 2)))
    return unary_union(parts)


def random_polygons(count=50, seed=2024):
    rng = np.random.default_rng(seed)
    out, k = [], 0
    while len(out) < count:
        poly = _random_polygon(rng, k)
        k += 1
        if poly.geom_type == "Polygon" and not poly.interiors and poly.is_valid and poly.exterior.is_simple:
            out.append(poly)
    return out


def brute_star(poly, n=200):
    """Search a grid of candidate centres for one with nu(y).(y - x) >= 0 on every edge."""
    xy = np.asarray(poly.exterior.coords)[:-1]
    if not poly.exterior.is_ccw:
        xy = xy[::-1]
    d = np.roll(xy, -1, axis=0) - xy
    nrm = np.column_stack([d[:, 1], -d[:, 0]])
    nrm /= np.linalg.norm(nrm, axis=1)[:, None]
    x0, y0, x1, y1 = poly.bounds
    X, Y = np.meshgrid(np.linspace(x0, x1, n), np.linspace(y0, y1, n))
    c = np.column_stack([X.ravel(), Y.ravel()])
    val = np.einsum("ej,ej->e", nrm, xy)[None, :] - c @ nrm.T
    return bool(np.any(np.all(val >= -1e-12, axis=1)))


def brute_dir_convex(poly, e, n=2000):
    """Cut with shapely lines parallel to e, including lines just inside every vertex offset."""
    e = np.asarray(e, float)
    perp = np.array([-e[1], e[0]])
    s = np.asarray(poly.exterior.coords) @ perp
    span = s.max() - s.min()
    offs = np.concatenate([np.linspace(s.min(), s.max(), n + 2)[1:-1], s - 1e-7 * span, s + 1e-7 * span])
    lo_max, hi_min = -np.inf, np.inf
    for off in offs[(offs > s.min()) & (offs < s.max())]:
        sec = poly.intersection(LineString([off * perp - 10 * e, off * perp + 10 * e]))
        segs = [g for g in getattr(sec, "geoms", [sec]) if not g.is_empty and g.length > 0]
        if len(segs) > 1:
            return False
        if segs:
            tt = np.asarray(segs[0].coords) @ e
            lo_max, hi_min = max(lo_max, tt.min()), min(hi_min, tt.max())
    return lo_max <= hi_min + 1e-9
