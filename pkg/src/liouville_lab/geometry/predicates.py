"""Exact tests of the two geometric hypotheses for polygonal obstacles.

Star shape: the outward normal is constant on an edge, so the condition
``nu(y) . (y - x) >= 0`` for every boundary point y reduces to one half-plane
per edge.  Intersecting them (the polygon kernel) either yields a centre or
identifies the edge that emptied the intersection.

Directional convexity: the combinatorics of a line parallel to ``e`` meeting
a polygon only change when the line passes a vertex, so testing one line per
gap between consecutive vertex offsets (plus lines hugging each vertex offset)
decides the question exactly.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .boundary import GeometryError, ObstacleBoundary


@dataclass
class StarShapeResult:
    verdict: bool
    center: np.ndarray | None = None
    violating_edge: int | None = None
    kernel: np.ndarray | None = None
    visible: bool | None = None

    def __bool__(self):
        return self.verdict


@dataclass
class DirConvexResult:
    verdict: bool
    offset: float | None = None
    violating_line: float | None = None
    segments: int = 0
    reason: str = ""

    def __bool__(self):
        return self.verdict


def _clip_halfplane(poly: np.ndarray, normal: np.ndarray, bound: float) -> np.ndarray:
    """Part of convex polygon ``poly`` with ``normal . x <= bound``."""
    if len(poly) == 0:
        return poly
    s = poly @ normal - bound
    inside = s <= 0.0
    if inside.all():
        return poly
    if not inside.any():
        return poly[:0]
    nxt = np.roll(np.arange(len(poly)), -1)
    out = []
    for i in range(len(poly)):
        j = nxt[i]
        if inside[i]:
            out.append(poly[i])
        if inside[i] != inside[j]:
            t = s[i] / (s[i] - s[j])
            out.append(poly[i] + t * (poly[j] - poly[i]))
    return np.array(out) if out else poly[:0]


def _polygon_centroid(poly: np.ndarray) -> np.ndarray:
    x, y = poly[:, 0], poly[:, 1]
    cross = x * np.roll(y, -1) - np.roll(x, -1) * y
    area = 0.5 * cross.sum()
    if abs(area) < 1e-14:
        return poly.mean(axis=0)
    cx = ((x + np.roll(x, -1)) * cross).sum() / (6.0 * area)
    cy = ((y + np.roll(y, -1)) * cross).sum() / (6.0 * area)
    return np.array([cx, cy])


def star_kernel(b: ObstacleBoundary, tol: float = 1e-9) -> tuple[np.ndarray, int | None]:
    """Kernel polygon of a single-loop obstacle and the index of the emptying edge."""
    p, q = b.edges()
    normals = b.normals()
    bounds = np.einsum("ij,ij->i", normals, p) + tol
    lo, hi = p.min(axis=0) - 1.0, p.max(axis=0) + 1.0
    kernel = np.array([[lo[0], lo[1]], [hi[0], lo[1]], [hi[0], hi[1]], [lo[0], hi[1]]])
    for k in range(len(p)):
        kernel = _clip_halfplane(kernel, normals[k], bounds[k])
        if len(kernel) == 0:
            return kernel, k
    return kernel, None


def is_star_shaped(b: ObstacleBoundary, tol: float = 1e-9, n_rays: int = 400, n_steps: int = 64) -> StarShapeResult:
    if b.is_empty:
        return StarShapeResult(True)
    if len(b.loops) != 1:
        raise GeometryError("star-shape test needs a single-loop boundary")
    kernel, bad = star_kernel(b, tol)
    if bad is not None:
        return StarShapeResult(False, violating_edge=bad, kernel=kernel)
    center = _polygon_centroid(kernel)

    # the segment from the centre to every sampled boundary point stays inside K
    verts = b.loops[0]
    pick = verts[np.linspace(0, len(verts) - 1, min(n_rays, len(verts))).astype(int)]
    t = np.arange(n_steps) / n_steps
    pts = center[None, None, :] + t[None, :, None] * (pick[:, None, :] - center[None, None, :])
    inside = b.contains(pts[..., 0].ravel(), pts[..., 1].ravel())
    visible = bool(inside.all())
    return StarShapeResult(visible, center=center, kernel=kernel, visible=visible)


def _line_hits(starts_s, starts_t, ends_s, ends_t, offsets):
    """Sorted crossing parameters ``t`` of the lines ``s = offset`` with every edge."""
    s0 = starts_s[None, :]
    s1 = ends_s[None, :]
    off = offsets[:, None]
    crosses = (s0 - off) * (s1 - off) < 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        frac = (off - s0) / (s1 - s0)
    t = starts_t[None, :] + frac * (ends_t - starts_t)[None, :]
    t = np.where(crosses, t, np.inf)
    t.sort(axis=1)
    counts = crosses.sum(axis=1)
    return t, counts


def is_directionally_convex(
    b: ObstacleBoundary,
    e_dir=(0.0, 1.0),
    tol: float = 1e-9,
    h_scan: float | None = None,
    chunk: int = 512,
) -> DirConvexResult:
    """Scanline test against lines parallel to ``e_dir``.

    With ``h_scan=None`` the lines are placed between and next to consecutive
    vertex offsets (exact for polygons); otherwise they are uniformly spaced.
    On success ``offset`` is the ``a`` of a hyperplane ``x . e = a`` meeting
    every nonempty section of K.
    """
    if b.is_empty:
        return DirConvexResult(True, offset=0.0)
    e = np.asarray(e_dir, dtype=float)
    e = e / np.linalg.norm(e)
    perp = np.array([-e[1], e[0]])
    p, q = b.edges()
    ps, pt = p @ perp, p @ e
    qs, qt = q @ perp, q @ e

    verts = np.unique(b.vertices @ perp)
    span = verts[-1] - verts[0]
    # merge offsets that differ only by rounding, so no scanline lands on a vertex
    verts = verts[np.concatenate([[True], np.diff(verts) > 1e-10 * max(span, 1.0)])]
    if h_scan is None:
        nudge = 1e-7 * max(span, 1.0)
        mids = 0.5 * (verts[1:] + verts[:-1])
        gaps = np.diff(verts)
        near = np.concatenate([verts[:-1] + np.minimum(nudge, 0.25 * gaps), verts[1:] - np.minimum(nudge, 0.25 * gaps)])
        offsets = np.unique(np.concatenate([mids, near]))
    else:
        n = max(2, int(np.ceil(span / h_scan)))
        offsets = verts[0] + span * (np.arange(n) + 0.5) / n

    lo_max, hi_min = -np.inf, np.inf
    for i in range(0, len(offsets), chunk):
        off = offsets[i : i + chunk]
        t, counts = _line_hits(ps, pt, qs, qt, off)
        hit = counts > 0
        if np.any(counts % 2):
            raise GeometryError("scanline met an odd number of edges; boundary not closed")
        # merge abutting pieces: a section is one segment when its inner gaps vanish
        nseg = np.zeros(len(off), dtype=int)
        for r in np.nonzero(hit)[0]:
            tt = t[r, : counts[r]]
            gaps = tt[2::2] - tt[1:-1:2]
            nseg[r] = 1 + int(np.sum(gaps > tol))
        if np.any(nseg > 1):
            r = int(np.argmax(nseg))
            return DirConvexResult(False, violating_line=float(off[r]), segments=int(nseg[r]),
                                   reason="line meets K in more than one segment")
        if hit.any():
            first = t[hit, 0]
            last = np.take_along_axis(t[hit], (counts[hit] - 1)[:, None], axis=1)[:, 0]
            lo_max = max(lo_max, float(first.max()))
            hi_min = min(hi_min, float(last.min()))
    if lo_max > hi_min + tol:
        return DirConvexResult(False, reason="no hyperplane meets every section (K cap P != pi(K))")
    return DirConvexResult(True, offset=0.5 * (lo_max + hi_min), segments=1)
