"""Uniform node grid carrying the truncated exterior domain.

Each node is ACTIVE (an unknown in ``B_R_outer`` minus K), OBSTACLE, or
DIRICHLET (``|x| >= R_outer``, value prescribed).  The discrete operator is
built from grid cells whose four corners are all off the obstacle: every such
cell lends a quarter of its area to each corner and half a unit of coupling to
each of its four edges.  Away from the obstacle this is the 5-point Laplacian;
at a wall node the missing cells halve the tangential couplings and the area,
which is the same as mirroring the interior neighbour into the ghost node.
The operator is symmetric, so the same weights define the energy.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .boundary import GeometryError, ObstacleBoundary

ACTIVE, OBSTACLE, DIRICHLET = 0, 1, 2


@dataclass
class DiscreteOperator:
    """Weighted graph Laplacian on the active nodes.

    ``stiffness @ u - coupling @ g`` is ``area * (-Laplacian u)`` for
    boundary values ``g`` on ``dirichlet_nodes``.
    """

    stiffness: sp.csr_matrix
    mass: np.ndarray
    coupling: sp.csr_matrix
    dirichlet_nodes: np.ndarray
    edges: np.ndarray
    edge_weights: np.ndarray
    dirichlet_edges: np.ndarray
    dirichlet_weights: np.ndarray


class GridMask:
    def __init__(self, h: float, coords: np.ndarray, kind: np.ndarray, R_outer: float = math.inf,
                 obstacle: ObstacleBoundary | None = None):
        self.h = float(h)
        self.coords = np.asarray(coords, dtype=float)
        self.kind = np.asarray(kind, dtype=np.int8)
        self.R_outer = float(R_outer)
        self.obstacle = obstacle
        self._cache: dict = {}
        if self.kind.shape != (len(self.coords), len(self.coords)):
            raise GeometryError("kind array must be square and match coords")
        if self.n_active == 0:
            raise GeometryError("mask has no active nodes")
        if np.any(self.operator(True).mass <= 0.0):
            raise GeometryError("every active node needs at least one open cell")

    @classmethod
    def from_kinds(cls, h: float, coords, kind, **kw) -> "GridMask":
        return cls(h, coords, kind, **kw)

    # node bookkeeping -----------------------------------------------------

    @property
    def shape(self):
        return self.kind.shape

    @cached_property
    def active(self) -> np.ndarray:
        return self.kind == ACTIVE

    @cached_property
    def n_active(self) -> int:
        return int(self.active.sum())

    @cached_property
    def index(self) -> np.ndarray:
        idx = -np.ones(self.shape, dtype=np.int64)
        idx[self.active] = np.arange(self.n_active)
        return idx

    @cached_property
    def _XY(self):
        return np.meshgrid(self.coords, self.coords, indexing="ij")

    @cached_property
    def active_x(self) -> np.ndarray:
        return self._XY[0][self.active]

    @cached_property
    def active_y(self) -> np.ndarray:
        return self._XY[1][self.active]

    @cached_property
    def mirror_index(self) -> np.ndarray:
        """Active index of the node mirrored in x2, or -1 when that node is not active."""
        flipped = self.index[:, ::-1]
        return flipped[self.active]

    @cached_property
    def neumann_nodes(self) -> np.ndarray:
        """Active indices of nodes with an obstacle neighbour (ghost reflection applies)."""
        obs = self.kind == OBSTACLE
        near = np.zeros(self.shape, dtype=bool)
        near[1:, :] |= obs[:-1, :]
        near[:-1, :] |= obs[1:, :]
        near[:, 1:] |= obs[:, :-1]
        near[:, :-1] |= obs[:, 1:]
        return self.index[near & self.active]

    def ghost_rules(self) -> dict[int, list[tuple[int, int]]]:
        """For each Neumann node, ``(ghost_flat_index, mirror_active_index)`` per obstacle neighbour.

        The ghost takes the value of the node mirrored through the wall node
        (the opposite neighbour), or of the wall node itself when that one is
        not active.  The assembled operator realizes this reflection through
        its halved wall couplings.
        """
        flat = np.arange(self.kind.size).reshape(self.shape)
        rules: dict[int, list[tuple[int, int]]] = {}
        ni, nj = self.shape
        for i, j in zip(*np.nonzero(self.active)):
            for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                a, b = i + di, j + dj
                if 0 <= a < ni and 0 <= b < nj and self.kind[a, b] == OBSTACLE:
                    c, d = i - di, j - dj
                    ok = 0 <= c < ni and 0 <= d < nj and self.kind[c, d] == ACTIVE
                    mirror = self.index[c, d] if ok else self.index[i, j]
                    rules.setdefault(int(self.index[i, j]), []).append((int(flat[a, b]), int(mirror)))
        return rules

    def counts(self) -> dict:
        return {
            "active": self.n_active,
            "obstacle": int((self.kind == OBSTACLE).sum()),
            "dirichlet": int((self.kind == DIRICHLET).sum()),
        }

    def to_grid(self, values, fill=np.nan) -> np.ndarray:
        out = np.full(self.shape, fill, dtype=float)
        out[self.active] = values
        return out

    # operator ---------------------------------------------------------------

    def operator(self, clamp: bool = True) -> DiscreteOperator:
        """Discrete operator; ``clamp=False`` drops the Dirichlet couplings (zero flux at the rim)."""
        key = ("op", clamp)
        if key not in self._cache:
            self._cache[key] = _assemble(self, clamp)
        return self._cache[key]

    def cache(self) -> dict:
        """Per-mask scratch space for factorizations."""
        return self._cache


def _open_cells(kind: np.ndarray) -> np.ndarray:
    dom = kind != OBSTACLE
    return dom[:-1, :-1] & dom[1:, :-1] & dom[:-1, 1:] & dom[1:, 1:]


def _node_areas(cells: np.ndarray, shape) -> np.ndarray:
    cnt = np.zeros(shape)
    for di in (0, 1):
        for dj in (0, 1):
            cnt[di : di + cells.shape[0], dj : dj + cells.shape[1]] += cells
    return cnt


def _edge_weights(cells: np.ndarray, shape):
    # edge (i,j)-(i+1,j) borders cells (i,j-1) and (i,j)
    wx = np.zeros((shape[0] - 1, shape[1]))
    wx[:, :-1] += 0.5 * cells
    wx[:, 1:] += 0.5 * cells
    wy = np.zeros((shape[0], shape[1] - 1))
    wy[:-1, :] += 0.5 * cells
    wy[1:, :] += 0.5 * cells
    return wx, wy


def _assemble(mask: GridMask, clamp: bool) -> DiscreteOperator:
    kind, idx = mask.kind, mask.index
    cells = _open_cells(kind)
    area = _node_areas(cells, kind.shape) * (0.25 * mask.h * mask.h)
    wx, wy = _edge_weights(cells, kind.shape)
    flat = np.arange(kind.size).reshape(kind.shape)

    pairs, weights, dpairs, dweights = [], [], [], []
    for w, a_sl, b_sl in (
        (wx, (slice(None, -1), slice(None)), (slice(1, None), slice(None))),
        (wy, (slice(None), slice(None, -1)), (slice(None), slice(1, None))),
    ):
        ia, ib = idx[a_sl], idx[b_sl]
        ka, kb = kind[a_sl], kind[b_sl]
        both = (w > 0) & (ia >= 0) & (ib >= 0)
        pairs.append(np.column_stack([ia[both], ib[both]]))
        weights.append(w[both])
        for act_i, dir_k, dir_flat in ((ia, kb, flat[b_sl]), (ib, ka, flat[a_sl])):
            sel = (w > 0) & (act_i >= 0) & (dir_k == DIRICHLET)
            dpairs.append(np.column_stack([act_i[sel], dir_flat[sel]]))
            dweights.append(w[sel])

    edges = np.concatenate(pairs)
    ew = np.concatenate(weights)
    dedges = np.concatenate(dpairs)
    dw = np.concatenate(dweights)
    n = mask.n_active
    if not clamp:
        dedges, dw = dedges[:0], dw[:0]

    dnodes, dcol = np.unique(dedges[:, 1], return_inverse=True)
    dedges = np.column_stack([dedges[:, 0], dcol]) if len(dedges) else dedges

    diag = np.bincount(edges[:, 0], ew, n) + np.bincount(edges[:, 1], ew, n)
    if len(dw):
        diag += np.bincount(dedges[:, 0], dw, n)
    rows = np.concatenate([edges[:, 0], edges[:, 1], np.arange(n)])
    cols = np.concatenate([edges[:, 1], edges[:, 0], np.arange(n)])
    vals = np.concatenate([-ew, -ew, diag])
    K = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    B = sp.csr_matrix((dw, (dedges[:, 0], dedges[:, 1])), shape=(n, len(dnodes)))
    return DiscreteOperator(K, area[mask.active], B, dnodes, edges, ew, dedges, dw)


def _cleanup(kind: np.ndarray, h: float) -> np.ndarray:
    """Turn active nodes without open cells, and pockets cut off from the rim, into obstacle."""
    kind = kind.copy()
    while True:
        changed = False
        cells = _open_cells(kind)
        bare = (kind == ACTIVE) & (_node_areas(cells, kind.shape) == 0)
        if bare.any():
            kind[bare] = OBSTACLE
            changed = True
            continue
        # connectivity through positive-weight edges, all rim nodes merged into one
        wx, wy = _edge_weights(cells, kind.shape)
        flat = np.arange(kind.size).reshape(kind.shape)
        node = flat.copy()
        rim = kind == DIRICHLET
        if rim.any():
            node[rim] = flat[rim][0]
        a = np.concatenate([node[:-1, :][wx > 0], node[:, :-1][wy > 0]])
        b = np.concatenate([node[1:, :][wx > 0], node[:, 1:][wy > 0]])
        g = sp.coo_matrix((np.ones(len(a)), (a, b)), shape=(kind.size, kind.size))
        _, labels = connected_components(g, directed=False)
        labels = labels.reshape(kind.shape)
        if rim.any():
            keep = labels == labels[rim][0]
            pocket = (kind == ACTIVE) & ~keep
            if pocket.any():
                kind[pocket] = OBSTACLE
                changed = True
        if not changed:
            return kind


def rasterize(
    b: ObstacleBoundary,
    h: float,
    R_outer: float,
    decay_length: float | None = None,
    min_passage_cells: int = 6,
) -> GridMask:
    """Classify grid nodes of spacing ``h`` against obstacle ``b`` inside ``B_R_outer``."""
    if h <= 0 or R_outer <= 0:
        raise GeometryError("h and R_outer must be positive")
    rmax = b.max_radius()
    if R_outer <= rmax:
        raise GeometryError(f"R_outer={R_outer:g} does not enclose the obstacle (max radius {rmax:g})")
    if decay_length is not None and R_outer <= rmax + 5.0 * decay_length:
        raise GeometryError(
            f"R_outer={R_outer:g} must exceed max radius {rmax:g} + 5 decay lengths "
            f"({5.0 * decay_length:g})"
        )
    if math.isfinite(b.passage_width):
        spanned = math.floor(b.passage_width / h + 1e-9) - 1
        if spanned < min_passage_cells:
            need = b.passage_width / (min_passage_cells + 1)
            raise GeometryError(
                f"channel under-resolved: width {b.passage_width:g} spans {spanned} cells at h={h:g}; "
                f"need h <= {need:.4g}"
            )

    n = int(math.ceil(R_outer / h)) + 1
    coords = np.arange(-n, n + 1) * h
    X, Y = np.meshgrid(coords, coords, indexing="ij")
    kind = np.where(np.hypot(X, Y) >= R_outer, DIRICHLET, ACTIVE).astype(np.int8)

    if not b.is_empty:
        v = b.vertices
        lo, hi = v.min(axis=0) - h, v.max(axis=0) + h
        ix = np.nonzero((coords >= lo[0]) & (coords <= hi[0]))[0]
        iy = np.nonzero((coords >= lo[1]) & (coords <= hi[1]))[0]
        sub = np.ix_(ix, iy)
        inside = np.zeros(kind.shape, dtype=bool)
        inside[sub] = b.contains(X[sub], Y[sub])
        if b.symmetric:
            # classify the upper half and mirror it so the mask is exactly symmetric in x2
            inside[:, :n] = inside[:, : n : -1]
        kind[inside & (kind == ACTIVE)] = OBSTACLE

    kind = _cleanup(kind, h)
    return GridMask(h, coords, kind, R_outer=R_outer, obstacle=b)
