"""Discrete C^0 and C^1 distances between obstacle boundaries."""
from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree

from .boundary import ObstacleBoundary


def _directed(pa, pb):
    d, idx = cKDTree(pb).query(pa)
    return d, idx


def boundary_distance_C0(b1: ObstacleBoundary, b2: ObstacleBoundary, spacing: float = 0.0125) -> float:
    """Symmetric Hausdorff distance between the densified vertex sets."""
    pa, _ = b1.densify(spacing)
    pb, _ = b2.densify(spacing)
    d_ab, _ = _directed(pa, pb)
    d_ba, _ = _directed(pb, pa)
    return float(max(d_ab.max(), d_ba.max()))


def boundary_distance_C1(b1: ObstacleBoundary, b2: ObstacleBoundary, spacing: float = 0.0125) -> float:
    """Largest angle (radians) between a boundary normal and the normal at the closest point of the other boundary."""
    pa, na = b1.densify(spacing)
    pb, nb = b2.densify(spacing)
    _, i_ab = _directed(pa, pb)
    _, i_ba = _directed(pb, pa)
    cos_ab = np.clip(np.einsum("ij,ij->i", na, nb[i_ab]), -1.0, 1.0)
    cos_ba = np.clip(np.einsum("ij,ij->i", nb, na[i_ba]), -1.0, 1.0)
    return float(max(np.arccos(cos_ab).max(), np.arccos(cos_ba).max()))
