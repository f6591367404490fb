"""Area-weighted surface sampling and exact nearest-neighbor queries."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .mesh import Mesh, MeshError, triangulated


@dataclass
class PointSample:
    """Points sampled on a mesh surface, with per-point source face id and
    the (count, seed) pair that produced them."""

    positions: np.ndarray
    source_face: np.ndarray
    count: int
    seed: int


def triangle_areas(verts: np.ndarray, tris: np.ndarray) -> np.ndarray:
    a = verts[tris[:, 0]]
    b = verts[tris[:, 1]]
    c = verts[tris[:, 2]]
    return 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)


def sample_points(mesh: Mesh, n: int, seed: int = 0) -> PointSample:
    """Uniform area-weighted sampling; quads are split into two triangles.
    Deterministic for a fixed seed."""
    if n < 1:
        raise MeshError("sample count must be >= 1")
    tris, src = triangulated(mesh)
    if len(tris) == 0:
        raise MeshError("cannot sample an empty mesh")
    areas = triangle_areas(mesh.vertices, tris)
    total = areas.sum()
    if total <= 0:
        raise MeshError("mesh has zero total area")
    rng = np.random.default_rng(seed)
    choice = rng.choice(len(tris), size=n, p=areas / total)
    u = rng.random(n)
    v = rng.random(n)
    flip = u + v > 1.0
    u[flip] = 1.0 - u[flip]
    v[flip] = 1.0 - v[flip]
    a = mesh.vertices[tris[choice, 0]]
    b = mesh.vertices[tris[choice, 1]]
    c = mesh.vertices[tris[choice, 2]]
    pos = a + u[:, None] * (b - a) + v[:, None] * (c - a)
    return PointSample(pos, src[choice].astype(np.int64), n, seed)


class NnIndex:
    """KD-tree nearest-neighbor index with exact smallest-index tie-breaks.

    ``query`` returns the same answer as an exhaustive linear scan: the
    minimal distance, and among exact distance ties the smallest index.
    """

    def __init__(self, points: np.ndarray):
        self.points = np.ascontiguousarray(np.asarray(points, dtype=np.float64))
        if self.points.ndim != 2 or self.points.shape[1] != 3:
            raise ValueError("NnIndex expects (N, 3) points")
        if len(self.points) == 0:
            raise ValueError("NnIndex needs at least one point")
        self._tree = cKDTree(self.points)

    def __len__(self) -> int:
        return len(self.points)

    def query(self, x) -> tuple[float, int]:
        x = np.asarray(x, dtype=np.float64)
        d, i = self._tree.query(x)
        # re-derive the distance set inside a slightly inflated ball and
        # resolve exact ties by smallest index
        r = float(d) * (1.0 + 1e-12) + 1e-300
        cand = self._tree.query_ball_point(x, r)
        dists = np.linalg.norm(self.points[cand] - x, axis=1)
        dmin = dists.min()
        best = min(c for c, dd in zip(cand, dists) if dd == dmin)
        return float(dmin), int(best)

    def query_many(self, xs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Vectorized nearest distances/indices (kd-tree tie behavior; use
        ``query`` where exact tie-breaking matters)."""
        d, i = self._tree.query(np.asarray(xs, dtype=np.float64))
        return d, i

    def radius(self, x, r: float) -> list[int]:
        """Indices within the closed ball of radius ``r``, ascending."""
        return sorted(self._tree.query_ball_point(np.asarray(x, dtype=np.float64), r))
