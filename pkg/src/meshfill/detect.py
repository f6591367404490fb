"""Multi-view broken-point detection.

Views on a Fibonacci sphere, orthographic G-buffers, a back-face candidate
test per pixel, ray-cast confirmation against the reference mesh, then
density clustering of the confirmed points. A pristine closed mesh with
consistent outward winding produces zero clusters.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .cluster import clusters_from_labels, dbscan
from .mesh import Mesh, SimilarityTransform, face_normals, normalize_pair, triangulated
from .raster import CAMERA_DISTANCE, FRAME_WIDTH, GBuffer, rasterize

logger = logging.getLogger("meshfill.detect")

N_VIEWS = 48
RESOLUTION = 640
EPS_DOT = 1e-4
EPS_CLUSTER = 0.05
MIN_CLUSTER = 10  # minimum broken-point cluster size kept
DBSCAN_MIN_PTS = 1


@dataclass
class ViewSet:
    """Unit view directions plus the shared orthographic camera setup."""

    directions: np.ndarray  # (n, 3)
    distance: float = CAMERA_DISTANCE
    frame_width: float = FRAME_WIDTH


def fibonacci_viewpoints(n: int) -> ViewSet:
    """Golden-angle spiral over the unit sphere, poles included."""
    if n < 1:
        raise ValueError("need at least one viewpoint")
    if n == 1:
        return ViewSet(np.array([[0.0, 0.0, 1.0]]))
    i = np.arange(n, dtype=np.float64)
    z = 1.0 - 2.0 * i / (n - 1)
    r = np.sqrt(np.clip(1.0 - z * z, 0.0, None))
    theta = i * np.pi * (3.0 - np.sqrt(5.0))
    dirs = np.stack([r * np.cos(theta), r * np.sin(theta), z], axis=1)
    dirs /= np.linalg.norm(dirs, axis=1)[:, None]
    return ViewSet(dirs)


def backface_candidates(gb: GBuffer, eps_dot: float = EPS_DOT) -> tuple[np.ndarray, np.ndarray]:
    """Pixels whose surface faces away from (or grazes) the camera:
    n . d > -eps_dot with d the unit view direction."""
    rows, cols = gb.covered()
    if len(rows) == 0:
        return rows, cols
    ndotd = gb.normals(rows, cols) @ gb.camera.direction
    keep = ndotd > -eps_dot
    return rows[keep], cols[keep]


def confirm_candidates(gb: GBuffer, rows: np.ndarray, cols: np.ndarray,
                       ref_bvh: kernels.Bvh, eps_dot: float = EPS_DOT) -> np.ndarray:
    """Boolean mask over the candidates: True where the pixel ray, cast
    against the reference mesh, first hits a properly oriented face
    (front-facing beyond the grazing margin eps_dot)."""
    confirmed = np.zeros(len(rows), dtype=bool)
    if len(rows) == 0:
        return confirmed
    origins = gb.camera.ray_origins(rows, cols)
    _t, tri, _front = kernels.raycast_first_hit(origins, gb.camera.direction, ref_bvh)
    hit = tri >= 0
    if hit.any():
        tv = ref_bvh.tv[tri[hit]]
        n = np.cross(tv[:, 1] - tv[:, 0], tv[:, 2] - tv[:, 0])
        norm = np.linalg.norm(n, axis=1)
        n = n / np.where(norm > 0, norm, 1.0)[:, None]
        confirmed[hit] = (n @ gb.camera.direction) < -eps_dot
    return confirmed


@dataclass
class BrokenPointSet:
    """Confirmed broken points with (view, pixel) provenance and the
    surviving density clusters (member-index arrays)."""

    points: np.ndarray  # (N, 3) in the normalized frame
    view: np.ndarray  # (N,) int32
    pixel: np.ndarray  # (N, 2) int32 (row, col)
    clusters: list[np.ndarray] = field(default_factory=list)
    transform: SimilarityTransform | None = None

    @property
    def num_confirmed(self) -> int:
        return len(self.points)

    def points_world(self) -> np.ndarray:
        if self.transform is None:
            return self.points
        return self.transform.invert(self.points)

    def cluster_points(self, k: int) -> np.ndarray:
        return self.points[self.clusters[k]]


def detect_defects(mesh: Mesh, ref: Mesh, n_views: int = N_VIEWS,
                   resolution: int = RESOLUTION, eps_dot: float = EPS_DOT,
                   eps_cluster: float = EPS_CLUSTER, min_cluster: int = MIN_CLUSTER,
                   min_pts: int = DBSCAN_MIN_PTS,
                   assume_normalized: bool = False) -> BrokenPointSet:
    """Full detection pass. Unless ``assume_normalized``, the pair is
    normalized jointly (transform computed from the reference) first; the
    returned points live in that normalized frame with the transform
    attached."""
    transform = None
    if not assume_normalized:
        mesh, ref, transform = normalize_pair(mesh, ref)
    views = fibonacci_viewpoints(n_views)
    ref_tris, _ = triangulated(ref)
    ref_bvh = kernels.build_bvh(ref.vertices[ref_tris])
    normals = face_normals(mesh)
    pts = []
    provenance = []
    for vi, u in enumerate(views.directions):
        gb = rasterize(mesh, u, resolution, views.frame_width, views.distance, normals=normals)
        rows, cols = backface_candidates(gb, eps_dot)
        mask = confirm_candidates(gb, rows, cols, ref_bvh, eps_dot)
        if mask.any():
            pts.append(gb.positions(rows[mask], cols[mask]))
            provenance.append(
                np.stack([np.full(mask.sum(), vi), rows[mask], cols[mask]], axis=1)
            )
    if pts:
        points = np.vstack(pts)
        prov = np.vstack(provenance).astype(np.int32)
    else:
        points = np.zeros((0, 3))
        prov = np.zeros((0, 3), dtype=np.int32)
    labels = dbscan(points, eps_cluster, min_pts) if len(points) else np.zeros(0, np.int32)
    clusters = clusters_from_labels(labels, min_size=min_cluster)
    logger.debug("detect: %d confirmed points, %d clusters", len(points), len(clusters))
    return BrokenPointSet(points, prov[:, 0], prov[:, 1:], clusters, transform)
