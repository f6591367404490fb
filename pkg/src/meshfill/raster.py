"""Orthographic software rasterization into a G-buffer.

Camera convention: for a unit view direction u, the camera sits at
``distance * u`` looking along d = -u; rays start on the camera plane and
the frame is ``frame_width`` wide. Quads are rasterized as two triangles
that carry the quad's face id and its best-fit-plane normal.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .mesh import Mesh, face_normals, triangulated

FRAME_WIDTH = 2.2
CAMERA_DISTANCE = 2.0


@dataclass
class Camera:
    direction: np.ndarray  # unit view direction d
    right: np.ndarray
    up: np.ndarray
    center: np.ndarray  # camera position (ray-plane origin)
    resolution: int
    half_width: float

    @property
    def pitch(self) -> float:
        return 2.0 * self.half_width / self.resolution

    def axis_coords(self) -> np.ndarray:
        return -self.half_width + (np.arange(self.resolution) + 0.5) * self.pitch

    def ray_origins(self, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
        xs = self.axis_coords()
        return (
            self.center[None, :]
            + xs[cols][:, None] * self.right[None, :]
            + xs[rows][:, None] * self.up[None, :]
        )


def camera_for_direction(view_dir: np.ndarray, resolution: int,
                         frame_width: float = FRAME_WIDTH,
                         distance: float = CAMERA_DISTANCE) -> Camera:
    u = np.asarray(view_dir, dtype=np.float64)
    u = u / np.linalg.norm(u)
    d = -u
    ref = np.array([0.0, 1.0, 0.0]) if abs(d[1]) < 0.999 else np.array([1.0, 0.0, 0.0])
    right = np.cross(ref, d)
    right /= np.linalg.norm(right)
    up = np.cross(d, right)
    return Camera(d, right, up, distance * u, resolution, frame_width / 2.0)


@dataclass
class GBuffer:
    """Per-pixel face id / depth grids plus lazy world position and normal
    reconstruction for a single orthographic view.

    Per-pixel normals are the rasterized triangle's geometric normal (for
    non-planar quads, the normal of the half actually covering the pixel);
    the per-face best-fit normals remain available in ``face_normal``.
    """

    camera: Camera
    face_id: np.ndarray  # (H, H) int32, -1 where empty
    tri_id: np.ndarray  # (H, H) int32 into the triangulation, -1 where empty
    depth: np.ndarray  # (H, H) float64, inf where empty
    face_normal: np.ndarray  # (F, 3) per source-mesh face (quads: best fit)
    tri_normal: np.ndarray  # (T, 3) per rasterized triangle

    def covered(self) -> tuple[np.ndarray, np.ndarray]:
        """(rows, cols) of non-empty pixels, row-major order."""
        return np.nonzero(self.face_id >= 0)

    def positions(self, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
        o = self.camera.ray_origins(rows, cols)
        return o + self.depth[rows, cols][:, None] * self.camera.direction[None, :]

    def normals(self, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
        return self.tri_normal[self.tri_id[rows, cols]]

    def position_grid(self) -> np.ndarray:
        h = self.camera.resolution
        grid = np.full((h, h, 3), np.nan)
        rows, cols = self.covered()
        grid[rows, cols] = self.positions(rows, cols)
        return grid

    def normal_grid(self) -> np.ndarray:
        h = self.camera.resolution
        grid = np.full((h, h, 3), np.nan)
        rows, cols = self.covered()
        grid[rows, cols] = self.normals(rows, cols)
        return grid


def rasterize(mesh: Mesh, view_dir: np.ndarray, resolution: int,
              frame_width: float = FRAME_WIDTH,
              distance: float = CAMERA_DISTANCE,
              normals: np.ndarray | None = None) -> GBuffer:
    """Depth-tested orthographic rasterization of the whole mesh.

    Exact depth ties resolve toward the more front-facing face so results
    do not depend on face input order.
    """
    cam = camera_for_direction(view_dir, resolution, frame_width, distance)
    if normals is None:
        normals = face_normals(mesh)
    h = resolution
    empty = np.full((h, h), -1, np.int32)
    if mesh.num_faces == 0:
        return GBuffer(cam, empty, empty.copy(), np.full((h, h), np.inf),
                       normals, np.zeros((0, 3)))
    tris, src = triangulated(mesh)
    tv = mesh.vertices[tris]
    tn = np.cross(tv[:, 1] - tv[:, 0], tv[:, 2] - tv[:, 0])
    norm = np.linalg.norm(tn, axis=1)
    tn = tn / np.where(norm > 0, norm, 1.0)[:, None]
    rel = mesh.vertices - cam.center
    x = rel @ cam.right
    y = rel @ cam.up
    d = rel @ cam.direction
    cam_v = np.stack([x, y, d], axis=1)
    xyd = np.ascontiguousarray(cam_v[tris])  # (T, 3, 3)
    tie = np.ascontiguousarray(tn @ cam.direction)
    tri_idx, depth = kernels.rasterize_tris(xyd, tie, h, cam.half_width)
    face_id = np.where(tri_idx >= 0, src[np.clip(tri_idx, 0, None)], -1).astype(np.int32)
    return GBuffer(cam, face_id, tri_idx, depth, normals, tn)
