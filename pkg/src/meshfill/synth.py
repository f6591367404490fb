"""Procedural test meshes and synthetic defect injection.

Used by the test suite, the benchmark, and the demo commands; nothing here
is required by the pipeline itself.
"""

from __future__ import annotations

import numpy as np

from .mesh import Mesh, face_adjacency, bfs_ring_list


def quad_grid(nx: int, ny: int, size: float = 1.0, origin=(0.0, 0.0, 0.0)) -> Mesh:
    """(nx x ny)-cell planar quad grid in the XY plane."""
    ox, oy, oz = origin
    verts = []
    for j in range(ny + 1):
        for i in range(nx + 1):
            verts.append((ox + size * i / nx, oy + size * j / ny, oz))
    faces = []
    for j in range(ny):
        for i in range(nx):
            a = j * (nx + 1) + i
            b = a + 1
            c = a + nx + 2
            d = a + nx + 1
            faces.append((a, b, c, d))
    return Mesh(np.asarray(verts), faces)


def cube(size: float = 1.0) -> Mesh:
    s = size / 2.0
    verts = np.array(
        [
            [-s, -s, -s], [s, -s, -s], [s, s, -s], [-s, s, -s],
            [-s, -s, s], [s, -s, s], [s, s, s], [-s, s, s],
        ]
    )
    faces = [
        (0, 3, 2, 1),  # -z
        (4, 5, 6, 7),  # +z
        (0, 1, 5, 4),  # -y
        (2, 3, 7, 6),  # +y
        (1, 2, 6, 5),  # +x
        (0, 4, 7, 3),  # -x
    ]
    return Mesh(verts, faces)


def icosphere(subdivisions: int = 2, radius: float = 1.0) -> Mesh:
    """Triangle sphere by recursive icosahedron subdivision (20 * 4^s faces),
    outward winding."""
    t = (1.0 + np.sqrt(5.0)) / 2.0
    verts = np.array(
        [
            [-1, t, 0], [1, t, 0], [-1, -t, 0], [1, -t, 0],
            [0, -1, t], [0, 1, t], [0, -1, -t], [0, 1, -t],
            [t, 0, -1], [t, 0, 1], [-t, 0, -1], [-t, 0, 1],
        ],
        dtype=np.float64,
    )
    verts /= np.linalg.norm(verts, axis=1)[:, None]
    faces = [
        (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
        (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
        (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
        (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
    ]
    verts = [v for v in verts]
    for _ in range(subdivisions):
        cache: dict[tuple[int, int], int] = {}

        def midpoint(a: int, b: int) -> int:
            key = (a, b) if a < b else (b, a)
            if key not in cache:
                m = verts[a] + verts[b]
                m /= np.linalg.norm(m)
                cache[key] = len(verts)
                verts.append(m)
            return cache[key]

        new_faces = []
        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            new_faces += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = new_faces
    return Mesh(np.asarray(verts) * radius, faces)


def uv_sphere(n_lat: int = 12, n_lon: int = 16, radius: float = 1.0) -> Mesh:
    """Quad-dominant sphere: quad bands plus triangle fans at the poles."""
    assert n_lat >= 3 and n_lon >= 3
    verts = [np.array([0.0, 0.0, radius])]
    for j in range(1, n_lat):
        phi = np.pi * j / n_lat
        for i in range(n_lon):
            th = 2 * np.pi * i / n_lon
            verts.append(
                radius * np.array([np.sin(phi) * np.cos(th), np.sin(phi) * np.sin(th), np.cos(phi)])
            )
    verts.append(np.array([0.0, 0.0, -radius]))
    south = len(verts) - 1
    ring = lambda j: 1 + (j - 1) * n_lon
    faces: list[tuple[int, ...]] = []
    for i in range(n_lon):
        faces.append((0, ring(1) + i, ring(1) + (i + 1) % n_lon))
    for j in range(1, n_lat - 1):
        for i in range(n_lon):
            a = ring(j) + i
            b = ring(j) + (i + 1) % n_lon
            c = ring(j + 1) + (i + 1) % n_lon
            d = ring(j + 1) + i
            faces.append((a, b, c, d))
    for i in range(n_lon):
        faces.append((south, ring(n_lat - 1) + (i + 1) % n_lon, ring(n_lat - 1) + i))
    m = Mesh(np.asarray(verts), faces)
    # fix winding so all normals point outward
    from .mesh import face_normals, face_centroids

    normals = face_normals(m)
    cents = face_centroids(m)
    fixed = []
    for fid, f in enumerate(m.faces):
        fixed.append(f if np.dot(normals[fid], cents[fid]) >= 0 else f[::-1])
    return Mesh(m.vertices, fixed)


def jittered_sphere(seed: int, n_lat=None, n_lon=None, jitter: float = 0.05) -> Mesh:
    """Closed quad-dominant sphere with seeded radial jitter; stays a valid
    outward-wound closed surface for small jitter."""
    rng = np.random.default_rng(seed)
    n_lat = n_lat or int(rng.integers(10, 18))
    n_lon = n_lon or int(rng.integers(14, 24))
    m = uv_sphere(n_lat, n_lon)
    radii = 1.0 + jitter * (2 * rng.random(m.num_vertices) - 1)
    return Mesh(m.vertices * radii[:, None], m.faces)


def random_mixed_mesh(seed: int, max_cells: int = 12, extent: float = 0.9) -> Mesh:
    """Jittered open grid with a random subset of quads split into triangles;
    vertices stay within [-extent/2, extent/2]^3 with safe spacing."""
    rng = np.random.default_rng(seed)
    nx = int(rng.integers(3, max_cells))
    ny = int(rng.integers(3, max_cells))
    g = quad_grid(nx, ny, size=extent, origin=(-extent / 2, -extent / 2, 0.0))
    spacing = extent / max(nx, ny)
    jitter = 0.25 * spacing
    offs = jitter * (2 * rng.random((g.num_vertices, 3)) - 1)
    verts = g.vertices + offs
    faces: list[tuple[int, ...]] = []
    for f in g.faces:
        if rng.random() < 0.4:
            a, b, c, d = f
            if rng.random() < 0.5:
                faces += [(a, b, c), (a, c, d)]
            else:
                faces += [(a, b, d), (b, c, d)]
        else:
            faces.append(f)
    return Mesh(verts, faces)


# ---------------------------------------------------------------------------
# Defect injection


def delete_patch(mesh: Mesh, seed_face: int, k: int) -> tuple[Mesh, list[int]]:
    """Remove a connected k-face patch grown from ``seed_face``.
    Returns the damaged mesh and the removed face ids (original indexing)."""
    graph = face_adjacency(mesh)
    rings = bfs_ring_list(graph, [seed_face])
    picked: list[int] = []
    for ring in rings:
        for f in ring:
            if len(picked) < k:
                picked.append(f)
        if len(picked) >= k:
            break
    picked = sorted(picked)
    keep = [f for i, f in enumerate(mesh.faces) if i not in set(picked)]
    return Mesh(mesh.vertices.copy(), keep), picked


def flip_face(mesh: Mesh, face_id: int) -> Mesh:
    """Reverse one face's winding (a classic generation artifact)."""
    faces = list(mesh.faces)
    faces[face_id] = faces[face_id][::-1]
    return Mesh(mesh.vertices.copy(), faces)
