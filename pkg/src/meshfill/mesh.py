"""Indexed tri/quad mesh container with OBJ I/O and adjacency machinery.

Everything downstream (tokenization, region sampling, detection, repair,
metrics) operates on this representation. Faces keep their arity: quads are
never auto-triangulated on load.
"""

from __future__ import annotations

import hashlib
import logging
import warnings
from dataclasses import dataclass, field
from collections import deque

import numpy as np

logger = logging.getLogger("meshfill.mesh")

Face = tuple[int, ...]


class MeshError(Exception):
    """Invalid mesh topology, geometry, or file content."""


@dataclass
class Mesh:
    """Vertex/face soup. ``vertices`` is (V, 3) float64; faces are tuples of
    3 or 4 vertex indices whose winding defines the front side."""

    vertices: np.ndarray
    faces: list[Face]

    def __post_init__(self):
        self.vertices = np.ascontiguousarray(np.asarray(self.vertices, dtype=np.float64))
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 3:
            raise MeshError(f"vertices must be (V, 3), got {self.vertices.shape}")
        nv = len(self.vertices)
        faces = []
        for i, f in enumerate(self.faces):
            f = tuple(int(v) for v in f)
            if len(f) not in (3, 4):
                raise MeshError(f"face {i} has arity {len(f)}, only 3 or 4 supported")
            if len(set(f)) != len(f):
                raise MeshError(f"degenerate face {i}: repeated vertex index in {f}")
            if any(v < 0 or v >= nv for v in f):
                raise MeshError(f"face {i} references vertex out of range: {f}")
            faces.append(f)
        self.faces = faces

    @property
    def num_vertices(self) -> int:
        return len(self.vertices)

    @property
    def num_faces(self) -> int:
        return len(self.faces)

    def copy(self) -> "Mesh":
        return Mesh(self.vertices.copy(), list(self.faces))

    def submesh(self, face_ids) -> "Mesh":
        """Faces ``face_ids`` with a compacted vertex table (face order kept)."""
        face_ids = sorted(int(f) for f in face_ids)
        used: dict[int, int] = {}
        faces = []
        for fid in face_ids:
            faces.append(tuple(used.setdefault(v, len(used)) for v in self.faces[fid]))
        verts = self.vertices[list(used.keys())] if used else np.zeros((0, 3))
        return Mesh(verts, faces)


@dataclass
class FaceAdjacencyGraph:
    """Per-face neighbor lists; faces are adjacent iff they share an edge."""

    neighbors: list[list[int]]

    @property
    def num_faces(self) -> int:
        return len(self.neighbors)


@dataclass
class SimilarityTransform:
    """x' = (x - center) * scale, invertible exactly."""

    center: np.ndarray
    scale: float

    def apply(self, points: np.ndarray) -> np.ndarray:
        return (np.asarray(points, dtype=np.float64) - self.center) * self.scale

    def invert(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(points, dtype=np.float64) / self.scale + self.center

    def apply_mesh(self, mesh: Mesh) -> Mesh:
        return Mesh(self.apply(mesh.vertices), list(mesh.faces))

    def invert_mesh(self, mesh: Mesh) -> Mesh:
        return Mesh(self.invert(mesh.vertices), list(mesh.faces))


# ---------------------------------------------------------------------------
# OBJ I/O


def _parse_face_token(tok: str) -> int:
    # accepts "3", "3/1", "3/1/2", "3//2"
    return int(tok.split("/", 1)[0])


def loads_obj(text: str) -> Mesh:
    """Parse OBJ text with v/f records. Indices are converted to 0-based."""
    verts: list[list[float]] = []
    faces: list[Face] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        tag = parts[0]
        if tag == "v":
            if len(parts) < 4:
                raise MeshError(f"line {lineno}: vertex record needs 3 coordinates")
            try:
                verts.append([float(parts[1]), float(parts[2]), float(parts[3])])
            except ValueError as exc:
                raise MeshError(f"line {lineno}: bad vertex coordinate ({exc})") from exc
        elif tag == "f":
            idx = []
            for tok in parts[1:]:
                try:
                    i = _parse_face_token(tok)
                except ValueError as exc:
                    raise MeshError(f"line {lineno}: bad face index {tok!r}") from exc
                if i < 0:
                    i = len(verts) + i  # OBJ relative indexing
                else:
                    i = i - 1
                idx.append(i)
            if len(idx) > 4:
                raise MeshError(f"line {lineno}: face arity {len(idx)} > 4 not supported")
            if len(idx) < 3:
                raise MeshError(f"line {lineno}: face needs at least 3 vertices")
            if len(set(idx)) != len(idx):
                raise MeshError(f"line {lineno}: degenerate face {len(faces)} (repeated index)")
            faces.append(tuple(idx))
        # all other records (vn, vt, o, g, usemtl, ...) are ignored
    try:
        return Mesh(np.asarray(verts, dtype=np.float64).reshape(len(verts), 3), faces)
    except MeshError as exc:
        raise MeshError(f"invalid mesh: {exc}") from exc


def dumps_obj(mesh: Mesh) -> str:
    """Serialize to OBJ text: floats at 9 significant digits, 0x0A endings."""
    out = []
    for v in mesh.vertices:
        out.append(f"v {v[0]:.9g} {v[1]:.9g} {v[2]:.9g}")
    for f in mesh.faces:
        out.append("f " + " ".join(str(i + 1) for i in f))
    return "\n".join(out) + "\n"


def load_mesh(path) -> Mesh:
    with open(path, "r", encoding="utf-8") as fh:
        return loads_obj(fh.read())


def save_mesh(mesh: Mesh, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps_obj(mesh))


def mesh_hash(mesh: Mesh) -> str:
    """Content hash of the canonical OBJ serialization (service identifier)."""
    return hashlib.sha256(dumps_obj(mesh).encode("utf-8")).hexdigest()


# ---------------------------------------------------------------------------
# Normalization


def normalize_unit_sphere(mesh: Mesh, radius: float = 1.0) -> tuple[Mesh, SimilarityTransform]:
    """Center on the bounding-box centroid and scale so the farthest vertex
    sits at ``radius`` from the origin."""
    if mesh.num_vertices < 1:
        raise MeshError("cannot normalize an empty mesh")
    lo = mesh.vertices.min(axis=0)
    hi = mesh.vertices.max(axis=0)
    center = (lo + hi) / 2.0
    r = float(np.linalg.norm(mesh.vertices - center, axis=1).max())
    if r == 0.0:
        raise MeshError("all vertices coincide; zero scale")
    t = SimilarityTransform(center=center, scale=radius / r)
    return t.apply_mesh(mesh), t


def normalize_pair(mesh: Mesh, ref: Mesh, radius: float = 1.0):
    """Normalize a (mesh, reference) pair jointly.

    The transform is computed from the reference (the intact geometry) and
    applied to both, so the two stay aligned.
    """
    ref_n, t = normalize_unit_sphere(ref, radius=radius)
    return t.apply_mesh(mesh), ref_n, t


# ---------------------------------------------------------------------------
# Adjacency and traversal


def _edge_key(a: int, b: int) -> tuple[int, int]:
    return (a, b) if a < b else (b, a)


def face_edges(face: Face):
    n = len(face)
    for i in range(n):
        yield face[i], face[(i + 1) % n]


def edge_face_map(mesh: Mesh) -> dict[tuple[int, int], list[int]]:
    """Undirected edge -> incident face ids (in face order)."""
    edges: dict[tuple[int, int], list[int]] = {}
    for fid, face in enumerate(mesh.faces):
        for a, b in face_edges(face):
            edges.setdefault(_edge_key(a, b), []).append(fid)
    return edges


def face_adjacency(mesh: Mesh) -> FaceAdjacencyGraph:
    neighbors: list[list[int]] = [[] for _ in mesh.faces]
    for fids in edge_face_map(mesh).values():
        for i, a in enumerate(fids):
            for b in fids[i + 1:]:
                if b not in neighbors[a]:
                    neighbors[a].append(b)
                if a not in neighbors[b]:
                    neighbors[b].append(a)
    for lst in neighbors:
        lst.sort()
    return FaceAdjacencyGraph(neighbors)


def bfs_ring_list(graph: FaceAdjacencyGraph, seed) -> list[list[int]]:
    """Rings of the BFS from ``seed``: ring 0 is the seed set, ring k the
    faces at graph distance exactly k. Rings are sorted by face id."""
    seed = sorted(int(f) for f in seed)
    if not seed:
        raise MeshError("BFS seed must be non-empty")
    for f in seed:
        if f < 0 or f >= graph.num_faces:
            raise MeshError(f"seed face {f} out of range")
    seen = set(seed)
    rings = [list(seed)]
    frontier = list(seed)
    while frontier:
        nxt = set()
        for f in frontier:
            for g in graph.neighbors[f]:
                if g not in seen:
                    nxt.add(g)
        if not nxt:
            break
        frontier = sorted(nxt)
        seen.update(nxt)
        rings.append(frontier)
    return rings


def bfs_rings(graph: FaceAdjacencyGraph, seed, w: int, include_seed: bool = True) -> set[int]:
    """Faces within ``w`` breadth-first rings of the seed set."""
    if w < 0:
        raise MeshError("ring count must be >= 0")
    rings = bfs_ring_list(graph, seed)
    out: set[int] = set()
    for k, ring in enumerate(rings):
        if k > w:
            break
        if k == 0 and not include_seed:
            continue
        out.update(ring)
    return out


def boundary_vertices(mesh: Mesh, target) -> set[int]:
    """Vertices incident to both a target face and a non-target face: the
    seam that stays exposed when the target is removed."""
    target = set(int(f) for f in target)
    for f in target:
        if f < 0 or f >= mesh.num_faces:
            raise MeshError(f"target face {f} out of range")
    in_target: set[int] = set()
    in_rest: set[int] = set()
    for fid, face in enumerate(mesh.faces):
        (in_target if fid in target else in_rest).update(face)
    return in_target & in_rest


def connected_components(graph: FaceAdjacencyGraph, faces) -> list[set[int]]:
    """Components of the induced subgraph, largest first; ties broken by the
    smallest contained face id."""
    faces = set(int(f) for f in faces)
    for f in faces:
        if f < 0 or f >= graph.num_faces:
            raise MeshError(f"face {f} out of range")
    comps: list[set[int]] = []
    unvisited = set(faces)
    while unvisited:
        start = min(unvisited)
        comp = {start}
        queue = deque([start])
        unvisited.discard(start)
        while queue:
            f = queue.popleft()
            for g in graph.neighbors[f]:
                if g in unvisited:
                    unvisited.discard(g)
                    comp.add(g)
                    queue.append(g)
        comps.append(comp)
    comps.sort(key=lambda c: (-len(c), min(c)))
    return comps


def largest_connected_component(graph: FaceAdjacencyGraph, faces) -> set[int]:
    faces = set(faces)
    if not faces:
        return set()
    return connected_components(graph, faces)[0]


def shortest_face_path(graph: FaceAdjacencyGraph, sources, targets) -> list[int]:
    """Shortest path on the face graph from any source to any target
    (BFS; neighbors visited in ascending id for determinism)."""
    sources = sorted(set(int(f) for f in sources))
    targets = set(int(f) for f in targets)
    prev: dict[int, int] = {s: -1 for s in sources}
    queue = deque(sources)
    while queue:
        f = queue.popleft()
        if f in targets:
            path = [f]
            while prev[path[-1]] != -1:
                path.append(prev[path[-1]])
            return path[::-1]
        for g in graph.neighbors[f]:
            if g not in prev:
                prev[g] = f
                queue.append(g)
    raise MeshError("no path between the given face sets")


# ---------------------------------------------------------------------------
# Normals


def face_normals(mesh: Mesh) -> np.ndarray:
    """Geometric unit normal per face. Triangles use the cross product;
    quads use the Newell area vector (best-fit plane, winding-aware)."""
    out = np.zeros((mesh.num_faces, 3), dtype=np.float64)
    v = mesh.vertices
    for fid, face in enumerate(mesh.faces):
        if len(face) == 3:
            n = np.cross(v[face[1]] - v[face[0]], v[face[2]] - v[face[0]])
        else:
            n = np.zeros(3)
            for a, b in face_edges(face):
                pa, pb = v[a], v[b]
                n[0] += (pa[1] - pb[1]) * (pa[2] + pb[2])
                n[1] += (pa[2] - pb[2]) * (pa[0] + pb[0])
                n[2] += (pa[0] - pb[0]) * (pa[1] + pb[1])
        norm = np.linalg.norm(n)
        if norm > 0:
            out[fid] = n / norm
    return out


def face_centroids(mesh: Mesh) -> np.ndarray:
    out = np.zeros((mesh.num_faces, 3), dtype=np.float64)
    for fid, face in enumerate(mesh.faces):
        out[fid] = mesh.vertices[list(face)].mean(axis=0)
    return out


def triangulated(mesh: Mesh, face_ids=None) -> tuple[np.ndarray, np.ndarray]:
    """(T, 3) int triangle index array plus (T,) source face ids.
    Quads (a, b, c, d) split into (a, b, c) and (a, c, d)."""
    if face_ids is None:
        face_ids = range(mesh.num_faces)
    tris = []
    src = []
    for fid in face_ids:
        face = mesh.faces[fid]
        if len(face) == 3:
            tris.append(face)
            src.append(fid)
        else:
            a, b, c, d = face
            tris.append((a, b, c))
            tris.append((a, c, d))
            src.extend((fid, fid))
    tri_arr = np.asarray(tris, dtype=np.int64).reshape(len(tris), 3)
    return tri_arr, np.asarray(src, dtype=np.int64)


# ---------------------------------------------------------------------------
# Boundary loops and welding


def open_boundary_vertices(mesh: Mesh) -> set[int]:
    """Vertices on edges with exactly one incident face."""
    out: set[int] = set()
    for (a, b), fids in edge_face_map(mesh).items():
        if len(fids) == 1:
            out.add(a)
            out.add(b)
    return out


def exposed_boundary_loops(mesh: Mesh, target) -> list[list[int]]:
    """Ordered vertex cycles around the target region's seam.

    Each loop follows the winding of the target faces (so a patch built on
    the loop inherits the removed region's orientation). Loops are returned
    sorted by their smallest vertex id, each rotated to start at it.
    """
    target = set(int(f) for f in target)
    edges = edge_face_map(mesh)
    # directed seam edges, as they appear in target-face winding
    succ: dict[int, list[int]] = {}
    for fid in sorted(target):
        for a, b in face_edges(mesh.faces[fid]):
            others = [g for g in edges[_edge_key(a, b)] if g != fid]
            if not any(g in target for g in others):
                succ.setdefault(a, []).append(b)
    loops = []
    while succ:
        start = min(succ)
        loop = [start]
        cur = start
        while True:
            nxts = succ.get(cur)
            if not nxts:
                # open chain: seam is non-manifold here; drop the fragment
                logger.warning("non-cyclic seam fragment starting at vertex %d", start)
                break
            nxt = min(nxts)
            nxts.remove(nxt)
            if not nxts:
                del succ[cur]
            if nxt == start:
                loops.append(loop)
                break
            loop.append(nxt)
            cur = nxt
    loops.sort(key=lambda lp: min(lp))
    out = []
    for lp in loops:
        k = lp.index(min(lp))
        out.append(lp[k:] + lp[:k])
    return out


def seam_edge_incidence(mesh: Mesh, seam_vertices) -> dict[tuple[int, int], int]:
    """Face-incidence count for every edge touching the given vertex set.
    Used to audit that a weld restored the pre-removal topology."""
    seam = set(int(v) for v in seam_vertices)
    out: dict[tuple[int, int], int] = {}
    for key, fids in edge_face_map(mesh).items():
        if key[0] in seam and key[1] in seam:
            out[key] = len(fids)
    return out


def weld_patch(base: Mesh, patch: Mesh, tol: float) -> tuple[Mesh, dict[int, int]]:
    """Snap patch vertices onto the base mesh's open-boundary vertices.

    Every patch vertex within ``tol`` of a boundary vertex is replaced by
    that vertex; the rest are appended. Returns the merged mesh and the
    weld map (patch vertex id -> base vertex id).
    """
    if tol <= 0:
        raise MeshError("weld tolerance must be > 0")
    bverts = sorted(open_boundary_vertices(base))
    weld: dict[int, int] = {}
    if bverts and patch.num_vertices:
        from .sampling import NnIndex

        index = NnIndex(base.vertices[bverts])
        for pv in range(patch.num_vertices):
            dist, local = index.query(patch.vertices[pv])
            if dist <= tol:
                near = index.radius(patch.vertices[pv], tol)
                if len(near) > 1:
                    warnings.warn(
                        f"patch vertex {pv}: {len(near)} base boundary vertices "
                        f"within tolerance; welding to the nearest"
                    )
                weld[pv] = bverts[local]
    remap: dict[int, int] = {}
    new_verts = [base.vertices]
    nb = base.num_vertices
    appended = []
    for pv in range(patch.num_vertices):
        if pv in weld:
            remap[pv] = weld[pv]
        else:
            remap[pv] = nb + len(appended)
            appended.append(patch.vertices[pv])
    if appended:
        new_verts.append(np.asarray(appended))
    faces = list(base.faces) + [tuple(remap[v] for v in f) for f in patch.faces]
    return Mesh(np.vstack(new_verts), faces), weld
