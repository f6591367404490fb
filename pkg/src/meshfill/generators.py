"""Pluggable patch generators.

The learned autoregressive decoder stays behind the same interface: a
generator consumes a GeneratorRequest and returns replacement faces in its
own vertex table. Welding onto the surrounding mesh is the pipeline's job.

Shipping implementations: ground-truth replay (oracle), minimum-weight
boundary-loop triangulation, whole-mesh crop+snap adaptation, and an
external subprocess speaking the FIM sequence JSON on stdin/stdout.
"""

from __future__ import annotations

import json
import logging
import subprocess
import warnings
from dataclasses import dataclass, field

import numpy as np

from .mesh import (
    Mesh,
    MeshError,
    edge_face_map,
    exposed_boundary_loops,
    face_edges,
    face_normals,
)
from .regions import RegionSpec
from .sampling import NnIndex, PointSample, sample_points
from .sequence import FimSequence
from .tokenizer import QuantizationSpec, dequantize, detokenize, quantize, serialize_fim

logger = logging.getLogger("meshfill.generators")


@dataclass
class GeneratorRequest:
    """Everything a generator may condition on for one region edit.
    All geometry (mesh, reference, samples) shares one coordinate frame."""

    mesh: Mesh  # current mesh; region face ids index into it
    region: RegionSpec
    loops: list[list[int]]  # ordered boundary cycles (target winding)
    p_gt: PointSample | None = None  # reference-surface sample
    p_lp: PointSample | None = None  # existing mesh sample, target removed
    ref_mesh: Mesh | None = None  # reference geometry, when available
    quant: QuantizationSpec = field(default_factory=QuantizationSpec)
    seed: int = 0


@dataclass
class PatchResult:
    """Generated replacement faces over a self-contained vertex table.
    Isolated (unreferenced) vertices are allowed."""

    vertices: np.ndarray
    faces: list[tuple[int, ...]]
    generator_id: str
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        # reuse Mesh validation for arity/degeneracy/range checks
        self._mesh = Mesh(self.vertices, self.faces)
        self.vertices = self._mesh.vertices
        self.faces = self._mesh.faces

    @property
    def num_faces(self) -> int:
        return len(self.faces)

    def as_mesh(self) -> Mesh:
        return Mesh(self.vertices.copy(), list(self.faces))


def build_request(mesh: Mesh, region: RegionSpec, ref: Mesh | None = None,
                  quant: QuantizationSpec | None = None, seed: int = 0,
                  n_gt: int = 100_000, n_lp: int = 20_000,
                  with_samples: bool = True) -> GeneratorRequest:
    loops = exposed_boundary_loops(mesh, region.target_faces)
    p_gt = p_lp = None
    if with_samples:
        source = ref if ref is not None else mesh
        p_gt = sample_points(source, n_gt, seed=seed)
        residual_ids = [f for f in range(mesh.num_faces) if f not in set(region.target_faces)]
        if residual_ids:
            p_lp = sample_points(mesh.submesh(residual_ids), n_lp, seed=seed + 1)
    return GeneratorRequest(mesh, region, loops, p_gt, p_lp, ref,
                            quant or QuantizationSpec(), seed)


# ---------------------------------------------------------------------------
# Oracle replay


def _face_geometry_key(face, verts) -> tuple:
    """Orientation-preserving canonical key: cyclic rotations only, so a
    flipped face keys differently from its original."""
    coords = [tuple(verts[v]) for v in face]
    n = len(coords)
    return min(tuple(coords[i:] + coords[:i]) for i in range(n))


def _patch_from_faces(source: Mesh, face_ids, generator_id: str,
                      quant: QuantizationSpec | None = None) -> PatchResult:
    sub = source.submesh(face_ids)
    verts = sub.vertices
    if quant is not None and len(verts):
        verts = dequantize(quantize(verts, quant), quant)
    return PatchResult(verts, sub.faces, generator_id,
                       {"n_faces": sub.num_faces})


def oracle_generate(req: GeneratorRequest, gt_source: Mesh, gt_faces,
                    quantize_pass: bool = False) -> PatchResult:
    """Replay the held-out ground-truth target faces, optionally passed
    through the quantization grid to emulate token-level output."""
    return _patch_from_faces(gt_source, gt_faces, "oracle",
                             req.quant if quantize_pass else None)


class OracleGenerator:
    """Ground-truth replay.

    Without a reference mesh, the request's own target faces are returned
    (regenerating a region of an intact mesh). With a reference (from the
    request, or bound at construction, in the request's coordinate frame),
    the patch is every reference face that is geometrically absent from the
    mesh once the target region is removed, which restores deleted or
    flipped geometry.
    """

    generator_id = "oracle"

    def __init__(self, ref: Mesh | None = None, quantize_pass: bool = False):
        self.ref = ref
        self.quantize_pass = quantize_pass

    def __call__(self, req: GeneratorRequest) -> PatchResult:
        ref = self.ref if self.ref is not None else req.ref_mesh
        if ref is None:
            return oracle_generate(req, req.mesh, req.region.target_faces,
                                   self.quantize_pass)
        residual_ids = [
            f for f in range(req.mesh.num_faces)
            if f not in set(req.region.target_faces)
        ]
        have = {
            _face_geometry_key(req.mesh.faces[f], req.mesh.vertices)
            for f in residual_ids
        }
        missing = [
            f for f in range(ref.num_faces)
            if _face_geometry_key(ref.faces[f], ref.vertices) not in have
        ]
        return oracle_generate(req, ref, missing, self.quantize_pass)


# ---------------------------------------------------------------------------
# Minimum-weight hole triangulation


def _tri_area_normal(a, b, c):
    n = np.cross(b - a, c - a)
    norm = np.linalg.norm(n)
    return 0.5 * norm, (n / norm if norm > 0 else n)


def _dihedral(n1, n2) -> float:
    """Angle between face normals in [0, pi]; 0 means coplanar."""
    if np.linalg.norm(n1) == 0 or np.linalg.norm(n2) == 0:
        return 0.0
    return float(np.arccos(np.clip(np.dot(n1, n2), -1.0, 1.0)))


def min_weight_triangulation(pts: np.ndarray, edge_normals=None):
    """Dynamic program over an ordered polygon loop.

    Weight is total triangle area; exact ties resolve to the smaller
    maximum dihedral angle against already-chosen neighbor triangles (and
    the surrounding mesh across the loop's base edges when given).
    Returns index triples (i, k, j) following the loop orientation.
    """
    n = len(pts)
    if n < 3:
        raise MeshError("loop must have at least 3 vertices")
    area = {}
    normal = {}
    for i in range(n):
        for k in range(i + 1, n):
            for j in range(k + 1, n):
                area[(i, k, j)], normal[(i, k, j)] = _tri_area_normal(pts[i], pts[k], pts[j])

    W: dict[tuple[int, int], tuple[float, float]] = {}
    lam: dict[tuple[int, int], int] = {}
    base_normal: dict[tuple[int, int], np.ndarray | None] = {}
    for i in range(n - 1):
        W[(i, i + 1)] = (0.0, 0.0)
        base_normal[(i, i + 1)] = None if edge_normals is None else edge_normals[i]

    def _nbr_normal(i, j):
        if j == i + 1:
            return base_normal[(i, j)]
        return normal[(i, lam[(i, j)], j)]

    for gap in range(2, n):
        for i in range(0, n - gap):
            j = i + gap
            best = None
            best_k = -1
            for k in range(i + 1, j):
                a = W[(i, k)][0] + W[(k, j)][0] + area[(i, k, j)]
                dih = max(W[(i, k)][1], W[(k, j)][1])
                nt = normal[(i, k, j)]
                for nb in (_nbr_normal(i, k), _nbr_normal(k, j)):
                    if nb is not None:
                        dih = max(dih, _dihedral(nt, nb))
                cand = (a, dih)
                if best is None or cand < best:
                    best = cand
                    best_k = k
            W[(i, j)] = best
            lam[(i, j)] = best_k

    tris = []

    def _emit(i, j):
        if j - i < 2:
            return
        k = lam[(i, j)]
        _emit(i, k)
        tris.append((i, k, j))
        _emit(k, j)

    _emit(0, n - 1)
    return tris, W[(0, n - 1)]


def _loop_segments_selfintersect(pts: np.ndarray, tol: float = 1e-12) -> bool:
    n = len(pts)
    for i in range(n):
        a0, a1 = pts[i], pts[(i + 1) % n]
        for j in range(i + 2, n):
            if (j + 1) % n == i:
                continue
            b0, b1 = pts[j], pts[(j + 1) % n]
            # closest distance between the two segments
            u = a1 - a0
            v = b1 - b0
            w = a0 - b0
            a, b, c = u @ u, u @ v, v @ v
            d, e = u @ w, v @ w
            den = a * c - b * b
            s = np.clip((b * e - c * d) / den, 0, 1) if den > tol else 0.0
            t = np.clip((a * e - b * d) / max(c, tol), 0, 1)
            if np.linalg.norm(w + s * u - t * v) < tol:
                return True
    return False


class TriangulateGenerator:
    """Fill each boundary loop with its minimum-weight triangulation,
    reusing the loop vertices exactly and adding none."""

    generator_id = "triangulate"

    def __call__(self, req: GeneratorRequest) -> PatchResult:
        if not req.loops:
            return PatchResult(np.zeros((0, 3)), [], self.generator_id)
        # normals of the context faces along each seam edge, for tie-breaks
        edges = edge_face_map(req.mesh)
        normals = face_normals(req.mesh)
        tgt = set(req.region.target_faces)
        verts_out = []
        faces_out = []
        weight_total = 0.0
        for loop in req.loops:
            pts = req.mesh.vertices[loop]
            if _loop_segments_selfintersect(pts):
                warnings.warn("self-intersecting boundary loop; best-effort fill")
            edge_n = []
            for i in range(len(loop) - 1):
                key = tuple(sorted((loop[i], loop[i + 1])))
                ctx = [f for f in edges.get(key, []) if f not in tgt]
                edge_n.append(normals[ctx[0]] if ctx else None)
            base = len(verts_out)
            verts_out.extend(pts)
            tris, (w, _dih) = min_weight_triangulation(pts, edge_n)
            weight_total += w
            faces_out.extend(tuple(base + i for i in t) for t in tris)
        return PatchResult(np.asarray(verts_out), faces_out, self.generator_id,
                           {"area": weight_total, "n_loops": len(req.loops)})


# ---------------------------------------------------------------------------
# Whole-mesh stitch-back adaptation


def stitch_back_adapt(whole: Mesh, req: GeneratorRequest,
                      bbox_expand: float = 0.05) -> PatchResult:
    """Adapt an independently generated whole mesh into a local patch.

    Crop the faces whose centroid falls in the target's bounding box
    (expanded by 5% of its diagonal), then snap cropped boundary vertices
    onto context boundary vertices within 2x the crop's average edge
    length. Context vertices that match nothing are appended as isolated
    vertices.
    """
    tgt_verts = sorted({v for f in req.region.target_faces for v in req.mesh.faces[f]})
    if not tgt_verts:
        return PatchResult(np.zeros((0, 3)), [], "stitch-back")
    lo = req.mesh.vertices[tgt_verts].min(axis=0)
    hi = req.mesh.vertices[tgt_verts].max(axis=0)
    margin = bbox_expand * np.linalg.norm(hi - lo)
    lo, hi = lo - margin, hi + margin
    keep = []
    for fid, face in enumerate(whole.faces):
        c = whole.vertices[list(face)].mean(axis=0)
        if (c >= lo).all() and (c <= hi).all():
            keep.append(fid)
    if not keep:
        warnings.warn("stitch-back crop is empty")
        return PatchResult(np.zeros((0, 3)), [], "stitch-back", {"crop": 0})
    patch = whole.submesh(keep)
    verts = patch.vertices.copy()

    from .mesh import open_boundary_vertices

    pb = sorted(open_boundary_vertices(patch))
    edge_lens = [
        np.linalg.norm(verts[a] - verts[b])
        for f in patch.faces
        for a, b in face_edges(f)
    ]
    tol = 2.0 * float(np.mean(edge_lens)) if edge_lens else 0.0
    ctx_boundary = list(req.region.boundary)
    snapped: dict[int, int] = {}  # patch vertex -> context vertex
    unmatched_ctx = []
    if pb and ctx_boundary and tol > 0:
        index = NnIndex(verts[pb])
        claims: dict[int, tuple[float, int]] = {}
        for cv in ctx_boundary:
            d, local = index.query(req.mesh.vertices[cv])
            if d <= tol:
                pv = pb[local]
                if pv not in claims or d < claims[pv][0]:
                    claims[pv] = (d, cv)
            else:
                unmatched_ctx.append(cv)
        matched_ctx = set()
        for pv, (_d, cv) in claims.items():
            snapped[pv] = cv
            matched_ctx.add(cv)
        unmatched_ctx += [cv for cv in ctx_boundary
                          if cv not in matched_ctx and cv not in unmatched_ctx]
    else:
        unmatched_ctx = list(ctx_boundary)
    for pv, cv in snapped.items():
        verts[pv] = req.mesh.vertices[cv]
    if unmatched_ctx:
        verts = np.vstack([verts, req.mesh.vertices[sorted(unmatched_ctx)]])
    return PatchResult(verts, patch.faces, "stitch-back",
                       {"crop": len(keep), "snapped": len(snapped),
                        "isolated": len(unmatched_ctx)})


class StitchBackGenerator:
    generator_id = "stitch-back"

    def __init__(self, whole: Mesh, bbox_expand: float = 0.05):
        self.whole = whole
        self.bbox_expand = bbox_expand

    def __call__(self, req: GeneratorRequest) -> PatchResult:
        return stitch_back_adapt(self.whole, req, self.bbox_expand)


# ---------------------------------------------------------------------------
# External subprocess generator


class ExternalGenerator:
    """Run a subprocess that receives the prompt sequence (context tokens,
    empty target) as one JSON line on stdin and must answer with a complete
    sequence JSON line whose target segment is filled in."""

    def __init__(self, command: str, timeout: float = 300.0):
        self.command = command
        self.generator_id = f"external:{command}"
        self.timeout = timeout

    def __call__(self, req: GeneratorRequest) -> PatchResult:
        prompt = serialize_fim(req.mesh, req.region.context_faces, [],
                               boundary=req.region.boundary, spec=req.quant)
        proc = subprocess.run(
            self.command,
            shell=True,
            input=json.dumps(prompt.to_record()) + "\n",
            capture_output=True,
            text=True,
            timeout=self.timeout,
        )
        if proc.returncode != 0:
            raise MeshError(
                f"external generator failed ({proc.returncode}): {proc.stderr.strip()[:500]}"
            )
        line = proc.stdout.strip().splitlines()[-1]
        seq = FimSequence.from_record(json.loads(line))
        region = detokenize(seq, QuantizationSpec(bins=seq.bins,
                                                  lo=req.quant.lo, hi=req.quant.hi))
        sub = region.mesh.submesh(region.target_faces)
        return PatchResult(sub.vertices, sub.faces, self.generator_id,
                           {"tokens": len(seq)})


def make_generator(spec: str):
    """Parse a generator selector: oracle | triangulate |
    stitch-back:<path-to-whole-mesh> | external:<command>.

    The oracle resolves its reference from each request, so it always works
    in the pipeline's coordinate frame."""
    if spec == "oracle":
        return OracleGenerator()
    if spec == "triangulate":
        return TriangulateGenerator()
    if spec.startswith("stitch-back:"):
        from .mesh import load_mesh

        return StitchBackGenerator(load_mesh(spec.split(":", 1)[1]))
    if spec.startswith("external:"):
        return ExternalGenerator(spec.split(":", 1)[1])
    raise ValueError(f"unknown generator {spec!r}")
