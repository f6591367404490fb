"""Coordinate quantization, canonical face ordering, and FIM serialization.

A face becomes a fixed 12-token block: 4 vertices x 3 quantized coordinate
tokens, emitted in (y, x, z) axis order to match the bottom-to-top sort key.
Triangles duplicate their 3rd vertex into the 4th slot. The context and the
target segments are each canonical-sorted independently, so the context
tokens never depend on how the hole will be tiled.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .mesh import Mesh, MeshError, boundary_vertices
from .sequence import FLAG_BOUNDARY, FLAG_CONTEXT, FimSequence, SequenceError


@dataclass(frozen=True)
class QuantizationSpec:
    """Uniform per-axis quantizer: ``bins`` levels over [lo, hi]."""

    bins: int = 256
    lo: float = -0.5
    hi: float = 0.5

    def __post_init__(self):
        if self.bins < 2:
            raise ValueError("bins must be >= 2")
        if not self.hi > self.lo:
            raise ValueError("empty quantization domain")
        if self.bins > 65533:
            raise ValueError("bins must leave room for 3 sentinel ids in u16")

    @property
    def bin_width(self) -> float:
        return (self.hi - self.lo) / self.bins


def quantize(coords, spec: QuantizationSpec) -> np.ndarray:
    """floor((c - lo) / (hi - lo) * bins), clamped into [0, bins-1].
    Out-of-domain coordinates are clamped with a warning; NaN is an error."""
    c = np.asarray(coords, dtype=np.float64)
    if np.isnan(c).any():
        raise ValueError("NaN coordinate cannot be quantized")
    if (c < spec.lo).any() or (c > spec.hi).any():
        warnings.warn("coordinates outside quantization domain were clamped")
    t = np.floor((c - spec.lo) / (spec.hi - spec.lo) * spec.bins)
    return np.clip(t, 0, spec.bins - 1).astype(np.int64)


def dequantize(tokens, spec: QuantizationSpec) -> np.ndarray:
    """Bin centers, so |dequantize(quantize(c)) - c| <= bin_width / 2."""
    t = np.asarray(tokens, dtype=np.float64)
    return spec.lo + (t + 0.5) * spec.bin_width


# ---------------------------------------------------------------------------
# Canonical ordering


def _yxz(row) -> tuple:
    return (row[1], row[0], row[2])


def _rotations(face):
    n = len(face)
    return [face[i:] + face[:i] for i in range(n)]


def canonical_face_rotation(face, coords) -> tuple[int, ...]:
    """Cyclic rotation (winding preserved) whose vertex (y, x, z) key
    sequence is minimal; the lowest vertex therefore comes first."""
    best = None
    best_key = None
    for rot in _rotations(tuple(face)):
        key = tuple(_yxz(coords[v]) for v in rot)
        if best_key is None or key < best_key:
            best_key = key
            best = rot
    return best


def face_sort_key(face, coords) -> tuple:
    """Full lexicographic key: the (y, x, z) sequence of the canonical
    rotation. Its first entry is the face's lowest vertex, which ranks
    faces bottom-to-top; the remaining entries make the order total."""
    rot = canonical_face_rotation(face, coords)
    return tuple(_yxz(coords[v]) for v in rot)


def canonical_sort(mesh: Mesh, spec: QuantizationSpec | None = None) -> Mesh:
    """Faces sorted bottom-to-top by the (y, x, z) key of their lowest
    vertex, each rotated so that vertex comes first. Idempotent and
    independent of the input face order. Keys use quantized coordinates
    when a spec is given, raw coordinates otherwise."""
    coords = quantize(mesh.vertices, spec) if spec is not None else mesh.vertices
    rotated = [canonical_face_rotation(f, coords) for f in mesh.faces]
    rotated.sort(key=lambda f: tuple(_yxz(coords[v]) for v in f))
    return Mesh(mesh.vertices.copy(), rotated)


# ---------------------------------------------------------------------------
# Serialization


def _face_block(face, q) -> list[int]:
    vs = list(face)
    if len(vs) == 3:
        vs.append(vs[2])  # triangle padding: duplicate the 3rd vertex
    toks = []
    for v in vs:
        y, x, z = _yxz(q[v])
        toks += [int(y), int(x), int(z)]
    return toks


def serialize_fim(
    mesh: Mesh,
    context_faces,
    target_faces,
    boundary=None,
    spec: QuantizationSpec | None = None,
) -> FimSequence:
    """Serialize a (context, target) face split of one mesh.

    Both segments are canonical-sorted independently. Boundary markers are
    set on all 3 coordinate tokens of every context-token occurrence of a
    boundary vertex (padding duplicates included); context positions number
    the context segment's tokens sequentially.
    """
    spec = spec or QuantizationSpec()
    ctx = sorted(int(f) for f in context_faces)
    tgt = sorted(int(f) for f in target_faces)
    overlap = set(ctx) & set(tgt)
    if overlap:
        raise MeshError(f"context and target overlap on faces {sorted(overlap)}")
    if boundary is None:
        boundary = boundary_vertices(mesh, tgt)
    boundary = set(int(v) for v in boundary)
    q = quantize(mesh.vertices, spec)

    def _segment(face_ids):
        rots = [canonical_face_rotation(mesh.faces[f], q) for f in face_ids]
        rots.sort(key=lambda f: tuple(_yxz(q[v]) for v in f))
        return rots

    tokens: list[int] = [spec.bins]  # S_CTX
    flags: list[int] = [0]
    marked: list[bool] = []
    for face in _segment(ctx):
        vs = list(face)
        if len(vs) == 3:
            vs.append(vs[2])
        tokens += _face_block(face, q)
        for v in vs:
            marked += [v in boundary] * 3
    flags += [FLAG_CONTEXT | (FLAG_BOUNDARY if m else 0) for m in marked]
    tokens.append(spec.bins + 1)  # E_CTX
    flags.append(0)
    for face in _segment(tgt):
        tokens += _face_block(face, q)
        flags += [0] * 12
    tokens.append(spec.bins + 2)  # EOS
    flags.append(0)

    ctx_pos = np.full(len(tokens), -1, dtype=np.int32)
    n_ctx = 12 * len(ctx)
    ctx_pos[1 : 1 + n_ctx] = np.arange(n_ctx, dtype=np.int32)
    seq = FimSequence(
        np.asarray(tokens, dtype=np.uint16),
        np.asarray(flags, dtype=np.uint8),
        ctx_pos,
        spec.bins,
    )
    seq.validate()
    return seq


@dataclass
class TokenizedRegion:
    """Detokenized (context, target) pair over one shared vertex table."""

    mesh: Mesh
    context_faces: list[int]
    target_faces: list[int]


def detokenize(seq: FimSequence, spec: QuantizationSpec | None = None) -> TokenizedRegion:
    """Invert the FIM layout back to faces at quantized coordinates.

    Vertices are merged on exact token match; blocks whose 4th vertex
    duplicates the 3rd become triangles.
    """
    spec = spec or QuantizationSpec(bins=seq.bins)
    if spec.bins != seq.bins:
        raise SequenceError("quantization spec does not match sequence vocabulary")
    seq.validate()
    vert_ids: dict[tuple[int, int, int], int] = {}
    coords: list[tuple[int, int, int]] = []

    def _parse(segment: np.ndarray) -> list[tuple[int, ...]]:
        faces = []
        for off in range(0, len(segment), 12):
            block = segment[off : off + 12].astype(np.int64)
            if (block >= seq.bins).any():
                raise SequenceError("coordinate token out of vocabulary range")
            triples = [tuple(int(t) for t in block[i : i + 3]) for i in range(0, 12, 3)]
            vs = []
            for y, x, z in triples:
                key = (x, y, z)
                if key not in vert_ids:
                    vert_ids[key] = len(coords)
                    coords.append(key)
                vs.append(vert_ids[key])
            if triples[3] == triples[2]:
                vs = vs[:3]
            faces.append(tuple(vs))
        return faces

    ctx_faces = _parse(seq.tokens[seq.context_slice])
    tgt_faces = _parse(seq.tokens[seq.target_slice])
    pts = dequantize(np.asarray(coords, dtype=np.int64).reshape(len(coords), 3), spec)
    m = Mesh(pts, ctx_faces + tgt_faces)
    return TokenizedRegion(m, list(range(len(ctx_faces))), list(range(len(ctx_faces), m.num_faces)))


def augment_context(mesh: Mesh, context_faces, delta: float, seed: int = 0) -> Mesh:
    """Perturb every vertex used by a context face (boundary vertices
    included) by independent per-axis U(-delta, delta) offsets."""
    if delta < 0:
        raise ValueError("delta must be >= 0")
    vids = sorted({v for f in context_faces for v in mesh.faces[int(f)]})
    verts = mesh.vertices.copy()
    if delta > 0 and vids:
        rng = np.random.default_rng(seed)
        verts[vids] += rng.uniform(-delta, delta, size=(len(vids), 3))
    return Mesh(verts, list(mesh.faces))
