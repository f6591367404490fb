"""Target-region sampling and context extraction.

Two sampling modes: whole-ring BFS growth up to a face budget, and
stochastic percolation growth along the frontier with acceptance
probability p. Both stay connected on the face adjacency graph and both
are deterministic for a fixed seed.
"""

from __future__ import annotations

import json
import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from .mesh import (
    FaceAdjacencyGraph,
    Mesh,
    MeshError,
    bfs_ring_list,
    bfs_rings,
    boundary_vertices,
    connected_components,
    face_adjacency,
)

logger = logging.getLogger("meshfill.regions")

DEFAULT_BUDGET = 1200
DEFAULT_CONTEXT_WIDTH = 3
PERCOLATION_P_RANGE = (0.55, 0.85)
PERCOLATION_MIX = 0.30


@dataclass
class RegionSpec:
    """A connected target face set with its derived context and boundary."""

    target_faces: tuple[int, ...]
    context_faces: tuple[int, ...]
    context_width: int
    boundary: tuple[int, ...]
    mode: str = "manual"
    seed: int | None = None
    p: float | None = None

    def __post_init__(self):
        self.target_faces = tuple(sorted(int(f) for f in self.target_faces))
        self.context_faces = tuple(sorted(int(f) for f in self.context_faces))
        self.boundary = tuple(sorted(int(v) for v in self.boundary))

    def to_json(self) -> dict:
        out = {
            "target_faces": list(self.target_faces),
            "context_width": self.context_width,
            "mode": self.mode,
        }
        if self.seed is not None:
            out["seed"] = self.seed
        if self.p is not None:
            out["p"] = self.p
        return out


def validate_region(mesh: Mesh, region: RegionSpec, graph: FaceAdjacencyGraph | None = None):
    """Check the region invariants against its mesh; raises MeshError with
    a component listing when the target is disconnected."""
    graph = graph or face_adjacency(mesh)
    tgt = set(region.target_faces)
    if not tgt:
        raise MeshError("empty target region")
    comps = connected_components(graph, tgt)
    if len(comps) > 1:
        listing = "; ".join(str(sorted(c)) for c in comps)
        raise MeshError(f"target region is disconnected ({len(comps)} components): {listing}")
    if set(region.context_faces) & tgt:
        raise MeshError("context overlaps target")
    expect_ctx = bfs_rings(graph, tgt, region.context_width, include_seed=False) - tgt
    if set(region.context_faces) != expect_ctx:
        raise MeshError("context does not match the target's breadth-first rings")
    if set(region.boundary) != boundary_vertices(mesh, tgt):
        raise MeshError("boundary set does not match the target")


def extract_context(mesh: Mesh, target_faces, w: int = DEFAULT_CONTEXT_WIDTH,
                    graph: FaceAdjacencyGraph | None = None, mode: str = "manual",
                    seed: int | None = None, p: float | None = None) -> RegionSpec:
    """Region spec for a given connected target: context is the faces
    within ``w`` rings of the target (target excluded)."""
    graph = graph or face_adjacency(mesh)
    tgt = set(int(f) for f in target_faces)
    if not tgt:
        raise MeshError("empty target region")
    comps = connected_components(graph, tgt)
    if len(comps) > 1:
        listing = "; ".join(str(sorted(c)) for c in comps)
        raise MeshError(f"target region is disconnected ({len(comps)} components): {listing}")
    ctx = bfs_rings(graph, tgt, w, include_seed=False) - tgt
    if not ctx and len(tgt) == mesh.num_faces:
        warnings.warn("target covers the whole mesh; context is empty")
    return RegionSpec(
        target_faces=tuple(tgt),
        context_faces=tuple(ctx),
        context_width=w,
        boundary=tuple(boundary_vertices(mesh, tgt)),
        mode=mode,
        seed=seed,
        p=p,
    )


def sample_bfs_region(mesh: Mesh, seed_face: int, budget: int = DEFAULT_BUDGET,
                      w: int = DEFAULT_CONTEXT_WIDTH,
                      graph: FaceAdjacencyGraph | None = None) -> RegionSpec:
    """Grow whole BFS rings from the seed while they fit the budget, then a
    deterministic ascending-id prefix of the first ring that does not."""
    if budget < 1:
        raise MeshError("budget must be >= 1")
    graph = graph or face_adjacency(mesh)
    picked: list[int] = []
    for ring in bfs_ring_list(graph, [seed_face]):
        room = budget - len(picked)
        if room <= 0:
            break
        picked.extend(ring if len(ring) <= room else ring[:room])
    return extract_context(mesh, picked, w, graph=graph, mode="bfs")


def sample_percolation_region(mesh: Mesh, seed_face: int, p: float,
                              budget: int = DEFAULT_BUDGET, seed: int = 0,
                              w: int = DEFAULT_CONTEXT_WIDTH,
                              graph: FaceAdjacencyGraph | None = None) -> RegionSpec:
    """Stochastic frontier growth: each round snapshots the frontier and
    accepts faces i.i.d. with probability p (ascending face id, stopping at
    the budget). A round that accepts nothing falls back to accepting the
    whole snapshot frontier so the region keeps growing."""
    if not 0 < p <= 1:
        raise MeshError("acceptance probability must be in (0, 1]")
    if budget < 1:
        raise MeshError("budget must be >= 1")
    graph = graph or face_adjacency(mesh)
    if seed_face < 0 or seed_face >= graph.num_faces:
        raise MeshError(f"seed face {seed_face} out of range")
    rng = np.random.default_rng(seed)
    region = {int(seed_face)}
    while len(region) < budget:
        frontier = sorted(
            {g for f in region for g in graph.neighbors[f]} - region
        )
        if not frontier:
            break
        accepted = []
        for f in frontier:
            if len(region) + len(accepted) >= budget:
                break
            if rng.random() < p:
                accepted.append(f)
        if not accepted:
            room = budget - len(region)
            accepted = frontier[:room]
        region.update(accepted)
    return extract_context(mesh, region, w, graph=graph, mode="percolation", seed=seed, p=p)


def commit_stroke(graph: FaceAdjacencyGraph, existing: set[int], stroke) -> tuple[set[int], bool]:
    """Brush-selection commit rule: a stroke is reduced to its largest
    connected component, then merged into the existing selection only when
    adjacent to it (so the selection stays one connected region).

    Returns (new selection, accepted). A rejected stroke is an orphan.
    """
    from .mesh import largest_connected_component

    stroke = set(int(f) for f in stroke)
    if not stroke:
        return set(existing), False
    core = largest_connected_component(graph, stroke)
    if not existing:
        return core, True
    touching = existing | core
    if len(connected_components(graph, touching)) == 1:
        return touching, True
    return set(existing), False


# ---------------------------------------------------------------------------
# JSON interchange: only the target and the sampling parameters are stored;
# context and boundary are re-derived on load, never trusted from the file.


def save_region(region: RegionSpec, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(region.to_json(), fh, indent=2)
        fh.write("\n")


def load_region(mesh: Mesh, path) -> RegionSpec:
    with open(path, "r", encoding="utf-8") as fh:
        rec = json.load(fh)
    return region_from_json(mesh, rec)


def region_from_json(mesh: Mesh, rec: dict) -> RegionSpec:
    return extract_context(
        mesh,
        [int(f) for f in rec["target_faces"]],
        int(rec.get("context_width", DEFAULT_CONTEXT_WIDTH)),
        mode=rec.get("mode", "manual"),
        seed=rec.get("seed"),
        p=rec.get("p"),
    )
