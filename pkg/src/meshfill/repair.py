"""Damage-region extraction, overflow quality gating, and iterative repair.

Extraction maps broken-point clusters to seed faces, links disconnected
seeds over the face graph, expands to target/context regions, and merges
overlapping groups with union-find. The gate rejects a patch when too many
of its surface samples land near the untouched residual mesh; an accepted
patch is welded in along the exposed boundary.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .cluster import NOISE
from .detect import BrokenPointSet, detect_defects
from .generators import GeneratorRequest, PatchResult, build_request
from .mesh import (
    Mesh,
    MeshError,
    bfs_rings,
    connected_components,
    face_adjacency,
    normalize_pair,
    seam_edge_incidence,
    shortest_face_path,
    triangulated,
)
from .regions import RegionSpec
from .sampling import sample_points

logger = logging.getLogger("meshfill.repair")

EPS_OVERFLOW = 1.0 / 256
THETA_OVERFLOW = 0.01
TAU_WELD = 1e-6
MAX_ROUNDS = 4
TAU_FALSE_POSITIVE = 2
W_TARGET = 3
W_CONTEXT = 1
OVERFLOW_SAMPLES = 20_000
# Hole defects legitimately spread broken points across a closed shell's
# interior wall, so a merged group may cover most or all of the mesh; such
# groups still repair mechanically (wholesale regeneration). Callers can
# tighten this fraction to enforce locality.
MAX_REGION_FRACTION = 1.0


@dataclass
class DamageGroup:
    """One repairable region: connected target faces, their context ring,
    and the broken-point clusters that produced them."""

    target: tuple[int, ...]
    context: tuple[int, ...]
    cluster_ids: tuple[int, ...]

    def region(self, mesh: Mesh, w_ctx: int = W_CONTEXT) -> RegionSpec:
        from .mesh import boundary_vertices

        return RegionSpec(
            target_faces=self.target,
            context_faces=self.context,
            context_width=w_ctx,
            boundary=tuple(boundary_vertices(mesh, self.target)),
            mode="damage",
        )


def nearest_faces(points: np.ndarray, mesh: Mesh) -> np.ndarray:
    """Nearest face id per point (exact ties go to the smaller face id)."""
    tris, src = triangulated(mesh)
    bvh = kernels.build_bvh(mesh.vertices[tris])
    _dist, tri = kernels.closest_tri(np.asarray(points, dtype=np.float64), bvh)
    return src[tri]


def extract_damage_regions(broken: BrokenPointSet, mesh: Mesh,
                           w_target: int = W_TARGET, w_context: int = W_CONTEXT,
                           max_fraction: float = MAX_REGION_FRACTION) -> list[DamageGroup]:
    """Per cluster: nearest-face seeds, shortest-path linking of disjoint
    seed components, ring expansion to the target and context; then merge
    any groups whose footprints overlap."""
    if not broken.clusters:
        return []
    graph = face_adjacency(mesh)
    raw: list[tuple[set[int], set[int], int]] = []
    for cid, members in enumerate(broken.clusters):
        seeds = set(nearest_faces(broken.points[members], mesh).tolist())
        comps = connected_components(graph, seeds)
        linked = set(comps[0])
        for comp in comps[1:]:
            path = shortest_face_path(graph, linked, comp)
            linked.update(path)
            linked.update(comp)
        target = bfs_rings(graph, linked, w_target)
        context = bfs_rings(graph, target, w_context, include_seed=False) - target
        raw.append((target, context, cid))

    # union-find merge of groups with overlapping target-or-context footprints
    parent = list(range(len(raw)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    owner: dict[int, int] = {}
    for gi, (tgt, ctx, _cid) in enumerate(raw):
        for f in tgt | ctx:
            if f in owner:
                ra, rb = find(owner[f]), find(gi)
                if ra != rb:
                    parent[max(ra, rb)] = min(ra, rb)
            else:
                owner[f] = gi
    merged: dict[int, list[int]] = {}
    for gi in range(len(raw)):
        merged.setdefault(find(gi), []).append(gi)

    groups: list[DamageGroup] = []
    for members in merged.values():
        target = set()
        cids = []
        for gi in members:
            target |= raw[gi][0]
            cids.append(raw[gi][2])
        # a context-only overlap can merge disconnected targets; relink
        comps = connected_components(graph, target)
        linked = set(comps[0])
        for comp in comps[1:]:
            linked.update(shortest_face_path(graph, linked, comp))
            linked.update(comp)
        context = bfs_rings(graph, linked, w_context, include_seed=False) - linked
        if len(linked) > max_fraction * mesh.num_faces:
            logger.warning(
                "damage group of %d/%d faces exceeds the locality bound; skipped",
                len(linked), mesh.num_faces,
            )
            continue
        if len(linked) == mesh.num_faces:
            logger.warning(
                "damage group covers all %d faces; repair degenerates to "
                "wholesale regeneration", mesh.num_faces,
            )
        groups.append(DamageGroup(tuple(sorted(linked)), tuple(sorted(context)),
                                  tuple(sorted(cids))))
    groups.sort(key=lambda g: min(g.target))
    return groups


# ---------------------------------------------------------------------------
# Quality gate


@dataclass
class GateVerdict:
    overflow_ratio: float
    accepted: bool
    eps_ovf: float = EPS_OVERFLOW
    theta_ovf: float = THETA_OVERFLOW
    tau_weld: float = TAU_WELD
    reason: str = ""


def overflow_ratio(patch: PatchResult | Mesh, residual: Mesh,
                   eps_ovf: float = EPS_OVERFLOW, n_points: int = OVERFLOW_SAMPLES,
                   seed: int = 0) -> float:
    """Fraction of the patch's surface samples within eps_ovf of the
    residual mesh (everything outside target and context)."""
    patch_mesh = patch.as_mesh() if isinstance(patch, PatchResult) else patch
    if patch_mesh.num_faces == 0 or residual.num_faces == 0:
        return 0.0
    pts = sample_points(patch_mesh, n_points, seed=seed).positions
    tris, _src = triangulated(residual)
    bvh = kernels.build_bvh(residual.vertices[tris])
    dist, _tri = kernels.closest_tri(pts, bvh)
    return float((dist <= eps_ovf).mean())


def quality_gate_merge(mesh: Mesh, region: RegionSpec | DamageGroup, patch: PatchResult,
                       eps_ovf: float = EPS_OVERFLOW, theta_ovf: float = THETA_OVERFLOW,
                       tau_weld: float = TAU_WELD, n_points: int = OVERFLOW_SAMPLES,
                       seed: int = 0) -> tuple[Mesh | None, GateVerdict, dict[int, int]]:
    """Gate then merge: compute the patch's overflow ratio against the
    residual mesh; reject above threshold (mesh untouched), else remove the
    target faces, weld the patch along the exposed boundary, append.

    Returns (merged mesh or None, verdict, weld map).
    """
    if isinstance(region, DamageGroup):
        tgt = set(region.target)
        ctx = set(region.context)
    else:
        tgt = set(region.target_faces)
        ctx = set(region.context_faces)
    if not tgt <= set(range(mesh.num_faces)):
        raise MeshError("target faces out of range for this mesh")
    residual_ids = [f for f in range(mesh.num_faces) if f not in tgt and f not in ctx]
    residual = mesh.submesh(residual_ids) if residual_ids else Mesh(np.zeros((0, 3)), [])
    ratio = overflow_ratio(patch, residual, eps_ovf, n_points, seed)
    if ratio > theta_ovf:
        verdict = GateVerdict(ratio, False, eps_ovf, theta_ovf, tau_weld,
                              f"overflow ratio {ratio:.4f} > {theta_ovf}")
        return None, verdict, {}
    from .mesh import weld_patch

    keep = [f for i, f in enumerate(mesh.faces) if i not in tgt]
    base = Mesh(mesh.vertices.copy(), keep)
    merged, weld = weld_patch(base, patch.as_mesh(), tau_weld)
    return merged, GateVerdict(ratio, True, eps_ovf, theta_ovf, tau_weld), weld


# ---------------------------------------------------------------------------
# Iterative repair loop


@dataclass
class RepairResult:
    mesh: Mesh  # final mesh, in the input coordinate frame
    status: str  # no_damage | false_positive | unclustered | repaired | max_rounds
    rounds: list[dict] = field(default_factory=list)

    def report(self) -> dict:
        return {"v": 1, "status": self.status, "rounds": self.rounds}


def iterative_repair(mesh: Mesh, ref: Mesh, generator, rounds: int = MAX_ROUNDS,
                     tau_fp: int = TAU_FALSE_POSITIVE, n_views: int = 48,
                     resolution: int = 320, seed: int = 0,
                     w_target: int = W_TARGET, w_context: int = W_CONTEXT,
                     n_overflow: int = OVERFLOW_SAMPLES) -> RepairResult:
    """Detect -> extract -> generate -> gate&merge, up to ``rounds`` times.

    Exits early when detection confirms nothing (no damage) or at most
    tau_fp points (likely false positive). Groups are processed in
    ascending minimum-face-id order; a rejected or failed group leaves the
    mesh untouched. All geometry runs in the jointly normalized frame and
    is mapped back at the end.
    """
    work, ref_n, transform = normalize_pair(mesh, ref)
    rounds_log: list[dict] = []
    status = "max_rounds"
    cumulative_fixed = 0
    for rnd in range(1, rounds + 1):
        broken = detect_defects(work, ref_n, n_views=n_views, resolution=resolution,
                                assume_normalized=True)
        entry = {
            "round": rnd,
            "confirmed_points": int(broken.num_confirmed),
            "clusters": len(broken.clusters),
            "groups": 0,
            "accepted": 0,
            "rejected": 0,
            "failed": 0,
            "newly_fixed": 0,
            "cumulative_fixed": cumulative_fixed,
        }
        if broken.num_confirmed == 0:
            status = "no_damage" if rnd == 1 else "repaired"
            rounds_log.append(entry)
            break
        if broken.num_confirmed <= tau_fp:
            status = "false_positive"
            rounds_log.append(entry)
            break
        groups = extract_damage_regions(broken, work, w_target, w_context)
        entry["groups"] = len(groups)
        if not groups:
            status = "unclustered"
            rounds_log.append(entry)
            break
        remap = np.arange(work.num_faces)  # original-round ids -> current ids
        for group in groups:
            tgt_now = tuple(int(remap[f]) for f in group.target)
            ctx_now = tuple(int(remap[f]) for f in group.context)
            group_now = DamageGroup(tgt_now, ctx_now, group.cluster_ids)
            try:
                region = group_now.region(work, w_context)
                req = build_request(work, region, ref=ref_n, seed=seed,
                                    with_samples=False)
                patch = generator(req)
                if patch.num_faces == 0 and group_now.target:
                    raise MeshError("generator produced an empty patch for a "
                                    "non-empty target")
                merged, verdict, _weld = quality_gate_merge(
                    work, group_now, patch, n_points=n_overflow, seed=seed,
                )
            except Exception as exc:  # noqa: BLE001 - a failed group is skipped
                logger.warning("group %s failed: %s", group_now.target[:4], exc)
                entry["failed"] += 1
                continue
            if merged is None:
                entry["rejected"] += 1
                continue
            entry["accepted"] += 1
            # surviving faces keep their relative order; removed slots map to -1
            alive = np.ones(work.num_faces, dtype=bool)
            alive[list(group_now.target)] = False
            new_ids = np.cumsum(alive) - 1
            step = np.where(alive, new_ids, -1)
            old_valid = remap >= 0
            remap = np.where(old_valid, step[np.clip(remap, 0, None)], -1)
            work = merged
        entry["newly_fixed"] = entry["accepted"]
        cumulative_fixed += entry["accepted"]
        entry["cumulative_fixed"] = cumulative_fixed
        rounds_log.append(entry)
    return RepairResult(transform.invert_mesh(work), status, rounds_log)


def audit_seam(before: Mesh, after: Mesh, boundary_vertex_ids_before,
               weld_map: dict[int, int]) -> bool:
    """True when every seam edge's face-incidence count survived a
    remove+weld round trip (no cracks, no T-junctions)."""
    seam_before = seam_edge_incidence(before, boundary_vertex_ids_before)
    seam_after = seam_edge_incidence(after, boundary_vertex_ids_before)
    return all(seam_after.get(e) == c for e, c in seam_before.items())
