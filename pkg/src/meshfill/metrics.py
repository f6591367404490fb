"""Evaluation metrics for local mesh edits.

Per sample: boundary vertex matching ratio, one-way Chamfer distances of
the original and generated patches against the reference surface, face
counts, and the overflow ratio. Aggregates: PMR, A-VMR, O-CDIR, CD-PR,
#F-Inc, OvR, A-Overflow, plus the no-edit reference lower bound obtained
by substituting the original target for the patch.

Relative metrics (O-CDIR, #F-Inc) are computed only over the perfect-match
subset; empty subsets yield None with a reason, never a silent zero.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .generators import PatchResult
from .mesh import Mesh
from .regions import RegionSpec
from .repair import EPS_OVERFLOW, THETA_OVERFLOW, overflow_ratio
from .sampling import PointSample, sample_points

logger = logging.getLogger("meshfill.metrics")

TAU_MATCH = 1e-6
N_SAMPLES_GT = 100_000
N_SAMPLES_PATCH = 20_000


def vertex_matching_ratio(boundary_points: np.ndarray, patch_points: np.ndarray,
                          tau: float = TAU_MATCH) -> float:
    """Fraction of boundary vertices reproduced (strictly within tau) by at
    least one patch vertex. An empty boundary counts as fully matched."""
    b = np.asarray(boundary_points, dtype=np.float64).reshape(-1, 3)
    p = np.asarray(patch_points, dtype=np.float64).reshape(-1, 3)
    if len(b) == 0:
        return 1.0
    if len(p) == 0:
        return 0.0
    d, _ = cKDTree(p).query(b)
    return float((d < tau).mean())


def one_way_chamfer(from_points, to_points) -> float:
    """Mean nearest-neighbor distance from each source point into the
    target set (asymmetric by design)."""
    x = np.asarray(getattr(from_points, "positions", from_points), dtype=np.float64)
    y = np.asarray(getattr(to_points, "positions", to_points), dtype=np.float64)
    if len(x) == 0 or len(y) == 0:
        raise ValueError("chamfer needs non-empty point sets")
    d, _ = cKDTree(y).query(x)
    return float(d.mean())


@dataclass
class SampleEval:
    """One edit's raw measurements."""

    r: float  # boundary vertex matching ratio
    n_boundary: int
    cd_target: float  # CD(original target -> reference)
    cd_patch: float  # CD(generated patch -> reference)
    faces_target: int
    faces_patch: int
    overflow: float  # O(s) of the generated patch
    overflow_noedit: float  # O(s) with the original target substituted

    @property
    def perfect(self) -> bool:
        return self.r == 1.0


def _patch_vertices_in_faces(patch: PatchResult) -> np.ndarray:
    used = sorted({v for f in patch.faces for v in f})
    return patch.vertices[used] if used else np.zeros((0, 3))


def evaluate_sample(gt: Mesh, region: RegionSpec, patch: PatchResult,
                    seed: int = 0, tau: float = TAU_MATCH,
                    eps_ovf: float = EPS_OVERFLOW,
                    n_gt: int = N_SAMPLES_GT, n_patch: int = N_SAMPLES_PATCH) -> SampleEval:
    """Measure one edit of ``gt``: the region's target faces were replaced
    by ``patch``. The target and the patch are sampled with the same seed
    so an identity edit scores exactly zero Chamfer difference."""
    tgt_mesh = gt.submesh(region.target_faces)
    gt_sample = sample_points(gt, n_gt, seed=seed)
    tgt_sample = sample_points(tgt_mesh, n_patch, seed=seed + 1)
    boundary_pts = gt.vertices[list(region.boundary)]
    r = vertex_matching_ratio(boundary_pts, _patch_vertices_in_faces(patch), tau)
    residual_ids = [
        f for f in range(gt.num_faces)
        if f not in set(region.target_faces) | set(region.context_faces)
    ]
    residual = gt.submesh(residual_ids) if residual_ids else Mesh(np.zeros((0, 3)), [])
    if patch.num_faces:
        patch_sample = sample_points(patch.as_mesh(), n_patch, seed=seed + 1)
        cd_patch = one_way_chamfer(patch_sample, gt_sample)
        ovf = overflow_ratio(patch, residual, eps_ovf, n_patch, seed=seed + 2)
    else:
        cd_patch = float("inf")
        ovf = 0.0
    return SampleEval(
        r=r,
        n_boundary=len(region.boundary),
        cd_target=one_way_chamfer(tgt_sample, gt_sample),
        cd_patch=cd_patch,
        faces_target=len(region.target_faces),
        faces_patch=patch.num_faces,
        overflow=ovf,
        overflow_noedit=overflow_ratio(tgt_mesh, residual, eps_ovf, n_patch, seed=seed + 2),
    )


@dataclass
class MetricsReport:
    pmr: float
    a_vmr: float
    o_cdir: float | None
    cd_pr: float
    f_inc: float | None
    ovr: float
    a_overflow: float | None
    n_samples: int
    n_perfect: int
    no_edit_ovr: float
    no_edit_a_overflow: float | None
    theta_ovf: float = THETA_OVERFLOW
    undefined: dict[str, str] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "v": 1,
            "n_samples": self.n_samples,
            "n_perfect": self.n_perfect,
            "PMR": self.pmr,
            "A-VMR": self.a_vmr,
            "O-CDIR": self.o_cdir,
            "CD-PR": self.cd_pr,
            "#F-Inc": self.f_inc,
            "OvR": self.ovr,
            "A-Overflow": self.a_overflow,
            "no_edit": {"OvR": self.no_edit_ovr, "A-Overflow": self.no_edit_a_overflow},
            "theta_ovf": self.theta_ovf,
            "undefined": self.undefined,
            "warnings": self.warnings,
        }


def no_edit_reference(samples: list[SampleEval],
                      theta: float = THETA_OVERFLOW) -> tuple[float, float | None]:
    """Overflow aggregates with the original target standing in as the
    patch: the floor no generator can honestly beat."""
    if not samples:
        raise ValueError("no samples")
    over = [s.overflow_noedit for s in samples if s.overflow_noedit > theta]
    ovr0 = len(over) / len(samples)
    return ovr0, (float(np.mean(over)) if over else None)


def aggregate(samples: list[SampleEval], theta: float = THETA_OVERFLOW) -> MetricsReport:
    if not samples:
        raise ValueError("no samples to aggregate")
    n = len(samples)
    perfect = [s for s in samples if s.perfect]
    undefined: dict[str, str] = {}
    warnings: list[str] = []

    pmr = len(perfect) / n
    a_vmr = float(np.mean([s.r for s in samples]))
    if perfect:
        o_cdir = float(np.mean([
            (s.cd_target - s.cd_patch) / s.cd_target for s in perfect
        ]))
        f_inc = float(np.mean([
            (s.faces_patch - s.faces_target) / s.faces_target for s in perfect
        ]))
    else:
        o_cdir = None
        f_inc = None
        undefined["O-CDIR"] = "perfect-match subset is empty"
        undefined["#F-Inc"] = "perfect-match subset is empty"
    cd_pr = float(np.mean([s.cd_patch < s.cd_target for s in samples]))
    exceeding = [s.overflow for s in samples if s.overflow > theta]
    ovr = len(exceeding) / n
    if exceeding:
        a_overflow = float(np.mean(exceeding))
    else:
        a_overflow = None
        undefined["A-Overflow"] = "no sample exceeds the overflow threshold"
    ovr0, a_overflow0 = no_edit_reference(samples, theta)
    if ovr < ovr0:
        warnings.append(
            f"OvR {ovr:.4f} below the no-edit reference {ovr0:.4f}: evaluation artifact"
        )
    if a_overflow is not None and a_overflow0 is not None and a_overflow < a_overflow0:
        warnings.append(
            f"A-Overflow {a_overflow:.4f} below the no-edit reference "
            f"{a_overflow0:.4f}: evaluation artifact"
        )
    return MetricsReport(
        pmr=pmr, a_vmr=a_vmr, o_cdir=o_cdir, cd_pr=cd_pr, f_inc=f_inc,
        ovr=ovr, a_overflow=a_overflow, n_samples=n, n_perfect=len(perfect),
        no_edit_ovr=ovr0, no_edit_a_overflow=a_overflow0, theta_ovf=theta,
        undefined=undefined, warnings=warnings,
    )
