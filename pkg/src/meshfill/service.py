"""Local HTTP service backing the brush-selection front end.

A thin shell over the library: every endpoint matches the behavior of the
corresponding CLI/library call on the same inputs. Meshes are stored by
content hash; repair jobs run on a bounded worker pool with on-disk
records, so a crashed service can be restarted over the same workspace.

All request/response schemas carry a "v": 1 field.
"""

from __future__ import annotations

import json
import logging
import os
import threading
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from .generators import PatchResult, build_request, make_generator
from .mesh import (
    Mesh,
    MeshError,
    connected_components,
    dumps_obj,
    edge_face_map,
    face_adjacency,
    loads_obj,
    mesh_hash,
)
from .metrics import aggregate, evaluate_sample
from .regions import RegionSpec, commit_stroke, extract_context, region_from_json
from .repair import quality_gate_merge

logger = logging.getLogger("meshfill.service")

MAX_IN_FLIGHT = 2
_ALLOWED = {
    "queued": {"running"},
    "running": {"done", "rejected", "failed"},
    "done": set(),
    "rejected": set(),
    "failed": set(),
}


def default_workspace() -> Path:
    return Path(os.environ.get("MESHFIM_WORKSPACE", "meshfill-workspace"))


class MeshUpload(BaseModel):
    v: int = 1
    obj: str


class RegionRequest(BaseModel):
    v: int = 1
    mesh: str
    strokes: list[list[int]] | None = None
    faces: list[int] | None = None
    context_width: int = 3


class RepairRequest(BaseModel):
    v: int = 1
    mesh: str
    region: dict
    generator: str = "oracle"
    seed: int = 0


@dataclass
class _Workspace:
    root: Path

    def __post_init__(self):
        (self.root / "meshes").mkdir(parents=True, exist_ok=True)
        (self.root / "jobs").mkdir(parents=True, exist_ok=True)

    def mesh_path(self, h: str) -> Path:
        return self.root / "meshes" / f"{h}.obj"

    def job_dir(self, job_id: str) -> Path:
        return self.root / "jobs" / job_id


class JobStore:
    """On-disk job records with atomic, monotone status transitions."""

    def __init__(self, ws: _Workspace):
        self.ws = ws
        self._lock = threading.Lock()

    def create(self, request: dict) -> str:
        job_id = uuid.uuid4().hex[:12]
        d = self.ws.job_dir(job_id)
        d.mkdir(parents=True)
        self._write(job_id, {"v": 1, "id": job_id, "status": "queued", "request": request})
        return job_id

    def _write(self, job_id: str, record: dict) -> None:
        path = self.ws.job_dir(job_id) / "record.json"
        tmp = path.with_suffix(".tmp")
        tmp.write_text(json.dumps(record, indent=2), encoding="utf-8")
        tmp.replace(path)

    def read(self, job_id: str) -> dict | None:
        path = self.ws.job_dir(job_id) / "record.json"
        if not path.exists():
            return None
        return json.loads(path.read_text(encoding="utf-8"))

    def transition(self, job_id: str, status: str, **extra) -> dict:
        with self._lock:
            record = self.read(job_id)
            if record is None:
                raise KeyError(job_id)
            if status not in _ALLOWED[record["status"]]:
                raise MeshError(
                    f"illegal status transition {record['status']} -> {status}"
                )
            record["status"] = status
            record.update(extra)
            self._write(job_id, record)
            return record


def _mesh_summary(mesh: Mesh) -> dict:
    graph = face_adjacency(mesh)
    comps = (
        connected_components(graph, range(mesh.num_faces)) if mesh.num_faces else []
    )
    return {
        "vertices": mesh.num_vertices,
        "faces": mesh.num_faces,
        "edges": len(edge_face_map(mesh)),
        "components": len(comps),
    }


def _region_payload(mesh: Mesh, region: RegionSpec, warnings: list[str]) -> dict:
    return {
        "v": 1,
        "region": region.to_json(),
        "context_faces": list(region.context_faces),
        "boundary_vertices": list(region.boundary),
        "warnings": warnings,
    }


def create_app(workspace=None) -> FastAPI:
    ws = _Workspace(Path(workspace) if workspace else default_workspace())
    store = JobStore(ws)
    pool = ThreadPoolExecutor(max_workers=MAX_IN_FLIGHT)
    app = FastAPI(title="meshfill", version="1")

    def _load(h: str) -> Mesh:
        path = ws.mesh_path(h)
        if not path.exists():
            raise HTTPException(404, f"unknown mesh {h}")
        return loads_obj(path.read_text(encoding="utf-8"))

    @app.post("/mesh")
    def upload_mesh(body: MeshUpload):
        try:
            mesh = loads_obj(body.obj)
        except MeshError as exc:
            raise HTTPException(422, str(exc))
        h = mesh_hash(mesh)
        ws.mesh_path(h).write_text(dumps_obj(mesh), encoding="utf-8")
        return {"v": 1, "hash": h, "summary": _mesh_summary(mesh)}

    @app.get("/mesh/{h}")
    def get_mesh(h: str):
        mesh = _load(h)
        return {"v": 1, "hash": h, "obj": dumps_obj(mesh), "summary": _mesh_summary(mesh)}

    @app.post("/region")
    def post_region(body: RegionRequest):
        mesh = _load(body.mesh)
        graph = face_adjacency(mesh)
        warnings: list[str] = []
        if body.strokes is not None:
            selection: set[int] = set()
            for i, stroke in enumerate(body.strokes):
                for f in stroke:
                    if f < 0 or f >= mesh.num_faces:
                        raise HTTPException(422, f"stroke face {f} out of range")
                selection, accepted = commit_stroke(graph, selection, stroke)
                if not accepted:
                    warnings.append(f"stroke {i} is not adjacent to the selection; excluded")
            if not selection:
                raise HTTPException(422, "empty selection")
            region = extract_context(mesh, selection, body.context_width, graph=graph)
            return _region_payload(mesh, region, warnings)
        if body.faces is None:
            raise HTTPException(422, "provide strokes or faces")
        faces = set(body.faces)
        if not faces:
            raise HTTPException(422, "empty selection")
        for f in faces:
            if f < 0 or f >= mesh.num_faces:
                raise HTTPException(422, f"face {f} out of range")
        comps = connected_components(graph, faces)
        if len(comps) > 1:
            raise HTTPException(
                422,
                {
                    "error": "disconnected region",
                    "components": [sorted(c) for c in comps],
                },
            )
        region = extract_context(mesh, faces, body.context_width, graph=graph)
        return _region_payload(mesh, region, warnings)

    def _run_job(job_id: str) -> None:
        record = store.read(job_id)
        req = record["request"]
        try:
            store.transition(job_id, "running")
            mesh = _load(req["mesh"])
            region = region_from_json(mesh, req["region"])
            g_req = build_request(mesh, region, seed=req["seed"], with_samples=False)
            generator = make_generator(req["generator"])
            patch = generator(g_req)
            merged, verdict, weld = quality_gate_merge(
                mesh, region, patch, seed=req["seed"]
            )
            d = ws.job_dir(job_id)
            (d / "patch.obj").write_text(dumps_obj(patch.as_mesh()), encoding="utf-8")
            verdict_json = {
                "overflow_ratio": verdict.overflow_ratio,
                "accepted": verdict.accepted,
                "theta_ovf": verdict.theta_ovf,
                "reason": verdict.reason,
            }
            if merged is None:
                store.transition(job_id, "rejected", verdict=verdict_json)
                return
            (d / "result.obj").write_text(dumps_obj(merged), encoding="utf-8")
            ev = evaluate_sample(mesh, region, patch, seed=req["seed"],
                                 n_gt=20_000, n_patch=5_000)
            metrics = aggregate([ev]).to_json()
            (d / "metrics.json").write_text(json.dumps(metrics, indent=2), encoding="utf-8")
            store.transition(
                job_id, "done",
                verdict=verdict_json,
                welded=len(weld),
                artifacts={"patch": "patch.obj", "result": "result.obj",
                           "metrics": "metrics.json"},
            )
        except Exception as exc:  # noqa: BLE001 - job failures become records
            logger.exception("job %s failed", job_id)
            try:
                store.transition(job_id, "failed", error=str(exc))
            except MeshError:
                pass

    @app.post("/repair")
    def post_repair(body: RepairRequest):
        _load(body.mesh)  # 404 on unknown hash before enqueueing
        job_id = store.create(
            {"mesh": body.mesh, "region": body.region,
             "generator": body.generator, "seed": body.seed}
        )
        pool.submit(_run_job, job_id)
        return {"v": 1, "job": job_id}

    @app.get("/job/{job_id}")
    def get_job(job_id: str):
        record = store.read(job_id)
        if record is None:
            raise HTTPException(404, f"unknown job {job_id}")
        out = {"v": 1, **record}
        d = ws.job_dir(job_id)
        if record["status"] in ("done", "rejected"):
            patch = d / "patch.obj"
            if patch.exists():
                out["patch_obj"] = patch.read_text(encoding="utf-8")
        if record["status"] == "done":
            out["result_obj"] = (d / "result.obj").read_text(encoding="utf-8")
            out["metrics"] = json.loads((d / "metrics.json").read_text(encoding="utf-8"))
        return out

    @app.get("/gate/{job_id}")
    def get_gate(job_id: str):
        record = store.read(job_id)
        if record is None:
            raise HTTPException(404, f"unknown job {job_id}")
        d = ws.job_dir(job_id)
        cache = d / "gate.json"
        if cache.exists():
            return json.loads(cache.read_text(encoding="utf-8"))
        from .gate import encode_reference_features, gate as gate_fn, init_gate_params, sample_queries
        from .mesh import normalize_unit_sphere
        from .sampling import sample_points

        req = record["request"]
        mesh = _load(req["mesh"])
        mesh, _t = normalize_unit_sphere(mesh)
        region = region_from_json(mesh, req["region"])
        seed = req.get("seed", 0)
        residual = [f for f in range(mesh.num_faces) if f not in set(region.target_faces)]
        p_gt = sample_points(mesh, 20_000, seed=seed)
        p_lp = sample_points(mesh.submesh(residual), 20_000, seed=seed + 1)
        queries = sample_queries(256, seed=seed)
        z_gt = encode_reference_features(p_gt, queries)
        z_lp = encode_reference_features(p_lp, queries, provenance="lp")
        g = gate_fn(z_gt, z_lp, init_gate_params(seed=seed))
        payload = {"v": 1, "queries": queries.positions.tolist(), "g": g.tolist(),
                   "mean_g": float(g.mean())}
        cache.write_text(json.dumps(payload), encoding="utf-8")
        return payload

    return app
