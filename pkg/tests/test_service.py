import json
import time

import numpy as np
import pytest
from fastapi.testclient import TestClient

from meshfill.mesh import dumps_obj, loads_obj
from meshfill.service import create_app
from meshfill.synth import quad_grid, uv_sphere


@pytest.fixture()
def client(tmp_path):
    app = create_app(tmp_path / "ws")
    with TestClient(app) as c:
        yield c


def _upload(client, mesh):
    r = client.post("/mesh", json={"v": 1, "obj": dumps_obj(mesh)})
    assert r.status_code == 200
    return r.json()["hash"]


def _wait_job(client, job_id, timeout=60.0):
    t0 = time.time()
    while time.time() - t0 < timeout:
        r = client.get(f"/job/{job_id}")
        assert r.status_code == 200
        body = r.json()
        if body["status"] in ("done", "rejected", "failed"):
            return body
        time.sleep(0.1)
    raise TimeoutError("job did not finish")


def test_mesh_upload_and_fetch(client):
    m = uv_sphere(8, 10)
    h = _upload(client, m)
    r = client.get(f"/mesh/{h}")
    assert r.status_code == 200
    body = r.json()
    assert body["v"] == 1
    assert body["summary"]["faces"] == m.num_faces
    back = loads_obj(body["obj"])
    assert back.num_faces == m.num_faces
    assert client.get("/mesh/deadbeef").status_code == 404


def test_region_strokes_merge_and_orphan(client):
    g = quad_grid(4, 4)
    h = _upload(client, g)
    # two adjacent strokes merge; a distant one is an orphan
    r = client.post("/region", json={
        "v": 1, "mesh": h, "strokes": [[5], [6], [15]], "context_width": 1,
    })
    assert r.status_code == 200
    body = r.json()
    assert body["region"]["target_faces"] == [5, 6]
    assert len(body["warnings"]) == 1
    # stroke with two components: reduced to the largest
    r = client.post("/region", json={
        "v": 1, "mesh": h, "strokes": [[0, 1, 15]], "context_width": 1,
    })
    assert r.status_code == 200
    assert r.json()["region"]["target_faces"] == [0, 1]


def test_region_faces_disconnected_422(client):
    g = quad_grid(4, 4)
    h = _upload(client, g)
    r = client.post("/region", json={"v": 1, "mesh": h, "faces": [0, 15]})
    assert r.status_code == 422
    detail = r.json()["detail"]
    assert detail["error"] == "disconnected region"
    assert [0] in detail["components"] and [15] in detail["components"]
    ok = client.post("/region", json={"v": 1, "mesh": h, "faces": [0, 1]})
    assert ok.status_code == 200


def test_region_matches_library_extract(client):
    from meshfill.regions import extract_context

    m = uv_sphere(10, 12)
    h = _upload(client, m)
    r = client.post("/region", json={"v": 1, "mesh": h, "faces": [30, 31], "context_width": 2})
    body = r.json()
    lib = extract_context(m, [30, 31], 2)
    assert tuple(body["region"]["target_faces"]) == lib.target_faces
    assert tuple(body["context_faces"]) == lib.context_faces
    assert tuple(body["boundary_vertices"]) == lib.boundary


def test_repair_job_oracle_end_to_end(client):
    m = uv_sphere(12, 16)
    h = _upload(client, m)
    region = client.post("/region", json={
        "v": 1, "mesh": h, "strokes": [[70, 71]], "context_width": 2,
    }).json()["region"]
    r = client.post("/repair", json={
        "v": 1, "mesh": h, "region": region, "generator": "oracle", "seed": 1,
    })
    assert r.status_code == 200
    job = r.json()["job"]
    body = _wait_job(client, job)
    assert body["status"] == "done"
    assert body["verdict"]["accepted"] is True
    assert body["metrics"]["A-VMR"] == 1.0
    assert body["metrics"]["PMR"] == 1.0
    merged = loads_obj(body["result_obj"])
    assert merged.num_faces == m.num_faces
    # gate heatmap data for the finished job
    g = client.get(f"/gate/{job}")
    assert g.status_code == 200
    gbody = g.json()
    assert len(gbody["g"]) == 256
    assert 0.01 < gbody["mean_g"] < 0.03


def test_repair_unknown_mesh_404_and_unknown_job_404(client):
    r = client.post("/repair", json={"v": 1, "mesh": "nope", "region": {"target_faces": [0]}})
    assert r.status_code == 404
    assert client.get("/job/nonexistent").status_code == 404
    assert client.get("/gate/nonexistent").status_code == 404


def test_service_equals_cli_pipeline(client, tmp_path):
    """Golden equivalence: the service's repair job produces the same patch
    and merged mesh as the library calls the CLI path uses."""
    from meshfill.generators import OracleGenerator, build_request
    from meshfill.regions import region_from_json
    from meshfill.repair import quality_gate_merge

    m = uv_sphere(10, 14)
    h = _upload(client, m)
    region_json = client.post("/region", json={
        "v": 1, "mesh": h, "faces": [40, 41], "context_width": 3,
    }).json()["region"]
    job = client.post("/repair", json={
        "v": 1, "mesh": h, "region": region_json, "generator": "oracle", "seed": 7,
    }).json()["job"]
    body = _wait_job(client, job)
    assert body["status"] == "done"

    region = region_from_json(m, region_json)
    req = build_request(m, region, seed=7, with_samples=False)
    patch = OracleGenerator()(req)
    merged, verdict, _ = quality_gate_merge(m, region, patch, seed=7)
    assert body["patch_obj"] == dumps_obj(patch.as_mesh())
    assert body["result_obj"] == dumps_obj(merged)
    assert np.isclose(body["verdict"]["overflow_ratio"], verdict.overflow_ratio)
