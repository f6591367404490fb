#!/usr/bin/env python3
"""Benchmark the compiled kernels against the numpy fallback.

Covers the three hot paths of the detection pipeline: G-buffer
rasterization, first-hit ray casting, and nearest-triangle queries.

    python3 benchmarks/bench_kernels.py [--res 320] [--repeat 3]
"""

import argparse
import time

import numpy as np

from meshfill.kernels import build_bvh, get_impl
from meshfill.mesh import face_normals, normalize_unit_sphere, triangulated
from meshfill.raster import camera_for_direction
from meshfill.synth import icosphere


def _setup(res):
    mesh, _ = normalize_unit_sphere(icosphere(3))  # 1280 triangles
    tris, src = triangulated(mesh)
    tv = np.ascontiguousarray(mesh.vertices[tris])
    bvh = build_bvh(tv)
    cam = camera_for_direction(np.array([0.3, 0.5, 0.8]), res)
    rel = mesh.vertices - cam.center
    cam_v = np.stack([rel @ cam.right, rel @ cam.up, rel @ cam.direction], axis=1)
    xyd = np.ascontiguousarray(cam_v[tris])
    tn = np.cross(tv[:, 1] - tv[:, 0], tv[:, 2] - tv[:, 0])
    tn /= np.linalg.norm(tn, axis=1)[:, None]
    tie = np.ascontiguousarray(tn @ cam.direction)
    rng = np.random.default_rng(0)
    origins = cam.ray_origins(
        rng.integers(0, res, size=4000), rng.integers(0, res, size=4000)
    )
    points = rng.normal(size=(20_000, 3)) * 0.8
    return dict(xyd=xyd, tie=tie, bvh=bvh, cam=cam, origins=origins,
                points=points, res=res)


def _time(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--res", type=int, default=320)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    env = _setup(args.res)

    backends = {}
    for name in ("numpy", "compiled"):
        try:
            backends[name] = get_impl(name)
        except Exception as exc:
            print(f"{name} backend unavailable: {exc}")
    cases = {
        f"rasterize {args.res}^2 x 1280 tris": lambda im: im.rasterize_tris(
            env["xyd"], env["tie"], env["res"], env["cam"].half_width
        ),
        "raycast 4000 rays": lambda im: im.raycast_first_hit(
            env["origins"], env["cam"].direction, env["bvh"]
        ),
        "closest_tri 20k points": lambda im: im.closest_tri(env["points"], env["bvh"]),
    }
    width = max(len(c) for c in cases)
    header = f"{'case':<{width}} " + " ".join(f"{n:>12}" for n in backends)
    if len(backends) == 2:
        header += f" {'speedup':>9}"
    print(header)
    for label, fn in cases.items():
        times = {n: _time(lambda im=im: fn(im), args.repeat) for n, im in backends.items()}
        row = f"{label:<{width}} " + " ".join(f"{times[n] * 1e3:>10.2f}ms" for n in backends)
        if len(times) == 2:
            row += f" {times['numpy'] / times['compiled']:>8.1f}x"
        print(row)


if __name__ == "__main__":
    main()
