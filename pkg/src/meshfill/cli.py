"""Command-line front end.

Subcommands: detect, sample-region, serialize, repair, eval, gate-vis,
serve. Every command that uses randomness accepts --seed. Exit codes:
0 success, 1 domain error, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .mesh import Mesh, MeshError, load_mesh, normalize_unit_sphere, save_mesh
from .sequence import SequenceError


def _write_json(path, payload) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


# ---------------------------------------------------------------------------
# detect


def cmd_detect(args) -> int:
    from .detect import detect_defects

    mesh = load_mesh(args.input)
    ref = load_mesh(args.ref)
    broken = detect_defects(
        mesh, ref, n_views=args.views, resolution=args.res,
        eps_dot=args.eps_dot, eps_cluster=args.eps_cls, min_cluster=args.min_cluster,
    )
    world = broken.points_world()
    clusters = []
    for members in broken.clusters:
        clusters.append({
            "size": int(len(members)),
            "points": world[members].tolist(),
            "provenance": [
                [int(broken.view[m]), int(broken.pixel[m][0]), int(broken.pixel[m][1])]
                for m in members
            ],
        })
    payload = {
        "v": 1,
        "confirmed_points": int(broken.num_confirmed),
        "clusters": clusters,
    }
    if broken.transform is not None:
        payload["normalization"] = {
            "center": broken.transform.center.tolist(),
            "scale": broken.transform.scale,
        }
    _write_json(args.out, payload)
    if args.dump_masks:
        _dump_candidate_masks(mesh, ref, args)
    print(f"{len(clusters)} cluster(s), {broken.num_confirmed} confirmed point(s) -> {args.out}")
    return 0


def _dump_candidate_masks(mesh, ref, args) -> None:
    from PIL import Image

    from .detect import backface_candidates, fibonacci_viewpoints
    from .mesh import normalize_pair
    from .raster import rasterize

    out_dir = Path(args.dump_masks)
    out_dir.mkdir(parents=True, exist_ok=True)
    mesh_n, _ref_n, _t = normalize_pair(mesh, ref)
    for vi, u in enumerate(fibonacci_viewpoints(args.views).directions):
        gb = rasterize(mesh_n, u, args.res)
        img = np.zeros((args.res, args.res), dtype=np.uint8)
        rows, cols = gb.covered()
        img[rows, cols] = 90
        rows, cols = backface_candidates(gb, args.eps_dot)
        img[rows, cols] = 255
        Image.fromarray(img[::-1]).save(out_dir / f"view_{vi:03d}.png")


# ---------------------------------------------------------------------------
# sample-region


def cmd_sample_region(args) -> int:
    from .regions import sample_bfs_region, sample_percolation_region, save_region

    mesh = load_mesh(args.mesh)
    if args.mode == "bfs":
        region = sample_bfs_region(mesh, args.seed_face, args.budget, w=args.w)
    else:
        region = sample_percolation_region(
            mesh, args.seed_face, p=args.p, budget=args.budget, seed=args.seed, w=args.w
        )
    save_region(region, args.out)
    print(f"{args.mode} region: |B|={len(region.target_faces)} "
          f"|ctx|={len(region.context_faces)} -> {args.out}")
    if args.dump_dir:
        out = Path(args.dump_dir)
        out.mkdir(parents=True, exist_ok=True)
        save_mesh(mesh, out / "gt.obj")
        save_mesh(mesh.submesh(region.target_faces), out / "target.obj")
        save_mesh(mesh.submesh(region.context_faces), out / "context.obj")
    return 0


# ---------------------------------------------------------------------------
# serialize


def cmd_serialize(args) -> int:
    from .regions import load_region
    from .sequence import write_jsonl
    from .tokenizer import QuantizationSpec, augment_context, serialize_fim

    mesh = load_mesh(args.mesh)
    spec = QuantizationSpec(bins=args.bins)
    if not args.no_fit:
        # scale into the quantization domain: unit-diameter sphere
        mesh, t = normalize_unit_sphere(mesh, radius=0.5 - 1e-9)
        print(f"fitted mesh into quantization domain "
              f"(center {t.center.tolist()}, scale {t.scale:.9g})", file=sys.stderr)
    region = load_region(mesh, args.region)
    if args.augment > 0:
        mesh = augment_context(mesh, region.context_faces, args.augment, seed=args.seed)
    seq = serialize_fim(mesh, region.context_faces, region.target_faces,
                        boundary=region.boundary, spec=spec)
    write_jsonl([seq], args.out)
    if args.binary:
        with open(args.binary, "wb") as fh:
            fh.write(seq.to_bytes())
    print(f"{len(seq)} tokens ({len(region.context_faces)} ctx / "
          f"{len(region.target_faces)} tgt faces) -> {args.out}")
    return 0


# ---------------------------------------------------------------------------
# repair


def cmd_repair(args) -> int:
    from .generators import make_generator
    from .repair import iterative_repair

    mesh = load_mesh(args.input)
    ref = load_mesh(args.ref)
    generator = make_generator(args.generator)
    result = iterative_repair(
        mesh, ref, generator, rounds=args.rounds, n_views=args.views,
        resolution=args.res, seed=args.seed,
    )
    save_mesh(result.mesh, args.out)
    _write_json(args.report, result.report())
    print(f"status={result.status} rounds={len(result.rounds)} -> {args.out}")
    return 0


# ---------------------------------------------------------------------------
# eval


def _face_keys(mesh: Mesh):
    from .generators import _face_geometry_key

    return [_face_geometry_key(f, mesh.vertices) for f in mesh.faces]


def _match_submesh_faces(gt: Mesh, sub: Mesh, label: str) -> list[int]:
    """Face ids of ``gt`` that geometrically equal the submesh's faces."""
    table: dict = {}
    for fid, key in enumerate(_face_keys(gt)):
        table.setdefault(key, fid)
    ids = []
    for key in _face_keys(sub):
        if key not in table:
            raise MeshError(f"{label} face not found in the ground-truth mesh")
        ids.append(table[key])
    if len(set(ids)) != len(ids):
        raise MeshError(f"{label} maps onto duplicate ground-truth faces")
    return sorted(ids)


def cmd_eval(args) -> int:
    from .generators import PatchResult
    from .metrics import aggregate, evaluate_sample
    from .regions import RegionSpec
    from .mesh import boundary_vertices

    with open(args.pairs, "r", encoding="utf-8") as fh:
        manifest = json.load(fh)
    evals = []
    for i, entry in enumerate(manifest["samples"]):
        gt = load_mesh(entry["gt"])
        tgt_ids = _match_submesh_faces(gt, load_mesh(entry["target"]), "target")
        ctx_ids = _match_submesh_faces(gt, load_mesh(entry["context"]), "context")
        patch_mesh = load_mesh(entry["patch"])
        region = RegionSpec(
            target_faces=tuple(tgt_ids),
            context_faces=tuple(ctx_ids),
            context_width=int(entry.get("context_width", 0)),
            boundary=tuple(boundary_vertices(gt, tgt_ids)),
        )
        patch = PatchResult(patch_mesh.vertices, list(patch_mesh.faces),
                            entry.get("generator", "file"))
        evals.append(evaluate_sample(gt, region, patch, seed=args.seed + i,
                                     n_gt=args.n_gt, n_patch=args.n_patch))
    report = aggregate(evals)
    _write_json(args.out, report.to_json())
    parts = [f"PMR={report.pmr:.2%}", f"A-VMR={report.a_vmr:.2%}",
             f"CD-PR={report.cd_pr:.2%}", f"OvR={report.ovr:.2%}"]
    print(f"{report.n_samples} sample(s): " + " ".join(parts) + f" -> {args.out}")
    for w in report.warnings:
        print(f"warning: {w}", file=sys.stderr)
    return 0


# ---------------------------------------------------------------------------
# gate-vis


def cmd_gate_vis(args) -> int:
    from .gate import encode_reference_features, gate, init_gate_params, sample_queries
    from .regions import load_region
    from .sampling import sample_points

    mesh = load_mesh(args.mesh)
    mesh, _t = normalize_unit_sphere(mesh)
    region = load_region(mesh, args.region)
    residual_ids = [f for f in range(mesh.num_faces)
                    if f not in set(region.target_faces)]
    p_gt = sample_points(mesh, args.n_points, seed=args.seed)
    p_lp = sample_points(mesh.submesh(residual_ids), args.n_points, seed=args.seed + 1)
    queries = sample_queries(args.queries, seed=args.seed)
    z_gt = encode_reference_features(p_gt, queries, d=args.dim, radius=args.radius)
    z_lp = encode_reference_features(p_lp, queries, d=args.dim, radius=args.radius,
                                     provenance="lp")
    params = init_gate_params(d=args.dim, seed=args.seed)
    g = gate(z_gt, z_lp, params)
    _write_json(args.out, {
        "v": 1,
        "queries": queries.positions.tolist(),
        "g": g.tolist(),
        "mean_g": float(g.mean()),
    })
    print(f"{len(g)} gate values (mean {g.mean():.4f}) -> {args.out}")
    return 0


# ---------------------------------------------------------------------------
# serve


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(args.workspace)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="meshfill",
                                 description="Local low-poly mesh editing workbench")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("detect", help="find broken regions against a reference mesh")
    p.add_argument("--input", required=True)
    p.add_argument("--ref", required=True)
    p.add_argument("--views", type=int, default=48)
    p.add_argument("--res", type=int, default=640)
    p.add_argument("--eps-dot", type=float, default=1e-4)
    p.add_argument("--eps-cls", type=float, default=0.05)
    p.add_argument("--min-cluster", type=int, default=10)
    p.add_argument("--out", required=True)
    p.add_argument("--dump-masks", default=None, help="directory for per-view PNG masks")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("sample-region", help="sample a target region on a mesh")
    p.add_argument("--mesh", required=True)
    p.add_argument("--mode", choices=["bfs", "percolation"], default="bfs")
    p.add_argument("--seed-face", type=int, required=True)
    p.add_argument("--budget", type=int, default=1200)
    p.add_argument("--p", type=float, default=0.7)
    p.add_argument("--w", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--dump-dir", default=None,
                   help="also write gt/target/context OBJ files for eval manifests")
    p.set_defaults(func=cmd_sample_region)

    p = sub.add_parser("serialize", help="serialize a region to a FIM token sequence")
    p.add_argument("--mesh", required=True)
    p.add_argument("--region", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--binary", default=None, help="also write the compact binary form")
    p.add_argument("--bins", type=int, default=256)
    p.add_argument("--augment", type=float, default=0.0,
                   help="context perturbation amplitude (training-style augmentation)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-fit", action="store_true",
                   help="skip fitting the mesh into the quantization domain")
    p.set_defaults(func=cmd_serialize)

    p = sub.add_parser("repair", help="iteratively detect and repair defects")
    p.add_argument("--input", required=True)
    p.add_argument("--ref", required=True)
    p.add_argument("--generator", default="oracle",
                   help="oracle | triangulate | stitch-back:<mesh.obj> | external:<command>")
    p.add_argument("--rounds", type=int, default=4)
    p.add_argument("--views", type=int, default=48)
    p.add_argument("--res", type=int, default=320)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--report", required=True)
    p.set_defaults(func=cmd_repair)

    p = sub.add_parser("eval", help="evaluate generated patches against ground truth")
    p.add_argument("--pairs", required=True,
                   help="manifest JSON listing gt/context/target/patch file quadruples")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-gt", type=int, default=100_000)
    p.add_argument("--n-patch", type=int, default=20_000)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("gate-vis", help="dump gate-vector heatmap data for a region")
    p.add_argument("--mesh", required=True)
    p.add_argument("--region", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--queries", type=int, default=256)
    p.add_argument("--dim", type=int, default=32)
    p.add_argument("--radius", type=float, default=0.25)
    p.add_argument("--n-points", type=int, default=20_000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_gate_vis)

    p = sub.add_parser("serve", help="run the local HTTP service")
    p.add_argument("--port", type=int, default=8008)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--workspace", default=None,
                   help="artifact directory (default: $MESHFIM_WORKSPACE or ./meshfill-workspace)")
    p.set_defaults(func=cmd_serve)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except (MeshError, SequenceError, ValueError, FileNotFoundError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
