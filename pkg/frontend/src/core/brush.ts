/**
 * Face picking math, independent of the render layer so it is unit
 * testable: ray/face intersection over tri+quad faces, a 2D mode that
 * BFS-expands from the hit face by a ring count, and a 3D mode that takes
 * every face whose centroid falls inside a world-space sphere. The
 * optional back-face test drops picks whose first hit faces away.
 */

import {
  Adjacency,
  Face,
  Mesh,
  Vec3,
  bfsRings,
  faceCentroid,
} from "./mesh.js";

export type BrushMode = "ring2d" | "sphere3d";

export interface BrushState {
  mode: BrushMode;
  rings: number; // ring2d expansion
  radius: number; // sphere3d world radius
  backfaceTest: boolean;
  contextWidth: number;
}

export interface Ray {
  origin: Vec3;
  dir: Vec3;
}

export interface Hit {
  face: number;
  t: number;
  point: Vec3;
  front: boolean;
}

const sub = (a: Vec3, b: Vec3): Vec3 => [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
const cross = (a: Vec3, b: Vec3): Vec3 => [
  a[1] * b[2] - a[2] * b[1],
  a[2] * b[0] - a[0] * b[2],
  a[0] * b[1] - a[1] * b[0],
];
const dot = (a: Vec3, b: Vec3): number => a[0] * b[0] + a[1] * b[1] + a[2] * b[2];

function rayTriangle(origin: Vec3, dir: Vec3, a: Vec3, b: Vec3, c: Vec3):
  { t: number; front: boolean } | null {
  const e1 = sub(b, a);
  const e2 = sub(c, a);
  const p = cross(dir, e2);
  const det = dot(e1, p);
  if (Math.abs(det) < 1e-14) return null;
  const inv = 1 / det;
  const tv = sub(origin, a);
  const u = dot(tv, p) * inv;
  if (u < -1e-12 || u > 1 + 1e-12) return null;
  const q = cross(tv, e1);
  const v = dot(dir, q) * inv;
  if (v < -1e-12 || u + v > 1 + 1e-12) return null;
  const t = dot(e2, q) * inv;
  if (t <= 1e-9) return null;
  return { t, front: det > 0 };
}

function* faceTriangles(face: Face): Generator<[number, number, number]> {
  yield [face[0], face[1], face[2]];
  if (face.length === 4) yield [face[0], face[2], face[3]];
}

/** All ray/face hits sorted by distance (front-facing first on exact ties). */
export function intersectMesh(mesh: Mesh, ray: Ray): Hit[] {
  const hits: Hit[] = [];
  mesh.faces.forEach((face, fid) => {
    let best: { t: number; front: boolean } | null = null;
    for (const [i, j, k] of faceTriangles(face)) {
      const h = rayTriangle(ray.origin, ray.dir,
        mesh.vertices[i], mesh.vertices[j], mesh.vertices[k]);
      if (h && (!best || h.t < best.t)) best = h;
    }
    if (best) {
      hits.push({
        face: fid,
        t: best.t,
        front: best.front,
        point: [
          ray.origin[0] + best.t * ray.dir[0],
          ray.origin[1] + best.t * ray.dir[1],
          ray.origin[2] + best.t * ray.dir[2],
        ],
      });
    }
  });
  hits.sort((a, b) => a.t - b.t || Number(b.front) - Number(a.front));
  return hits;
}

/** Faces selected by one brush application along the pointer ray. */
export function pickFaces(
  mesh: Mesh,
  adj: Adjacency,
  ray: Ray,
  brush: BrushState,
): Set<number> {
  const hits = intersectMesh(mesh, ray);
  if (!hits.length) return new Set();
  const first = hits[0];
  if (brush.backfaceTest && !first.front) return new Set();
  if (brush.mode === "ring2d") {
    return bfsRings(adj, [first.face], brush.rings, true);
  }
  const r2 = brush.radius * brush.radius;
  const picked = new Set<number>();
  for (let fid = 0; fid < mesh.faces.length; fid++) {
    const c = faceCentroid(mesh, fid);
    const d = sub(c, first.point);
    if (dot(d, d) <= r2) picked.add(fid);
  }
  return picked;
}
