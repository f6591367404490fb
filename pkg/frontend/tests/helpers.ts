/** Procedural OBJ fixtures and a seeded PRNG for deterministic tests. */

import { Mesh, Vec3, dumpObj } from "../src/core/mesh.js";

export function quadGrid(nx: number, ny: number, size = 1.0): Mesh {
  const vertices: Vec3[] = [];
  for (let j = 0; j <= ny; j++) {
    for (let i = 0; i <= nx; i++) {
      vertices.push([(size * i) / nx, (size * j) / ny, 0]);
    }
  }
  const faces: number[][] = [];
  for (let j = 0; j < ny; j++) {
    for (let i = 0; i < nx; i++) {
      const a = j * (nx + 1) + i;
      faces.push([a, a + 1, a + nx + 2, a + nx + 1]);
    }
  }
  return { vertices, faces };
}

export function uvSphere(nLat: number, nLon: number): Mesh {
  const vertices: Vec3[] = [[0, 0, 1]];
  for (let j = 1; j < nLat; j++) {
    const phi = (Math.PI * j) / nLat;
    for (let i = 0; i < nLon; i++) {
      const th = (2 * Math.PI * i) / nLon;
      vertices.push([Math.sin(phi) * Math.cos(th), Math.sin(phi) * Math.sin(th), Math.cos(phi)]);
    }
  }
  vertices.push([0, 0, -1]);
  const south = vertices.length - 1;
  const ring = (j: number) => 1 + (j - 1) * nLon;
  const faces: number[][] = [];
  for (let i = 0; i < nLon; i++) {
    faces.push([0, ring(1) + i, ring(1) + ((i + 1) % nLon)]);
  }
  for (let j = 1; j < nLat - 1; j++) {
    for (let i = 0; i < nLon; i++) {
      faces.push([
        ring(j) + i,
        ring(j) + ((i + 1) % nLon),
        ring(j + 1) + ((i + 1) % nLon),
        ring(j + 1) + i,
      ]);
    }
  }
  for (let i = 0; i < nLon; i++) {
    faces.push([south, ring(nLat - 1) + ((i + 1) % nLon), ring(nLat - 1) + i]);
  }
  return { vertices, faces };
}

export function objOf(mesh: Mesh): string {
  return dumpObj(mesh);
}

/** mulberry32: small deterministic PRNG for scripted stroke sequences. */
export function rng(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a |= 0;
    a = (a + 0x6d2b79f5) | 0;
    let t = Math.imul(a ^ (a >>> 15), 1 | a);
    t = (t + Math.imul(t ^ (t >>> 7), 61 | t)) ^ t;
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

export function randInt(r: () => number, lo: number, hi: number): number {
  return lo + Math.floor(r() * (hi - lo));
}
