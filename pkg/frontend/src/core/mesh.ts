/**
 * Client-side tri/quad mesh with the same adjacency semantics as the
 * service: faces are adjacent iff they share an undirected edge, BFS rings
 * grow over that graph, and component ties break toward the smallest
 * contained face id. Keeping these rules identical is what lets the live
 * brush preview agree exactly with the server's canonical region.
 */

export type Vec3 = [number, number, number];
export type Face = number[]; // 3 or 4 vertex indices

export interface Mesh {
  vertices: Vec3[];
  faces: Face[];
}

export function parseObj(text: string): Mesh {
  const vertices: Vec3[] = [];
  const faces: Face[] = [];
  const lines = text.split("\n");
  for (let lineno = 0; lineno < lines.length; lineno++) {
    const line = lines[lineno].trim();
    if (!line || line.startsWith("#")) continue;
    const parts = line.split(/\s+/);
    if (parts[0] === "v") {
      if (parts.length < 4) throw new Error(`line ${lineno + 1}: bad vertex`);
      vertices.push([Number(parts[1]), Number(parts[2]), Number(parts[3])]);
    } else if (parts[0] === "f") {
      const idx = parts.slice(1).map((tok) => {
        const i = parseInt(tok.split("/")[0], 10);
        return i < 0 ? vertices.length + i : i - 1;
      });
      if (idx.length < 3 || idx.length > 4) {
        throw new Error(`line ${lineno + 1}: face arity ${idx.length} unsupported`);
      }
      faces.push(idx);
    }
  }
  return { vertices, faces };
}

export function dumpObj(mesh: Mesh): string {
  const out: string[] = [];
  for (const v of mesh.vertices) {
    out.push(`v ${fmt(v[0])} ${fmt(v[1])} ${fmt(v[2])}`);
  }
  for (const f of mesh.faces) {
    out.push("f " + f.map((i) => i + 1).join(" "));
  }
  return out.join("\n") + "\n";
}

function fmt(x: number): string {
  // mirror the service's 9-significant-digit float formatting
  const s = x.toPrecision(9);
  return String(Number(s));
}

export type Adjacency = number[][];

export function faceAdjacency(mesh: Mesh): Adjacency {
  const edgeOwners = new Map<string, number[]>();
  mesh.faces.forEach((face, fid) => {
    for (let i = 0; i < face.length; i++) {
      const a = face[i];
      const b = face[(i + 1) % face.length];
      const key = a < b ? `${a}:${b}` : `${b}:${a}`;
      let owners = edgeOwners.get(key);
      if (!owners) edgeOwners.set(key, (owners = []));
      owners.push(fid);
    }
  });
  const neighbors: Adjacency = mesh.faces.map(() => []);
  for (const owners of edgeOwners.values()) {
    for (let i = 0; i < owners.length; i++) {
      for (let j = i + 1; j < owners.length; j++) {
        if (!neighbors[owners[i]].includes(owners[j])) neighbors[owners[i]].push(owners[j]);
        if (!neighbors[owners[j]].includes(owners[i])) neighbors[owners[j]].push(owners[i]);
      }
    }
  }
  for (const lst of neighbors) lst.sort((a, b) => a - b);
  return neighbors;
}

export function bfsRings(
  adj: Adjacency,
  seed: Iterable<number>,
  w: number,
  includeSeed = true,
): Set<number> {
  const seen = new Set<number>(seed);
  const out = new Set<number>(includeSeed ? seen : []);
  let frontier = [...seen].sort((a, b) => a - b);
  for (let ring = 1; ring <= w && frontier.length; ring++) {
    const next = new Set<number>();
    for (const f of frontier) {
      for (const g of adj[f]) {
        if (!seen.has(g)) next.add(g);
      }
    }
    frontier = [...next].sort((a, b) => a - b);
    for (const f of frontier) {
      seen.add(f);
      out.add(f);
    }
  }
  return out;
}

export function connectedComponents(adj: Adjacency, faces: Iterable<number>): number[][] {
  const remaining = new Set<number>(faces);
  const comps: number[][] = [];
  while (remaining.size) {
    const start = Math.min(...remaining);
    const comp: number[] = [];
    const queue = [start];
    remaining.delete(start);
    while (queue.length) {
      const f = queue.shift()!;
      comp.push(f);
      for (const g of adj[f]) {
        if (remaining.has(g)) {
          remaining.delete(g);
          queue.push(g);
        }
      }
    }
    comp.sort((a, b) => a - b);
    comps.push(comp);
  }
  comps.sort((a, b) => b.length - a.length || a[0] - b[0]);
  return comps;
}

export function largestComponent(adj: Adjacency, faces: Iterable<number>): Set<number> {
  const all = [...faces];
  if (!all.length) return new Set();
  return new Set(connectedComponents(adj, all)[0]);
}

export function boundaryVertices(mesh: Mesh, target: Set<number>): Set<number> {
  const inTarget = new Set<number>();
  const inRest = new Set<number>();
  mesh.faces.forEach((face, fid) => {
    const bucket = target.has(fid) ? inTarget : inRest;
    for (const v of face) bucket.add(v);
  });
  return new Set([...inTarget].filter((v) => inRest.has(v)));
}

export function faceCentroid(mesh: Mesh, fid: number): Vec3 {
  const face = mesh.faces[fid];
  const c: Vec3 = [0, 0, 0];
  for (const v of face) {
    c[0] += mesh.vertices[v][0];
    c[1] += mesh.vertices[v][1];
    c[2] += mesh.vertices[v][2];
  }
  return [c[0] / face.length, c[1] / face.length, c[2] / face.length];
}
