/**
 * Brush selection semantics, kept bit-compatible with the service:
 * each committed stroke collapses to its largest connected component,
 * later strokes merge only when adjacent to the current selection
 * (orphans are excluded), and the context preview is the BFS ring
 * expansion minus the selection itself.
 */

import { Adjacency, bfsRings, connectedComponents, largestComponent } from "./mesh.js";

export interface CommitResult {
  selection: Set<number>;
  accepted: boolean;
}

export function commitStroke(
  adj: Adjacency,
  existing: Set<number>,
  stroke: Iterable<number>,
): CommitResult {
  const strokeSet = new Set(stroke);
  if (!strokeSet.size) return { selection: new Set(existing), accepted: false };
  const core = largestComponent(adj, strokeSet);
  if (!existing.size) return { selection: core, accepted: true };
  const union = new Set([...existing, ...core]);
  if (connectedComponents(adj, union).length === 1) {
    return { selection: union, accepted: true };
  }
  return { selection: new Set(existing), accepted: false };
}

export function foldStrokes(adj: Adjacency, strokes: number[][]): {
  selection: Set<number>;
  orphans: number[];
} {
  let selection = new Set<number>();
  const orphans: number[] = [];
  strokes.forEach((stroke, i) => {
    const res = commitStroke(adj, selection, stroke);
    selection = res.selection;
    if (!res.accepted) orphans.push(i);
  });
  return { selection, orphans };
}

export function previewContext(
  adj: Adjacency,
  selection: Set<number>,
  w: number,
): Set<number> {
  if (!selection.size || w <= 0) return new Set();
  const rings = bfsRings(adj, selection, w, false);
  return new Set([...rings].filter((f) => !selection.has(f)));
}
