/**
 * Conformance against the live repair service: client-side stroke commit
 * and context preview must agree exactly with the server's validator, and
 * the full paint -> submit -> poll -> swap-in loop must complete with the
 * oracle generator. The service is spawned as a child process.
 */

import { ChildProcess, spawn } from "node:child_process";
import { mkdtempSync, rmSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { RepairClient, ServiceError } from "../src/api/client.js";
import { faceAdjacency, parseObj } from "../src/core/mesh.js";
import { foldStrokes, previewContext } from "../src/core/selection.js";
import { objOf, quadGrid, randInt, rng, uvSphere } from "./helpers.js";

const PORT = 8750 + (process.pid % 180);
const BASE = `http://127.0.0.1:${PORT}`;

let service: ChildProcess;
let workspace: string;
const client = new RepairClient(BASE);

async function waitForService(timeoutMs = 30_000): Promise<void> {
  const t0 = Date.now();
  for (;;) {
    try {
      await fetch(`${BASE}/mesh/ping`);
      return; // any HTTP answer (404 included) means the server is up
    } catch {
      if (Date.now() - t0 > timeoutMs) throw new Error("service did not start");
      await new Promise((r) => setTimeout(r, 250));
    }
  }
}

beforeAll(async () => {
  workspace = mkdtempSync(join(tmpdir(), "meshfill-ui-"));
  service = spawn(
    "python3",
    ["-m", "meshfill.cli", "serve", "--port", String(PORT), "--workspace", workspace],
    { stdio: ["ignore", "pipe", "pipe"] },
  );
  service.stderr?.on("data", () => undefined); // uvicorn logs
  await waitForService();
});

afterAll(() => {
  service?.kill("SIGTERM");
  rmSync(workspace, { recursive: true, force: true });
});

describe("stroke-commit conformance", () => {
  it("matches the service on 20 scripted stroke sequences", async () => {
    const meshes = [quadGrid(6, 6), uvSphere(10, 12)];
    const hashes: string[] = [];
    const adjs = meshes.map((m) => faceAdjacency(m));
    for (const m of meshes) hashes.push((await client.uploadMesh(objOf(m))).hash);

    const r = rng(1234);
    for (let seq = 0; seq < 20; seq++) {
      const mi = seq % meshes.length;
      const mesh = meshes[mi];
      const nStrokes = randInt(r, 1, 5);
      const strokes: number[][] = [];
      for (let s = 0; s < nStrokes; s++) {
        const size = randInt(r, 1, 7);
        const stroke = new Set<number>();
        while (stroke.size < size) stroke.add(randInt(r, 0, mesh.faces.length));
        strokes.push([...stroke].sort((a, b) => a - b));
      }
      const local = foldStrokes(adjs[mi], strokes);
      const remote = await client.postRegionStrokes(hashes[mi], strokes, 2);
      expect(remote.region.target_faces).toEqual(
        [...local.selection].sort((a, b) => a - b),
      );
      expect(remote.warnings.length).toBe(local.orphans.length);
    }
  });

  it("rejects a disconnected explicit face set with the component listing", async () => {
    const g = quadGrid(4, 4);
    const hash = (await client.uploadMesh(objOf(g))).hash;
    await expect(client.postRegionFaces(hash, [0, 15], 1)).rejects.toMatchObject({
      status: 422,
    });
    try {
      await client.postRegionFaces(hash, [0, 15], 1);
    } catch (err) {
      const detail = (err as ServiceError).detail as { components: number[][] };
      expect(detail.components).toEqual([[0], [15]]);
    }
  });
});

describe("context preview conformance", () => {
  it("equals the server's context extraction for w in {1,2,3}", async () => {
    const m = uvSphere(12, 14);
    const adj = faceAdjacency(m);
    const hash = (await client.uploadMesh(objOf(m))).hash;
    const r = rng(77);
    for (const w of [1, 2, 3]) {
      const seed = randInt(r, 0, m.faces.length);
      const stroke = [seed, ...adj[seed]];
      const local = foldStrokes(adj, [stroke]);
      const preview = previewContext(adj, local.selection, w);
      const remote = await client.postRegionStrokes(hash, [stroke], w);
      expect(remote.context_faces).toEqual([...preview].sort((a, b) => a - b));
    }
  });
});

describe("full repair round trip", () => {
  it("paints, submits, polls, and swaps the oracle patch in", async () => {
    const m = uvSphere(12, 16);
    const adj = faceAdjacency(m);
    const obj = objOf(m);
    const hash = (await client.uploadMesh(obj)).hash;

    // paint: two adjacent strokes around a seed face
    const seed = 70;
    const strokes = [[seed, ...adj[seed]], [adj[seed][0], ...adj[adj[seed][0]]]];
    const local = foldStrokes(adj, strokes);
    expect(local.orphans).toEqual([]);

    const region = await client.postRegionStrokes(hash, strokes, 3);
    expect(region.region.target_faces).toEqual(
      [...local.selection].sort((a, b) => a - b),
    );

    const { job } = await client.postRepair(hash, region.region, "oracle", 5);
    const record = await client.pollJob(job);
    expect(record.status).toBe("done");
    expect(record.verdict?.accepted).toBe(true);
    expect((record.metrics as { "A-VMR": number })["A-VMR"]).toBe(1.0);

    // swap in: the merged mesh replaces the working mesh; the patch is the
    // appended face block at the end
    const merged = parseObj(record.result_obj!);
    const patch = parseObj(record.patch_obj!);
    expect(merged.faces.length).toBe(m.faces.length);
    expect(patch.faces.length).toBe(region.region.target_faces.length);
    const tail = merged.faces.slice(merged.faces.length - patch.faces.length);
    expect(tail.map((f) => f.length).sort()).toEqual(
      patch.faces.map((f) => f.length).sort(),
    );

    // gate heatmap is served for the finished job
    const gate = await client.getGate(job);
    expect(gate.g.length).toBe(gate.queries.length);
    expect(gate.mean_g).toBeGreaterThan(0.01);
    expect(gate.mean_g).toBeLessThan(0.03);
  });
});
