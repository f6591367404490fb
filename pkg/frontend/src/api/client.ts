/** Typed client for the repair service HTTP API (all schemas carry v: 1). */

export interface MeshSummary {
  vertices: number;
  faces: number;
  edges: number;
  components: number;
}

export interface RegionJson {
  target_faces: number[];
  context_width: number;
  mode: string;
  seed?: number;
  p?: number;
}

export interface RegionResponse {
  v: number;
  region: RegionJson;
  context_faces: number[];
  boundary_vertices: number[];
  warnings: string[];
}

export interface JobRecord {
  v: number;
  id: string;
  status: "queued" | "running" | "done" | "rejected" | "failed";
  verdict?: { overflow_ratio: number; accepted: boolean; theta_ovf: number; reason: string };
  metrics?: Record<string, unknown>;
  patch_obj?: string;
  result_obj?: string;
  error?: string;
}

export interface GateData {
  v: number;
  queries: number[][];
  g: number[];
  mean_g: number;
}

export class ServiceError extends Error {
  constructor(public status: number, public detail: unknown) {
    super(`service error ${status}: ${JSON.stringify(detail)}`);
  }
}

export class RepairClient {
  constructor(private baseUrl: string) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const res = await fetch(this.baseUrl + path, {
      method,
      headers: body !== undefined ? { "content-type": "application/json" } : undefined,
      body: body !== undefined ? JSON.stringify(body) : undefined,
    });
    const payload = await res.json().catch(() => ({}));
    if (!res.ok) throw new ServiceError(res.status, (payload as { detail?: unknown }).detail);
    return payload as T;
  }

  uploadMesh(obj: string): Promise<{ v: number; hash: string; summary: MeshSummary }> {
    return this.request("POST", "/mesh", { v: 1, obj });
  }

  getMesh(hash: string): Promise<{ v: number; hash: string; obj: string; summary: MeshSummary }> {
    return this.request("GET", `/mesh/${hash}`);
  }

  postRegionStrokes(mesh: string, strokes: number[][], contextWidth: number): Promise<RegionResponse> {
    return this.request("POST", "/region", {
      v: 1, mesh, strokes, context_width: contextWidth,
    });
  }

  postRegionFaces(mesh: string, faces: number[], contextWidth: number): Promise<RegionResponse> {
    return this.request("POST", "/region", {
      v: 1, mesh, faces, context_width: contextWidth,
    });
  }

  postRepair(mesh: string, region: RegionJson, generator = "oracle", seed = 0):
    Promise<{ v: number; job: string }> {
    return this.request("POST", "/repair", { v: 1, mesh, region, generator, seed });
  }

  getJob(id: string): Promise<JobRecord> {
    return this.request("GET", `/job/${id}`);
  }

  getGate(id: string): Promise<GateData> {
    return this.request("GET", `/gate/${id}`);
  }

  /** Poll a job until it leaves the queue (done / rejected / failed). */
  async pollJob(id: string, intervalMs = 200, timeoutMs = 120_000): Promise<JobRecord> {
    const t0 = Date.now();
    for (;;) {
      const job = await this.getJob(id);
      if (job.status === "done" || job.status === "rejected" || job.status === "failed") {
        return job;
      }
      if (Date.now() - t0 > timeoutMs) throw new Error(`job ${id} timed out`);
      await new Promise((r) => setTimeout(r, intervalMs));
    }
  }
}
