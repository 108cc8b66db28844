// Thin typed client for the wheelgen HTTP service; all UI traffic goes
// through here.

import type {
  FeedbackJson,
  JobJson,
  LineageEntry,
  RecordJson,
  RequestJson,
  Workspace,
} from "./types";
import { sketchToPng } from "./png";

export class ApiError extends Error {
  constructor(
    public status: number,
    public detail: unknown,
  ) {
    super(`HTTP ${status}: ${JSON.stringify(detail)}`);
  }
}

async function asJson<T>(res: Response): Promise<T> {
  const body = await res.json().catch(() => null);
  if (!res.ok) throw new ApiError(res.status, body?.detail ?? body);
  return body as T;
}

export class WheelgenClient {
  constructor(public baseUrl = "") {}

  private url(path: string): string {
    return this.baseUrl + path;
  }

  imageUrl(refOrPath: string): string {
    return this.url(refOrPath.startsWith("/") ? refOrPath : `/images/${refOrPath}`);
  }

  async health(): Promise<{ ok: boolean; backends: string[]; canvas: number }> {
    return asJson(await fetch(this.url("/health")));
  }

  async createSession(): Promise<string> {
    const body = await asJson<{ id: string }>(
      await fetch(this.url("/sessions"), { method: "POST" }),
    );
    return body.id;
  }

  async uploadImage(png: Uint8Array): Promise<string> {
    const body = await asJson<{ ref: string }>(
      await fetch(this.url("/images"), {
        method: "POST",
        headers: { "content-type": "image/png" },
        body: png as unknown as BodyInit,
      }),
    );
    return body.ref;
  }

  async generate(sessionId: string, request: RequestJson): Promise<string> {
    const body = await asJson<{ job_id: string }>(
      await fetch(this.url(`/sessions/${sessionId}/generate`), {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify(request),
      }),
    );
    return body.job_id;
  }

  async getJob(jobId: string): Promise<JobJson> {
    return asJson(await fetch(this.url(`/jobs/${jobId}`)));
  }

  async waitForJob(jobId: string, pollMs = 1000): Promise<JobJson> {
    for (;;) {
      const job = await this.getJob(jobId);
      if (job.state === "done" || job.state === "failed") return job;
      await new Promise((r) => setTimeout(r, pollMs));
    }
  }

  async getRecord(recordId: string): Promise<RecordJson> {
    return asJson(await fetch(this.url(`/generations/${recordId}`)));
  }

  async sendFeedback(recordId: string, delta: FeedbackJson): Promise<string> {
    const body = await asJson<{ job_id: string }>(
      await fetch(this.url(`/generations/${recordId}/feedback`), {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify(delta),
      }),
    );
    return body.job_id;
  }

  async getLineage(recordId: string): Promise<LineageEntry[]> {
    const body = await asJson<{ lineage: LineageEntry[] }>(
      await fetch(this.url(`/generations/${recordId}/lineage`)),
    );
    return body.lineage;
  }

  async replay(recordId: string): Promise<{ identical: boolean; outputs: string[] }> {
    return asJson(await fetch(this.url(`/generations/${recordId}/replay`), { method: "POST" }));
  }

  async keywords(): Promise<string[]> {
    const body = await asJson<{ keywords: string[] }>(await fetch(this.url("/keywords")));
    return body.keywords;
  }
}

/** Serialize the workspace into the request the service expects, uploading
 * the sketch first when the canvas has strokes. */
export async function buildRequest(
  client: WheelgenClient,
  ws: Workspace,
  canvas: number,
): Promise<RequestJson> {
  const sketchPng = sketchToPng(ws.strokes, canvas);
  const sketchRef = sketchPng ? await client.uploadImage(sketchPng) : null;
  return {
    concepts: ws.groups.map((g) => ({
      keyword: g.keyword.trim(),
      group_weight: g.groupWeight,
      inspirations: g.images.map((img) => ({
        id: img.id,
        image: img.ref,
        crop: img.crop,
        weight: img.weight,
        source: "user",
      })),
    })),
    symmetry: {
      enabled: ws.symmetryEnabled,
      k: ws.symmetryK,
      center: null,
      radius: null,
      final_replication: true,
    },
    sketch: sketchRef,
    template: null,
    output_count: ws.outputCount,
    seed: ws.seed,
    backend_id: ws.backendId,
    sketch_strength: ws.sketchStrength,
  };
}
