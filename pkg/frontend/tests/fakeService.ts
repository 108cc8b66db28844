// In-memory stand-in for the wheelgen HTTP service with the same routes and
// status codes, installed as global fetch. Lets component tests inspect the
// exact payloads the UI sends.

import type { FeedbackJson, RequestJson } from "../src/types";

interface FakeRecord {
  id: string;
  request: RequestJson;
  outputs: string[];
  parent_id: string | null;
  feedback: FeedbackJson | null;
  resolved_conditioning: Record<string, unknown>;
}

export class FakeService {
  sentRequests: RequestJson[] = [];
  sentFeedback: { recordId: string; delta: FeedbackJson }[] = [];
  uploads: Uint8Array[] = [];
  failNextJob: string | null = null;

  private sessions = new Set<string>();
  private jobs = new Map<string, { state: string; record_id: string | null; error: string | null }>();
  private records = new Map<string, FakeRecord>();
  private n = 0;

  install() {
    globalThis.fetch = this.fetch.bind(this) as typeof fetch;
  }

  private id(prefix: string): string {
    return `${prefix}${this.n++}`;
  }

  private makeRecord(request: RequestJson, parent: FakeRecord | null, delta: FeedbackJson | null): FakeRecord {
    const rec: FakeRecord = {
      id: this.id("rec"),
      request,
      outputs: Array.from({ length: request.output_count }, () => this.id("img")),
      parent_id: parent?.id ?? null,
      feedback: delta,
      resolved_conditioning: {
        prompt:
          "a photo of a car wheel design" +
          request.concepts
            .filter((g) => g.keyword)
            .map((g) => `, ${g.keyword}`)
            .join(""),
        exemplars: request.concepts.map((g) => ({
          keyword: g.keyword,
          group_weight: g.group_weight,
          mode: g.inspirations.length ? "user" : "prompt-only",
          inspiration_ids: g.inspirations.map((i) => i.id),
        })),
        context_weights: [],
        has_global: true,
        seed: request.seed,
        plan: { boundaries: [13, 26], mode: "on_x0_then_renoise" },
        errors: [],
      },
    };
    this.records.set(rec.id, rec);
    return rec;
  }

  private applyFeedback(parent: FakeRecord, delta: FeedbackJson): RequestJson {
    const removed = new Set(delta.removed_inspiration_ids ?? []);
    const req: RequestJson = JSON.parse(JSON.stringify(parent.request));
    req.concepts = req.concepts.map((g) => ({
      ...g,
      inspirations: g.inspirations.filter((i) => !removed.has(i.id)),
    }));
    if (delta.symmetry_change) req.symmetry = delta.symmetry_change;
    if (delta.seed != null) req.seed = delta.seed;
    return req;
  }

  private json(body: unknown, status = 200): Response {
    return new Response(JSON.stringify(body), {
      status,
      headers: { "content-type": "application/json" },
    });
  }

  async fetch(input: RequestInfo | URL, init?: RequestInit): Promise<Response> {
    const url = new URL(String(input), "http://fake");
    const path = url.pathname;
    const method = init?.method ?? "GET";
    const isUpload = path === "/images" && method === "POST";
    const body = !isUpload && init?.body ? JSON.parse(String(init.body)) : null;

    if (path === "/health") return this.json({ ok: true, backends: ["stub-pattern", "stub-zero"], canvas: 64 });
    if (path === "/sessions" && method === "POST") {
      const sid = this.id("sess");
      this.sessions.add(sid);
      return this.json({ id: sid }, 201);
    }
    if (path === "/images" && method === "POST") {
      const raw = init?.body as Uint8Array | ArrayBuffer | Blob;
      const bytes =
        raw instanceof Uint8Array
          ? raw
          : raw instanceof ArrayBuffer
            ? new Uint8Array(raw)
            : new Uint8Array(await (raw as Blob).arrayBuffer());
      this.uploads.push(bytes);
      return this.json({ ref: this.id("upload") }, 201);
    }
    let m = path.match(/^\/sessions\/([^/]+)\/generate$/);
    if (m && method === "POST") {
      if (!this.sessions.has(m[1])) return this.json({ detail: "unknown session" }, 404);
      if (!body.concepts?.length) return this.json({ detail: ["concepts: at least one required"] }, 422);
      this.sentRequests.push(body);
      const jobId = this.id("job");
      if (this.failNextJob) {
        this.jobs.set(jobId, { state: "failed", record_id: null, error: this.failNextJob });
        this.failNextJob = null;
      } else {
        const rec = this.makeRecord(body, null, null);
        this.jobs.set(jobId, { state: "done", record_id: rec.id, error: null });
      }
      return this.json({ job_id: jobId }, 202);
    }
    m = path.match(/^\/jobs\/([^/]+)$/);
    if (m) {
      const job = this.jobs.get(m[1]);
      if (!job) return this.json({ detail: "unknown job" }, 404);
      return this.json({ id: m[1], ...job });
    }
    m = path.match(/^\/generations\/([^/]+)\/feedback$/);
    if (m && method === "POST") {
      const parent = this.records.get(m[1]);
      if (!parent) return this.json({ detail: "unknown record" }, 404);
      this.sentFeedback.push({ recordId: m[1], delta: body });
      const rec = this.makeRecord(this.applyFeedback(parent, body), parent, body);
      const jobId = this.id("job");
      this.jobs.set(jobId, { state: "done", record_id: rec.id, error: null });
      return this.json({ job_id: jobId }, 202);
    }
    m = path.match(/^\/generations\/([^/]+)\/lineage$/);
    if (m) {
      let rec = this.records.get(m[1]);
      if (!rec) return this.json({ detail: "unknown record" }, 404);
      const chain: FakeRecord[] = [rec];
      while (rec.parent_id) {
        rec = this.records.get(rec.parent_id)!;
        chain.unshift(rec);
      }
      return this.json({
        lineage: chain.map((r) => ({
          id: r.id,
          parent_id: r.parent_id,
          seed: r.request.seed,
          note: r.feedback?.note ?? null,
          feedback: r.feedback,
          resolved_conditioning: r.resolved_conditioning,
          outputs: r.outputs.map((o) => `/images/${o}`),
        })),
      });
    }
    m = path.match(/^\/generations\/([^/]+)$/);
    if (m) {
      const rec = this.records.get(m[1]);
      if (!rec) return this.json({ detail: "unknown record" }, 404);
      return this.json({
        ...rec,
        created_at: 0,
        output_urls: rec.outputs.map((o) => `/images/${o}`),
      });
    }
    m = path.match(/^\/images\/([^/]+)$/);
    if (m) return new Response(new Uint8Array([0x89]), { status: 200 });
    if (path === "/keywords") return this.json({ keywords: ["dynamic", "bold"] });
    return this.json({ detail: `unhandled ${method} ${path}` }, 500);
  }
}
