/**
 * Typed client for the editing service's documented HTTP API. All server
 * interaction in the studio goes through this module, so tests can swap in
 * a mock fetch.
 */

export interface HealthInfo {
  status: string;
  model_loaded: boolean;
  image_size: [number, number] | null;
  driver_size: [number, number] | null;
  version?: string;
}

export interface PolicySpec {
  kind: "greedy" | "top_k" | "top_p";
  p?: number;
  k?: number;
  temperature?: number;
}

export interface JobResult {
  sample_id: string;
  candidate_index: number;
  similarity: number;
  nll: number;
  kept: boolean;
}

export interface JobInfo {
  id: string;
  session_id: string;
  status: "queued" | "running" | "done" | "failed";
  results: JobResult[];
  error: string | null;
  source_sha256: string | null;
  images_per_second?: number | null;
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: string,
  ) {
    super(friendlyMessage(status, detail));
  }
}

export function friendlyMessage(status: number, detail: string): string {
  switch (status) {
    case 409:
      return `Session is incomplete: set a source image, an edit region and a driver first (${detail})`;
    case 404:
      return `Not found: ${detail}`;
    case 422:
      return `The server rejected the input: ${detail}`;
    case 503:
      return "The model is still loading on the server; try again shortly";
    default:
      return `Request failed (${status}): ${detail}`;
  }
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class StudioClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchFn: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private url(path: string): string {
    return `${this.baseUrl}${path}`;
  }

  private async check(response: Response): Promise<Response> {
    if (!response.ok) {
      let detail = response.statusText;
      try {
        const body = await response.json();
        if (body && typeof body.detail === "string") detail = body.detail;
      } catch {
        /* non-JSON error body */
      }
      throw new ApiError(response.status, detail);
    }
    return response;
  }

  async health(): Promise<HealthInfo> {
    const r = await this.check(await this.fetchFn(this.url("/v1/health")));
    return r.json();
  }

  async createSession(): Promise<string> {
    const r = await this.check(await this.fetchFn(this.url("/v1/sessions"), { method: "POST" }));
    return (await r.json()).id;
  }

  async putSource(sessionId: string, png: Uint8Array | Blob): Promise<void> {
    await this.check(
      await this.fetchFn(this.url(`/v1/sessions/${sessionId}/source`), {
        method: "PUT",
        headers: { "content-type": "image/png" },
        body: png as BodyInit,
      }),
    );
  }

  async putRegionMask(sessionId: string, maskPng: Uint8Array): Promise<void> {
    await this.check(
      await this.fetchFn(this.url(`/v1/sessions/${sessionId}/region`), {
        method: "PUT",
        headers: { "content-type": "image/png" },
        body: maskPng as BodyInit,
      }),
    );
  }

  async putDriver(sessionId: string, png: Uint8Array | Blob): Promise<void> {
    await this.check(
      await this.fetchFn(this.url(`/v1/sessions/${sessionId}/driver`), {
        method: "PUT",
        headers: { "content-type": "image/png" },
        body: png as BodyInit,
      }),
    );
  }

  async putDriverFromSample(sessionId: string, sampleId: string, rect?: [number, number, number, number]): Promise<void> {
    await this.check(
      await this.fetchFn(this.url(`/v1/sessions/${sessionId}/driver`), {
        method: "PUT",
        headers: { "content-type": "application/json" },
        body: JSON.stringify({ sample_id: sampleId, rect: rect ?? null }),
      }),
    );
  }

  async generate(sessionId: string, n: number, keep: number, policy: PolicySpec, seed: number): Promise<string> {
    const r = await this.check(
      await this.fetchFn(this.url(`/v1/sessions/${sessionId}/generate`), {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify({ n, keep, policy, seed }),
      }),
    );
    return (await r.json()).id;
  }

  async getJob(jobId: string): Promise<JobInfo> {
    const r = await this.check(await this.fetchFn(this.url(`/v1/jobs/${jobId}`)));
    return r.json();
  }

  sampleUrl(sampleId: string): string {
    return this.url(`/v1/samples/${sampleId}`);
  }

  async fetchSample(sampleId: string): Promise<Uint8Array> {
    const r = await this.check(await this.fetchFn(this.sampleUrl(sampleId)));
    return new Uint8Array(await r.arrayBuffer());
  }

  async fetchRegion(sessionId: string): Promise<Uint8Array> {
    const r = await this.check(await this.fetchFn(this.url(`/v1/sessions/${sessionId}/region`)));
    return new Uint8Array(await r.arrayBuffer());
  }

  async promote(sessionId: string, sampleId: string): Promise<string> {
    const r = await this.check(
      await this.fetchFn(this.url(`/v1/sessions/${sessionId}/promote`), {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify({ sample_id: sampleId }),
      }),
    );
    return (await r.json()).source_sha256;
  }
}
