/** Typed fetch client for the gateway. The bearer token lives in memory only. */

import type { ResultMessage, Thresholds, WorklistEntry } from "./types.js";

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

export class ApiClient {
  constructor(private baseUrl: string, private token: string) {}

  private headers(extra: Record<string, string> = {}): Record<string, string> {
    return { Authorization: `Bearer ${this.token}`, ...extra };
  }

  private async request(path: string, init: RequestInit = {}): Promise<Response> {
    const r = await fetch(this.baseUrl + path, {
      ...init,
      headers: { ...this.headers(), ...(init.headers as Record<string, string>) },
    });
    if (r.status === 401) throw new ApiError(401, "unauthorized");
    return r;
  }

  async worklist(): Promise<WorklistEntry[]> {
    const r = await this.request("/v1/worklist");
    if (!r.ok) throw new ApiError(r.status, await r.text());
    return (await r.json()).studies as WorklistEntry[];
  }

  /** null while the study is still pending (202). */
  async result(studyId: string): Promise<ResultMessage | null> {
    const r = await this.request(`/v1/studies/${studyId}/result`);
    if (r.status === 202) return null;
    if (!r.ok) throw new ApiError(r.status, await r.text());
    return (await r.json()) as ResultMessage;
  }

  async overlayPng(
    studyId: string,
    layer: "composite" | "base" | "saliency" = "composite",
  ): Promise<Uint8Array | null> {
    const r = await this.request(`/v1/studies/${studyId}/overlay.png?layer=${layer}`);
    if (r.status === 202 || r.status === 404) return null;
    if (!r.ok) throw new ApiError(r.status, await r.text());
    return new Uint8Array(await r.arrayBuffer());
  }

  async submitStudy(dicom: Uint8Array, priority: "stat" | "routine"): Promise<string> {
    const r = await this.request(`/v1/studies?priority=${priority}`, {
      method: "POST",
      body: dicom as unknown as BodyInit,
      headers: { "Content-Type": "application/octet-stream" },
    });
    if (!r.ok) throw new ApiError(r.status, await r.text());
    return (await r.json()).study_id as string;
  }

  async escalate(studyId: string): Promise<{ changed: boolean; notice: string | null }> {
    const r = await this.request(`/v1/studies/${studyId}/priority`, {
      method: "POST",
      body: JSON.stringify({ priority: "stat" }),
      headers: { "Content-Type": "application/json" },
    });
    if (!r.ok) throw new ApiError(r.status, await r.text());
    return (await r.json()) as { changed: boolean; notice: string | null };
  }

  async thresholds(): Promise<Thresholds> {
    const r = await this.request("/v1/config/thresholds");
    if (!r.ok) throw new ApiError(r.status, await r.text());
    return (await r.json()) as Thresholds;
  }

  async putThresholds(update: Partial<Thresholds>): Promise<Thresholds> {
    const r = await this.request("/v1/config/thresholds", {
      method: "PUT",
      body: JSON.stringify(update),
      headers: { "Content-Type": "application/json" },
    });
    if (!r.ok) throw new ApiError(r.status, await r.text());
    return (await r.json()) as Thresholds;
  }

  metricsStreamUrl(): string {
    return this.baseUrl + "/v1/metrics/stream";
  }

  authHeader(): Record<string, string> {
    return this.headers();
  }
}
