/** Typed client for the annotation service; fetch is injectable. */

import type {
  AnnotationRecord,
  CandidateResponse,
  SessionInfo,
  Vocabularies,
} from "./types.js";

export class ApiError extends Error {
  readonly status: number;
  readonly code: string;
  readonly offset?: number;

  constructor(status: number, code: string, message: string, offset?: number) {
    super(message);
    this.status = status;
    this.code = code;
    this.offset = offset;
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class AnnotationApi {
  private readonly base: string;
  private readonly fetchImpl: FetchLike;

  constructor(baseUrl: string, fetchImpl?: FetchLike) {
    this.base = baseUrl.replace(/\/$/, "");
    this.fetchImpl = fetchImpl ?? ((input, init) => fetch(input, init));
  }

  private async request<T>(
    path: string,
    init?: RequestInit & { signal?: AbortSignal },
  ): Promise<T> {
    const response = await this.fetchImpl(`${this.base}${path}`, {
      headers: { "content-type": "application/json" },
      ...init,
    });
    const body = await response.json().catch(() => ({}));
    if (!response.ok) {
      throw new ApiError(
        response.status,
        (body as { error?: string }).error ?? "unknown",
        (body as { message?: string }).message ?? `HTTP ${response.status}`,
        (body as { offset?: number }).offset,
      );
    }
    return body as T;
  }

  createSession(imageRef: string, region: string): Promise<SessionInfo> {
    return this.request("/sessions", {
      method: "POST",
      body: JSON.stringify({ image_ref: imageRef, region }),
    });
  }

  getCandidates(
    sessionId: string,
    bbox: number[],
    q: string,
    patchBase64?: string,
    signal?: AbortSignal,
  ): Promise<CandidateResponse> {
    const payload: Record<string, unknown> = { bbox, q };
    if (patchBase64) payload.patch = patchBase64;
    return this.request(`/sessions/${sessionId}/candidates`, {
      method: "POST",
      body: JSON.stringify(payload),
      signal,
    });
  }

  submitAnnotation(
    sessionId: string,
    bbox: number[],
    signId: string,
    missingSign: boolean,
    idempotencyKey: string,
  ): Promise<AnnotationRecord> {
    return this.request(`/sessions/${sessionId}/annotations`, {
      method: "POST",
      body: JSON.stringify({
        bbox,
        sign_id: signId,
        missing_sign: missingSign,
        idempotency_key: idempotencyKey,
      }),
    });
  }

  vocabularies(): Promise<Vocabularies> {
    return this.request("/vocabularies");
  }

  prototypeUrl(signId: string): string {
    return `${this.base}/signs/${encodeURIComponent(signId)}/prototype`;
  }
}
