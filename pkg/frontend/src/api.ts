/** Typed client for the study service HTTP API. */

import type { Dimension } from "./validation";

export interface SessionInfo {
  session_id: string;
  subject_id: string;
  total: number;
  completed: number;
  complete: boolean;
}

export interface ItemPayload {
  complete: boolean;
  item_id: string | null;
  position: number | null;
  total: number;
  video_url: string | null;
  audio_url: string | null;
  scores: Record<Dimension, number> | null;
}

export interface ProgressPayload {
  completed: number;
  total: number;
  completed_today: number;
  daily_cap: number;
  complete: boolean;
}

export interface RatingBody {
  item_id: string;
  audio_quality: number;
  consistency: number;
  overall: number;
}

export interface ExportRow {
  subject_id: string;
  item_id: string;
  audio_quality: number;
  consistency: number;
  overall: number;
  timestamp: string;
}

/** Service answered with an error status; detail carries its message. */
export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: string,
  ) {
    super(`${status}: ${detail}`);
    this.name = "ApiError";
  }
}

/** No response at all: network down, server not started, CORS, ... */
export class ServiceUnreachableError extends Error {
  constructor(cause: unknown) {
    super(`study service unreachable: ${String(cause)}`);
    this.name = "ServiceUnreachableError";
  }
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

function extractDetail(body: unknown, fallback: string): string {
  if (body && typeof body === "object" && "detail" in body) {
    const detail = (body as { detail: unknown }).detail;
    if (typeof detail === "string") return detail;
    return JSON.stringify(detail);
  }
  return fallback;
}

export class StudyClient {
  private readonly fetchFn: FetchLike;

  constructor(
    readonly baseUrl = "",
    fetchFn?: FetchLike,
  ) {
    // Never hold an unbound reference to window.fetch.
    this.fetchFn = fetchFn ?? ((url, init) => fetch(url, init));
  }

  private async request(path: string, init?: RequestInit): Promise<Response> {
    let response: Response;
    try {
      response = await this.fetchFn(this.baseUrl + path, init);
    } catch (err) {
      throw new ServiceUnreachableError(err);
    }
    if (!response.ok) {
      let detail = response.statusText || "request failed";
      try {
        detail = extractDetail(await response.json(), detail);
      } catch {
        // non-JSON error body, keep the status text
      }
      throw new ApiError(response.status, detail);
    }
    return response;
  }

  private async requestJson<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.request(path, init);
    return (await response.json()) as T;
  }

  createSession(studyId: string, subjectId: string): Promise<SessionInfo> {
    return this.requestJson("/api/session", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ study_id: studyId, subject_id: subjectId }),
    });
  }

  getItem(sessionId: string, which: "current" | "previous" = "current"): Promise<ItemPayload> {
    return this.requestJson(`/api/session/${encodeURIComponent(sessionId)}/item?which=${which}`);
  }

  submitRating(sessionId: string, body: RatingBody): Promise<ProgressPayload> {
    return this.requestJson(`/api/session/${encodeURIComponent(sessionId)}/rating`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  getProgress(sessionId: string): Promise<ProgressPayload> {
    return this.requestJson(`/api/session/${encodeURIComponent(sessionId)}/progress`);
  }

  async exportStudy(studyId: string): Promise<ExportRow[]> {
    const response = await this.request(`/api/study/${encodeURIComponent(studyId)}/export`);
    const text = await response.text();
    return text
      .split("\n")
      .filter((line) => line.trim() !== "")
      .map((line) => JSON.parse(line) as ExportRow);
  }
}
