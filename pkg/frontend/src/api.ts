// Thin typed client over the tutoring service. Every non-2xx response is
// turned into an ApiError carrying the service's own error name and detail
// text, which the UI displays without rewording.

import type {
  EditOp,
  HistoryResponse,
  LectureRecord,
  QueueDoc,
  SessionInfo,
  UserEvent,
} from './types.js';

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  readonly status: number;
  readonly error: string;
  readonly detail: string;

  constructor(status: number, error: string, detail: string) {
    super(`${error}: ${detail}`);
    this.status = status;
    this.error = error;
    this.detail = detail;
  }
}

async function raiseForStatus(response: Response): Promise<void> {
  if (response.ok) return;
  let error = `HTTP ${response.status}`;
  let detail = response.statusText;
  try {
    const body = await response.json();
    if (body && typeof body.error === 'string') {
      error = body.error;
      detail = String(body.detail ?? '');
    }
  } catch {
    // non-JSON error body; keep the HTTP status text
  }
  throw new ApiError(response.status, error, detail);
}

export class ApiClient {
  private readonly base: string;
  private readonly fetchImpl: FetchLike;

  constructor(baseUrl: string, fetchImpl?: FetchLike) {
    this.base = baseUrl.replace(/\/$/, '');
    this.fetchImpl = fetchImpl ?? ((input, init) => fetch(input, init));
  }

  private async json<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchImpl(`${this.base}${path}`, init);
    await raiseForStatus(response);
    return (await response.json()) as T;
  }

  getLecture(lectureId: string): Promise<LectureRecord> {
    return this.json(`/lectures/${lectureId}`);
  }

  getActions(lectureId: string): Promise<QueueDoc> {
    return this.json(`/lectures/${lectureId}/actions`);
  }

  patchActions(lectureId: string, revision: number, edits: EditOp[]): Promise<QueueDoc> {
    return this.json(`/lectures/${lectureId}/actions`, {
      method: 'PATCH',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify({ revision, edits }),
    });
  }

  getAgenda(lectureId: string): Promise<unknown> {
    return this.json(`/lectures/${lectureId}/agenda`);
  }

  createSession(lectureId: string, userId = 'student'): Promise<SessionInfo> {
    return this.json('/sessions', {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify({ lecture_id: lectureId, user_id: userId }),
    });
  }

  postEvent(sessionId: string, event: UserEvent): Promise<SessionInfo> {
    return this.json(`/sessions/${sessionId}/events`, {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify(event),
    });
  }

  getHistory(sessionId: string): Promise<HistoryResponse> {
    return this.json(`/sessions/${sessionId}/history`);
  }

  streamUrl(sessionId: string, fromSeq?: number, follow = true): string {
    const params = new URLSearchParams();
    if (fromSeq !== undefined) params.set('from', String(fromSeq));
    if (follow) params.set('follow', 'true');
    const query = params.toString();
    return `${this.base}/sessions/${sessionId}/stream${query ? `?${query}` : ''}`;
  }

  /** Slide images live under the lecture's deck directory; the service's
   * deck manifest stores the same relative paths. */
  pageImageUrl(assetBase: string, lectureId: string, pageIndex: number): string {
    const base = assetBase.replace(/\/$/, '');
    return `${base}/lectures/${lectureId}/deck/images/page-${pageIndex}.png`;
  }
}
