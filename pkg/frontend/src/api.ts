/** Thin typed client for the session service. */

import type {
  AckPayload,
  AnswerValue,
  HistoryPayload,
  MetricPayload,
  QueryResponse,
  StatusPayload,
} from './types';

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
    this.name = 'ApiError';
  }
}

/** 409: the server already has an answer for this query (stale/duplicate). */
export class ConflictError extends ApiError {
  constructor(message: string) {
    super(409, message);
    this.name = 'ConflictError';
  }
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private baseUrl: string = '',
    private fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchFn(`${this.baseUrl}${path}`, init);
    if (!response.ok) {
      let detail = `${response.status}`;
      try {
        const body = (await response.json()) as { detail?: string };
        if (body.detail) detail = body.detail;
      } catch {
        // non-JSON error body; keep the status text
      }
      if (response.status === 409) throw new ConflictError(detail);
      throw new ApiError(response.status, detail);
    }
    return (await response.json()) as T;
  }

  getStatus(): Promise<StatusPayload> {
    return this.request<StatusPayload>('/v1/status');
  }

  getQuery(): Promise<QueryResponse> {
    return this.request<QueryResponse>('/v1/query');
  }

  postAnswer(answer: AnswerValue, queryId: number): Promise<AckPayload> {
    return this.request<AckPayload>('/v1/answer', {
      method: 'POST',
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify({ answer, query_id: queryId }),
    });
  }

  getMetric(): Promise<MetricPayload> {
    return this.request<MetricPayload>('/v1/metric');
  }

  getHistory(): Promise<HistoryPayload> {
    return this.request<HistoryPayload>('/v1/history');
  }
}
