/**
 * Typed client for the optexplain HTTP API (see docs/http_api.md).
 * Pure transport: no parsing of model text and no computation of answers
 * happens here; every displayed value originates from a service payload.
 */

export interface RegisterResult {
  model_id: string;
  status: string;
  description: string;
}

export interface TurnRecord {
  turn: number;
  user: string;
  answer: string;
  trace_id: string;
}

export interface Transcript {
  session_id: string;
  model_id: string;
  turns: TurnRecord[];
}

export interface MessageResult {
  answer: string;
  trace_id: string;
}

export interface TraceHop {
  agent: string;
  mode: string;
  function: string | null;
  arguments: Record<string, unknown> | null;
  result_digest: string | null;
  payload: unknown;
  note: string;
  lm_request: string | null;
  lm_response: string | null;
  wall_ms: number;
  input_digest: string;
}

export interface AgentTrace {
  trace_id: string;
  query: string;
  answer: string;
  error: string | null;
  hops: TraceHop[];
  started_at: number;
  wall_ms: number;
}

export interface ModelTable {
  model: string;
  status: string;
  sets: Record<string, unknown>;
  parameters: Record<string, unknown>;
  variables: Record<string, unknown>;
  constraints: Record<string, unknown>;
  objective: Record<string, unknown>;
}

/** Error envelope from the service, preserving status and detail. */
export class ServiceError extends Error {
  constructor(
    readonly status: number,
    message: string,
    readonly detail: unknown = null,
  ) {
    super(message);
    this.name = "ServiceError";
  }

  get isBusy(): boolean {
    return this.status === 429;
  }

  /** Positioned parse/validation diagnostics, when the body carried them. */
  get diagnostics(): string[] {
    if (Array.isArray(this.detail)) {
      return this.detail.map((d) => String(d));
    }
    return [];
  }
}

export type FetchLike = (
  input: string,
  init?: RequestInit,
) => Promise<Response>;

export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchFn(`${this.baseUrl}${path}`, init);
    const text = await response.text();
    let body: unknown = null;
    try {
      body = text ? JSON.parse(text) : null;
    } catch {
      body = null;
    }
    if (!response.ok) {
      const envelope = (body ?? {}) as { error?: string; detail?: unknown };
      throw new ServiceError(
        response.status,
        envelope.error ?? `request failed (${response.status})`,
        envelope.detail ?? null,
      );
    }
    return body as T;
  }

  registerModel(document: string): Promise<RegisterResult> {
    return this.request<RegisterResult>("/api/models", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ document }),
    });
  }

  getModelTable(modelId: string): Promise<ModelTable> {
    return this.request<ModelTable>(`/api/models/${modelId}`);
  }

  async createSession(modelId: string): Promise<string> {
    const body = await this.request<{ session_id: string }>(
      `/api/models/${modelId}/sessions`,
      { method: "POST" },
    );
    return body.session_id;
  }

  sendMessage(sessionId: string, text: string): Promise<MessageResult> {
    return this.request<MessageResult>(`/api/sessions/${sessionId}/messages`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ text }),
    });
  }

  getSession(sessionId: string): Promise<Transcript> {
    return this.request<Transcript>(`/api/sessions/${sessionId}`);
  }

  getTrace(traceId: string): Promise<AgentTrace> {
    return this.request<AgentTrace>(`/api/traces/${traceId}`);
  }
}
