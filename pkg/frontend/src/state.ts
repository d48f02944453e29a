/**
 * Chat view state and actions. One in-flight turn at a time is enforced
 * here, client-side; the drawer only ever shows traces fetched from the
 * service, and refreshTranscript() rebuilds the turn list from
 * GET /api/sessions/{id} so the rendered transcript always equals the
 * persisted one.
 */

import { AgentTrace, ApiClient, ServiceError } from "./api.js";

export type Phase = "empty" | "uploading" | "ready";
export type TurnStatus = "pending" | "answered" | "failed";

export interface TurnView {
  user: string;
  answer: string | null;
  traceId: string | null;
  status: TurnStatus;
  error: string | null;
}

export interface ViewState {
  phase: Phase;
  modelId: string | null;
  modelStatus: string | null;
  description: string | null;
  diagnostics: string[];
  uploadError: string | null; // network failure: offer retry, keep input
  sessionId: string | null;
  turns: TurnView[];
  pending: boolean;
  busyNotice: string | null;
  openTrace: AgentTrace | null;
  traceError: string | null;
}

export type Listener = (state: ViewState) => void;

const BUSY_NOTICE = "previous question still processing";

export class ChatStore {
  private listeners: Listener[] = [];
  private lastDocument: string | null = null;

  state: ViewState = {
    phase: "empty",
    modelId: null,
    modelStatus: null,
    description: null,
    diagnostics: [],
    uploadError: null,
    sessionId: null,
    turns: [],
    pending: false,
    busyNotice: null,
    openTrace: null,
    traceError: null,
  };

  constructor(private readonly api: ApiClient) {}

  subscribe(listener: Listener): () => void {
    this.listeners.push(listener);
    listener(this.state);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }

  private emit(): void {
    for (const listener of this.listeners) {
      listener(this.state);
    }
  }

  private patch(partial: Partial<ViewState>): void {
    this.state = { ...this.state, ...partial };
    this.emit();
  }

  /** Upload a model document; on success a fresh session is started. */
  async uploadModel(document: string): Promise<boolean> {
    this.lastDocument = document;
    this.patch({
      phase: "uploading",
      diagnostics: [],
      uploadError: null,
    });
    try {
      const result = await this.api.registerModel(document);
      const sessionId = await this.api.createSession(result.model_id);
      this.patch({
        phase: "ready",
        modelId: result.model_id,
        modelStatus: result.status,
        description: result.description,
        sessionId,
        turns: [],
        busyNotice: null,
        openTrace: null,
      });
      return true;
    } catch (error) {
      if (error instanceof ServiceError && error.diagnostics.length > 0) {
        // Parse/validation failure: positioned diagnostics, no model.
        this.patch({ phase: "empty", diagnostics: error.diagnostics });
      } else {
        // Network or server failure: keep the document for a retry.
        this.patch({
          phase: "empty",
          uploadError: error instanceof Error ? error.message : String(error),
        });
      }
      return false;
    }
  }

  /** Retry the last failed upload (network-failure affordance). */
  async retryUpload(): Promise<boolean> {
    if (this.lastDocument === null) {
      return false;
    }
    return this.uploadModel(this.lastDocument);
  }

  /**
   * Send one chat turn. Returns false when blocked (no session, or a turn
   * is already in flight; double-submits never reach the service).
   */
  async sendTurn(text: string): Promise<boolean> {
    if (this.state.pending || !this.state.sessionId || !text.trim()) {
      return false;
    }
    const turn: TurnView = {
      user: text,
      answer: null,
      traceId: null,
      status: "pending",
      error: null,
    };
    this.patch({
      pending: true,
      busyNotice: null,
      turns: [...this.state.turns, turn],
    });
    try {
      const result = await this.api.sendMessage(this.state.sessionId, text);
      this.replaceLastTurn({
        ...turn,
        answer: result.answer,
        traceId: result.trace_id,
        status: "answered",
      });
      return true;
    } catch (error) {
      const busy = error instanceof ServiceError && error.isBusy;
      this.replaceLastTurn({
        ...turn,
        status: "failed",
        error: error instanceof Error ? error.message : String(error),
      });
      if (busy) {
        this.patch({ busyNotice: BUSY_NOTICE });
      }
      return false;
    } finally {
      this.patch({ pending: false });
    }
  }

  private replaceLastTurn(turn: TurnView): void {
    const turns = [...this.state.turns];
    turns[turns.length - 1] = turn;
    this.patch({ turns });
  }

  /** Rebuild the transcript from the service (idempotent refresh). */
  async refreshTranscript(): Promise<void> {
    if (!this.state.sessionId) {
      return;
    }
    const transcript = await this.api.getSession(this.state.sessionId);
    this.patch({
      turns: transcript.turns.map((record) => ({
        user: record.user,
        answer: record.answer,
        traceId: record.trace_id,
        status: "answered" as TurnStatus,
        error: null,
      })),
    });
  }

  /** Open the trace drawer for a persisted trace; 404 surfaces as an error. */
  async openTrace(traceId: string): Promise<boolean> {
    try {
      const trace = await this.api.getTrace(traceId);
      this.patch({ openTrace: trace, traceError: null });
      return true;
    } catch (error) {
      this.patch({
        openTrace: null,
        traceError: error instanceof Error ? error.message : String(error),
      });
      return false;
    }
  }

  closeTrace(): void {
    this.patch({ openTrace: null, traceError: null });
  }
}
