// Typed client for the engine's HTTP API. Exports are fetched as raw bytes
// and never re-rendered client-side: the server's artifact is authoritative.

import type {
  AnswerResult,
  ApiErrorBody,
  Flow,
  PolicyList,
  QueryStep,
  SessionStatus,
  TestPlan,
  ThreatList,
  TranscriptView,
} from "./types.js";

export class ApiError extends Error {
  readonly code: string;
  readonly status: number;
  readonly details: Record<string, unknown>;

  constructor(status: number, body: ApiErrorBody) {
    super(body.message);
    this.code = body.code;
    this.status = status;
    this.details = body.details ?? {};
  }
}

export class ApiClient {
  constructor(readonly baseUrl: string = "") {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const response = await fetch(this.baseUrl + path, {
      method,
      headers: body === undefined ? {} : { "Content-Type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    if (!response.ok) {
      let parsed: ApiErrorBody;
      try {
        parsed = (await response.json()) as ApiErrorBody;
      } catch {
        parsed = { code: "transport", message: `HTTP ${response.status}` };
      }
      throw new ApiError(response.status, parsed);
    }
    return (await response.json()) as T;
  }

  health(): Promise<{ status: string; version: string }> {
    return this.request("GET", "/health");
  }

  createSession(flow: Flow): Promise<{ session_id: string; flow: Flow; phase: string }> {
    return this.request("POST", "/sessions", { flow });
  }

  listSessions(): Promise<{ sessions: string[] }> {
    return this.request("GET", "/sessions");
  }

  status(sessionId: string): Promise<SessionStatus> {
    return this.request("GET", `/sessions/${sessionId}/status`);
  }

  ingestDocument(
    sessionId: string,
    doc: { kind: string; title: string; text: string },
  ): Promise<{ doc_id: string }> {
    return this.request("POST", `/sessions/${sessionId}/documents`, doc);
  }

  startFlow1(sessionId: string): Promise<QueryStep> {
    return this.request("POST", `/sessions/${sessionId}/flow1/start`);
  }

  nextQuery(sessionId: string): Promise<QueryStep> {
    return this.request("POST", `/sessions/${sessionId}/queries/next`);
  }

  pendingQuery(sessionId: string): Promise<QueryStep> {
    return this.request("GET", `/sessions/${sessionId}/queries/pending`);
  }

  submitAnswer(sessionId: string, queryId: string, answer: string): Promise<AnswerResult> {
    return this.request("POST", `/sessions/${sessionId}/answers`, {
      query_id: queryId,
      answer,
    });
  }

  runFlow2(sessionId: string): Promise<{ status: string; poll: string }> {
    return this.request("POST", `/sessions/${sessionId}/flow2/run`);
  }

  runPlan(
    sessionId: string,
    answers?: { query: string; answer: string }[],
  ): Promise<{ status: string; poll: string }> {
    return this.request("POST", `/sessions/${sessionId}/plan/run`, { answers: answers ?? [] });
  }

  threats(sessionId: string): Promise<ThreatList> {
    return this.request("GET", `/sessions/${sessionId}/threats`);
  }

  policies(sessionId: string): Promise<PolicyList> {
    return this.request("GET", `/sessions/${sessionId}/policies`);
  }

  plan(sessionId: string): Promise<TestPlan> {
    return this.request("GET", `/sessions/${sessionId}/plan`);
  }

  transcript(sessionId: string): Promise<TranscriptView> {
    return this.request("GET", `/sessions/${sessionId}/transcript`);
  }

  /** Server-rendered artifact bytes; byte-identical to the CLI export. */
  async exportArtifact(
    sessionId: string,
    artifact: "threats" | "policies" | "plan",
    format: "json" | "markdown" = "json",
  ): Promise<Uint8Array> {
    const response = await fetch(
      `${this.baseUrl}/sessions/${sessionId}/artifacts/${artifact}?format=${format}`,
    );
    if (!response.ok) {
      let parsed: ApiErrorBody;
      try {
        parsed = (await response.json()) as ApiErrorBody;
      } catch {
        parsed = { code: "transport", message: `HTTP ${response.status}` };
      }
      throw new ApiError(response.status, parsed);
    }
    return new Uint8Array(await response.arrayBuffer());
  }
}
