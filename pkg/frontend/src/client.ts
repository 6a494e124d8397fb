/**
 * Protocol client for the play service: REST requests plus the per-session
 * message stream. DOM-free so it runs in both the browser and node tests;
 * pass a WebSocket constructor when the global one is unavailable.
 */
import type {
  GraphData,
  LevelInfo,
  SessionInfo,
  SolutionMessage,
  StreamMessage,
  TraceMessage,
} from "./types";

type WebSocketCtor = new (url: string) => {
  onmessage: ((ev: { data: unknown }) => void) | null;
  onopen: ((ev: unknown) => void) | null;
  onerror: ((ev: unknown) => void) | null;
  close(): void;
};

export class ServiceError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

async function request<T>(url: string, init?: RequestInit): Promise<T> {
  const resp = await fetch(url, init);
  if (!resp.ok) {
    throw new ServiceError(resp.status, `${url}: ${await resp.text()}`);
  }
  return (await resp.json()) as T;
}

function post<T>(url: string, body: unknown): Promise<T> {
  return request<T>(url, {
    method: "POST",
    headers: { "content-type": "application/json" },
    body: JSON.stringify(body),
  });
}

export class SessionClient {
  private session: SessionInfo | null = null;

  constructor(
    private baseUrl: string,
    private wsCtor: WebSocketCtor = (globalThis as { WebSocket?: WebSocketCtor })
      .WebSocket as WebSocketCtor,
  ) {}

  levels(): Promise<Record<string, LevelInfo>> {
    return request(`${this.baseUrl}/levels`);
  }

  async createSession(level: string, T_ms: number): Promise<SessionInfo> {
    this.session = await post<SessionInfo>(`${this.baseUrl}/sessions`, {
      level,
      T: T_ms,
    });
    return this.session;
  }

  get current(): SessionInfo {
    if (!this.session) throw new Error("no active session");
    return this.session;
  }

  /** Open the session stream; messages arrive through the callback. */
  connectStream(onMessage: (msg: StreamMessage) => void): { close(): void } {
    const url =
      this.baseUrl.replace(/^http/, "ws") +
      `/sessions/${this.current.id}/stream`;
    const ws = new this.wsCtor(url);
    ws.onmessage = (ev) => onMessage(JSON.parse(String(ev.data)));
    return { close: () => ws.close() };
  }

  submitTrace(trace: TraceMessage): Promise<{ record_id: string; fidelity: number; T_rel: number }> {
    return post(`${this.baseUrl}/sessions/${this.current.id}/trace`, trace);
  }

  optimize(
    action: "start" | "stop",
    opts: { budget_s?: number; f_stop?: number; step_stop?: number } = {},
  ): Promise<{ state: string }> {
    return post(`${this.baseUrl}/sessions/${this.current.id}/optimize`, {
      action,
      ...opts,
    });
  }

  solutions(): Promise<SolutionMessage[]> {
    return request(`${this.baseUrl}/sessions/${this.current.id}/solutions`);
  }

  replay(recordId: string): Promise<{ fidelity: number }> {
    return post(`${this.baseUrl}/sessions/${this.current.id}/replay/${recordId}`, {});
  }

  graph(level: string): Promise<GraphData> {
    return request(`${this.baseUrl}/levels/${level}/graph`);
  }
}
