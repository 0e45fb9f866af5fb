/** Thin typed client for the gateway HTTP API. All requests go through here. */

import type { HealthInfo, JournalEntry, MessageReply, PairRefs } from "./types.js";
import { parseJournal } from "./transcript.js";

/** Non-2xx gateway response, carrying the response body verbatim. */
export class GatewayError extends Error {
  readonly status: number;
  readonly detail: unknown;

  constructor(status: number, detail: unknown) {
    super(describeDetail(status, detail));
    this.name = "GatewayError";
    this.status = status;
    this.detail = detail;
  }
}

function describeDetail(status: number, detail: unknown): string {
  const body = typeof detail === "string" ? detail : JSON.stringify(detail);
  return `gateway returned ${status}: ${body}`;
}

/** Render any thrown value for the turn list, keeping gateway bodies verbatim. */
export function describeError(err: unknown): string {
  if (err instanceof GatewayError) {
    return err.message;
  }
  if (err instanceof Error) {
    return err.message;
  }
  return String(err);
}

async function readDetail(res: Response): Promise<unknown> {
  const text = await res.text();
  try {
    const parsed: unknown = JSON.parse(text);
    if (parsed !== null && typeof parsed === "object" && "detail" in parsed) {
      return (parsed as { detail: unknown }).detail;
    }
    return parsed;
  } catch {
    return text;
  }
}

export class GatewayClient {
  private readonly baseUrl: string;
  private readonly fetchFn: typeof fetch;

  constructor(baseUrl = "", fetchFn?: typeof fetch) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
    // Wrap the global so the call keeps its original `this` binding.
    this.fetchFn = fetchFn ?? ((input, init) => fetch(input, init));
  }

  url(path: string): string {
    return `${this.baseUrl}${path}`;
  }

  /** URL for an artifact's raw bytes; used directly as an <img> src. */
  artifactUrl(ref: string): string {
    return this.url(`/api/artifacts/${encodeURIComponent(ref)}`);
  }

  private async request(path: string, init?: RequestInit): Promise<Response> {
    const res = await this.fetchFn(this.url(path), init);
    if (!res.ok) {
      throw new GatewayError(res.status, await readDetail(res));
    }
    return res;
  }

  async health(): Promise<HealthInfo> {
    const res = await this.request("/api/health");
    return (await res.json()) as HealthInfo;
  }

  async createSession(): Promise<string> {
    const res = await this.request("/api/sessions", { method: "POST" });
    const body = (await res.json()) as { session_id: string };
    return body.session_id;
  }

  async uploadPair(sessionId: string, t1: Blob, t2: Blob): Promise<PairRefs> {
    const form = new FormData();
    form.append("t1", t1, "t1.png");
    form.append("t2", t2, "t2.png");
    const res = await this.request(
      `/api/sessions/${encodeURIComponent(sessionId)}/pair`,
      { method: "POST", body: form },
    );
    return (await res.json()) as PairRefs;
  }

  async sendMessage(sessionId: string, text: string): Promise<MessageReply> {
    const res = await this.request(
      `/api/sessions/${encodeURIComponent(sessionId)}/messages`,
      {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify({ text }),
      },
    );
    return (await res.json()) as MessageReply;
  }

  async fetchJournal(sessionId: string): Promise<JournalEntry[]> {
    const res = await this.request(
      `/api/sessions/${encodeURIComponent(sessionId)}/journal`,
    );
    return parseJournal(await res.text());
  }
}
