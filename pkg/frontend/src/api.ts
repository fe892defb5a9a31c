// Typed client for the session-hosting service.

import type { CreatedSession, LogRecord, PendingRequest, Snapshot } from "./types.js";

export class ApiError extends Error {
  constructor(public status: number, detail: string) {
    super(`${status}: ${detail}`);
  }
}

async function parseOrThrow<T>(response: Response): Promise<T> {
  if (!response.ok) {
    let detail = response.statusText;
    try {
      const body = (await response.json()) as { detail?: string };
      if (body.detail) detail = body.detail;
    } catch {
      // keep the status text
    }
    throw new ApiError(response.status, detail);
  }
  return (await response.json()) as T;
}

export class ApiClient {
  constructor(private readonly base: string = "") {}

  private url(path: string): string {
    return `${this.base}${path}`;
  }

  async createSession(scenario: unknown): Promise<CreatedSession> {
    const response = await fetch(this.url("/sessions"), {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(scenario),
    });
    return parseOrThrow<CreatedSession>(response);
  }

  async snapshot(id: string, opts: { reveal?: boolean; bins?: boolean } = {}): Promise<Snapshot> {
    const params = new URLSearchParams();
    if (opts.reveal) params.set("reveal", "true");
    if (opts.bins) params.set("bins", "true");
    const suffix = params.size ? `?${params}` : "";
    return parseOrThrow<Snapshot>(
      await fetch(this.url(`/sessions/${id}/snapshot${suffix}`)),
    );
  }

  async advance(id: string, ticks: number): Promise<Snapshot> {
    const response = await fetch(this.url(`/sessions/${id}/advance`), {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ ticks }),
    });
    return parseOrThrow<Snapshot>(response);
  }

  async pending(id: string): Promise<PendingRequest | null> {
    const body = await parseOrThrow<{ pending: PendingRequest | null }>(
      await fetch(this.url(`/sessions/${id}/pending`)),
    );
    return body.pending;
  }

  async decide(id: string, allow: boolean): Promise<Snapshot> {
    const response = await fetch(this.url(`/sessions/${id}/decision`), {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ allow }),
    });
    return parseOrThrow<Snapshot>(response);
  }

  /** Fetch the event backlog starting at `from` (no follow; closes after). */
  async fetchEvents(id: string, from = 0): Promise<{ index: number; record: LogRecord }[]> {
    const response = await fetch(
      this.url(`/sessions/${id}/events?from=${from}&follow=false`),
    );
    if (!response.ok) throw new ApiError(response.status, response.statusText);
    return parseSseText(await response.text());
  }

  /** Live stream; returns a disposer. Falls back to polling where
   * EventSource is unavailable (tests, node). */
  openStream(
    id: string,
    from: number,
    onRecord: (index: number, record: LogRecord) => void,
    onStateChange?: (connected: boolean) => void,
  ): () => void {
    if (typeof EventSource !== "undefined") {
      const source = new EventSource(this.url(`/sessions/${id}/events?from=${from}`));
      const handler = (event: MessageEvent<string>) => {
        const index = Number((event as MessageEvent & { lastEventId: string }).lastEventId);
        onRecord(index, JSON.parse(event.data) as LogRecord);
      };
      // named events carry the record type; listen to everything we emit
      for (const kind of EVENT_KINDS) source.addEventListener(kind, handler);
      source.onopen = () => onStateChange?.(true);
      source.onerror = () => onStateChange?.(false);
      return () => source.close();
    }
    let stopped = false;
    let cursor = from;
    const poll = async () => {
      while (!stopped) {
        try {
          const batch = await this.fetchEvents(id, cursor);
          for (const { index, record } of batch) {
            cursor = index + 1;
            onRecord(index, record);
          }
          onStateChange?.(true);
        } catch {
          onStateChange?.(false);
        }
        await new Promise((resolve) => setTimeout(resolve, 250));
      }
    };
    void poll();
    return () => {
      stopped = true;
    };
  }
}

export const EVENT_KINDS = [
  "start",
  "allocation",
  "sense",
  "exchange",
  "verify",
  "replan",
  "move",
  "battery_low",
  "complete",
  "belief",
  "request",
  "decision",
  "finish",
] as const;

/** Parse raw SSE text into (id, record) pairs. */
export function parseSseText(text: string): { index: number; record: LogRecord }[] {
  const out: { index: number; record: LogRecord }[] = [];
  for (const block of text.split("\n\n")) {
    if (!block.trim()) continue;
    let index = -1;
    let data = "";
    for (const line of block.split("\n")) {
      if (line.startsWith("id: ")) index = Number(line.slice(4));
      if (line.startsWith("data: ")) data = line.slice(6);
    }
    if (index >= 0 && data) {
      out.push({ index, record: JSON.parse(data) as LogRecord });
    }
  }
  return out;
}
