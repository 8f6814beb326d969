// Server-sent-events consumer with reconnect.
//
// Reads /api/events as a fetch stream (works in every modern browser and
// in node for tests), parses "data:" lines, ignores ":" comments. When
// the stream drops, reconnects with exponential backoff and tells the app
// so it can resync from a snapshot endpoint.

import type { ApiEvent } from "./types.js";
import type { FetchLike } from "./api.js";

export interface EventStreamOptions {
  onEvent: (event: ApiEvent) => void;
  /** Fired on every successful (re)connect; reconnect=true after a drop.
   *  Awaited before events flow, so a resync cannot race newer events. */
  onOpen?: (reconnect: boolean) => void | Promise<void>;
  fetchFn?: FetchLike;
  sleepFn?: (ms: number) => Promise<void>;
  baseDelayMs?: number;
  maxDelayMs?: number;
}

const sleep = (ms: number) => new Promise<void>((r) => setTimeout(r, ms));

export class EventStream {
  private stopped = false;
  private readonly fetchFn: FetchLike;
  private readonly sleepFn: (ms: number) => Promise<void>;
  private readonly baseDelayMs: number;
  private readonly maxDelayMs: number;
  /** Backoff delays actually taken; handy for tests and debugging. */
  readonly delays: number[] = [];

  constructor(private options: EventStreamOptions) {
    this.fetchFn = options.fetchFn ?? ((u, i) => fetch(u, i));
    this.sleepFn = options.sleepFn ?? sleep;
    this.baseDelayMs = options.baseDelayMs ?? 500;
    this.maxDelayMs = options.maxDelayMs ?? 10_000;
  }

  stop(): void {
    this.stopped = true;
  }

  async run(): Promise<void> {
    let attempt = 0;
    let everConnected = false;
    while (!this.stopped) {
      try {
        const resp = await this.fetchFn("/api/events", {
          headers: { Accept: "text/event-stream" },
        });
        if (!resp.ok || !resp.body) {
          throw new Error(`events stream rejected: ${resp.status}`);
        }
        await this.options.onOpen?.(everConnected);
        everConnected = true;
        attempt = 0;
        await this.consume(resp.body);
        if (this.stopped) return;
        throw new Error("events stream closed");
      } catch {
        if (this.stopped) return;
        attempt += 1;
        const delay = Math.min(this.baseDelayMs * 2 ** (attempt - 1), this.maxDelayMs);
        this.delays.push(delay);
        await this.sleepFn(delay);
      }
    }
  }

  private async consume(body: ReadableStream<Uint8Array>): Promise<void> {
    const reader = body.getReader();
    const decoder = new TextDecoder();
    let buffer = "";
    let data = "";
    while (!this.stopped) {
      const { done, value } = await reader.read();
      if (done) return;
      buffer += decoder.decode(value, { stream: true });
      const lines = buffer.split("\n");
      buffer = lines.pop() ?? "";
      for (const raw of lines) {
        const line = raw.endsWith("\r") ? raw.slice(0, -1) : raw;
        if (line.startsWith(":")) continue; // keepalive comment
        if (line.startsWith("data:")) {
          data += line.slice(5).trimStart();
          continue;
        }
        if (line === "" && data) {
          try {
            this.options.onEvent(JSON.parse(data) as ApiEvent);
          } catch {
            // malformed event payload: drop it
          }
          data = "";
        }
      }
    }
    reader.cancel().catch(() => undefined);
  }
}
