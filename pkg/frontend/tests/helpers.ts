// Shared test scaffolding: a recording fetch mock and scripted SSE bodies.

import type { FetchLike } from "../src/api.js";

export interface RecordedCall {
  url: string;
  method: string;
  body: unknown;
}

export type RouteHandler = (call: RecordedCall) => Response;

export function jsonResponse(payload: unknown, status = 200): Response {
  return new Response(JSON.stringify(payload), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}

/** fetch stand-in: records every call, answers from a route table. */
export function mockFetch(routes: Record<string, RouteHandler | unknown>) {
  const calls: RecordedCall[] = [];
  const fetchFn: FetchLike = async (url, init) => {
    const method = init?.method ?? "GET";
    const body = init?.body ? JSON.parse(init.body as string) : undefined;
    const call = { url, method, body };
    calls.push(call);
    const key = `${method} ${url}`;
    const handler = routes[key] ?? routes[url];
    if (handler === undefined) {
      return new Response("", { status: 404 });
    }
    if (typeof handler === "function") {
      return (handler as RouteHandler)(call);
    }
    return jsonResponse(handler);
  };
  return { fetchFn, calls };
}

export function sseBody(chunks: string[]): ReadableStream<Uint8Array> {
  const encoder = new TextEncoder();
  return new ReadableStream<Uint8Array>({
    start(controller) {
      for (const chunk of chunks) controller.enqueue(encoder.encode(chunk));
      controller.close(); // closing simulates a dropped stream
    },
  });
}

export function sseEvent(type: string, session: string | null, data: object, seq = 1): string {
  return `data: ${JSON.stringify({ type, session, data, seq })}\n\n`;
}
