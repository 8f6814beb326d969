// Typed client for the daemon control API. Every call is checked against
// the documented route list, so an undocumented endpoint cannot slip in.

import type {
  HistoryRecord,
  Peer,
  PendingRequest,
  StateSnapshot,
  TransfersSnapshot,
} from "./types.js";

export const DOCUMENTED_ROUTES: readonly RegExp[] = [
  /^\/api\/health$/,
  /^\/api\/state$/,
  /^\/api\/peers(\?window_ms=\d+)?$/,
  /^\/api\/share$/,
  /^\/api\/stop-share$/,
  /^\/api\/requests$/,
  /^\/api\/requests\/[0-9a-f]+\/decision$/,
  /^\/api\/fetch$/,
  /^\/api\/transfers$/,
  /^\/api\/history$/,
  /^\/api\/events$/,
];

export function isDocumentedRoute(path: string): boolean {
  return DOCUMENTED_ROUTES.some((r) => r.test(path));
}

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
    this.name = "ApiError";
  }
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ControlApi {
  constructor(private fetchFn: FetchLike = (u, i) => fetch(u, i)) {}

  private async call<T>(method: string, path: string, body?: unknown): Promise<T> {
    if (!isDocumentedRoute(path)) {
      throw new Error(`undocumented control API route: ${path}`);
    }
    const init: RequestInit = { method };
    if (body !== undefined) {
      init.headers = { "Content-Type": "application/json" };
      init.body = JSON.stringify(body);
    }
    const resp = await this.fetchFn(path, init);
    if (!resp.ok) {
      let detail = resp.statusText;
      try {
        const payload = (await resp.json()) as { detail?: string };
        if (payload.detail) detail = payload.detail;
      } catch {
        // empty or non-JSON error body
      }
      throw new ApiError(resp.status, detail);
    }
    return (await resp.json()) as T;
  }

  health(): Promise<{ status: string; version: string }> {
    return this.call("GET", "/api/health");
  }

  state(): Promise<StateSnapshot> {
    return this.call("GET", "/api/state");
  }

  peers(windowMs = 2000): Promise<{ peers: Peer[] }> {
    return this.call("GET", `/api/peers?window_ms=${windowMs}`);
  }

  share(paths: string[]): Promise<{ session: string; files: number; total_bytes: number }> {
    return this.call("POST", "/api/share", { paths });
  }

  stopShare(): Promise<{ status: string }> {
    return this.call("POST", "/api/stop-share");
  }

  requests(): Promise<{ requests: PendingRequest[] }> {
    return this.call("GET", "/api/requests");
  }

  decide(requestId: string, decision: "approve" | "deny"): Promise<{ status: string }> {
    return this.call("POST", `/api/requests/${requestId}/decision`, { decision });
  }

  fetchFrom(peerId: string, dest?: string): Promise<{ session: string; peer_id: string }> {
    const body: Record<string, unknown> = { peer_id: peerId };
    if (dest) body.dest = dest;
    return this.call("POST", "/api/fetch", body);
  }

  transfers(): Promise<TransfersSnapshot> {
    return this.call("GET", "/api/transfers");
  }

  history(): Promise<{ records: HistoryRecord[]; skipped: number }> {
    return this.call("GET", "/api/history");
  }
}
