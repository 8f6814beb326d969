// End-to-end panel flows against a fully mocked control API: the
// acceptance checks for the browser side live here.

import { describe, expect, it } from "vitest";

import { ControlApi, isDocumentedRoute } from "../src/api.js";
import { decideRequest, refreshHealth, resync } from "../src/controller.js";
import { EventStream } from "../src/sse.js";
import { AppStore } from "../src/store.js";
import { renderApp } from "../src/views.js";
import { jsonResponse, mockFetch, sseBody, sseEvent } from "./helpers.js";

const RX = { peer_id: "cd".repeat(16), display_name: "phone", platform: "android", protocol_version: 1 };
const REQUEST_ID = "ab".repeat(16);

const IDLE_STATE = {
  state: "idle",
  identity: { peer_id: "ee".repeat(16), display_name: "me", platform: "linux", protocol_version: 1 },
  transfer_port: 48852,
  share: null,
  receive: null,
};

describe("approve flow", () => {
  it("request event -> modal -> approve posts the documented body", async () => {
    const { fetchFn, calls } = mockFetch({
      [`POST /api/requests/${REQUEST_ID}/decision`]: { status: "ok" },
    });
    const api = new ControlApi(fetchFn);
    const store = new AppStore();

    store.applyEvent({ type: "request_received", session: "s1", seq: 1,
                       data: { request_id: REQUEST_ID, receiver: RX } });
    expect(renderApp(store)).toContain("incoming request");

    const okApprove = await decideRequest(api, store, REQUEST_ID, "approve");
    expect(okApprove).toBe(true);
    expect(calls[0]!.body).toEqual({ decision: "approve" });

    // the matching state event dismisses the modal
    store.applyEvent({ type: "granted", session: "s1", seq: 2,
                       data: { request_id: REQUEST_ID } });
    expect(store.approval).toBeNull();
    expect(renderApp(store)).not.toContain("incoming request");
  });

  it("deny posts the documented body", async () => {
    const { fetchFn, calls } = mockFetch({
      [`POST /api/requests/${REQUEST_ID}/decision`]: { status: "ok" },
    });
    const store = new AppStore();
    store.applyEvent({ type: "request_received", session: "s1", seq: 1,
                       data: { request_id: REQUEST_ID, receiver: RX } });
    await decideRequest(new ControlApi(fetchFn), store, REQUEST_ID, "deny");
    expect(calls[0]!.body).toEqual({ decision: "deny" });
  });

  it("a 4xx decision keeps the modal with a 'request expired' note", async () => {
    const { fetchFn } = mockFetch({
      [`POST /api/requests/${REQUEST_ID}/decision`]: () =>
        jsonResponse({ detail: "request already decided or expired" }, 409),
    });
    const store = new AppStore();
    store.applyEvent({ type: "request_received", session: "s1", seq: 1,
                       data: { request_id: REQUEST_ID, receiver: RX } });
    const ok = await decideRequest(new ControlApi(fetchFn), store, REQUEST_ID, "approve");
    expect(ok).toBe(false);
    const html = renderApp(store);
    expect(html).toContain("incoming request"); // modal persists
    expect(html).toContain("request expired");
  });
});

describe("progress to completion from a synthetic event script", () => {
  it("renders 100% and the summary", () => {
    const store = new AppStore();
    const script = [
      { type: "fetch_started", data: { peer: { display_name: "desk" } } },
      { type: "transfer_progress", data: { ordinal: 0, name: "a.bin", bytes_done: 0, size_bytes: 2048, percent: 0, finished: false } },
      { type: "transfer_progress", data: { ordinal: 0, name: "a.bin", bytes_done: 1024, size_bytes: 2048, percent: 50, finished: false } },
      { type: "transfer_progress", data: { ordinal: 0, name: "a.bin", bytes_done: 2048, size_bytes: 2048, percent: 100, finished: true } },
      { type: "completed", data: { role: "receiving", total_bytes: 2048 } },
    ];
    for (const [i, e] of script.entries()) {
      store.applyEvent({ type: e.type, session: "s2", data: e.data, seq: i + 1 });
    }
    const html = renderApp(store);
    expect(html).toContain("Receive complete");
    expect(html).toContain("width:100.0%");
  });
});

describe("stream drop and resync", () => {
  it("recovers the live snapshot from /api/transfers after a reconnect", async () => {
    const transfersSnapshot = {
      share: null,
      receive: {
        session: "s3",
        peer: { peer_id: RX.peer_id, display_name: "phone" },
        outcome: null,
        failure: null,
        files: [{ name: "a.bin", bytes_done: 1500, size_bytes: 2000, percent: 75, finished: false }],
        bytes_done: 1500,
        total_bytes: 2000,
      },
    };
    const { fetchFn, calls } = mockFetch({
      "GET /api/state": IDLE_STATE,
      "GET /api/transfers": transfersSnapshot,
      "GET /api/history": { records: [], skipped: 0 },
    });
    const api = new ControlApi(fetchFn);
    const store = new AppStore();

    // stale view from before the drop
    store.applyEvent({ type: "fetch_started", session: "s3", seq: 1,
                       data: { peer: { display_name: "phone" } } });
    store.applyEvent({ type: "transfer_progress", session: "s3", seq: 2,
                       data: { ordinal: 0, name: "a.bin", bytes_done: 100,
                               size_bytes: 2000, percent: 5, finished: false } });

    // the stream: one good connect that drops, then a reconnect whose
    // resync runs before the new events flow (as in the app)
    let connects = 0;
    const resyncPercents: number[] = [];
    const stream = new EventStream({
      onEvent: (e) => store.applyEvent(e),
      onOpen: async (reconnect) => {
        if (reconnect) {
          await resync(api, store);
          resyncPercents.push(store.receiving!.files[0]!.percent);
        }
      },
      fetchFn: async (url) => {
        expect(url).toBe("/api/events");
        connects += 1;
        if (connects === 1) return new Response(sseBody([": hi\n\n"])); // drops
        if (connects === 2) {
          return new Response(sseBody([
            sseEvent("transfer_progress", "s3",
                     { ordinal: 0, name: "a.bin", bytes_done: 2000,
                       size_bytes: 2000, percent: 100, finished: true }, 9),
          ]));
        }
        stream.stop();
        throw new Error("test over");
      },
      sleepFn: async () => undefined,
    });
    await stream.run();
    // the resync snapshot replaced the stale 5% with the server's 75%...
    expect(resyncPercents).toEqual([75]);
    // ...and the event that followed brought it to 100%
    expect(store.receiving!.files[0]!.percent).toBe(100);
    expect(store.receiving!.session).toBe("s3");

    // every route touched during the whole exercise is documented
    for (const call of calls) {
      expect(isDocumentedRoute(call.url), call.url).toBe(true);
    }
  });
});

describe("daemon health flap", () => {
  it("disables actions when down and re-enables without reload", async () => {
    let healthy = false;
    const { fetchFn, calls } = mockFetch({
      "GET /api/health": () =>
        healthy ? jsonResponse({ status: "ok", version: "0.1.0" })
                : new Response("", { status: 503 }),
      "GET /api/state": IDLE_STATE,
      "GET /api/transfers": { share: null, receive: null },
      "GET /api/history": { records: [], skipped: 0 },
    });
    const api = new ControlApi(fetchFn);
    const store = new AppStore();

    await refreshHealth(api, store);
    expect(store.health).toBe("down");
    let html = renderApp(store);
    expect(html).toContain("daemon unreachable");
    expect(html).toContain("disabled");

    healthy = true;
    await refreshHealth(api, store);
    expect(store.health).toBe("ok");
    html = renderApp(store);
    expect(html).not.toContain("daemon unreachable");
    expect(html).not.toContain('data-action="share" disabled');
    for (const call of calls) {
      expect(isDocumentedRoute(call.url), call.url).toBe(true);
    }
  });
});
