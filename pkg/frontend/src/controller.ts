// Glue between user intent, the API client, and the store. Kept free of
// DOM access so the flows are unit-testable against a mocked API.

import { ApiError, ControlApi } from "./api.js";
import type { AppStore } from "./store.js";

/** Accept or reject an incoming permission request. The modal stays up
 *  with an error note when the daemon rejects the decision (expired). */
export async function decideRequest(api: ControlApi, store: AppStore,
                                    requestId: string,
                                    decision: "approve" | "deny"): Promise<boolean> {
  try {
    await api.decide(requestId, decision);
    return true;
  } catch (err) {
    if (err instanceof ApiError && err.status >= 400 && err.status < 500) {
      store.decisionFailed("request expired");
    } else {
      store.decisionFailed("decision failed; try again");
    }
    return false;
  }
}

/** Pull fresh snapshots; used on startup, after reconnects, and whenever
 *  an event marks the cached state stale. */
export async function resync(api: ControlApi, store: AppStore): Promise<void> {
  store.applyState(await api.state());
  store.applyTransfers(await api.transfers());
  store.setHistory((await api.history()).records);
}

export async function refreshHealth(api: ControlApi, store: AppStore): Promise<boolean> {
  try {
    const health = await api.health();
    const wasDown = store.health !== "ok";
    store.setHealth(true, health.version);
    if (wasDown) await resync(api, store);
    return true;
  } catch {
    store.setHealth(false);
    return false;
  }
}
