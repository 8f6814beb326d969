// Browser bootstrap: wire the store, API client, event stream, and DOM.

import { ApiError, ControlApi } from "./api.js";
import { decideRequest, refreshHealth, resync } from "./controller.js";
import { EventStream } from "./sse.js";
import { AppStore } from "./store.js";
import { renderApp } from "./views.js";

const store = new AppStore();
const api = new ControlApi();
const root = document.getElementById("app")!;

function render(): void {
  root.innerHTML = renderApp(store);
}

async function safeResync(): Promise<void> {
  try {
    await resync(api, store);
  } catch {
    store.setHealth(false);
  }
}

const stream = new EventStream({
  onEvent: (event) => {
    store.applyEvent(event);
    if (store.needsStateRefresh) void safeResync();
  },
  onOpen: async (reconnect) => {
    if (reconnect) await safeResync();
  },
});

async function handleAction(target: HTMLElement): Promise<void> {
  const action = target.dataset.action;
  try {
    switch (action) {
      case "retry-health":
        await refreshHealth(api, store);
        break;
      case "share": {
        const input = document.getElementById("share-paths") as HTMLInputElement;
        const paths = input.value.split(",").map((p) => p.trim()).filter(Boolean);
        if (paths.length) {
          await api.share(paths);
          await safeResync();
        }
        break;
      }
      case "stop-share":
        await api.stopShare();
        await safeResync();
        break;
      case "refresh-peers":
        store.setPeers((await api.peers()).peers);
        break;
      case "fetch-peer": {
        const peerId = target.dataset.peerId;
        if (peerId) await api.fetchFrom(peerId);
        break;
      }
      case "approve":
      case "deny": {
        const requestId = target.dataset.requestId;
        if (requestId) await decideRequest(api, store, requestId, action);
        break;
      }
      default:
        break;
    }
  } catch (err) {
    if (err instanceof ApiError) {
      console.warn(`control API: ${err.status} ${err.message}`);
    } else {
      store.setHealth(false);
    }
  }
}

document.addEventListener("click", (raw) => {
  const target = (raw.target as HTMLElement).closest<HTMLElement>("[data-action]");
  if (target) void handleAction(target);
});

store.subscribe(render);
render();
void refreshHealth(api, store);
setInterval(() => void refreshHealth(api, store), 3000);
void stream.run();
