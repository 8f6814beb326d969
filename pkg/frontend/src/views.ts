// Pure render functions: store in, HTML string out. All dynamic text goes
// through escapeHtml; state labels are validated against the known enums
// so the panel can never invent (or echo) a state string.

import type { AppStore } from "./store.js";
import { KNOWN_STATES } from "./types.js";

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;")
    .replace(/'/g, "&#39;");
}

export function stateLabel(state: string | null | undefined): string {
  if (!state) return "?";
  return KNOWN_STATES.has(state) ? state : "?";
}

function humanBytes(n: number): string {
  if (n < 1024) return `${n} B`;
  const units = ["KiB", "MiB", "GiB", "TiB"];
  let value = n;
  for (const unit of units) {
    value /= 1024;
    if (value < 1024 || unit === "TiB") return `${value.toFixed(1)} ${unit}`;
  }
  return `${n} B`;
}

export function viewHealthBanner(store: AppStore): string {
  if (store.health === "ok") {
    return `<div class="banner ok">daemon up · v${escapeHtml(store.version)}</div>`;
  }
  if (store.health === "down") {
    return `<div class="banner down">daemon unreachable — retrying…
      <button data-action="retry-health">retry now</button></div>`;
  }
  return `<div class="banner">connecting…</div>`;
}

export function viewHome(store: AppStore): string {
  const disabled = store.health === "ok" ? "" : "disabled";
  return `
  <section class="home">
    <div class="card">
      <h2>Send</h2>
      <input id="share-paths" type="text" placeholder="/path/to/file, /path/to/dir" ${disabled}>
      <button data-action="share" ${disabled}>share</button>
      <button data-action="stop-share" ${disabled}>stop sharing</button>
    </div>
    <div class="card">
      <h2>Receive</h2>
      <button data-action="refresh-peers" ${disabled}>scan for senders</button>
      ${viewPeers(store, disabled)}
    </div>
  </section>`;
}

export function viewPeers(store: AppStore, disabled = ""): string {
  if (store.peers.length === 0) {
    return `<p class="muted">no peers found yet</p>`;
  }
  const rows = store.peers.map((p) => `
    <li>
      <span class="peer-name">${escapeHtml(p.display_name)}</span>
      <span class="muted">${escapeHtml(p.platform)} · ${escapeHtml(p.host)}:${p.transfer_port}</span>
      <button data-action="fetch-peer" data-peer-id="${escapeHtml(p.peer_id)}" ${disabled}>
        receive
      </button>
    </li>`);
  return `<ul class="peers">${rows.join("")}</ul>`;
}

export function viewApprovalModal(store: AppStore): string {
  const approval = store.approval;
  if (!approval) return "";
  const who = `${escapeHtml(approval.receiver.display_name)} (${escapeHtml(approval.receiver.platform)})`;
  const error = approval.error
    ? `<p class="error">${escapeHtml(approval.error)}</p>`
    : "";
  return `
  <div class="modal" data-request-id="${escapeHtml(approval.requestId)}">
    <div class="modal-body">
      <h3>incoming request</h3>
      <p>${who} wants to receive your files.</p>
      ${error}
      <button data-action="approve" data-request-id="${escapeHtml(approval.requestId)}">Accept</button>
      <button data-action="deny" data-request-id="${escapeHtml(approval.requestId)}">Deny</button>
    </div>
  </div>`;
}

export function viewSending(store: AppStore): string {
  const share = store.snapshot?.share;
  if (!share) return "";
  const files = share.files.map((f) =>
    `<li>${escapeHtml(f.name)} <span class="muted">${humanBytes(f.size_bytes)}</span></li>`);
  return `
  <section class="card session" data-role="sending">
    <h2>Sending · <span class="state">${stateLabel(share.session_state)}</span></h2>
    <ul>${files.join("")}</ul>
    <p class="muted">${humanBytes(share.total_bytes)} total</p>
  </section>`;
}

export function viewReceiving(store: AppStore): string {
  const rx = store.receiving;
  if (!rx) return "";
  if (rx.outcome === "denied") {
    return `
    <section class="card session terminal" data-role="receiving">
      <h2>Receive denied</h2>
      <p>${escapeHtml(rx.peerName)} denied the request.</p>
      <a href="#history" data-action="show-history">history</a>
    </section>`;
  }
  const ordinals = Object.keys(rx.files).map(Number).sort((a, b) => a - b);
  const bars = ordinals.map((i) => {
    const f = rx.files[i]!;
    const pct = Math.max(0, Math.min(100, f.percent));
    return `
      <li>
        <span class="file-name">${escapeHtml(f.name)}</span>
        <span class="pct">${pct.toFixed(0)}%</span>
        <div class="bar"><div class="fill" style="width:${pct.toFixed(1)}%"></div></div>
      </li>`;
  });
  if (rx.outcome === null) {
    return `
    <section class="card session" data-role="receiving">
      <h2>Receiving from ${escapeHtml(rx.peerName)}
        <span class="rate">${store.receivingRate().toFixed(1)} MB/s</span></h2>
      <ul class="progress">${bars.join("")}</ul>
    </section>`;
  }
  const headline = rx.outcome === "completed" ? "Receive complete" : "Receive failed";
  const failure = rx.failure ? `<p class="error">${escapeHtml(rx.failure)}</p>` : "";
  return `
  <section class="card session terminal" data-role="receiving">
    <h2>${headline}</h2>
    <ul class="progress">${bars.join("")}</ul>
    ${failure}
    <a href="#history" data-action="show-history">history</a>
  </section>`;
}

export function viewHistory(store: AppStore): string {
  if (store.history.length === 0) return `<p class="muted">no transfers yet</p>`;
  const rows = store.history.map((r) => `
    <tr>
      <td>${escapeHtml(r.timestamp)}</td>
      <td>${escapeHtml(r.direction)}</td>
      <td>${escapeHtml(r.peer_name)}</td>
      <td>${r.files.length}</td>
      <td>${humanBytes(r.total_bytes)}</td>
      <td>${escapeHtml(r.outcome)}${r.reason ? ` (${escapeHtml(r.reason)})` : ""}</td>
    </tr>`);
  return `
  <table class="history">
    <thead><tr><th>when</th><th>dir</th><th>peer</th><th>files</th><th>bytes</th><th>outcome</th></tr></thead>
    <tbody>${rows.join("")}</tbody>
  </table>`;
}

export function renderApp(store: AppStore): string {
  return `
  <main>
    <h1>photon</h1>
    ${viewHealthBanner(store)}
    ${viewHome(store)}
    ${viewSending(store)}
    ${viewReceiving(store)}
    <section class="card" id="history">
      <h2>History</h2>
      ${viewHistory(store)}
    </section>
  </main>
  ${viewApprovalModal(store)}`;
}
