// Single state store behind the panel. All mutation flows through
// applyEvent / applyState / applyTransfers / setHealth, so the views stay
// pure functions of this object.

import type {
  ApiEvent,
  FileProgress,
  HistoryRecord,
  Peer,
  PeerIdentity,
  StateSnapshot,
  TransfersSnapshot,
} from "./types.js";

export interface ApprovalModal {
  requestId: string;
  receiver: PeerIdentity;
  error: string | null;
}

export interface ReceivingSession {
  session: string;
  peerName: string;
  files: Record<number, FileProgress>;
  outcome: string | null; // completed | denied | failed, null while live
  failure: string | null;
  startedAt: number;
  bytesDone: number;
}

type Listener = () => void;

export class AppStore {
  health: "unknown" | "ok" | "down" = "unknown";
  version = "";
  snapshot: StateSnapshot | null = null;
  peers: Peer[] = [];
  approval: ApprovalModal | null = null;
  receiving: ReceivingSession | null = null;
  senderOutcome: string | null = null; // completed | stopped, for the summary card
  history: HistoryRecord[] = [];
  needsStateRefresh = false;

  private listeners: Listener[] = [];

  constructor(private now: () => number = () => Date.now()) {}

  subscribe(fn: Listener): () => void {
    this.listeners.push(fn);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== fn);
    };
  }

  private changed(): void {
    for (const l of this.listeners) l();
  }

  setHealth(up: boolean, version = ""): void {
    const next = up ? "ok" : "down";
    if (next !== this.health || (version && version !== this.version)) {
      this.health = next;
      if (version) this.version = version;
      this.changed();
    }
  }

  setPeers(peers: Peer[]): void {
    this.peers = peers;
    this.changed();
  }

  setHistory(records: HistoryRecord[]): void {
    this.history = records;
    this.changed();
  }

  private mergeReceive(view: import("./types.js").ReceiveView): void {
    const rx: ReceivingSession = this.receiving ?? {
      session: view.session,
      peerName: view.peer.display_name,
      files: {},
      outcome: null,
      failure: null,
      startedAt: this.now(),
      bytesDone: 0,
    };
    rx.session = view.session;
    rx.peerName = view.peer.display_name;
    rx.outcome = view.outcome;
    rx.failure = view.failure;
    rx.files = {};
    view.files.forEach((f, i) => {
      rx.files[i] = f;
    });
    rx.bytesDone = view.bytes_done;
    this.receiving = rx;
  }

  applyState(snapshot: StateSnapshot): void {
    this.snapshot = snapshot;
    this.needsStateRefresh = false;
    if (snapshot.receive) this.mergeReceive(snapshot.receive);
    this.changed();
  }

  /** Resync after a dropped event stream: snapshots win over stale ticks. */
  applyTransfers(snapshot: TransfersSnapshot): void {
    if (snapshot.receive) this.mergeReceive(snapshot.receive);
    if (snapshot.share && this.snapshot?.share) {
      this.snapshot.share.session_state = snapshot.share.session_state;
    }
    this.changed();
  }

  applyEvent(event: ApiEvent): void {
    switch (event.type) {
      case "request_received": {
        const receiver = event.data.receiver as PeerIdentity | undefined;
        if (receiver && typeof event.data.request_id === "string") {
          this.approval = { requestId: event.data.request_id, receiver, error: null };
        }
        break;
      }
      case "granted":
        this.approval = null;
        if (this.snapshot?.share) this.snapshot.share.session_state = "Active";
        break;
      case "expired":
      case "share_started":
      case "share_stopped":
        if (event.type === "expired") this.approval = null;
        this.needsStateRefresh = true;
        break;
      case "fetch_started": {
        const peer = event.data.peer as { display_name?: string } | undefined;
        this.receiving = {
          session: event.session ?? "",
          peerName: peer?.display_name ?? "?",
          files: {},
          outcome: null,
          failure: null,
          startedAt: this.now(),
          bytesDone: 0,
        };
        break;
      }
      case "transfer_progress": {
        const rx = this.receiving;
        if (!rx || rx.session !== event.session) break;
        const ordinal = Number(event.data.ordinal ?? 0);
        rx.files[ordinal] = {
          name: String(event.data.name ?? ""),
          bytes_done: Number(event.data.bytes_done ?? 0),
          size_bytes: Number(event.data.size_bytes ?? 0),
          percent: Number(event.data.percent ?? 0),
          finished: Boolean(event.data.finished),
        };
        rx.bytesDone = Object.values(rx.files)
          .reduce((sum, f) => sum + f.bytes_done, 0);
        break;
      }
      case "denied":
      case "completed":
      case "failed": {
        if (event.data.role === "receiving" ||
            (this.receiving && event.session === this.receiving.session)) {
          const rx = this.receiving;
          if (rx) {
            rx.outcome = event.type;
            rx.failure = (event.data.failure as string | null) ?? null;
          }
        } else {
          // sender-side lifecycle event
          this.approval = null;
          if (event.type === "completed") {
            this.senderOutcome = "completed";
            if (this.snapshot?.share) this.snapshot.share.session_state = "Completed";
          } else if (event.type === "denied" && this.snapshot?.share) {
            this.snapshot.share.session_state = "Serving";
          }
        }
        break;
      }
      default:
        break; // unknown event types are ignored, never rendered
    }
    this.changed();
  }

  decisionFailed(message: string): void {
    if (this.approval) {
      this.approval.error = message;
      this.changed();
    }
  }

  /** Aggregate receive rate in MB/s for the live view. */
  receivingRate(): number {
    const rx = this.receiving;
    if (!rx) return 0;
    const elapsed = Math.max((this.now() - rx.startedAt) / 1000, 1e-6);
    return rx.bytesDone / elapsed / (1 << 20);
  }
}
