// Shapes served by the daemon control API.

export interface PeerIdentity {
  peer_id: string;
  display_name: string;
  platform: string;
  protocol_version: number;
}

export interface Peer {
  peer_id: string;
  display_name: string;
  platform: string;
  transfer_port: number;
  host: string;
}

export interface ApiEvent {
  type: string;
  session: string | null;
  data: Record<string, unknown>;
  seq: number;
}

export interface FileProgress {
  name: string;
  bytes_done: number;
  size_bytes: number;
  percent: number;
  finished: boolean;
}

export interface ShareView {
  session: string;
  session_state: string;
  files: { name: string; size_bytes: number }[];
  total_bytes: number;
}

export interface ReceiveView {
  session: string;
  peer: { peer_id: string; display_name: string };
  outcome: string | null;
  failure: string | null;
  files: FileProgress[];
  bytes_done: number;
  total_bytes: number;
}

export interface StateSnapshot {
  state: string;
  identity: PeerIdentity;
  transfer_port: number;
  share: ShareView | null;
  receive: ReceiveView | null;
}

export interface TransfersSnapshot {
  share: {
    session: string;
    session_state: string;
    bytes_served: number;
    total_bytes: number;
    percent: number;
  } | null;
  receive: ReceiveView | null;
}

export interface PendingRequest {
  id: string;
  receiver: PeerIdentity;
  received_at: number;
}

export interface HistoryRecord {
  timestamp: string;
  direction: string;
  peer_name: string;
  peer_id: string;
  files: { name: string; size_bytes: number }[];
  total_bytes: number;
  duration_seconds: number;
  outcome: string;
  reason?: string;
}

// The only state strings the daemon may hand us; anything else is a bug.
export const SENDER_STATES = [
  "Idle", "Serving", "PendingApproval", "Active", "Completed", "Terminated",
] as const;

export const RECEIVER_STATES = [
  "Discovering", "Requesting", "Denied", "Fetching", "Done", "Failed",
] as const;

export const KNOWN_STATES: ReadonlySet<string> = new Set([
  ...SENDER_STATES, ...RECEIVER_STATES,
]);
