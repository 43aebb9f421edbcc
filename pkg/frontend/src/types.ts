/** Wire types mirrored from the control plane API (docs/api.md). */

export type Scheme =
  | "two-layer"
  | "one-layer-all-of-3"
  | "one-layer-two-of-3"
  | "repetition";

export type AttackKind = "operator" | "relay" | "eavesdrop";

export type CellState = "pending" | "arrived" | "dropped" | "used-in-decode";

export interface ControlEvent {
  seq: number;
  event: string;
  msg_id?: number;
  fragment?: number;
  row?: number;
  col?: number;
  cells_used?: Array<[number, number]>;
  fragments?: number;
  latency_ms?: number;
  latency_s?: number | null;
  kind?: AttackKind;
  index?: number;
  on?: boolean;
  point?: string;
  scheme?: Scheme;
  reason?: string;
  [extra: string]: unknown;
}

export interface SnapshotFragment {
  cells: boolean[][];
  decoded: boolean;
  cells_used: Array<[number, number]>;
}

export interface SnapshotMessage {
  msg_id: number;
  outcome: "pending" | "recovered" | "timeout";
  latency_s: number | null;
  final_index: number | null;
  fragments: Record<string, SnapshotFragment>;
}

export interface Metrics {
  messages_recovered: number;
  messages_timeout: number;
  recovery_rate: number | null;
  recent_latencies_ms: number[];
  mean_latency_ms: number | null;
  tapped_entropy: Record<string, number>;
  uptime_s: number;
}

export interface Snapshot {
  scheme: Scheme;
  attacks: {
    operators: boolean[];
    relays: boolean[];
    taps: Record<string, boolean>;
  };
  messages: SnapshotMessage[];
  malformed_datagrams: number;
  metrics: Metrics;
  latest_seq: number;
  time: number;
}

export interface CommandAck {
  ok: boolean;
  reason?: string;
  [extra: string]: unknown;
}

/** One row of the on-screen message log. */
export interface MessageRow {
  msgId: number;
  outcome: "recovered" | "timeout";
  latencyMs: number | null;
}

/**
 * Everything the dashboard draws.  Derived purely by `reduce` from the
 * initial snapshot plus the action/event sequence; no protocol logic.
 */
export interface ViewState {
  connected: boolean;
  banner: string | null;
  scheme: Scheme;
  attacks: {
    operators: boolean[];
    relays: boolean[];
    taps: Record<string, boolean>;
  };
  /** optimistic toggles awaiting an attack-toggled event, keyed kind-index */
  pendingToggles: Record<string, boolean>;
  currentMsgId: number | null;
  grid: CellState[][];
  messageLog: MessageRow[];
  /** 1 per recovered message, 0 per timeout; ring-capped */
  recoveryHistory: number[];
  /** tapped-traffic entropy samples; ring-capped */
  entropyHistory: number[];
  lastSeq: number;
}

export type Action =
  | { type: "snapshot"; snapshot: Snapshot }
  | { type: "server-event"; event: ControlEvent }
  | { type: "metrics"; metrics: Metrics }
  | { type: "connection"; connected: boolean }
  | { type: "toggle-requested"; attack: AttackKind; index: number; on: boolean }
  | {
      type: "toggle-rejected";
      attack: AttackKind;
      index: number;
      on: boolean;
      reason: string;
    };
