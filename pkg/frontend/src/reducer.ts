/**
 * Pure view reducer: (state, action) -> state, no I/O, no mutation.
 *
 * Replaying the same snapshot and event feed always lands on the same
 * final view, which is what the session-replay tests pin down.
 */

import type {
  Action,
  CellState,
  ControlEvent,
  MessageRow,
  Snapshot,
  ViewState,
} from "./types.js";

export const HISTORY_CAP = 120;
export const LOG_CAP = 50;

const emptyGrid = (): CellState[][] =>
  Array.from({ length: 3 }, () => Array<CellState>(3).fill("pending"));

export function initialView(): ViewState {
  return {
    connected: false,
    banner: null,
    scheme: "two-layer",
    attacks: {
      operators: [false, false, false],
      relays: [false, false, false],
      taps: {},
    },
    pendingToggles: {},
    currentMsgId: null,
    grid: emptyGrid(),
    messageLog: [],
    recoveryHistory: [],
    entropyHistory: [],
    lastSeq: 0,
  };
}

const pushCapped = <T>(items: T[], value: T, cap: number): T[] =>
  [...items, value].slice(-cap);

const toggleKey = (kind: string, index: number) => `${kind}-${index}`;

function gridWith(
  grid: CellState[][],
  row: number,
  col: number,
  state: CellState,
): CellState[][] {
  return grid.map((cells, r) =>
    r === row ? cells.map((c, i) => (i === col ? state : c)) : [...cells],
  );
}

function settleGrid(grid: CellState[][]): CellState[][] {
  // once a message finishes, anything that never arrived was lost
  return grid.map((cells) =>
    cells.map((c) => (c === "pending" ? "dropped" : c)),
  );
}

function gridFromSnapshot(message: Snapshot["messages"][number]): CellState[][] {
  let grid = emptyGrid();
  for (const fragment of Object.values(message.fragments)) {
    fragment.cells.forEach((rowCells, r) => {
      rowCells.forEach((present, c) => {
        if (present) grid = gridWith(grid, r, c, "arrived");
      });
    });
    for (const [r, c] of fragment.cells_used) {
      grid = gridWith(grid, r, c, "used-in-decode");
    }
  }
  return message.outcome === "pending" ? grid : settleGrid(grid);
}

function applySnapshot(view: ViewState, snapshot: Snapshot): ViewState {
  const last = snapshot.messages[snapshot.messages.length - 1];
  const log: MessageRow[] = snapshot.messages
    .filter((m) => m.outcome !== "pending")
    .map((m) => ({
      msgId: m.msg_id,
      outcome: m.outcome as "recovered" | "timeout",
      latencyMs: m.latency_s === null ? null : m.latency_s * 1000,
    }));
  return {
    ...view,
    banner: null,
    scheme: snapshot.scheme,
    attacks: {
      operators: [...snapshot.attacks.operators],
      relays: [...snapshot.attacks.relays],
      taps: { ...snapshot.attacks.taps },
    },
    currentMsgId: last ? last.msg_id : null,
    grid: last ? gridFromSnapshot(last) : emptyGrid(),
    messageLog: log.slice(-LOG_CAP),
    recoveryHistory: log
      .slice(-HISTORY_CAP)
      .map((m) => (m.outcome === "recovered" ? 1 : 0)),
    lastSeq: snapshot.latest_seq,
  };
}

function applyServerEvent(view: ViewState, ev: ControlEvent): ViewState {
  const next = { ...view, lastSeq: Math.max(view.lastSeq, ev.seq ?? 0) };
  switch (ev.event) {
    case "cell-arrived": {
      if (ev.row === undefined || ev.col === undefined) return next;
      let grid = view.grid;
      let currentMsgId = view.currentMsgId;
      if (ev.msg_id !== undefined && ev.msg_id !== view.currentMsgId) {
        grid = emptyGrid();
        currentMsgId = ev.msg_id;
      }
      return {
        ...next,
        currentMsgId,
        grid: gridWith(grid, ev.row, ev.col, "arrived"),
      };
    }
    case "fragment-decoded": {
      if (ev.msg_id !== view.currentMsgId || !ev.cells_used) return next;
      let grid = view.grid;
      for (const [r, c] of ev.cells_used) {
        grid = gridWith(grid, r, c, "used-in-decode");
      }
      return { ...next, grid };
    }
    case "message-recovered":
    case "message-timeout": {
      const outcome = ev.event === "message-recovered" ? "recovered" : "timeout";
      const row: MessageRow = {
        msgId: ev.msg_id ?? -1,
        outcome,
        latencyMs:
          ev.latency_ms ??
          (typeof ev.latency_s === "number" ? ev.latency_s * 1000 : null),
      };
      return {
        ...next,
        grid: ev.msg_id === view.currentMsgId ? settleGrid(view.grid) : view.grid,
        messageLog: pushCapped(view.messageLog, row, LOG_CAP),
        recoveryHistory: pushCapped(
          view.recoveryHistory,
          outcome === "recovered" ? 1 : 0,
          HISTORY_CAP,
        ),
      };
    }
    case "attack-toggled": {
      if (ev.index === undefined || ev.on === undefined) return next;
      const attacks = {
        operators: [...view.attacks.operators],
        relays: [...view.attacks.relays],
        taps: { ...view.attacks.taps },
      };
      if (ev.kind === "operator") attacks.operators[ev.index] = ev.on;
      else if (ev.kind === "relay") attacks.relays[ev.index] = ev.on;
      else if (ev.kind === "eavesdrop") {
        const point = ev.point ?? `relay-${ev.index}`;
        if (ev.on) attacks.taps[point] = true;
        else delete attacks.taps[point];
      }
      const pendingToggles = { ...view.pendingToggles };
      delete pendingToggles[toggleKey(ev.kind ?? "", ev.index)];
      return { ...next, attacks, pendingToggles };
    }
    case "scheme-changed":
      return ev.scheme ? { ...next, scheme: ev.scheme } : next;
    default:
      // dispatch, relay-dropped, send-suppressed, integrity-violation:
      // nothing to draw per-cell (relays do not inspect packets)
      return next;
  }
}

export function reduce(view: ViewState, action: Action): ViewState {
  switch (action.type) {
    case "snapshot":
      return applySnapshot(view, action.snapshot);
    case "server-event":
      return applyServerEvent(view, action.event);
    case "metrics": {
      const samples = Object.values(action.metrics.tapped_entropy);
      if (!samples.length) return view;
      const mean = samples.reduce((a, b) => a + b, 0) / samples.length;
      return {
        ...view,
        entropyHistory: pushCapped(view.entropyHistory, mean, HISTORY_CAP),
      };
    }
    case "connection":
      return {
        ...view,
        connected: action.connected,
        banner: action.connected ? null : "control plane offline - reconnecting",
      };
    case "toggle-requested":
      return {
        ...view,
        banner: null,
        pendingToggles: {
          ...view.pendingToggles,
          [toggleKey(action.attack, action.index)]: action.on,
        },
      };
    case "toggle-rejected": {
      const pendingToggles = { ...view.pendingToggles };
      delete pendingToggles[toggleKey(action.attack, action.index)];
      return {
        ...view,
        pendingToggles,
        banner: `command rejected: ${action.reason}`,
      };
    }
  }
}

/** Effective switch position: optimistic request until the event confirms. */
export function toggleShown(
  view: ViewState,
  kind: "operator" | "relay" | "eavesdrop",
  index: number,
): boolean {
  const pending = view.pendingToggles[toggleKey(kind, index)];
  if (pending !== undefined) return pending;
  if (kind === "operator") return view.attacks.operators[index] ?? false;
  if (kind === "relay") return view.attacks.relays[index] ?? false;
  return view.attacks.taps[`relay-${index}`] ?? false;
}

export function replay(
  events: ControlEvent[],
  start: ViewState = initialView(),
): ViewState {
  return events.reduce(
    (view, event) => reduce(view, { type: "server-event", event }),
    start,
  );
}
