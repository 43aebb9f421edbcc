/** Browser bootstrap: wire the client, the reducer, and the renderer. */

import { CommandRejected, ControlPlaneClient } from "./client.js";
import { initialView, reduce } from "./reducer.js";
import type { Action, AttackKind, ViewState } from "./types.js";
import { render } from "./view.js";

const base = (window as { GRIDSHARE_BASE?: string }).GRIDSHARE_BASE ?? "";
const client = new ControlPlaneClient(base);
const root = document.getElementById("app") as HTMLElement;

let view: ViewState = initialView();

function dispatch(action: Action): void {
  view = reduce(view, action);
  render(view, root, handlers);
}

const handlers = {
  onToggle(kind: AttackKind, index: number, on: boolean): void {
    dispatch({ type: "toggle-requested", attack: kind, index, on });
    client.postAttack(kind, index, on).catch((error: unknown) => {
      const reason =
        error instanceof CommandRejected ? error.reason : String(error);
      dispatch({ type: "toggle-rejected", attack: kind, index, on, reason });
    });
  },
  onSend(): void {
    client.postSend(256).catch(() => {
      dispatch({ type: "connection", connected: false });
    });
  },
};

async function refreshMetrics(): Promise<void> {
  try {
    dispatch({ type: "metrics", metrics: await client.getMetrics() });
  } catch {
    // metrics are cosmetic; the event stream drives reconnection
  }
}

async function start(): Promise<void> {
  render(view, root, handlers);
  try {
    const snapshot = await client.getState();
    dispatch({ type: "snapshot", snapshot });
    dispatch({ type: "connection", connected: true });
  } catch {
    dispatch({ type: "connection", connected: false });
  }
  client.subscribe(
    view.lastSeq,
    (event) => {
      dispatch({ type: "server-event", event });
      if (event.event === "message-recovered" || event.event === "attack-toggled") {
        void refreshMetrics();
      }
    },
    (connected) => dispatch({ type: "connection", connected }),
  );
}

void start();
