/** DOM rendering: draws a ViewState; all interaction goes through handlers. */

import { toggleShown } from "./reducer.js";
import type { AttackKind, ViewState } from "./types.js";

export interface Handlers {
  onToggle: (kind: AttackKind, index: number, on: boolean) => void;
  onSend: () => void;
}

const CELL_CLASS: Record<string, string> = {
  pending: "cell pending",
  arrived: "cell arrived",
  dropped: "cell dropped",
  "used-in-decode": "cell used",
};

function el(tag: string, className?: string, text?: string): HTMLElement {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function sparkline(values: number[], max = 1.0): HTMLElement {
  const svgNS = "http://www.w3.org/2000/svg";
  const svg = document.createElementNS(svgNS, "svg");
  svg.setAttribute("viewBox", "0 0 120 28");
  svg.setAttribute("class", "spark");
  if (values.length > 1) {
    const step = 120 / (values.length - 1);
    const points = values
      .map((v, i) => `${(i * step).toFixed(1)},${(26 - (v / max) * 24).toFixed(1)}`)
      .join(" ");
    const line = document.createElementNS(svgNS, "polyline");
    line.setAttribute("points", points);
    svg.appendChild(line);
  }
  return svg as unknown as HTMLElement;
}

function attackPanel(view: ViewState, handlers: Handlers): HTMLElement {
  const panel = el("div", "panel attacks");
  panel.appendChild(el("h2", undefined, "attacks"));
  const rows: Array<[AttackKind, string]> = [
    ["operator", "operator DoS"],
    ["relay", "relay DoS"],
    ["eavesdrop", "relay tap"],
  ];
  for (const [kind, label] of rows) {
    const row = el("div", "toggle-row");
    row.appendChild(el("span", "toggle-label", label));
    for (let index = 0; index < 3; index++) {
      const on = toggleShown(view, kind, index);
      const button = el("button", on ? "toggle on" : "toggle", String(index));
      button.setAttribute("data-kind", kind);
      button.setAttribute("data-index", String(index));
      if (!view.connected) button.setAttribute("disabled", "disabled");
      button.addEventListener("click", () => handlers.onToggle(kind, index, !on));
      row.appendChild(button);
    }
    panel.appendChild(row);
  }
  const send = el("button", "send", "send test message");
  if (!view.connected) send.setAttribute("disabled", "disabled");
  send.addEventListener("click", handlers.onSend);
  panel.appendChild(send);
  return panel;
}

function gridPanel(view: ViewState): HTMLElement {
  const panel = el("div", "panel grid-panel");
  panel.appendChild(el("h2", undefined, "share matrix"));
  const table = el("table", "grid");
  const head = el("tr");
  head.appendChild(el("th"));
  for (let c = 0; c < 3; c++) head.appendChild(el("th", undefined, `operator ${c}`));
  table.appendChild(head);
  view.grid.forEach((cells, r) => {
    const row = el("tr");
    row.appendChild(el("th", undefined, `relay ${r}`));
    cells.forEach((state) => {
      const cell = el("td", CELL_CLASS[state] ?? "cell");
      cell.title = state;
      row.appendChild(cell);
    });
    table.appendChild(row);
  });
  panel.appendChild(table);
  if (view.currentMsgId !== null) {
    panel.appendChild(el("p", "msgid", `message ${view.currentMsgId}`));
  }
  return panel;
}

function logPanel(view: ViewState): HTMLElement {
  const panel = el("div", "panel log-panel");
  panel.appendChild(el("h2", undefined, "messages"));
  const list = el("ul", "log");
  for (const row of [...view.messageLog].slice(-8).reverse()) {
    const latency = row.latencyMs === null ? "" : ` (${row.latencyMs.toFixed(1)} ms)`;
    list.appendChild(
      el("li", row.outcome, `${row.msgId} ${row.outcome}${latency}`),
    );
  }
  panel.appendChild(list);

  const rate =
    view.recoveryHistory.length > 0
      ? view.recoveryHistory.reduce((a, b) => a + b, 0) / view.recoveryHistory.length
      : null;
  const charts = el("div", "charts");
  const recovery = el("div", "chart");
  recovery.appendChild(
    el("h3", undefined, `recovery ${rate === null ? "-" : (rate * 100).toFixed(0) + "%"}`),
  );
  recovery.appendChild(sparkline(view.recoveryHistory));
  charts.appendChild(recovery);
  const entropy = el("div", "chart");
  const lastEntropy = view.entropyHistory[view.entropyHistory.length - 1];
  entropy.appendChild(
    el("h3", undefined, `tap entropy ${lastEntropy === undefined ? "-" : lastEntropy.toFixed(4)}`),
  );
  entropy.appendChild(sparkline(view.entropyHistory));
  charts.appendChild(entropy);
  panel.appendChild(charts);
  return panel;
}

export function render(view: ViewState, root: HTMLElement, handlers: Handlers): void {
  root.replaceChildren();
  const header = el("header");
  header.appendChild(el("h1", undefined, "gridshare"));
  header.appendChild(el("span", "scheme", view.scheme));
  header.appendChild(
    el("span", view.connected ? "status ok" : "status down",
       view.connected ? "live" : "offline"),
  );
  root.appendChild(header);
  if (view.banner) root.appendChild(el("div", "banner", view.banner));
  const main = el("main");
  main.appendChild(gridPanel(view));
  main.appendChild(attackPanel(view, handlers));
  main.appendChild(logPanel(view));
  root.appendChild(main);
}
