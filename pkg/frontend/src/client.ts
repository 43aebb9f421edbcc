/** Thin HTTP client for the control plane; no view logic lives here. */

import { subscribeSSE } from "./sse.js";
import type {
  AttackKind,
  CommandAck,
  ControlEvent,
  Metrics,
  Snapshot,
} from "./types.js";

export class CommandRejected extends Error {
  constructor(public reason: string) {
    super(reason);
  }
}

export class ControlPlaneClient {
  constructor(private baseUrl: string) {}

  private async getJson<T>(path: string): Promise<T> {
    const response = await fetch(`${this.baseUrl}${path}`);
    if (!response.ok) throw new Error(`${path} returned ${response.status}`);
    return (await response.json()) as T;
  }

  getState(): Promise<Snapshot> {
    return this.getJson<Snapshot>("/state");
  }

  getMetrics(): Promise<Metrics> {
    return this.getJson<Metrics>("/metrics");
  }

  private async post(path: string, body: unknown): Promise<CommandAck> {
    const response = await fetch(`${this.baseUrl}${path}`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
    const ack = (await response.json()) as CommandAck;
    if (!response.ok || !ack.ok) {
      throw new CommandRejected(ack.reason ?? `HTTP ${response.status}`);
    }
    return ack;
  }

  postAttack(kind: AttackKind, index: number, on: boolean): Promise<CommandAck> {
    return this.post("/attack", {
      verb: on ? "set-attack" : "clear-attack",
      type: kind,
      index,
    });
  }

  postSend(payloadSize: number, count = 1): Promise<CommandAck> {
    return this.post("/send", { payload_size: payloadSize, count });
  }

  /** Live event feed; returns a stop function. */
  subscribe(
    sinceSeq: number,
    onEvent: (event: ControlEvent) => void,
    onStatus?: (connected: boolean) => void,
  ): () => void {
    return subscribeSSE(`${this.baseUrl}/events`, {
      sinceSeq,
      onStatus,
      onFrame: (frame) => {
        if (!frame.data) return;
        try {
          onEvent(JSON.parse(frame.data) as ControlEvent);
        } catch {
          // tolerate malformed frames; the stream keeps its own ordering
        }
      },
    });
  }
}
