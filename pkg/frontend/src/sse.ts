/**
 * Minimal server-sent-events reader over fetch streaming.
 *
 * Works in browsers and in node 20 (no EventSource dependency), resumes
 * with Last-Event-ID after drops, and reports connection status changes.
 */

export interface SSEFrame {
  id?: string;
  event?: string;
  data: string;
}

export interface SubscribeOptions {
  sinceSeq?: number;
  onFrame: (frame: SSEFrame) => void;
  onStatus?: (connected: boolean) => void;
  retryMs?: number;
}

export function parseChunk(buffer: string): { frames: SSEFrame[]; rest: string } {
  const frames: SSEFrame[] = [];
  const blocks = buffer.split("\n\n");
  const rest = blocks.pop() ?? "";
  for (const block of blocks) {
    const frame: SSEFrame = { data: "" };
    const dataLines: string[] = [];
    for (const line of block.split("\n")) {
      if (line.startsWith(":")) continue; // comment / keep-alive
      const sep = line.indexOf(":");
      if (sep < 0) continue;
      const field = line.slice(0, sep);
      const value = line.slice(sep + 1).replace(/^ /, "");
      if (field === "id") frame.id = value;
      else if (field === "event") frame.event = value;
      else if (field === "data") dataLines.push(value);
    }
    frame.data = dataLines.join("\n");
    if (frame.data || frame.event || frame.id) frames.push(frame);
  }
  return { frames, rest };
}

/** Subscribe to an SSE endpoint; returns a function that stops the stream. */
export function subscribeSSE(url: string, options: SubscribeOptions): () => void {
  let stopped = false;
  let controller: AbortController | null = null;
  let lastId = options.sinceSeq !== undefined ? String(options.sinceSeq) : undefined;
  const retryMs = options.retryMs ?? 1000;

  const loop = async () => {
    while (!stopped) {
      controller = new AbortController();
      try {
        const headers: Record<string, string> = { Accept: "text/event-stream" };
        if (lastId !== undefined) headers["Last-Event-ID"] = lastId;
        const response = await fetch(url, { headers, signal: controller.signal });
        if (!response.ok || !response.body) {
          throw new Error(`event stream returned ${response.status}`);
        }
        options.onStatus?.(true);
        const reader = response.body.getReader();
        const decoder = new TextDecoder();
        let buffer = "";
        for (;;) {
          const { done, value } = await reader.read();
          if (done) break;
          buffer += decoder.decode(value, { stream: true });
          const { frames, rest } = parseChunk(buffer);
          buffer = rest;
          for (const frame of frames) {
            if (frame.id !== undefined) lastId = frame.id;
            options.onFrame(frame);
          }
        }
      } catch {
        // fall through to reconnect
      }
      if (stopped) break;
      options.onStatus?.(false);
      await new Promise((resolve) => setTimeout(resolve, retryMs));
    }
  };
  void loop();

  return () => {
    stopped = true;
    controller?.abort();
  };
}
