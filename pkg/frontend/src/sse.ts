/**
 * Minimal SSE consumer over fetch + ReadableStream.
 *
 * Works in both browser and node (no EventSource dependency), supports the
 * Authorization header EventSource lacks, and reconnects with backoff when
 * the stream drops.
 */

export interface SseEvent {
  event: string;
  data: string;
}

export function parseSseChunk(buffer: string): { events: SseEvent[]; rest: string } {
  const events: SseEvent[] = [];
  const blocks = buffer.split("\n\n");
  const rest = blocks.pop() ?? "";
  for (const block of blocks) {
    let event = "message";
    const dataLines: string[] = [];
    for (const line of block.split("\n")) {
      if (line.startsWith("event: ")) event = line.slice(7).trim();
      else if (line.startsWith("data: ")) dataLines.push(line.slice(6));
    }
    if (dataLines.length) events.push({ event, data: dataLines.join("\n") });
  }
  return { events, rest };
}

export interface SseOptions {
  headers?: Record<string, string>;
  onEvent: (e: SseEvent) => void;
  onStatus?: (s: "connected" | "lost") => void;
  retryMs?: number;
}

/** Returns a stop function. */
export function connectSse(url: string, opts: SseOptions): () => void {
  let stopped = false;
  let controller: AbortController | null = null;

  const loop = async () => {
    while (!stopped) {
      controller = new AbortController();
      try {
        const r = await fetch(url, { headers: opts.headers, signal: controller.signal });
        if (!r.ok || !r.body) throw new Error(`stream status ${r.status}`);
        opts.onStatus?.("connected");
        const reader = r.body.getReader();
        const decoder = new TextDecoder();
        let buffer = "";
        for (;;) {
          const { done, value } = await reader.read();
          if (done) break;
          buffer += decoder.decode(value, { stream: true });
          const { events, rest } = parseSseChunk(buffer);
          buffer = rest;
          for (const e of events) opts.onEvent(e);
        }
      } catch {
        // fall through to reconnect
      }
      if (stopped) break;
      opts.onStatus?.("lost");
      await new Promise((res) => setTimeout(res, opts.retryMs ?? 1000));
    }
  };
  void loop();
  return () => {
    stopped = true;
    controller?.abort();
  };
}
