/** Live latency dashboard state fed by the SSE metrics stream. */

import { connectSse } from "./sse.js";
import type { MetricsEvent } from "./types.js";

export interface DashboardPoint {
  tick: number;
  time: number;
  mean: number | null;
  p95: number | null;
  p99: number | null;
  queueDepth: number;
}

export class MetricsBuffer {
  private points: DashboardPoint[] = [];

  constructor(private capacity = 300) {}

  push(event: MetricsEvent): DashboardPoint {
    const e2e = event.pipeline.end_to_end;
    const point: DashboardPoint = {
      tick: event.tick,
      time: event.time,
      mean: e2e ? e2e.mean : null,
      p95: e2e ? e2e.p95 : null,
      p99: e2e ? e2e.p99 : null,
      queueDepth: Object.values(event.queues ?? {}).reduce((a, b) => a + b, 0),
    };
    this.points.push(point);
    if (this.points.length > this.capacity) this.points.shift();
    return point;
  }

  latest(): DashboardPoint | null {
    return this.points[this.points.length - 1] ?? null;
  }

  series(): DashboardPoint[] {
    return [...this.points];
  }
}

export interface DashboardHandle {
  buffer: MetricsBuffer;
  stop(): void;
}

export function startDashboard(
  streamUrl: string,
  headers: Record<string, string>,
  onPoint: (p: DashboardPoint, e: MetricsEvent) => void,
  onStatus?: (s: "connected" | "lost") => void,
): DashboardHandle {
  const buffer = new MetricsBuffer();
  const stop = connectSse(streamUrl, {
    headers,
    onStatus,
    onEvent: (e) => {
      if (e.event !== "metrics") return;
      const parsed = JSON.parse(e.data) as MetricsEvent;
      onPoint(buffer.push(parsed), parsed);
    },
  });
  return { buffer, stop };
}
