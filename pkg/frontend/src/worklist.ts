/** Worklist ordering and polling. */

import type { ApiClient } from "./api.js";
import type { WorklistEntry } from "./types.js";

const PRIORITY_RANK: Record<string, number> = { stat: 0, routine: 1 };

/** stat first, then submission time — mirrors the server's sort contract. */
export function sortWorklist(entries: WorklistEntry[]): WorklistEntry[] {
  return [...entries].sort((a, b) => {
    const pr = (PRIORITY_RANK[a.priority] ?? 2) - (PRIORITY_RANK[b.priority] ?? 2);
    if (pr !== 0) return pr;
    return (a.submitted_at ?? 0) - (b.submitted_at ?? 0);
  });
}

export function statusBadge(entry: WorklistEntry): string {
  if (entry.flagged_for_review) return "review";
  return entry.status;
}

export interface PollHandle {
  stop(): void;
}

/**
 * Poll the worklist every `intervalMs`; onUpdate receives sorted entries,
 * onError fires on network loss (the UI shows a stale-data banner and the
 * loop keeps retrying).
 */
export function pollWorklist(
  api: ApiClient,
  onUpdate: (rows: WorklistEntry[]) => void,
  onError: (e: unknown) => void,
  intervalMs = 2000,
): PollHandle {
  let stopped = false;
  let timer: ReturnType<typeof setTimeout> | null = null;

  const tick = async () => {
    if (stopped) return;
    try {
      onUpdate(sortWorklist(await api.worklist()));
    } catch (e) {
      onError(e);
    }
    if (!stopped) timer = setTimeout(tick, intervalMs);
  };
  void tick();
  return {
    stop() {
      stopped = true;
      if (timer) clearTimeout(timer);
    },
  };
}
