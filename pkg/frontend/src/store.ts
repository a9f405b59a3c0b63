/** Single serialized view-state store; every mutation flows through update(). */

import { defaultViewState, type ViewState } from "./types.js";

type Listener = (state: ViewState) => void;

export class ViewStore {
  private state: ViewState = { ...defaultViewState };
  private listeners: Listener[] = [];

  get(): ViewState {
    return this.state;
  }

  update(patch: Partial<ViewState>): ViewState {
    const next = { ...this.state, ...patch };
    if (patch.layers) next.layers = { ...this.state.layers, ...patch.layers };
    if (next.opacity < 0 || next.opacity > 1) throw new Error("opacity out of range");
    if (next.zoom <= 0) throw new Error("zoom must be positive");
    this.state = next;
    for (const l of this.listeners) l(next);
    return next;
  }

  subscribe(l: Listener): () => void {
    this.listeners.push(l);
    return () => {
      this.listeners = this.listeners.filter((x) => x !== l);
    };
  }
}

/**
 * Pan/zoom transform shared by side-by-side panes: both panes read the same
 * store state, so synchronization is structural rather than event-driven.
 */
export function viewTransform(state: ViewState): { scale: number; tx: number; ty: number } {
  return { scale: state.zoom, tx: state.panX, ty: state.panY };
}
