/** DOM wiring for the review console; all logic lives in the tested modules. */

import { ApiClient, ApiError } from "./api.js";
import { composite, defaultOverlayOptions, type OverlayLayers } from "./compositing.js";
import { startDashboard, type DashboardHandle } from "./dashboard.js";
import { filterDetections } from "./detections.js";
import { decodePng, type Raster } from "./png.js";
import { drawLatencyChart, drawQueueChart, drawRaster } from "./render.js";
import { rleDecode } from "./rle.js";
import { ViewStore } from "./store.js";
import type { BoxDetection, ResultMessage, WorklistEntry } from "./types.js";
import { pollWorklist, statusBadge, type PollHandle } from "./worklist.js";

const $ = <T extends HTMLElement>(id: string) => document.getElementById(id) as T;

let api: ApiClient | null = null;
let poll: PollHandle | null = null;
let dashboard: DashboardHandle | null = null;
let role = "viewer";
const store = new ViewStore();

interface LoadedStudy {
  id: string;
  result: ResultMessage;
  base: Raster;
  saliency: Float32Array | null;
  mask: Uint8Array | null;
  boxes: BoxDetection[];
}

let current: LoadedStudy | null = null;

async function login() {
  const base = ($("server") as HTMLInputElement).value.replace(/\/$/, "");
  const token = ($("token") as HTMLInputElement).value.trim();
  role = ($("role") as HTMLSelectElement).value;
  api = new ApiClient(base, token);
  try {
    await api.worklist();
  } catch (e) {
    $("login-error").textContent = e instanceof ApiError && e.status === 401
      ? "token rejected — check credentials" : `cannot reach server: ${e}`;
    api = null;
    return;
  }
  $("login").style.display = "none";
  $("console").style.display = "grid";
  const operator = role !== "viewer";
  for (const id of ["opt-confidence", "opt-nms"]) {
    ($(id) as HTMLInputElement).disabled = !operator;
  }
  $("slider-note").textContent = operator
    ? "" : "threshold steering requires the operator role";
  startPolling();
  startMetrics();
}

function startPolling() {
  poll?.stop();
  poll = pollWorklist(api!, renderWorklist, () => {
    $("banner").textContent = "connection lost — showing stale data";
    $("banner").style.display = "block";
  });
}

function renderWorklist(rows: WorklistEntry[]) {
  $("banner").style.display = "none";
  const list = $("worklist");
  list.innerHTML = "";
  if (!rows.length) {
    list.innerHTML = "<li class='empty'>worklist is empty</li>";
    return;
  }
  for (const row of rows) {
    const li = document.createElement("li");
    li.className = `status-${row.status}${row.flagged_for_review ? " flagged" : ""}`;
    const headline = row.headline
      ? ` — ${row.headline.label} ${row.headline.score.toFixed(2)}` : "";
    li.innerHTML =
      `<span class="prio ${row.priority}">${row.priority}</span>` +
      `<span class="sid">${row.study_id}</span>` +
      `<span class="badge">${statusBadge(row)}</span>${headline}`;
    li.onclick = () => void openStudy(row.study_id);
    if (role !== "viewer" && row.status === "queued" && row.priority === "routine") {
      const btn = document.createElement("button");
      btn.textContent = "escalate";
      btn.onclick = async (ev) => {
        ev.stopPropagation();
        await api!.escalate(row.study_id);
      };
      li.appendChild(btn);
    }
    list.appendChild(li);
  }
}

async function openStudy(id: string) {
  const result = await api!.result(id);
  if (!result) return;
  const basePng = await api!.overlayPng(id, "base");
  if (!basePng) return;
  const base = await decodePng(basePng);
  let saliency: Float32Array | null = null;
  const salPng = await api!.overlayPng(id, "saliency");
  if (salPng) {
    const raster = await decodePng(salPng);
    saliency = new Float32Array(raster.width * raster.height);
    for (let i = 0; i < saliency.length; i++) saliency[i] = raster.data[i * 4] / 255;
  }
  const mask = result.mask
    ? rleDecode(result.mask.rle, result.mask.shape[0], result.mask.shape[1])
    : null;
  const boxes: BoxDetection[] = result.findings
    .filter((f) => f.kind === "detection" && f.box)
    .map((f) => ({ box: f.box!, score: f.score, label: f.label }));
  current = { id, result, base, saliency, mask, boxes };
  store.update({ studyId: id });
  $("finding").textContent = result.findings
    .map((f) => `${f.label} ${f.score.toFixed(2)}`).join(", ")
    + (result.flags.flagged_for_review ? "  [flagged for review]" : "");
  renderStudy();
}

function renderStudy() {
  if (!current) return;
  const state = store.get();
  const boxes = filterDetections(current.boxes, state.confidence, state.nmsIou);
  $("boxcount").textContent = `${boxes.length} detection(s)`;
  const layers: OverlayLayers = {
    mask: state.layers.mask && current.mask ? current.mask : undefined,
    saliency: (state.layers.saliency || state.layers.uncertainty) && current.saliency
      ? current.saliency : undefined,
    boxes: state.layers.boxes ? boxes : undefined,
  };
  const opts = { ...defaultOverlayOptions, opacity: state.opacity };
  const composed = composite(current.base, layers, opts);
  drawRaster($("viewer") as HTMLCanvasElement, composed, state);
  const compare = $("compare") as HTMLCanvasElement;
  if (state.compareMode) {
    compare.style.display = "block";
    drawRaster(compare, current.base, state); // reference pane, same transform
  } else {
    compare.style.display = "none";
  }
}

function startMetrics() {
  dashboard?.stop();
  dashboard = startDashboard(
    api!.metricsStreamUrl(), api!.authHeader(),
    () => {
      drawLatencyChart($("latency-chart") as HTMLCanvasElement,
        dashboard!.buffer.series());
      drawQueueChart($("queue-chart") as HTMLCanvasElement,
        dashboard!.buffer.series());
      const p = dashboard!.buffer.latest();
      $("latency-now").textContent = p && p.p99 !== null
        ? `mean ${p.mean?.toFixed(1)} ms · p95 ${p.p95?.toFixed(1)} · p99 ${p.p99.toFixed(1)}`
        : "no completed studies yet";
      $("stream-state").textContent = "live";
    },
    (s) => {
      $("stream-state").textContent = s === "lost" ? "stream lost — reconnecting" : "live";
    },
  );
}

function wireControls() {
  ($("opt-opacity") as HTMLInputElement).oninput = (e) => {
    store.update({ opacity: Number((e.target as HTMLInputElement).value) });
    renderStudy();
  };
  ($("opt-confidence") as HTMLInputElement).onchange = async (e) => {
    const confidence = Number((e.target as HTMLInputElement).value);
    store.update({ confidence });
    renderStudy();
    await api!.putThresholds({ confidence });
  };
  ($("opt-nms") as HTMLInputElement).onchange = async (e) => {
    const nmsIou = Number((e.target as HTMLInputElement).value);
    store.update({ nmsIou });
    renderStudy();
    await api!.putThresholds({ nms_iou: nmsIou });
  };
  for (const layer of ["mask", "saliency", "boxes", "uncertainty"] as const) {
    ($(`layer-${layer}`) as HTMLInputElement).onchange = (e) => {
      store.update({ layers: { ...store.get().layers,
                               [layer]: (e.target as HTMLInputElement).checked } });
      renderStudy();
    };
  }
  ($("compare-mode") as HTMLInputElement).onchange = (e) => {
    store.update({ compareMode: (e.target as HTMLInputElement).checked });
    renderStudy();
  };
  const viewer = $("viewer") as HTMLCanvasElement;
  viewer.onwheel = (e) => {
    e.preventDefault();
    const zoom = Math.max(0.25, store.get().zoom * (e.deltaY < 0 ? 1.25 : 0.8));
    store.update({ zoom });
    renderStudy();
  };
  let drag: { x: number; y: number } | null = null;
  viewer.onmousedown = (e) => (drag = { x: e.offsetX, y: e.offsetY });
  viewer.onmouseup = () => (drag = null);
  viewer.onmousemove = (e) => {
    if (!drag) return;
    store.update({
      panX: store.get().panX + (e.offsetX - drag.x),
      panY: store.get().panY + (e.offsetY - drag.y),
    });
    drag = { x: e.offsetX, y: e.offsetY };
    renderStudy();
  };
  $("login-btn").onclick = () => void login();
}

if (typeof document !== "undefined") {
  document.addEventListener("DOMContentLoaded", wireControls);
}
