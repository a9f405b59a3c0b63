/** Canvas drawing helpers (browser only; pure modules stay DOM-free). */

import type { Raster } from "./png.js";
import type { DashboardPoint } from "./dashboard.js";
import type { ViewState } from "./types.js";
import { viewTransform } from "./store.js";

export function drawRaster(canvas: HTMLCanvasElement, raster: Raster,
                           state: ViewState): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  const off = document.createElement("canvas");
  off.width = raster.width;
  off.height = raster.height;
  const offCtx = off.getContext("2d")!;
  const pixels = new Uint8ClampedArray(raster.data.length);
  pixels.set(raster.data);
  offCtx.putImageData(new ImageData(pixels, raster.width, raster.height), 0, 0);
  const { scale, tx, ty } = viewTransform(state);
  ctx.imageSmoothingEnabled = false;
  ctx.fillStyle = "#000";
  ctx.fillRect(0, 0, canvas.width, canvas.height);
  ctx.save();
  ctx.translate(tx, ty);
  ctx.scale(scale, scale);
  ctx.drawImage(off, 0, 0, canvas.width / 1, canvas.height / 1);
  ctx.restore();
}

export function drawLatencyChart(canvas: HTMLCanvasElement,
                                 points: DashboardPoint[]): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  const { width: w, height: h } = canvas;
  ctx.fillStyle = "#111";
  ctx.fillRect(0, 0, w, h);
  if (!points.length) return;
  const series: Array<[keyof DashboardPoint, string]> = [
    ["mean", "#6fc3df"], ["p95", "#e0c060"], ["p99", "#e07070"],
  ];
  const values = points.flatMap((p) =>
    [p.mean, p.p95, p.p99].filter((v): v is number => v !== null));
  const maxV = Math.max(10, ...values);
  for (const [key, color] of series) {
    ctx.strokeStyle = color;
    ctx.beginPath();
    let started = false;
    points.forEach((p, i) => {
      const v = p[key] as number | null;
      if (v === null) return;
      const x = (i / Math.max(points.length - 1, 1)) * (w - 8) + 4;
      const y = h - 4 - (v / maxV) * (h - 8);
      if (!started) {
        ctx.moveTo(x, y);
        started = true;
      } else {
        ctx.lineTo(x, y);
      }
    });
    ctx.stroke();
  }
}

export function drawQueueChart(canvas: HTMLCanvasElement,
                               points: DashboardPoint[]): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  const { width: w, height: h } = canvas;
  ctx.fillStyle = "#111";
  ctx.fillRect(0, 0, w, h);
  if (!points.length) return;
  const maxD = Math.max(4, ...points.map((p) => p.queueDepth));
  ctx.fillStyle = "#7fbf7f";
  const bar = (w - 8) / points.length;
  points.forEach((p, i) => {
    const bh = (p.queueDepth / maxD) * (h - 8);
    ctx.fillRect(4 + i * bar, h - 4 - bh, Math.max(bar - 1, 1), bh);
  });
}
