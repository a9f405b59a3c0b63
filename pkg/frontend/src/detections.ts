/**
 * Client-side detection steering. Same semantics as the server: greedy NMS
 * ordered by (score desc, index asc) per label, then the confidence filter.
 */

import type { BoxDetection } from "./types.js";

export function boxIou(
  a: [number, number, number, number],
  b: [number, number, number, number],
): number {
  const ix = Math.max(0, Math.min(a[2], b[2]) - Math.max(a[0], b[0]));
  const iy = Math.max(0, Math.min(a[3], b[3]) - Math.max(a[1], b[1]));
  const inter = ix * iy;
  if (inter === 0) return 0;
  const areaA = (a[2] - a[0]) * (a[3] - a[1]);
  const areaB = (b[2] - b[0]) * (b[3] - b[1]);
  return inter / (areaA + areaB - inter);
}

export function nms(boxes: BoxDetection[], iouThreshold: number): BoxDetection[] {
  const order = boxes
    .map((_, i) => i)
    .sort((i, j) => boxes[j].score - boxes[i].score || i - j);
  const kept: number[] = [];
  for (const i of order) {
    const ok = kept.every(
      (j) =>
        boxes[j].label !== boxes[i].label ||
        boxIou(boxes[i].box, boxes[j].box) < iouThreshold,
    );
    if (ok) kept.push(i);
  }
  return kept.map((i) => boxes[i]);
}

/** NMS first, then the confidence cut — mirrors the server's postprocess. */
export function filterDetections(
  boxes: BoxDetection[],
  confidence: number,
  iouThreshold: number,
): BoxDetection[] {
  return nms(boxes, iouThreshold).filter((b) => b.score >= confidence);
}
