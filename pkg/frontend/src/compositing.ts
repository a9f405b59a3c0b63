/**
 * Client-side alpha compositing, formula-identical to the server renderer:
 * out = rint((1 - a) * gray + a * colormap(value)) with per-pixel alpha
 * a = opacity (masks/box strokes) or opacity * value (saliency). Box labels
 * use the same 3x5 bitmap font, crc32-picked label color, and half-even
 * score formatting, so composites agree within +/-1 per channel.
 */

import { colormapEntry, rintEven, viridisEntry, type Rgb } from "./colormap.js";
import type { Raster } from "./png.js";
import type { BoxDetection } from "./types.js";

export interface OverlayOptions {
  opacity: number;
  colormap: "hot" | "viridis";
  maskThreshold: number;
  boxStroke: number;
}

export const defaultOverlayOptions: OverlayOptions = {
  opacity: 0.45,
  colormap: "hot",
  maskThreshold: 0.5,
  boxStroke: 1,
};

export interface OverlayLayers {
  mask?: Uint8Array;        // H*W, nonzero = on
  saliency?: Float32Array;  // H*W in [0, 1]
  boxes?: BoxDetection[];
}

const FONT: Record<string, number[]> = {
  A: [0b010, 0b101, 0b111, 0b101, 0b101], B: [0b110, 0b101, 0b110, 0b101, 0b110],
  C: [0b011, 0b100, 0b100, 0b100, 0b011], D: [0b110, 0b101, 0b101, 0b101, 0b110],
  E: [0b111, 0b100, 0b110, 0b100, 0b111], F: [0b111, 0b100, 0b110, 0b100, 0b100],
  G: [0b011, 0b100, 0b101, 0b101, 0b011], H: [0b101, 0b101, 0b111, 0b101, 0b101],
  I: [0b111, 0b010, 0b010, 0b010, 0b111], J: [0b001, 0b001, 0b001, 0b101, 0b010],
  K: [0b101, 0b110, 0b100, 0b110, 0b101], L: [0b100, 0b100, 0b100, 0b100, 0b111],
  M: [0b101, 0b111, 0b111, 0b101, 0b101], N: [0b110, 0b101, 0b101, 0b101, 0b101],
  O: [0b010, 0b101, 0b101, 0b101, 0b010], P: [0b110, 0b101, 0b110, 0b100, 0b100],
  Q: [0b010, 0b101, 0b101, 0b110, 0b011], R: [0b110, 0b101, 0b110, 0b110, 0b101],
  S: [0b011, 0b100, 0b010, 0b001, 0b110], T: [0b111, 0b010, 0b010, 0b010, 0b010],
  U: [0b101, 0b101, 0b101, 0b101, 0b111], V: [0b101, 0b101, 0b101, 0b101, 0b010],
  W: [0b101, 0b101, 0b111, 0b111, 0b101], X: [0b101, 0b101, 0b010, 0b101, 0b101],
  Y: [0b101, 0b101, 0b010, 0b010, 0b010], Z: [0b111, 0b001, 0b010, 0b100, 0b111],
  "0": [0b111, 0b101, 0b101, 0b101, 0b111], "1": [0b010, 0b110, 0b010, 0b010, 0b111],
  "2": [0b111, 0b001, 0b111, 0b100, 0b111], "3": [0b111, 0b001, 0b111, 0b001, 0b111],
  "4": [0b101, 0b101, 0b111, 0b001, 0b001], "5": [0b111, 0b100, 0b111, 0b001, 0b111],
  "6": [0b111, 0b100, 0b111, 0b101, 0b111], "7": [0b111, 0b001, 0b001, 0b010, 0b010],
  "8": [0b111, 0b101, 0b111, 0b101, 0b111], "9": [0b111, 0b101, 0b111, 0b001, 0b111],
  ".": [0b000, 0b000, 0b000, 0b000, 0b010], ":": [0b000, 0b010, 0b000, 0b010, 0b000],
  "%": [0b101, 0b001, 0b010, 0b100, 0b101], "-": [0b000, 0b000, 0b111, 0b000, 0b000],
  "/": [0b001, 0b001, 0b010, 0b100, 0b100], " ": [0, 0, 0, 0, 0],
};

const CRC_TABLE = (() => {
  const table = new Uint32Array(256);
  for (let n = 0; n < 256; n++) {
    let c = n;
    for (let k = 0; k < 8; k++) c = c & 1 ? 0xedb88320 ^ (c >>> 1) : c >>> 1;
    table[n] = c >>> 0;
  }
  return table;
})();

export function crc32(text: string): number {
  let crc = 0xffffffff;
  for (let i = 0; i < text.length; i++) {
    crc = CRC_TABLE[(crc ^ text.charCodeAt(i)) & 0xff] ^ (crc >>> 8);
  }
  return (crc ^ 0xffffffff) >>> 0;
}

export function labelColor(label: string): Rgb {
  return viridisEntry(96 + (crc32(label) % 128));
}

/** Python "%.2f": round-half-even on the decimal expansion. */
export function formatScore(x: number): string {
  const fixed = x.toFixed(17); // enough digits to expose the double's true value
  const dot = fixed.indexOf(".");
  const digits = fixed.slice(0, dot) + fixed.slice(dot + 1);
  const keep = dot + 2; // digit count before rounding position
  let head = digits.slice(0, keep);
  const tail = digits.slice(keep);
  const roundUp =
    tail > "5" + "0".repeat(tail.length - 1)
      ? true
      : tail === "5" + "0".repeat(tail.length - 1)
        ? Number(head[head.length - 1]) % 2 === 1
        : false;
  if (roundUp) head = (BigInt(head) + 1n).toString().padStart(head.length, "0");
  const intPart = head.slice(0, -2) || "0";
  return `${intPart}.${head.slice(-2)}`;
}

function blendPixel(data: Uint8ClampedArray, at: number, alpha: number, rgb: Rgb) {
  for (let c = 0; c < 3; c++) {
    data[at + c] = rintEven((1 - alpha) * data[at + c] + alpha * rgb[c]);
  }
}

export function drawText(
  raster: Raster,
  x: number,
  y: number,
  text: string,
  color: Rgb,
): void {
  let cx = x;
  for (const ch of text.toUpperCase()) {
    const glyph = FONT[ch] ?? FONT[" "];
    for (let gy = 0; gy < 5; gy++) {
      for (let gx = 0; gx < 3; gx++) {
        if (glyph[gy] & (0b100 >> gx)) {
          const py = y + gy;
          const px = cx + gx;
          if (py >= 0 && py < raster.height && px >= 0 && px < raster.width) {
            const at = (py * raster.width + px) * 4;
            raster.data[at] = color[0];
            raster.data[at + 1] = color[1];
            raster.data[at + 2] = color[2];
            raster.data[at + 3] = 255;
          }
        }
      }
    }
    cx += 4;
  }
}

function strokeBox(raster: Raster, det: BoxDetection, opts: OverlayOptions): void {
  const { width: w, height: h } = raster;
  let [x0, y0, x1, y1] = det.box.map((v) => rintEven(v));
  x0 = Math.max(0, x0);
  y0 = Math.max(0, y0);
  x1 = Math.min(w, x1);
  y1 = Math.min(h, y1);
  if (x1 <= x0 || y1 <= y0 || opts.opacity <= 0) return;
  const color = labelColor(det.label);
  const s = opts.boxStroke;
  const edge = (px: number, py: number) =>
    (py < Math.min(y0 + s, y1) || py >= Math.max(y1 - s, y0) ||
      px < Math.min(x0 + s, x1) || px >= Math.max(x1 - s, x0));
  for (let py = y0; py < y1; py++) {
    for (let px = x0; px < x1; px++) {
      if (edge(px, py)) blendPixel(raster.data, (py * w + px) * 4, opts.opacity, color);
    }
  }
  drawText(raster, x0, Math.max(0, y0 - 6),
    `${det.label} ${formatScore(det.score)}`, color);
}

/** Composite layers over a copy of the base raster (server formula). */
export function composite(
  base: Raster,
  layers: OverlayLayers,
  opts: OverlayOptions = defaultOverlayOptions,
): Raster {
  const out: Raster = {
    width: base.width,
    height: base.height,
    data: new Uint8ClampedArray(base.data),
  };
  const n = base.width * base.height;
  if (layers.mask) {
    if (layers.mask.length !== n) throw new Error("mask size mismatch");
    const color = colormapEntry(opts.colormap, 1.0);
    for (let i = 0; i < n; i++) {
      if (layers.mask[i]) blendPixel(out.data, i * 4, opts.opacity, color);
    }
  }
  if (layers.saliency) {
    if (layers.saliency.length !== n) throw new Error("saliency size mismatch");
    for (let i = 0; i < n; i++) {
      const v = layers.saliency[i];
      blendPixel(out.data, i * 4, opts.opacity * v, colormapEntry(opts.colormap, v));
    }
  }
  for (const det of layers.boxes ?? []) strokeBox(out, det, opts);
  return out;
}
