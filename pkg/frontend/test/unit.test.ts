import { describe, expect, it } from "vitest";

import { composite, crc32, defaultOverlayOptions, formatScore, labelColor }
  from "../src/compositing.js";
import { colormapEntry, hotEntry, rintEven } from "../src/colormap.js";
import { boxIou, filterDetections, nms } from "../src/detections.js";
import type { Raster } from "../src/png.js";
import { rleDecode } from "../src/rle.js";
import { parseSseChunk } from "../src/sse.js";
import { ViewStore, viewTransform } from "../src/store.js";
import type { BoxDetection, WorklistEntry } from "../src/types.js";
import { sortWorklist, statusBadge } from "../src/worklist.js";

function grayRaster(w: number, h: number, value = 100): Raster {
  const data = new Uint8ClampedArray(w * h * 4);
  for (let i = 0; i < w * h; i++) {
    data[i * 4] = data[i * 4 + 1] = data[i * 4 + 2] = value;
    data[i * 4 + 3] = 255;
  }
  return { width: w, height: h, data };
}

describe("colormap", () => {
  it("hot endpoints match the server's integer table", () => {
    expect(hotEntry(0)).toEqual([0, 0, 0]);
    expect(hotEntry(85)).toEqual([255, 0, 0]);
    expect(hotEntry(170)).toEqual([255, 255, 0]);
    expect(hotEntry(255)).toEqual([255, 255, 255]);
  });

  it("rounds half to even like numpy rint", () => {
    expect(rintEven(2.5)).toBe(2);
    expect(rintEven(3.5)).toBe(4);
    expect(rintEven(-0.5) === 0).toBe(true);
    expect(rintEven(2.4999)).toBe(2);
  });
});

describe("compositing", () => {
  it("opacity 0 leaves the base image bit-identical", () => {
    const base = grayRaster(8, 8, 57);
    const mask = new Uint8Array(64).fill(1);
    const saliency = new Float32Array(64).fill(0.7);
    const out = composite(base, { mask, saliency },
      { ...defaultOverlayOptions, opacity: 0 });
    expect(Array.from(out.data)).toEqual(Array.from(base.data));
  });

  it("opacity 1 full mask is the pure colormap color", () => {
    const base = grayRaster(4, 4, 10);
    const out = composite(base, { mask: new Uint8Array(16).fill(1) },
      { ...defaultOverlayOptions, opacity: 1 });
    const want = colormapEntry("hot", 1);
    for (let i = 0; i < 16; i++) {
      expect([out.data[i * 4], out.data[i * 4 + 1], out.data[i * 4 + 2]])
        .toEqual(want);
    }
  });

  it("toggling a layer off and on is idempotent", () => {
    const base = grayRaster(6, 6);
    const layers = { saliency: new Float32Array(36).map((_, i) => (i % 5) / 4) };
    const a = composite(base, layers);
    const b = composite(base, layers);
    expect(Array.from(a.data)).toEqual(Array.from(b.data));
  });

  it("crc32/label color match the server", () => {
    expect(crc32("lesion")).toBe(3922022997);
    expect(labelColor("lesion")).toEqual([75, 192, 109]);
  });

  it("formats scores with python's half-even %.2f", () => {
    expect(formatScore(0.125)).toBe("0.12");
    expect(formatScore(0.135)).toBe("0.14"); // double sits just above the tie
    expect(formatScore(0.5)).toBe("0.50");
    expect(formatScore(0.93)).toBe("0.93");
    expect(formatScore(0.875)).toBe("0.88");
    expect(formatScore(0.615)).toBe("0.61");
  });
});

describe("detections", () => {
  const mk = (x0: number, score: number, label = "lesion"): BoxDetection => ({
    box: [x0, 0, x0 + 10, 10], score, label,
  });

  it("box count is non-increasing in the confidence threshold", () => {
    const boxes = Array.from({ length: 30 },
      (_, i) => mk(i * 3, ((i * 37) % 100) / 100));
    let prev = Infinity;
    for (let t = 0; t <= 1.0001; t += 0.1) {
      const n = filterDetections(boxes, t, 0.5).length;
      expect(n).toBeLessThanOrEqual(prev);
      prev = n;
    }
  });

  it("loosening NMS keeps at least as many boxes", () => {
    const boxes = [mk(0, 0.9), mk(2, 0.8), mk(4, 0.7), mk(30, 0.6)];
    const tight = filterDetections(boxes, 0, 0.5).length;
    const loose = filterDetections(boxes, 0, 0.9).length;
    expect(loose).toBeGreaterThanOrEqual(tight);
    expect(filterDetections(boxes, 0, 0.95).length).toBe(4);
  });

  it("greedy order is score desc with index tiebreak", () => {
    const a = mk(0, 0.8);
    const b = { ...mk(1, 0.8), label: "lesion" };
    const kept = nms([a, b], 0.3);
    expect(kept[0]).toBe(a);
  });

  it("iou of the known hand case is 2/3", () => {
    expect(boxIou([0, 0, 10, 10], [0, 0, 10, 15])).toBeCloseTo(2 / 3, 12);
  });
});

describe("rle", () => {
  it("decodes alternating runs, zeros first", () => {
    expect(Array.from(rleDecode("3,2,3", 2, 4))).toEqual([0, 0, 0, 1, 1, 0, 0, 0]);
  });
  it("rejects coverage mismatches", () => {
    expect(() => rleDecode("3,2", 2, 4)).toThrow();
  });
});

describe("worklist", () => {
  const entry = (id: string, priority: "stat" | "routine", at: number,
                 status = "queued"): WorklistEntry => ({
    study_id: id, priority, status: status as WorklistEntry["status"],
    submitted_at: at, headline: null, flagged_for_review: false,
  });

  it("sorts stat first, then submission time", () => {
    const rows = [entry("r1", "routine", 1), entry("s1", "stat", 5),
                  entry("r0", "routine", 0), entry("s0", "stat", 2)];
    expect(sortWorklist(rows).map((r) => r.study_id))
      .toEqual(["s0", "s1", "r0", "r1"]);
  });

  it("flags override the status badge", () => {
    const row = { ...entry("x", "routine", 0, "done"), flagged_for_review: true };
    expect(statusBadge(row)).toBe("review");
  });
});

describe("sse parser", () => {
  it("splits complete events and keeps the remainder", () => {
    const { events, rest } = parseSseChunk(
      "event: metrics\ndata: {\"tick\":1}\n\nevent: metrics\ndata: {\"ti");
    expect(events).toEqual([{ event: "metrics", data: '{"tick":1}' }]);
    expect(rest).toContain('{"ti');
  });
});

describe("view store", () => {
  it("keeps side-by-side transforms identical by construction", () => {
    const store = new ViewStore();
    store.update({ zoom: 2, panX: 11, panY: -4, compareMode: true });
    const left = viewTransform(store.get());
    const right = viewTransform(store.get());
    expect(left).toEqual(right);
  });

  it("validates ranges", () => {
    const store = new ViewStore();
    expect(() => store.update({ opacity: 1.5 })).toThrow();
    expect(() => store.update({ zoom: 0 })).toThrow();
  });
});
