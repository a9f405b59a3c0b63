/**
 * End-to-end console tests against a real gateway process (untrained
 * weights; these tests exercise transport, triage, steering, and rendering
 * semantics, not model quality).
 */

import { execFileSync, spawn, type ChildProcess } from "node:child_process";
import { mkdtempSync, readFileSync, readdirSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { composite, defaultOverlayOptions } from "../src/compositing.js";
import { startDashboard } from "../src/dashboard.js";
import { filterDetections } from "../src/detections.js";
import { decodePng } from "../src/png.js";
import { rleDecode } from "../src/rle.js";
import { sortWorklist } from "../src/worklist.js";
import type { BoxDetection, ResultMessage } from "../src/types.js";

const PY = process.env.MEDRT_PYTHON ?? "python3";
const TOKENS = { viewer: "e2e-viewer", operator: "e2e-operator", admin: "e2e-admin" };

let server: ChildProcess;
let base: string;
let workDir: string;
let studies: string[] = [];

function api(role: keyof typeof TOKENS = "operator"): ApiClient {
  return new ApiClient(base, TOKENS[role]);
}

async function waitForResult(client: ApiClient, id: string,
                             timeoutMs = 60_000): Promise<ResultMessage> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    const r = await client.result(id);
    if (r) return r;
    await new Promise((res) => setTimeout(res, 50));
  }
  throw new Error(`study ${id} never completed`);
}

describe("console against a live gateway", () => {
  beforeAll(async () => {
    workDir = mkdtempSync(join(tmpdir(), "medrt-e2e-"));
    const prep = `
from pathlib import Path
from medrt.nn import build, save_params
root = Path(r"${"${workDir}"}")
(root / "clf.tpnn").write_bytes(save_params(build("tiny_class_net", seed=11)))
(root / "unet.tpnn").write_bytes(save_params(build("mini_unet", seed=12)))
`.replace("${workDir}", workDir);
    execFileSync(PY, ["-c", prep], { stdio: "inherit" });
    execFileSync(PY, ["-m", "medrt.cli", "datagen", "--out", join(workDir, "data"),
      "--count", "4", "--seed", "77", "--lesion-prob", "1.0"], { stdio: "inherit" });
    studies = readdirSync(join(workDir, "data", "studies"))
      .map((f) => join(workDir, "data", "studies", f));

    const port = 8200 + Math.floor(Math.random() * 800);
    base = `http://127.0.0.1:${port}`;
    const config = {
      storage_dir: join(workDir, "store"),
      host: "127.0.0.1",
      port,
      tokens: {
        [TOKENS.viewer]: "viewer",
        [TOKENS.operator]: "operator",
        [TOKENS.admin]: "admin",
      },
      model_path: join(workDir, "clf.tpnn"),
      unet_path: join(workDir, "unet.tpnn"),
      metrics_interval_s: 0.2,
      audit_fsync: false,
      thresholds: { confidence: 0.4, nms_iou: 0.5, tau_exit: 0.95,
                    tau_conf: 0.7, entropy_gate: 0.9 },
      pipeline: {
        workers: { ingest: 1, preprocess: 1, inference: 1, postprocess: 1 },
        queue_capacity: 32,
        batcher: { max_batch: 4, window_ms: 2000.0 },
        aging_threshold_ms: 10_000.0,
        overload: "shed",
      },
    };
    const cfgPath = join(workDir, "server.json");
    writeFileSync(cfgPath, JSON.stringify(config));
    server = spawn(PY, ["-m", "medrt.cli", "serve", "--server-config", cfgPath],
      { stdio: "inherit" });

    const deadline = Date.now() + 90_000;
    for (;;) {
      try {
        const r = await fetch(`${base}/v1/metrics`,
          { headers: { Authorization: `Bearer ${TOKENS.viewer}` } });
        if (r.ok) break;
      } catch {
        /* not up yet */
      }
      if (Date.now() > deadline) throw new Error("gateway did not start");
      await new Promise((res) => setTimeout(res, 200));
    }
  });

  afterAll(async () => {
    server?.kill("SIGTERM");
    await new Promise((res) => setTimeout(res, 500));
    server?.kill("SIGKILL");
  });

  it("escalation moves a queued study above routines within one poll", async () => {
    const op = api("operator");
    const ids: string[] = [];
    for (let i = 0; i < 3; i++) {
      ids.push(await op.submitStudy(readFileSync(studies[i]), "routine"));
    }
    const res = await op.escalate(ids[2]);
    expect(res.changed).toBe(true);
    const rows = sortWorklist(await op.worklist());
    const ours = rows.filter((r) => ids.includes(r.study_id));
    expect(ours[0].study_id).toBe(ids[2]);
    expect(ours[0].priority).toBe("stat");
    // the escalated study beats the still-batching routines to completion
    const done = await waitForResult(op, ids[2]);
    expect(done.study_id).toBe(ids[2]);
    await Promise.all(ids.map((id) => waitForResult(op, id)));
  });

  it("escalating a completed study is a no-op with a notice", async () => {
    const op = api("operator");
    const id = await op.submitStudy(readFileSync(studies[3]), "stat");
    await waitForResult(op, id);
    const res = await op.escalate(id);
    expect(res.changed).toBe(false);
    expect(res.notice).toBeTruthy();
  });

  it("SSE dashboard reflects a metrics event within one second", async () => {
    const viewer = api("viewer");
    const t0 = Date.now();
    const first = await new Promise<number>((resolve, reject) => {
      const timer = setTimeout(() => reject(new Error("no SSE event")), 5000);
      const handle = startDashboard(viewer.metricsStreamUrl(), viewer.authHeader(),
        (point) => {
          clearTimeout(timer);
          handle.stop();
          resolve(point.tick);
        });
    });
    expect(Date.now() - t0).toBeLessThan(1000);
    expect(first).toBeGreaterThan(0);
  });

  it("threshold sliders persist via the API (read-your-write)", async () => {
    const op = api("operator");
    const updated = await op.putThresholds({ confidence: 0.8, nms_iou: 0.6 });
    expect(updated.confidence).toBe(0.8);
    const readBack = await api("viewer").thresholds();
    expect(readBack.confidence).toBe(0.8);
    expect(readBack.nms_iou).toBe(0.6);
    await op.putThresholds({ confidence: 0.4, nms_iou: 0.5 });
  });

  it("client compositing matches the server render within +/-1 per channel", async () => {
    const op = api("operator");
    const id = await op.submitStudy(readFileSync(studies[0]), "stat");
    const result = await waitForResult(op, id);

    const basePng = await op.overlayPng(id, "base");
    const serverPng = await op.overlayPng(id, "composite");
    expect(basePng && serverPng).toBeTruthy();
    const baseRaster = await decodePng(basePng!);
    const serverRaster = await decodePng(serverPng!);

    const boxes: BoxDetection[] = result.findings
      .filter((f) => f.kind === "detection" && f.box)
      .map((f) => ({ box: f.box!, score: f.score, label: f.label }));
    const mask = result.mask
      ? rleDecode(result.mask.rle, result.mask.shape[0], result.mask.shape[1])
      : undefined;
    let saliency: Float32Array | undefined;
    const salPng = await op.overlayPng(id, "saliency");
    if (salPng) {
      const sal = await decodePng(salPng);
      saliency = new Float32Array(sal.width * sal.height);
      for (let i = 0; i < saliency.length; i++) saliency[i] = sal.data[i * 4] / 255;
    }
    expect(mask).toBeTruthy();
    expect(saliency).toBeTruthy();

    const mine = composite(baseRaster, { mask, saliency, boxes },
      defaultOverlayOptions);
    expect(mine.width).toBe(serverRaster.width);
    let worst = 0;
    for (let i = 0; i < mine.data.length; i++) {
      worst = Math.max(worst, Math.abs(mine.data[i] - serverRaster.data[i]));
    }
    expect(worst).toBeLessThanOrEqual(1);
  });

  it("opacity 0 equals the base image exactly", async () => {
    const op = api("operator");
    const id = await op.submitStudy(readFileSync(studies[1]), "stat");
    const result = await waitForResult(op, id);
    const baseRaster = await decodePng((await op.overlayPng(id, "base"))!);
    const mask = result.mask
      ? rleDecode(result.mask.rle, result.mask.shape[0], result.mask.shape[1])
      : undefined;
    const out = composite(baseRaster, { mask },
      { ...defaultOverlayOptions, opacity: 0 });
    expect(Buffer.from(out.data).equals(Buffer.from(baseRaster.data))).toBe(true);
  });

  it("box-count monotonicity holds on a real study", async () => {
    const op = api("operator");
    const id = await op.submitStudy(readFileSync(studies[2]), "stat");
    const result = await waitForResult(op, id);
    const boxes: BoxDetection[] = result.findings
      .filter((f) => f.kind === "detection" && f.box)
      .map((f) => ({ box: f.box!, score: f.score, label: f.label }));
    let prev = Infinity;
    for (let t = 0; t <= 1.0001; t += 0.1) {
      const n = filterDetections(boxes, t, 0.5).length;
      expect(n).toBeLessThanOrEqual(prev);
      prev = n;
    }
  });

  it("unknown tokens are rejected with 401", async () => {
    const bad = new ApiClient(base, "wrong-token");
    await expect(bad.worklist()).rejects.toThrow("unauthorized");
  });
});
