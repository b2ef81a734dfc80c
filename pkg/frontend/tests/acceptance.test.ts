/**
 * Editor round trip against the real training pipeline.
 *
 * A small synthetic dataset is generated and trained with the `splatkit`
 * CLI; the resulting checkpoint is loaded into an editor session, a box of
 * planted splats is deleted, and the export is validated back through
 * `splatkit info` and `splatkit render`.
 */

import { execFileSync } from "node:child_process";
import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { EditorSession } from "../src/session.js";
import { SplatFile, parseSplatPly } from "../src/ply.js";
import { buildPly, record } from "../tests/helpers.js";

const MINUTES = 60_000;

function splatkit(args: string[], cwd: string): string {
  return execFileSync("splatkit", args, { cwd, encoding: "utf8" });
}

function payload(bytes: Uint8Array): Buffer {
  const text = Buffer.from(bytes).toString("latin1");
  const at = text.indexOf("end_header\n");
  expect(at).toBeGreaterThan(0);
  return Buffer.from(bytes.subarray(at + "end_header\n".length));
}

function infoCount(out: string): number {
  const m = out.match(/gaussians: (\d+)/);
  expect(m).not.toBeNull();
  return parseInt(m![1], 10);
}

/** Extract record `i` as a Float32Array view copy. */
function recordOf(f: SplatFile, i: number): Float32Array {
  const n = f.recordSize / 4;
  const out = new Float32Array(n);
  const view = new DataView(f.body.buffer, f.body.byteOffset);
  for (let k = 0; k < n; k++) {
    out[k] = view.getFloat32(i * f.recordSize + 4 * k, true);
  }
  return out;
}

let work: string;
let checkpointBytes: Uint8Array;

beforeAll(() => {
  work = fs.mkdtempSync(path.join(os.tmpdir(), "splat-editor-"));
  splatkit([
    "synth", "--out-dir", "ds",
    "--set", "vortex.n_gaussians=160",
    "--set", "vortex.floor_gaussians=40",
    "--set", "rig.width=48", "--set", "rig.height_px=48",
    "--set", "rig.focal=52.0",
    "--subsample", "0.5",
  ], work);
  splatkit([
    "--seed", "0", "train", "ds", "--out-dir", "run",
    "--set", "iterations=60",
  ], work);
  checkpointBytes = fs.readFileSync(path.join(work, "run", "checkpoint.ply"));
}, 5 * MINUTES);

afterAll(() => {
  fs.rmSync(work, { recursive: true, force: true });
});

describe("criterion 8: editor round trip", () => {
  it("preserves vertex records bitwise on a no-edit export", () => {
    const session = EditorSession.load(checkpointBytes);
    const out = session.export();
    expect(payload(out).equals(payload(checkpointBytes))).toBe(true);

    const p = path.join(work, "noedit.ply");
    fs.writeFileSync(p, out);
    expect(infoCount(splatkit(["info", p], work)))
      .toBe(session.file.count);
  }, MINUTES);

  it("deletes a box of planted splats and reconciles through the CLI", () => {
    const base = parseSplatPly(checkpointBytes);

    // plant a tight cluster of bright floaters above the scene
    const planted = 70;
    const records: Float32Array[] = [];
    for (let i = 0; i < base.count; i++) records.push(recordOf(base, i));
    for (let i = 0; i < planted; i++) {
      records.push(record({
        position: [
          0.04 * Math.cos(i), 0.04 * Math.sin(i), 2.5 + 0.002 * i,
        ],
        dc: [1.7725, 1.7725, 0],
        opacityLogit: 4,
        logScale: -3.5,
      }));
    }
    const merged = buildPly(records, base.properties.map((p) => p.name));

    const session = EditorSession.load(merged, 256, 256);
    session.view.target = [0, 0, 2.5];
    session.view.distance = 2;
    session.view.elevation = 0;
    session.view.focal = 300;

    // the cluster fills the viewport center; the scene body sits far below
    const before = session.renderView();
    const centerSum = before
      .subarray(3 * (128 * 256 + 120), 3 * (128 * 256 + 136))
      .reduce((a, b) => a + b, 0);
    expect(centerSum).toBeGreaterThan(0.5);

    const selected = session.boxSelect({ x0: 28, y0: 28, x1: 228, y1: 228 });
    expect(selected).toBe(planted);
    expect([...session.selected].sort((a, b) => a - b))
      .toEqual(Array.from({ length: planted }, (_, i) => base.count + i));
    expect(session.deleteSelection()).toBe(planted);

    const exported = session.export();
    // dropping exactly the planted records reproduces the checkpoint payload
    expect(payload(exported).equals(payload(checkpointBytes))).toBe(true);
    // ... and the editor now sees an empty deleted region
    const after = session.renderView();
    const afterSum = after
      .subarray(3 * (128 * 256 + 120), 3 * (128 * 256 + 136))
      .reduce((a, b) => a + b, 0);
    expect(afterSum).toBe(0);

    // vertex counts reconcile through cmd_info
    const mergedPath = path.join(work, "merged.ply");
    const exportedPath = path.join(work, "exported.ply");
    fs.writeFileSync(mergedPath, merged);
    fs.writeFileSync(exportedPath, exported);
    expect(infoCount(splatkit(["info", mergedPath], work)))
      .toBe(base.count + planted);
    expect(infoCount(splatkit(["info", exportedPath], work)))
      .toBe(base.count);

    // cmd_render of the export matches the original checkpoint exactly, so
    // the deleted region is empty in the pipeline renderer too
    splatkit(["render", exportedPath, "--out-dir", "r_exported",
              "--orbit", "2", "--width", "48", "--size-height", "48"], work);
    splatkit(["render", path.join("run", "checkpoint.ply"),
              "--out-dir", "r_original",
              "--orbit", "2", "--width", "48", "--size-height", "48"], work);
    for (const name of fs.readdirSync(path.join(work, "r_original"))) {
      if (!name.endsWith(".ppm")) continue;
      const a = fs.readFileSync(path.join(work, "r_original", name));
      const b = fs.readFileSync(path.join(work, "r_exported", name));
      expect(b.equals(a)).toBe(true);
    }
  }, 2 * MINUTES);
});
