/** Shared fixtures: synthesize splat PLY buffers without touching disk. */

import { REQUIRED_PROPERTIES } from "../src/ply.js";

export interface SplatSpec {
  position: [number, number, number];
  /** sigmoid^-1 of the desired opacity; defaults to fully opaque-ish. */
  opacityLogit?: number;
  logScale?: number;
  /** Raw f_dc values (color = SH_C0 * dc + 0.5). */
  dc?: [number, number, number];
}

/** One 62-float record in file property order. */
export function record(spec: SplatSpec): Float32Array {
  const rec = new Float32Array(62);
  rec[0] = spec.position[0];
  rec[1] = spec.position[1];
  rec[2] = spec.position[2];
  const dc = spec.dc ?? [0, 0, 0];
  rec[6] = dc[0];
  rec[7] = dc[1];
  rec[8] = dc[2];
  rec[54] = spec.opacityLogit ?? 6;
  const ls = spec.logScale ?? -2.5;
  rec[55] = ls;
  rec[56] = ls;
  rec[57] = ls;
  rec[58] = 1; // identity quaternion (w, x, y, z)
  return rec;
}

export function buildPly(
  records: Float32Array[],
  propertyNames: readonly string[] = REQUIRED_PROPERTIES,
): Uint8Array {
  const header =
    "ply\nformat binary_little_endian 1.0\n" +
    `element vertex ${records.length}\n` +
    propertyNames.map((n) => `property float ${n}`).join("\n") +
    "\nend_header\n";
  const head = new TextEncoder().encode(header);
  const stride = propertyNames.length * 4;
  const out = new Uint8Array(head.length + records.length * stride);
  out.set(head, 0);
  for (let i = 0; i < records.length; i++) {
    const rec = records[i];
    if (rec.length * 4 !== stride) throw new Error("record/property mismatch");
    out.set(
      new Uint8Array(rec.buffer, rec.byteOffset, stride),
      head.length + i * stride,
    );
  }
  return out;
}

/** Records for `n` splats spread deterministically inside a cube. */
export function cloudRecords(n: number, spread = 1.0): Float32Array[] {
  const recs: Float32Array[] = [];
  let state = 123456789;
  const next = () => {
    // Park-Miller LCG: deterministic across runs without a seed dependency.
    state = (state * 48271) % 2147483647;
    return state / 2147483647;
  };
  for (let i = 0; i < n; i++) {
    recs.push(record({
      position: [
        spread * (2 * next() - 1),
        spread * (2 * next() - 1),
        spread * (2 * next() - 1),
      ],
      dc: [2 * next() - 1, 2 * next() - 1, 2 * next() - 1],
      opacityLogit: 2,
    }));
  }
  return recs;
}
