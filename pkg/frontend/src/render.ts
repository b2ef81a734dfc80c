/**
 * Software splat renderer for the editor viewport.
 *
 * Each surviving splat is drawn as a depth-sorted elliptical sprite using
 * the projected 2D covariance and the usual alpha rule
 * alpha' = min(0.99, sigmoid(opacity) * exp(power)), compositing
 * front-to-back with early termination.  Good enough to judge which blobs
 * are floaters; not meant to match the trainer bit-for-bit.
 */

import { OrbitCamera, cameraAxes, toCamera } from "./camera.js";
import { SplatFile } from "./ply.js";

const SH_C0 = 0.28209479177387814;
const LOW_PASS = 0.3;
const NEAR = 0.2;
const ALPHA_MAX = 0.99;
const ALPHA_SKIP = 1 / 255;
const T_MIN = 1e-4;

export interface RenderStyle {
  /** Splats drawn with a highlight tint. */
  selected?: Set<number>;
  background?: [number, number, number];
}

interface Sprite {
  index: number;
  u: number;
  v: number;
  z: number;
  /** Inverse 2D covariance (a, b, c) for [[a, b], [b, c]]^-1 form. */
  ia: number;
  ib: number;
  ic: number;
  radius: number;
  alpha: number;
  color: [number, number, number];
}

function quatToRot(w: number, x: number, y: number, z: number): number[] {
  const n = Math.hypot(w, x, y, z);
  if (n === 0) return [1, 0, 0, 0, 1, 0, 0, 0, 1];
  w /= n; x /= n; y /= n; z /= n;
  return [
    1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
    2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
    2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y),
  ];
}

function buildSprite(
  file: SplatFile,
  i: number,
  cam: OrbitCamera,
  axes: [number, number, number][],
): Sprite | null {
  const p = file.position(i);
  const q = toCamera(cam, p);
  if (q[2] <= NEAR) return null;

  const opacity = 1 / (1 + Math.exp(-file.float(i, "opacity")));
  if (opacity < ALPHA_SKIP) return null;

  const sx = Math.exp(file.float(i, "scale_0"));
  const sy = Math.exp(file.float(i, "scale_1"));
  const sz = Math.exp(file.float(i, "scale_2"));
  const R = quatToRot(
    file.float(i, "rot_0"), file.float(i, "rot_1"),
    file.float(i, "rot_2"), file.float(i, "rot_3"),
  );
  // M = R * diag(s); Sigma = M M^T.
  const M = [
    R[0] * sx, R[1] * sy, R[2] * sz,
    R[3] * sx, R[4] * sy, R[5] * sz,
    R[6] * sx, R[7] * sy, R[8] * sz,
  ];
  const S = new Array<number>(9);
  for (let r = 0; r < 3; r++) {
    for (let c = 0; c < 3; c++) {
      S[3 * r + c] =
        M[3 * r] * M[3 * c] + M[3 * r + 1] * M[3 * c + 1] + M[3 * r + 2] * M[3 * c + 2];
    }
  }
  // Rotate into the camera frame: W S W^T with W rows = axes.
  const W = [...axes[0], ...axes[1], ...axes[2]];
  const WS = new Array<number>(9);
  for (let r = 0; r < 3; r++) {
    for (let c = 0; c < 3; c++) {
      WS[3 * r + c] =
        W[3 * r] * S[c] + W[3 * r + 1] * S[3 + c] + W[3 * r + 2] * S[6 + c];
    }
  }
  const C = new Array<number>(9);
  for (let r = 0; r < 3; r++) {
    for (let c = 0; c < 3; c++) {
      C[3 * r + c] =
        WS[3 * r] * W[3 * c] + WS[3 * r + 1] * W[3 * c + 1] + WS[3 * r + 2] * W[3 * c + 2];
    }
  }
  // Perspective Jacobian at the mean.
  const f = cam.focal;
  const iz = 1 / q[2];
  const j00 = f * iz, j02 = -f * q[0] * iz * iz;
  const j11 = f * iz, j12 = -f * q[1] * iz * iz;
  const a =
    j00 * j00 * C[0] + 2 * j00 * j02 * C[2] + j02 * j02 * C[8] + LOW_PASS;
  const b =
    j00 * j11 * C[1] + j00 * j12 * C[2] + j02 * j11 * C[5] + j02 * j12 * C[8];
  const cc =
    j11 * j11 * C[4] + 2 * j11 * j12 * C[5] + j12 * j12 * C[8] + LOW_PASS;
  const det = a * cc - b * b;
  if (det <= 0) return null;

  const mid = (a + cc) / 2;
  const lamMax = mid + Math.sqrt(Math.max(0, mid * mid - det));
  const radius = Math.ceil(3 * Math.sqrt(lamMax));

  const color: [number, number, number] = [
    Math.max(0, SH_C0 * file.float(i, "f_dc_0") + 0.5),
    Math.max(0, SH_C0 * file.float(i, "f_dc_1") + 0.5),
    Math.max(0, SH_C0 * file.float(i, "f_dc_2") + 0.5),
  ];

  return {
    index: i,
    u: (f * q[0]) * iz + cam.width / 2,
    v: (f * q[1]) * iz + cam.height / 2,
    z: q[2],
    ia: cc / det,
    ib: -b / det,
    ic: a / det,
    radius,
    alpha: opacity,
    color,
  };
}

/**
 * Render the surviving splats into a row-major RGB float buffer in [0, 1].
 *
 * `deleted` splats are skipped entirely; `style.selected` splats are tinted
 * toward orange so an active selection is visible.
 */
export function renderSplats(
  file: SplatFile,
  cam: OrbitCamera,
  deleted: Set<number>,
  style: RenderStyle = {},
): Float32Array {
  const bg = style.background ?? [0, 0, 0];
  const selected = style.selected ?? new Set<number>();
  const w = cam.width;
  const h = cam.height;
  const axes = cameraAxes(cam);

  const sprites: Sprite[] = [];
  for (let i = 0; i < file.count; i++) {
    if (deleted.has(i)) continue;
    const s = buildSprite(file, i, cam, axes);
    if (s !== null) sprites.push(s);
  }
  sprites.sort((p, q) => p.z - q.z || p.index - q.index);

  const color = new Float32Array(w * h * 3);
  const trans = new Float32Array(w * h).fill(1);

  for (const s of sprites) {
    let [cr, cg, cb] = s.color;
    if (selected.has(s.index)) {
      cr = 0.3 * cr + 0.7;
      cg = 0.3 * cg + 0.45;
      cb = 0.3 * cb;
    }
    const x0 = Math.max(0, Math.floor(s.u - s.radius));
    const x1 = Math.min(w - 1, Math.ceil(s.u + s.radius));
    const y0 = Math.max(0, Math.floor(s.v - s.radius));
    const y1 = Math.min(h - 1, Math.ceil(s.v + s.radius));
    for (let y = y0; y <= y1; y++) {
      for (let x = x0; x <= x1; x++) {
        const t = trans[y * w + x];
        if (t < T_MIN) continue;
        const dx = x + 0.5 - s.u;
        const dy = y + 0.5 - s.v;
        const power = -0.5 * (s.ia * dx * dx + 2 * s.ib * dx * dy + s.ic * dy * dy);
        if (power > 0) continue;
        const alpha = Math.min(ALPHA_MAX, s.alpha * Math.exp(power));
        if (alpha < ALPHA_SKIP) continue;
        const k = (y * w + x) * 3;
        color[k] += t * alpha * cr;
        color[k + 1] += t * alpha * cg;
        color[k + 2] += t * alpha * cb;
        trans[y * w + x] = t * (1 - alpha);
      }
    }
  }

  for (let p = 0; p < w * h; p++) {
    const t = trans[p];
    color[3 * p] += t * bg[0];
    color[3 * p + 1] += t * bg[1];
    color[3 * p + 2] += t * bg[2];
  }
  return color;
}
