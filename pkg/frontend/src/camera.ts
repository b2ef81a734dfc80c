/**
 * Orbit camera: a pinhole view parameterized by azimuth/elevation/distance
 * around a target point, with world +z as up.
 *
 * Camera frame follows the usual splat convention: +x right, +y down,
 * +z forward, so image v grows downward.
 */

export type Vec3 = [number, number, number];

export interface OrbitCamera {
  /** Radians around world z; 0 looks along -x from +x side. */
  azimuth: number;
  /** Radians above the target plane. */
  elevation: number;
  distance: number;
  target: Vec3;
  /** Focal length in pixels (square pixels). */
  focal: number;
  width: number;
  height: number;
}

export function defaultCamera(width: number, height: number): OrbitCamera {
  return {
    azimuth: 0,
    elevation: 0.3,
    distance: 4,
    target: [0, 0, 0],
    focal: 1.2 * Math.max(width, height),
    width,
    height,
  };
}

function sub(a: Vec3, b: Vec3): Vec3 {
  return [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
}

function cross(a: Vec3, b: Vec3): Vec3 {
  return [
    a[1] * b[2] - a[2] * b[1],
    a[2] * b[0] - a[0] * b[2],
    a[0] * b[1] - a[1] * b[0],
  ];
}

function normalize(a: Vec3): Vec3 {
  const n = Math.hypot(a[0], a[1], a[2]);
  if (n === 0) throw new Error("cannot normalize zero vector");
  return [a[0] / n, a[1] / n, a[2] / n];
}

export function cameraCenter(cam: OrbitCamera): Vec3 {
  const ce = Math.cos(cam.elevation);
  return [
    cam.target[0] + cam.distance * ce * Math.cos(cam.azimuth),
    cam.target[1] + cam.distance * ce * Math.sin(cam.azimuth),
    cam.target[2] + cam.distance * Math.sin(cam.elevation),
  ];
}

/** Rows of the world-to-camera rotation: [right, down, forward]. */
export function cameraAxes(cam: OrbitCamera): [Vec3, Vec3, Vec3] {
  const center = cameraCenter(cam);
  const forward = normalize(sub(cam.target, center));
  // Degenerate straight-down/up views fall back to azimuth-aligned right.
  let right: Vec3;
  try {
    right = normalize(cross(forward, [0, 0, 1]));
  } catch {
    right = [-Math.sin(cam.azimuth), Math.cos(cam.azimuth), 0];
  }
  const down = cross(forward, right);
  return [right, down, forward];
}

export interface Projected {
  u: number;
  v: number;
  /** Camera-space depth; points with z <= near are not visible. */
  z: number;
}

export const NEAR_PLANE = 0.2;

/** Transform a world point into the camera frame. */
export function toCamera(cam: OrbitCamera, p: Vec3): Vec3 {
  const c = cameraCenter(cam);
  const [right, down, forward] = cameraAxes(cam);
  const d = sub(p, c);
  return [
    right[0] * d[0] + right[1] * d[1] + right[2] * d[2],
    down[0] * d[0] + down[1] * d[1] + down[2] * d[2],
    forward[0] * d[0] + forward[1] * d[1] + forward[2] * d[2],
  ];
}

/** Project a world point to pixel coordinates (pixel centers at .5). */
export function project(cam: OrbitCamera, p: Vec3): Projected {
  const q = toCamera(cam, p);
  const cx = cam.width / 2;
  const cy = cam.height / 2;
  return {
    u: (cam.focal * q[0]) / q[2] + cx,
    v: (cam.focal * q[1]) / q[2] + cy,
    z: q[2],
  };
}
