"""Forward splat rendering: projection, depth sort, front-to-back compositing.

The per-pixel inner loops are compiled with numba and run single-threaded in a
fixed order, so renders are bitwise reproducible. Compositing cutoffs (alpha
clamp, contribution skip, transmittance termination) are options so tests can
disable them when comparing against the brute-force oracle.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .errors import InvalidParameterError
from .formats.colmap import CameraIntrinsics, CameraPose
from .geom import quat_normalize, quat_to_rot
from .model import SplatCloud, build_covariances, sigmoid
from .sh import num_coeffs, sh_basis

LOW_PASS = 0.3  # px^2 added to the diagonal of every 2D covariance


@dataclass(frozen=True)
class RenderOptions:
    near: float = 0.2
    alpha_clamp: float = 0.99
    skip_threshold: float = 1.0 / 255.0
    termination_threshold: float = 1e-4
    bounded: bool = True  # restrict each splat to its 3-sigma screen disc

    @staticmethod
    def exact() -> "RenderOptions":
        """No skip, no termination, no spatial bounding: oracle-equivalent math."""
        return RenderOptions(skip_threshold=0.0, termination_threshold=0.0,
                             bounded=False)


DEFAULT_OPTIONS = RenderOptions()


@dataclass
class Projection:
    """Screen-space Gaussians for one view (struct-of-arrays over survivors)."""

    indices: np.ndarray      # (m,) source Gaussian ids, ascending
    cam: np.ndarray          # (m, 3) camera-frame positions
    depth: np.ndarray        # (m,)
    mean2d: np.ndarray       # (m, 2)
    cov2d: np.ndarray        # (m, 3) packed (A, B, C) after low-pass dilation
    conic: np.ndarray        # (m, 3) packed inverse (a, b, c)
    radius: np.ndarray       # (m,) pixels
    color: np.ndarray        # (m, 3) SH-decoded, clamped at 0
    raw_color: np.ndarray    # (m, 3) pre-clamp values (for gradient masking)
    alpha: np.ndarray        # (m,)
    dirs: np.ndarray         # (m, 3) unit view directions
    dir_norm: np.ndarray     # (m,) |mu - camera_center|
    jac: np.ndarray          # (m, 2, 3) perspective Jacobian J
    tmat: np.ndarray         # (m, 2, 3) J @ R_cam
    rot_cam: np.ndarray      # (3, 3)
    cam_center: np.ndarray   # (3,)
    n_total: int
    sh_degree: int
    options: RenderOptions


@dataclass
class RenderOutput:
    color: np.ndarray                 # (h, w, 3); may exceed 1 (SH has no upper clamp)
    final_transmittance: np.ndarray   # (h, w)
    per_gaussian_max_blend: np.ndarray  # (n,)
    touched: np.ndarray               # (n,) bool: survived projection culling
    screen_grad_accum: np.ndarray     # (n,) filled by backprop
    projection: Projection = field(repr=False, default=None)
    sort_order: np.ndarray = field(repr=False, default=None)
    n_contrib: np.ndarray = field(repr=False, default=None)
    boundary_flags: np.ndarray = field(repr=False, default=None)  # (m,) clamp-boundary hits
    background: np.ndarray = field(repr=False, default=None)

    def image(self):
        from .formats.image import ImageBuffer

        return ImageBuffer(np.clip(self.color, 0.0, 1.0))


def project(cloud: SplatCloud, intrinsics: CameraIntrinsics, pose: CameraPose,
            options: RenderOptions = DEFAULT_OPTIONS) -> Projection:
    """Project every Gaussian to screen space, culling those behind the near
    plane or (in bounded mode) whose 3-sigma disc misses the image."""
    n = cloud.n
    R = quat_to_rot(quat_normalize(pose.q))
    t = pose.t
    cam_center = -R.T @ t
    cam = cloud.positions @ R.T + t
    depth = cam[:, 2]
    fx, fy, cx, cy = intrinsics.fx, intrinsics.fy, intrinsics.cx, intrinsics.cy
    W, H = intrinsics.width, intrinsics.height

    vis = depth > options.near
    idx = np.nonzero(vis)[0]
    cam_v = cam[idx]
    z = cam_v[:, 2]
    u = fx * cam_v[:, 0] / z + cx
    v = fy * cam_v[:, 1] / z + cy

    cov3d = build_covariances(cloud)[idx]
    m = len(idx)
    J = np.zeros((m, 2, 3))
    J[:, 0, 0] = fx / z
    J[:, 0, 2] = -fx * cam_v[:, 0] / z ** 2
    J[:, 1, 1] = fy / z
    J[:, 1, 2] = -fy * cam_v[:, 1] / z ** 2
    T = J @ R  # (m, 2, 3)
    cov2d_full = np.einsum("mij,mjk,mlk->mil", T, cov3d, T)
    A = cov2d_full[:, 0, 0] + LOW_PASS
    B = cov2d_full[:, 0, 1]
    C = cov2d_full[:, 1, 1] + LOW_PASS
    det = A * C - B * B
    conic = np.stack([C / det, -B / det, A / det], axis=1)
    lam_max = 0.5 * (A + C) + np.sqrt(np.maximum(0.25 * (A - C) ** 2 + B * B, 0.0))
    radius = np.maximum(np.ceil(3.0 * np.sqrt(lam_max)), 1.0)

    if options.bounded:
        keep = ((u + radius >= 0.0) & (u - radius <= W)
                & (v + radius >= 0.0) & (v - radius <= H))
    else:
        keep = np.ones(m, dtype=bool)
    sel = np.nonzero(keep)[0]
    idx = idx[sel]

    diff = cloud.positions[idx] - cam_center
    dn = np.linalg.norm(diff, axis=1)
    dirs = diff / np.maximum(dn, 1e-12)[:, None]
    k = num_coeffs(cloud.active_sh_degree)
    basis = sh_basis(dirs)[:, :k]
    raw_color = 0.5 + np.einsum("mck,mk->mc", cloud.sh_coeffs[idx, :, :k], basis)
    color = np.maximum(raw_color, 0.0)

    return Projection(
        indices=idx,
        cam=cam_v[sel],
        depth=z[sel],
        mean2d=np.stack([u[sel], v[sel]], axis=1),
        cov2d=np.stack([A[sel], B[sel], C[sel]], axis=1),
        conic=conic[sel],
        radius=radius[sel],
        color=color,
        raw_color=raw_color,
        alpha=sigmoid(cloud.opacity_logits[idx]),
        dirs=dirs,
        dir_norm=dn,
        jac=J[sel],
        tmat=T[sel],
        rot_cam=R,
        cam_center=cam_center,
        n_total=n,
        sh_degree=cloud.active_sh_degree,
        options=options,
    )


@njit(cache=True)
def _forward_kernel(order, mean2d, conic, color, alpha, radius, height, width,
                    alpha_clamp, skip_th, term_th, bounded):
    m = order.size
    img = np.zeros((height, width, 3))
    T = np.ones((height, width))
    done = np.zeros((height, width), dtype=np.bool_)
    n_contrib = np.full((height, width), -1, dtype=np.int64)
    max_blend = np.zeros(m)
    boundary = np.zeros(m, dtype=np.bool_)
    for k in range(m):
        g = order[k]
        u = mean2d[g, 0]
        v = mean2d[g, 1]
        r = radius[g]
        if bounded:
            x0 = max(0, int(np.floor(u - r)))
            x1 = min(width - 1, int(np.ceil(u + r)))
            y0 = max(0, int(np.floor(v - r)))
            y1 = min(height - 1, int(np.ceil(v + r)))
            if x0 > x1 or y0 > y1:
                continue
        else:
            x0, x1, y0, y1 = 0, width - 1, 0, height - 1
        a = conic[g, 0]
        b = conic[g, 1]
        c = conic[g, 2]
        al = alpha[g]
        r2 = r * r
        for i in range(y0, y1 + 1):
            dy = i + 0.5 - v
            for j in range(x0, x1 + 1):
                if done[i, j]:
                    continue
                dx = j + 0.5 - u
                if bounded and dx * dx + dy * dy > r2:
                    continue
                power = -0.5 * (a * dx * dx + 2.0 * b * dx * dy + c * dy * dy)
                if power > 0.0:
                    continue
                ap = al * np.exp(power)
                if ap > alpha_clamp:
                    ap = alpha_clamp
                if abs(ap - alpha_clamp) < 1e-6:
                    boundary[g] = True
                if skip_th > 0.0 and abs(ap - skip_th) < 1e-6:
                    boundary[g] = True
                if ap < skip_th:
                    continue
                w = ap * T[i, j]
                img[i, j, 0] += color[g, 0] * w
                img[i, j, 1] += color[g, 1] * w
                img[i, j, 2] += color[g, 2] * w
                if w > max_blend[g]:
                    max_blend[g] = w
                T[i, j] *= 1.0 - ap
                n_contrib[i, j] = k
                if term_th > 0.0 and abs(T[i, j] - term_th) < 1e-6:
                    boundary[g] = True
                if T[i, j] < term_th:
                    done[i, j] = True
    return img, T, n_contrib, max_blend, boundary


def composite(proj: Projection, width: int, height: int, bg,
              options: RenderOptions | None = None) -> RenderOutput:
    """Alpha-composite projected Gaussians front to back over a background."""
    if options is None:
        options = proj.options
    bg = np.asarray(bg, dtype=np.float64).reshape(3)
    if np.any(proj.cov2d[:, 0] * proj.cov2d[:, 2] - proj.cov2d[:, 1] ** 2 <= 0.0):
        raise InvalidParameterError("non-invertible 2D covariance in projection")
    order = np.lexsort((proj.indices, proj.depth)).astype(np.int64)
    img, T, n_contrib, max_blend, boundary = _forward_kernel(
        order, proj.mean2d, proj.conic, proj.color, proj.alpha, proj.radius,
        height, width, options.alpha_clamp, options.skip_threshold,
        options.termination_threshold, options.bounded)
    img = img + T[:, :, None] * bg[None, None, :]

    n = proj.n_total
    blend_full = np.zeros(n)
    blend_full[proj.indices] = max_blend
    touched = np.zeros(n, dtype=bool)
    touched[proj.indices] = True
    return RenderOutput(
        color=img,
        final_transmittance=T,
        per_gaussian_max_blend=blend_full,
        touched=touched,
        screen_grad_accum=np.zeros(n),
        projection=proj,
        sort_order=order,
        n_contrib=n_contrib,
        boundary_flags=boundary,
        background=bg,
    )


def render(cloud: SplatCloud, intrinsics: CameraIntrinsics, pose: CameraPose,
           bg=(0.0, 0.0, 0.0), options: RenderOptions = DEFAULT_OPTIONS) -> RenderOutput:
    """project + composite in one call."""
    proj = project(cloud, intrinsics, pose, options)
    return composite(proj, intrinsics.width, intrinsics.height, bg, options)
