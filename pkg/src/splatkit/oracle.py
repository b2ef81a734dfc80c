"""Brute-force reference renderer for equivalence testing.

Deliberately slow and simple: explicit per-Gaussian matrix products for the
projection, per-pixel evaluation over every Gaussian in exact depth order, no
spatial culling, no radius bounding, no contribution skip, no early
termination. Intended for scenes of at most a few hundred Gaussians.
"""

from __future__ import annotations

import numpy as np

from .formats.colmap import CameraIntrinsics, CameraPose
from .geom import quat_normalize, quat_to_rot
from .rasterizer import LOW_PASS
from .sh import eval_sh_color


def oracle_render(cloud, intrinsics: CameraIntrinsics, pose: CameraPose,
                  bg=(0.0, 0.0, 0.0), near: float = 0.2,
                  alpha_clamp: float = 0.99) -> np.ndarray:
    """Ground-truth render as an (h, w, 3) array."""
    bg = np.asarray(bg, dtype=np.float64).reshape(3)
    W, H = intrinsics.width, intrinsics.height
    R = quat_to_rot(quat_normalize(pose.q))
    t = pose.t
    cam_center = -R.T @ t

    means, conics, colors, alphas, depths, src = [], [], [], [], [], []
    for i in range(cloud.n):
        p_cam = R @ cloud.positions[i] + t
        x, y, z = p_cam
        if z <= near:
            continue
        u = intrinsics.fx * x / z + intrinsics.cx
        v = intrinsics.fy * y / z + intrinsics.cy
        q = quat_normalize(cloud.rotations[i])
        Rg = quat_to_rot(q)
        S = np.diag(np.exp(cloud.log_scales[i]))
        sigma = Rg @ S @ S.T @ Rg.T
        J = np.array([[intrinsics.fx / z, 0.0, -intrinsics.fx * x / z ** 2],
                      [0.0, intrinsics.fy / z, -intrinsics.fy * y / z ** 2]])
        cov2d = J @ R @ sigma @ R.T @ J.T + LOW_PASS * np.eye(2)
        d = cloud.positions[i] - cam_center
        direction = d / np.linalg.norm(d)
        color = eval_sh_color(cloud.sh_coeffs[i], cloud.active_sh_degree, direction)
        means.append([u, v])
        conics.append(np.linalg.inv(cov2d))
        colors.append(color)
        alphas.append(1.0 / (1.0 + np.exp(-cloud.opacity_logits[i])))
        depths.append(z)
        src.append(i)

    img = np.empty((H, W, 3))
    img[:] = bg
    if not means:
        return img
    order = np.lexsort((np.array(src), np.array(depths)))
    means = np.array(means)[order]
    conics = np.array(conics)[order]
    colors = np.array(colors)[order]
    alphas = np.array(alphas)[order]

    a = conics[:, 0, 0]
    b = conics[:, 0, 1]
    c = conics[:, 1, 1]
    for i in range(H):
        for j in range(W):
            dx = j + 0.5 - means[:, 0]
            dy = i + 0.5 - means[:, 1]
            power = -0.5 * (a * dx * dx + 2.0 * b * dx * dy + c * dy * dy)
            ap = np.minimum(alphas * np.exp(power), alpha_clamp)
            ap[power > 0.0] = 0.0  # mirrors the rasterizer's guard (unreachable for PD conics)
            trans = np.concatenate([[1.0], np.cumprod(1.0 - ap)])
            img[i, j] = (colors * (ap * trans[:-1])[:, None]).sum(axis=0) \
                + trans[-1] * bg
    return img
