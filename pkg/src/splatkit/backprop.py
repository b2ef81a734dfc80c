"""Analytic gradients of a pixel-space loss with respect to Gaussian parameters.

The per-pixel compositing sequence is re-walked back to front with suffix
accumulators (O(1) memory per pixel), mirroring the forward cutoffs with zero
subgradient at clamp boundaries. Everything runs in double precision so the
finite-difference harness is meaningful at 1e-4 tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import SplatkitError
from .geom import quat_normalize
from .model import SplatCloud, PARAM_GROUPS
from .rasterizer import RenderOutput
from .sh import num_coeffs, sh_basis, sh_basis_jacobian


@dataclass
class GradientSet:
    positions: np.ndarray       # (n, 3)
    log_scales: np.ndarray      # (n, 3)
    rotations: np.ndarray       # (n, 4)
    opacity_logits: np.ndarray  # (n,)
    sh_coeffs: np.ndarray       # (n, 3, 16)
    view_space_grad_norm: np.ndarray  # (n,) |dL/dmean2d|

    def groups(self) -> dict[str, np.ndarray]:
        return {
            "position": self.positions,
            "scale": self.log_scales,
            "rotation": self.rotations,
            "opacity": self.opacity_logits,
            "sh_dc": self.sh_coeffs[:, :, 0:1],
            "sh_rest": self.sh_coeffs[:, :, 1:],
        }

    @staticmethod
    def zeros(n: int) -> "GradientSet":
        return GradientSet(np.zeros((n, 3)), np.zeros((n, 3)), np.zeros((n, 4)),
                           np.zeros(n), np.zeros((n, 3, 16)), np.zeros(n))


@njit(cache=True)
def _backward_kernel(order, mean2d, conic, color, alpha, radius, t_final,
                     n_contrib, dL_dC, bg, alpha_clamp, skip_th, bounded):
    m = order.size
    height, width = t_final.shape
    S = np.empty((height, width, 3))
    for i in range(height):
        for j in range(width):
            S[i, j, 0] = bg[0]
            S[i, j, 1] = bg[1]
            S[i, j, 2] = bg[2]
    t_run = t_final.copy()
    d_mean2d = np.zeros((m, 2))
    d_conic = np.zeros((m, 3))  # full-matrix entries (00, 01, 11)
    d_color = np.zeros((m, 3))
    d_alpha = np.zeros(m)
    for k in range(m - 1, -1, -1):
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
                if n_contrib[i, j] < k:
                    continue
                dx = j + 0.5 - u
                if bounded and dx * dx + dy * dy > r2:
                    continue
                power = -0.5 * (a * dx * dx + 2.0 * b * dx * dy + c * dy * dy)
                if power > 0.0:
                    continue
                g_exp = np.exp(power)
                ap_raw = al * g_exp
                ap = min(ap_raw, alpha_clamp)
                if ap < skip_th:
                    continue
                om = 1.0 - ap
                t_k = t_run[i, j] / om
                dL_dap = 0.0
                for ch in range(3):
                    gc = dL_dC[i, j, ch]
                    d_color[g, ch] += gc * ap * t_k
                    dL_dap += gc * t_k * (color[g, ch] - S[i, j, ch])
                if ap_raw < alpha_clamp:
                    d_alpha[g] += dL_dap * g_exp
                    dL_dP = dL_dap * al * g_exp
                    d_mean2d[g, 0] += dL_dP * (a * dx + b * dy)
                    d_mean2d[g, 1] += dL_dP * (b * dx + c * dy)
                    d_conic[g, 0] += dL_dP * (-0.5 * dx * dx)
                    d_conic[g, 1] += dL_dP * (-0.5 * dx * dy)
                    d_conic[g, 2] += dL_dP * (-0.5 * dy * dy)
                for ch in range(3):
                    S[i, j, ch] = color[g, ch] * ap + om * S[i, j, ch]
                t_run[i, j] = t_k
    return d_mean2d, d_conic, d_color, d_alpha


def _rotation_jacobian(q: np.ndarray) -> np.ndarray:
    """dR/dq for unit quaternions q (m, 4) -> (m, 4, 3, 3)."""
    w, x, y, z = q[:, 0], q[:, 1], q[:, 2], q[:, 3]
    zero = np.zeros_like(w)
    J = np.empty((len(q), 4, 3, 3))
    J[:, 0] = 2.0 * np.stack([
        np.stack([zero, -z, y], -1),
        np.stack([z, zero, -x], -1),
        np.stack([-y, x, zero], -1)], 1)
    J[:, 1] = 2.0 * np.stack([
        np.stack([zero, y, z], -1),
        np.stack([y, -2 * x, -w], -1),
        np.stack([z, w, -2 * x], -1)], 1)
    J[:, 2] = 2.0 * np.stack([
        np.stack([-2 * y, x, w], -1),
        np.stack([x, zero, z], -1),
        np.stack([-w, z, -2 * y], -1)], 1)
    J[:, 3] = 2.0 * np.stack([
        np.stack([-2 * z, -w, x], -1),
        np.stack([w, -2 * z, y], -1),
        np.stack([x, y, zero], -1)], 1)
    return J


def backward(cloud: SplatCloud, intrinsics, pose, rendered: RenderOutput,
             dL_dpixels: np.ndarray) -> GradientSet:
    """Chain pixel gradients through compositing, projection, covariance
    construction, and the SH basis, into every cloud parameter group."""
    proj = rendered.projection
    dL_dpixels = np.asarray(dL_dpixels, dtype=np.float64)
    if dL_dpixels.shape != rendered.color.shape:
        raise SplatkitError(
            f"pixel gradient shape {dL_dpixels.shape} does not match render "
            f"{rendered.color.shape}")
    n = cloud.n
    out = GradientSet.zeros(n)
    m = len(proj.indices)
    if m == 0:
        return out
    opts = proj.options

    d_mean2d, d_conic, d_color, d_alpha = _backward_kernel(
        rendered.sort_order, proj.mean2d, proj.conic, proj.color, proj.alpha,
        proj.radius, rendered.final_transmittance, rendered.n_contrib,
        dL_dpixels, rendered.background, opts.alpha_clamp, opts.skip_threshold,
        opts.bounded)

    idx = proj.indices
    fx, fy = intrinsics.fx, intrinsics.fy

    # opacity logit through sigmoid
    d_logit = d_alpha * proj.alpha * (1.0 - proj.alpha)

    # SH coefficients and view direction (color clamp propagates zero below 0)
    k = num_coeffs(proj.sh_degree)
    active = (proj.raw_color > 0.0).astype(np.float64)  # (m, 3)
    dc = d_color * active
    basis = sh_basis(proj.dirs)[:, :k]
    d_sh = np.zeros((m, 3, 16))
    d_sh[:, :, :k] = dc[:, :, None] * basis[:, None, :]
    dbasis = sh_basis_jacobian(proj.dirs)[:, :k, :]  # (m, k, 3)
    coeff = cloud.sh_coeffs[idx, :, :k]
    d_dir = np.einsum("mc,mck,mkd->md", dc, coeff, dbasis)
    # normalize(mu - cam_center): (I - dir dir^T) / |mu - cc|
    proj_perp = d_dir - proj.dirs * np.einsum("md,md->m", proj.dirs, d_dir)[:, None]
    d_mu_sh = proj_perp / proj.dir_norm[:, None]

    # conic -> 2D covariance: d(Sigma^-1) = -Sigma^-1 dSigma Sigma^-1
    Gc = np.empty((m, 2, 2))
    Gc[:, 0, 0] = d_conic[:, 0]
    Gc[:, 0, 1] = Gc[:, 1, 0] = d_conic[:, 1]
    Gc[:, 1, 1] = d_conic[:, 2]
    Conic = np.empty((m, 2, 2))
    Conic[:, 0, 0] = proj.conic[:, 0]
    Conic[:, 0, 1] = Conic[:, 1, 0] = proj.conic[:, 1]
    Conic[:, 1, 1] = proj.conic[:, 2]
    Gcov = -np.einsum("mij,mjk,mkl->mil", Conic, Gc, Conic)

    # cov2d = T Sigma T^T (+ const): into Sigma and into T = J W
    q_hat = quat_normalize(cloud.rotations[idx])
    from .geom import quat_to_rot

    R3 = quat_to_rot(q_hat)
    D = np.exp(2.0 * cloud.log_scales[idx])
    Sigma = np.einsum("mij,mj,mkj->mik", R3, D, R3)
    T = proj.tmat
    GSigma = np.einsum("maj,mab,mbl->mjl", T, Gcov, T)
    dT = 2.0 * np.einsum("mab,mbj,mjl->mal", Gcov, T, Sigma)
    dJ = dT @ proj.rot_cam.T

    # Sigma = R3 diag(D) R3^T: into log-scales and the stored quaternion
    d_logD = np.einsum("mji,mjk,mki->mi", R3, GSigma, R3) * 2.0 * D
    dR3 = 2.0 * np.einsum("mij,mjk,mk->mik", GSigma, R3, D)
    Jq = _rotation_jacobian(q_hat)
    d_qhat = np.einsum("mqij,mij->mq", Jq, dR3)
    qn = np.linalg.norm(cloud.rotations[idx], axis=1)
    d_q = (d_qhat - q_hat * np.einsum("mq,mq->m", q_hat, d_qhat)[:, None]) / qn[:, None]

    # J and mean2d into camera-frame coordinates
    x, y, z = proj.cam[:, 0], proj.cam[:, 1], proj.cam[:, 2]
    d_cam = np.zeros((m, 3))
    d_cam[:, 0] = dJ[:, 0, 2] * (-fx / z ** 2) + d_mean2d[:, 0] * fx / z
    d_cam[:, 1] = dJ[:, 1, 2] * (-fy / z ** 2) + d_mean2d[:, 1] * fy / z
    d_cam[:, 2] = (dJ[:, 0, 0] * (-fx / z ** 2) + dJ[:, 1, 1] * (-fy / z ** 2)
                   + dJ[:, 0, 2] * (2.0 * fx * x / z ** 3)
                   + dJ[:, 1, 2] * (2.0 * fy * y / z ** 3)
                   - d_mean2d[:, 0] * fx * x / z ** 2
                   - d_mean2d[:, 1] * fy * y / z ** 2)
    d_mu = d_cam @ proj.rot_cam + d_mu_sh

    out.positions[idx] = d_mu
    out.log_scales[idx] = d_logD
    out.rotations[idx] = d_q
    out.opacity_logits[idx] = d_logit
    out.sh_coeffs[idx] = d_sh
    out.view_space_grad_norm[idx] = np.linalg.norm(d_mean2d, axis=1)
    rendered.screen_grad_accum = out.view_space_grad_norm.copy()
    return out


def flatten_gradients(gset: GradientSet) -> np.ndarray:
    return np.concatenate([gset.groups()[name].ravel() for name in PARAM_GROUPS])


def _param_refs(cloud: SplatCloud):
    """(group, array) pairs covering every scalar parameter once.

    Arrays are views into cloud storage (possibly non-contiguous), so
    perturbation must go through multi-index assignment, not flat views."""
    return list(cloud.parameters_view().items())


@dataclass
class FiniteDifferenceReport:
    rel_errors: np.ndarray      # per scalar parameter; nan where excluded
    excluded: np.ndarray        # bool mask
    analytic: np.ndarray
    numeric: np.ndarray
    group_names: list

    def fraction_within(self, tol: float) -> float:
        ok = ~self.excluded
        if not ok.any():
            return 1.0
        return float((self.rel_errors[ok] < tol).mean())

    def max_error(self) -> float:
        ok = ~self.excluded
        return float(self.rel_errors[ok].max()) if ok.any() else 0.0


def finite_difference_check(cloud: SplatCloud, loss_and_grad, h: float = 1e-4,
                            exclusion_rule=None) -> FiniteDifferenceReport:
    """Compare analytic gradients against central finite differences.

    loss_and_grad(cloud) must return (loss, GradientSet, per_gaussian_boundary
    flags). Steps are relative with an absolute floor of 1e-6. The default
    exclusion rule drops every parameter of a Gaussian that hit a clamp/skip
    boundary in the base render.
    """
    base_loss, gset, boundary = loss_and_grad(cloud)
    analytic = flatten_gradients(gset)
    refs = _param_refs(cloud)
    sizes = [arr.size for _, arr in refs]
    total = sum(sizes)
    numeric = np.zeros(total)
    group_of = np.concatenate([np.full(s, gi) for gi, s in enumerate(sizes)])
    names = [name for name, _ in refs]

    # map each scalar coordinate to its Gaussian index
    owner = []
    for name, arr in refs:
        per = arr.size // cloud.n
        owner.append(np.repeat(np.arange(cloud.n), per))
    owner = np.concatenate(owner)

    offset = 0
    for name, arr in refs:
        for mi in np.ndindex(arr.shape):
            theta = arr[mi]
            step = max(abs(theta) * h, 1e-6)
            arr[mi] = theta + step
            lp, _, _ = loss_and_grad(cloud)
            arr[mi] = theta - step
            lm, _, _ = loss_and_grad(cloud)
            arr[mi] = theta
            numeric[offset] = (lp - lm) / (2.0 * step)
            offset += 1

    if exclusion_rule is None:
        excluded = boundary[owner]
    else:
        excluded = exclusion_rule(owner, group_of, analytic, numeric)
    scale = np.maximum(np.abs(analytic), np.abs(numeric))
    rel = np.zeros(total)
    nz = scale > 1e-9
    rel[nz] = np.abs(analytic - numeric)[nz] / scale[nz]
    rel[~nz] = 0.0
    return FiniteDifferenceReport(rel, np.asarray(excluded, dtype=bool),
                                  analytic, numeric, names)
