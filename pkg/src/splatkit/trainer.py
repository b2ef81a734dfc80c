"""Optimization loop: Adam per parameter group, learning-rate scheduling,
adaptive density control (clone/split/prune/opacity reset), SH promotion."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, asdict, replace

import numpy as np

from .backprop import backward
from .errors import SplatkitError, InvalidParameterError
from .formats.colmap import SceneBundle, CameraIntrinsics
from .losses import photometric_loss
from .model import SplatCloud, PARAM_GROUPS, sigmoid, logit
from .rasterizer import RenderOptions, render

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-15


@dataclass
class TrainConfig:
    iterations: int = 7000
    lr_position_initial: float = 1.6e-4   # x scene extent
    lr_position_final: float = 1.6e-6     # x scene extent
    lr_position_max_steps: int = 30000
    lr_opacity: float = 0.05
    lr_scale: float = 5e-3
    lr_rotation: float = 1e-3
    lr_sh_dc: float = 2.5e-3
    lr_sh_rest: float = 2.5e-3 / 20.0
    lambda_dssim: float = 0.2
    densify_start_iter: int = 500
    densify_end_iter: int = -1            # -1: iterations // 2
    densify_interval: int = 100
    densify_grad_threshold: float = 2e-4
    split_scale_threshold: float = 0.01   # fraction of scene extent
    split_factor: int = 2
    split_scale_shrink: float = 1.6
    prune_opacity_threshold: float = 0.005
    opacity_reset_interval: int = 3000
    opacity_reset_value: float = 0.01
    sh_promote_interval: int = 1000
    background: tuple = (0.0, 0.0, 0.0)
    downscale: int = 1
    seed: int = 0
    checkpoint_interval: int = 0          # 0: only at completion
    # compositing cutoffs, surfaced so tests can disable them
    alpha_clamp: float = 0.99
    skip_threshold: float = 1.0 / 255.0
    termination_threshold: float = 1e-4

    def __post_init__(self):
        if self.densify_end_iter < 0:
            self.densify_end_iter = self.iterations // 2
        self.densify_end_iter = min(self.densify_end_iter, self.iterations)
        if self.densify_start_iter < 0:
            raise InvalidParameterError("densify_start_iter must be >= 0")
        # start > end simply disables densification (e.g. tiny iteration counts)
        for name in ("lr_position_initial", "lr_position_final", "lr_opacity",
                     "lr_scale", "lr_rotation", "lr_sh_dc", "lr_sh_rest"):
            if getattr(self, name) <= 0:
                raise InvalidParameterError(f"{name} must be positive")
        if self.densify_grad_threshold <= 0 or self.split_scale_threshold <= 0 \
                or self.prune_opacity_threshold <= 0:
            raise InvalidParameterError("thresholds must be positive")
        if not 0.0 <= self.lambda_dssim <= 1.0:
            raise InvalidParameterError("lambda_dssim must be in [0, 1]")

    def render_options(self) -> RenderOptions:
        return RenderOptions(alpha_clamp=self.alpha_clamp,
                             skip_threshold=self.skip_threshold,
                             termination_threshold=self.termination_threshold)

    def config_hash(self) -> str:
        payload = json.dumps(asdict(self), sort_keys=True, default=str)
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


@dataclass
class SceneExtent:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        if self.radius <= 0:
            raise InvalidParameterError("scene extent radius must be positive")


def compute_extent(poses) -> SceneExtent:
    """1.1x the radius of the (centroid-based) bounding sphere of camera centers."""
    centers = np.array([p.center() for p in poses]).reshape(-1, 3)
    center = centers.mean(axis=0)
    radius = float(np.linalg.norm(centers - center, axis=1).max())
    if radius == 0.0:
        radius = 1.0
    return SceneExtent(center, 1.1 * radius)


def lr_schedule(step: int, lr_initial: float, lr_final: float, max_steps: int) -> float:
    """Exponential interpolation lr_initial -> lr_final over max_steps."""
    if not 0 <= step:
        raise InvalidParameterError("step must be non-negative")
    t = min(step, max_steps) / max_steps
    return lr_initial * (lr_final / lr_initial) ** t


class OptimizerState:
    """Adam moments per parameter group, kept congruent with the cloud through
    densify/prune events (new Gaussians get zero moments, pruned rows drop)."""

    def __init__(self, cloud: SplatCloud):
        self.step = 0
        self.m = {}
        self.v = {}
        for name, arr in cloud.parameters_view().items():
            self.m[name] = np.zeros_like(arr)
            self.v[name] = np.zeros_like(arr)

    def rebuild(self, keep_indices: np.ndarray, n_new: int) -> None:
        for name in PARAM_GROUPS:
            kept_m = self.m[name][keep_indices]
            kept_v = self.v[name][keep_indices]
            pad = (n_new,) + kept_m.shape[1:]
            self.m[name] = np.concatenate([kept_m, np.zeros(pad)], axis=0)
            self.v[name] = np.concatenate([kept_v, np.zeros(pad)], axis=0)

    def zero_group(self, name: str) -> None:
        self.m[name][:] = 0.0
        self.v[name][:] = 0.0


def adam_step(params: np.ndarray, grads: np.ndarray, m: np.ndarray, v: np.ndarray,
              step: int, lr: float, beta1: float = ADAM_BETA1,
              beta2: float = ADAM_BETA2, eps: float = ADAM_EPS) -> None:
    """Standard bias-corrected adaptive-moment update, in place."""
    if params.shape != grads.shape:
        raise SplatkitError(f"adam shape mismatch: {params.shape} vs {grads.shape}")
    m *= beta1
    m += (1.0 - beta1) * grads
    v *= beta2
    v += (1.0 - beta2) * grads ** 2
    m_hat = m / (1.0 - beta1 ** step)
    v_hat = v / (1.0 - beta2 ** step)
    params -= lr * m_hat / (np.sqrt(v_hat) + eps)


def opacity_reset(cloud: SplatCloud, value: float) -> None:
    """Clamp every opacity down to at most `value` (never increases)."""
    if not 0.0 < value < 1.0:
        raise InvalidParameterError("opacity reset value must be in (0, 1)")
    cloud.opacity_logits[:] = logit(np.minimum(sigmoid(cloud.opacity_logits), value))


def densify_and_prune(cloud: SplatCloud, state: OptimizerState, config: TrainConfig,
                      extent: float, rng: np.random.Generator,
                      opacity_reset_happened: bool) -> dict:
    """Clone small / split large high-gradient Gaussians, then prune.

    Returns the event record; mutates cloud and optimizer state congruently.
    """
    from .geom import quat_normalize, quat_to_rot

    n_before = cloud.n
    denom = np.maximum(cloud.grad_denom, 1.0)
    mean_grad = cloud.grad_accum / denom
    flagged = (mean_grad > config.densify_grad_threshold) & (cloud.grad_denom > 0)
    max_scale = np.exp(cloud.log_scales).max(axis=1)
    split_mask = flagged & (max_scale > config.split_scale_threshold * extent)
    clone_mask = flagged & ~split_mask

    params = cloud.parameters_view()
    survivors = np.nonzero(~split_mask)[0]
    clones = np.nonzero(clone_mask)[0]
    splits = np.nonzero(split_mask)[0]

    new_rows = {name: [params[name][survivors], params[name][clones]]
                for name in PARAM_GROUPS}

    if len(splits) > 0:
        f = config.split_factor
        parent_pos = cloud.positions[splits]
        parent_ls = cloud.log_scales[splits]
        parent_q = quat_normalize(cloud.rotations[splits])
        R = quat_to_rot(parent_q)
        samples = rng.standard_normal((len(splits), f, 3))
        child_pos = parent_pos[:, None, :] + np.einsum(
            "nij,nfj->nfi", R * np.exp(parent_ls)[:, None, :], samples)
        child_ls = np.repeat(parent_ls - np.log(config.split_scale_shrink), f, axis=0)
        rep = np.repeat(splits, f)
        new_rows["position"].append(child_pos.reshape(-1, 3))
        new_rows["scale"].append(child_ls)
        new_rows["rotation"].append(cloud.rotations[rep])
        new_rows["opacity"].append(cloud.opacity_logits[rep])
        new_rows["sh_dc"].append(cloud.sh_coeffs[rep][:, :, 0:1])
        new_rows["sh_rest"].append(cloud.sh_coeffs[rep][:, :, 1:])

    def cat(name):
        return np.concatenate(new_rows[name], axis=0)

    sh = np.concatenate([cat("sh_dc"), cat("sh_rest")], axis=2)
    new_cloud = SplatCloud(cat("position"), cat("scale"), cat("rotation"),
                           cat("opacity"), sh, cloud.active_sh_degree)
    n_added = new_cloud.n - len(survivors)
    state.rebuild(survivors, n_added)

    # prune: transparent, and oversized once opacities have been reset
    alive = sigmoid(new_cloud.opacity_logits) >= config.prune_opacity_threshold
    if opacity_reset_happened:
        alive &= np.exp(new_cloud.log_scales).max(axis=1) <= 0.1 * extent
    n_pruned = int((~alive).sum())
    if not alive.any():
        raise SplatkitError("pruned to empty cloud")
    kept = np.nonzero(alive)[0]
    final = new_cloud.select(kept)
    state.rebuild(kept, 0)

    # copy back into the caller's cloud object
    cloud.positions = final.positions
    cloud.log_scales = final.log_scales
    cloud.rotations = final.rotations
    cloud.opacity_logits = final.opacity_logits
    cloud.sh_coeffs = final.sh_coeffs
    cloud.densify_stats_reset()
    return {"clones": int(len(clones)), "splits": int(len(splits)),
            "pruned": n_pruned, "before": n_before, "after": cloud.n}


def _downscale_camera(intr: CameraIntrinsics, d: int) -> CameraIntrinsics:
    if d == 1:
        return intr
    return replace(intr, width=intr.width // d, height=intr.height // d,
                   fx=intr.fx / d, fy=intr.fy / d, cx=intr.cx / d, cy=intr.cy / d)


def _downscale_image(arr: np.ndarray, d: int) -> np.ndarray:
    if d == 1:
        return arr
    h, w = arr.shape[0] // d * d, arr.shape[1] // d * d
    a = arr[:h, :w]
    return a.reshape(h // d, d, w // d, d, 3).mean(axis=(1, 3))


def train(bundle: SceneBundle, init: SplatCloud, config: TrainConfig,
          checkpoint_writer=None) -> tuple[SplatCloud, list[dict]]:
    """Run the optimization loop; deterministic under config.seed.

    checkpoint_writer, if given, is called as (cloud, iteration, extent) at
    every checkpoint_interval and at completion.
    """
    views = [(p, bundle.intrinsics[p.camera_id], bundle.images[p.image_name])
             for p in bundle.poses]
    if len(views) < 2:
        raise SplatkitError("insufficient views: need at least 2 registered "
                            f"views, got {len(views)}")
    extent = compute_extent(bundle.poses).radius
    cloud = init.copy()
    cloud.densify_stats_reset()
    state = OptimizerState(cloud)
    rng = np.random.default_rng(config.seed)
    options = config.render_options()
    bg = np.asarray(config.background, dtype=np.float64)
    log: list[dict] = []
    targets = [(p, _downscale_camera(intr, config.downscale),
                _downscale_image(img.array, config.downscale))
               for p, intr, img in views]
    order = np.arange(len(views))
    reset_happened = False

    for it in range(1, config.iterations + 1):
        slot = (it - 1) % len(views)
        if slot == 0:
            order = rng.permutation(len(views))
        pose, intr, target = targets[order[slot]]

        out = render(cloud, intr, pose, bg, options)
        loss, dpix = photometric_loss(out.color, target, config.lambda_dssim,
                                      with_grad=True)
        if not np.isfinite(loss.total):
            raise SplatkitError(f"non-finite loss at iteration {it} on view "
                                f"{pose.image_name}")
        gset = backward(cloud, intr, pose, out, dpix)

        state.step += 1
        groups = cloud.parameters_view()
        grads = gset.groups()
        pos_lr = lr_schedule(state.step, config.lr_position_initial * extent,
                             config.lr_position_final * extent,
                             config.lr_position_max_steps)
        rates = {"position": pos_lr, "scale": config.lr_scale,
                 "rotation": config.lr_rotation, "opacity": config.lr_opacity,
                 "sh_dc": config.lr_sh_dc, "sh_rest": config.lr_sh_rest}
        for name in PARAM_GROUPS:
            adam_step(groups[name], grads[name], state.m[name], state.v[name],
                      state.step, rates[name])

        cloud.grad_accum += gset.view_space_grad_norm
        cloud.grad_denom += out.touched.astype(np.float64)

        events = {}
        if (config.densify_start_iter <= it <= config.densify_end_iter
                and config.densify_interval > 0
                and it % config.densify_interval == 0):
            events = densify_and_prune(cloud, state, config, extent, rng,
                                       reset_happened)
        if config.opacity_reset_interval > 0 and it % config.opacity_reset_interval == 0:
            opacity_reset(cloud, config.opacity_reset_value)
            state.zero_group("opacity")
            reset_happened = True
            events = dict(events, opacity_reset=True)
        if config.sh_promote_interval > 0 and it % config.sh_promote_interval == 0:
            cloud.active_sh_degree = min(3, cloud.active_sh_degree + 1)

        log.append({"iteration": it, "view": pose.image_name, "l1": loss.l1,
                    "dssim": loss.dssim, "total": loss.total, "size": cloud.n,
                    **events})
        if checkpoint_writer is not None and config.checkpoint_interval > 0 \
                and it % config.checkpoint_interval == 0:
            checkpoint_writer(cloud, it, extent)

    if checkpoint_writer is not None:
        checkpoint_writer(cloud, config.iterations, extent)
    return cloud, log
