"""The optimizable scene representation: a cloud of anisotropic 3D Gaussians.

Scales are stored as logarithms and opacities as logits so every parameter is
unconstrained; activations (exp, sigmoid, quaternion normalization) are applied
at the point of geometric use.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidParameterError
from .geom import quat_normalize, quat_to_rot
from .sh import SH_C0, N_COEFFS

PARAM_GROUPS = ("position", "scale", "rotation", "opacity", "sh_dc", "sh_rest")


def sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def logit(p):
    return np.log(p) - np.log1p(-p)


@dataclass
class SplatCloud:
    positions: np.ndarray      # (n, 3) world units
    log_scales: np.ndarray     # (n, 3), world units after exp
    rotations: np.ndarray      # (n, 4) quaternions (w, x, y, z), unnormalized storage
    opacity_logits: np.ndarray  # (n,)
    sh_coeffs: np.ndarray      # (n, 3, 16) channel-major
    active_sh_degree: int = 0
    grad_accum: np.ndarray = field(default=None, repr=False)  # densification stats
    grad_denom: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        self.positions = np.ascontiguousarray(self.positions, dtype=np.float64).reshape(-1, 3)
        n = len(self.positions)
        self.log_scales = np.ascontiguousarray(self.log_scales, dtype=np.float64).reshape(n, 3)
        self.rotations = np.ascontiguousarray(self.rotations, dtype=np.float64).reshape(n, 4)
        self.opacity_logits = np.ascontiguousarray(
            self.opacity_logits, dtype=np.float64).reshape(n)
        self.sh_coeffs = np.ascontiguousarray(
            self.sh_coeffs, dtype=np.float64).reshape(n, 3, N_COEFFS)
        if not 0 <= self.active_sh_degree <= 3:
            raise InvalidParameterError("active_sh_degree must be in [0, 3]")
        if self.grad_accum is None:
            self.grad_accum = np.zeros(n)
        if self.grad_denom is None:
            self.grad_denom = np.zeros(n)

    @property
    def n(self) -> int:
        return len(self.positions)

    def validate(self) -> None:
        for name, arr in self.parameters_view().items():
            if not np.all(np.isfinite(arr)):
                raise InvalidParameterError(f"non-finite values in parameter group {name}")
        if np.any(np.linalg.norm(self.rotations, axis=1) == 0.0):
            raise InvalidParameterError("zero quaternion in cloud")

    def parameters_view(self) -> dict[str, np.ndarray]:
        """The six named parameter groups, as views into cloud storage."""
        return {
            "position": self.positions,
            "scale": self.log_scales,
            "rotation": self.rotations,
            "opacity": self.opacity_logits,
            "sh_dc": self.sh_coeffs[:, :, 0:1],
            "sh_rest": self.sh_coeffs[:, :, 1:],
        }

    def densify_stats_reset(self) -> None:
        self.grad_accum = np.zeros(self.n)
        self.grad_denom = np.zeros(self.n)

    def select(self, mask_or_indices) -> "SplatCloud":
        """Order-preserving subset; parameter values are copied bitwise."""
        idx = np.asarray(mask_or_indices)
        return SplatCloud(
            self.positions[idx].copy(),
            self.log_scales[idx].copy(),
            self.rotations[idx].copy(),
            self.opacity_logits[idx].copy(),
            self.sh_coeffs[idx].copy(),
            self.active_sh_degree,
        )

    def copy(self) -> "SplatCloud":
        return self.select(np.arange(self.n))

    def opacities(self) -> np.ndarray:
        return sigmoid(self.opacity_logits)

    def scales(self) -> np.ndarray:
        return np.exp(self.log_scales)


def build_covariance(log_scale: np.ndarray, q: np.ndarray) -> np.ndarray:
    """World-space covariance R(q_hat) diag(exp(s))^2 R(q_hat)^T for one Gaussian."""
    R = quat_to_rot(quat_normalize(np.asarray(q, dtype=np.float64)))
    d = np.exp(2.0 * np.asarray(log_scale, dtype=np.float64))
    return (R * d) @ R.T


def build_covariances(cloud: SplatCloud) -> np.ndarray:
    """(n, 3, 3) covariances for the whole cloud."""
    R = quat_to_rot(quat_normalize(cloud.rotations))
    d = np.exp(2.0 * cloud.log_scales)
    return np.einsum("nij,nj,nkj->nik", R, d, R)


def mean_knn_distance(positions: np.ndarray, k: int = 3,
                      brute_force_limit: int = 50_000) -> np.ndarray:
    """Per-point mean distance to its k nearest neighbors (self excluded).

    Exact brute force below `brute_force_limit` points, kd-tree above. Points
    with fewer than k neighbors average over what exists.
    """
    positions = np.asarray(positions, dtype=np.float64)
    n = len(positions)
    kk = min(k, n - 1)
    if kk < 1:
        raise InvalidParameterError("need at least 2 points for neighbor distances")
    if n <= brute_force_limit:
        diff = positions[:, None, :] - positions[None, :, :]
        dists = np.sqrt((diff ** 2).sum(-1))
        np.fill_diagonal(dists, np.inf)
        part = np.sort(dists, axis=1)[:, :kk]
        return part.mean(axis=1)
    from scipy.spatial import cKDTree

    tree = cKDTree(positions)
    d, _ = tree.query(positions, k=kk + 1)
    return d[:, 1:].mean(axis=1)


def init_from_sparse(points, extent: float) -> SplatCloud:
    """One Gaussian per SfM point: color from the point, isotropic scale from
    the mean 3-nearest-neighbor distance, opacity 0.1, identity rotation.
    """
    n = len(points)
    if n == 0:
        raise InvalidParameterError("cannot initialize from empty cloud")
    if extent <= 0:
        raise InvalidParameterError("scene extent must be positive")
    positions = np.array(points.positions, dtype=np.float64)
    if n == 1:
        log_s = np.full(1, np.log(0.01 * extent))
    else:
        log_s = np.log(np.maximum(mean_knn_distance(positions, k=3), 1e-300))
    log_s = np.clip(log_s, np.log(1e-7 * extent), np.log(0.1 * extent))
    log_scales = np.repeat(log_s[:, None], 3, axis=1)
    rotations = np.zeros((n, 4))
    rotations[:, 0] = 1.0
    opacity_logits = np.full(n, logit(0.1))
    sh = np.zeros((n, 3, N_COEFFS))
    sh[:, :, 0] = (np.asarray(points.colors, dtype=np.float64) / 255.0 - 0.5) / SH_C0
    return SplatCloud(positions, log_scales, rotations, opacity_logits, sh,
                      active_sh_degree=0)
