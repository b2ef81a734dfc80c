"""Automated floater removal: composable bounds / support / opacity / kNN rules.

Every rule is a pure subset selection: survivors keep their parameter values
bitwise and their relative order. The default chain runs bounds -> support ->
opacity -> knn, each skippable.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidParameterError, SplatkitError
from .formats.colmap import SceneBundle, SparsePoints
from .model import SplatCloud, mean_knn_distance, sigmoid
from .rasterizer import RenderOptions, render, DEFAULT_OPTIONS


@dataclass
class Aabb:
    min: np.ndarray
    max: np.ndarray

    def __post_init__(self):
        self.min = np.asarray(self.min, dtype=np.float64).reshape(3)
        self.max = np.asarray(self.max, dtype=np.float64).reshape(3)
        if np.any(self.min > self.max):
            raise InvalidParameterError("Aabb min must be <= max componentwise")

    def contains(self, points: np.ndarray) -> np.ndarray:
        p = np.asarray(points).reshape(-1, 3)
        return np.all((p >= self.min) & (p <= self.max), axis=1)


@dataclass
class PruneReport:
    before: int
    after: int
    rules: dict[str, tuple[int, np.ndarray]] = field(default_factory=dict)

    def add_rule(self, name: str, removed_indices: np.ndarray) -> None:
        self.rules[name] = (len(removed_indices), np.asarray(removed_indices))

    def total_removed(self) -> int:
        return sum(count for count, _ in self.rules.values())

    def lines(self) -> list[str]:
        out = [f"before {self.before}", f"after {self.after}"]
        for name, (count, idx) in self.rules.items():
            out.append(f"rule {name} removed {count}: "
                       + " ".join(str(i) for i in idx))
        return out


def auto_bounds(points: SparsePoints, percentile: float = 1.0,
                margin: float = 0.1) -> Aabb:
    """Per-axis [p, 100-p] quantile box of the sparse points, expanded by
    margin * (quantile width) on each side."""
    if len(points) == 0:
        raise InvalidParameterError("cannot compute bounds of empty point set")
    if not 0.0 <= percentile <= 50.0 or margin < 0.0:
        raise InvalidParameterError("need 0 <= percentile <= 50 and margin >= 0")
    lo = np.percentile(points.positions, percentile, axis=0)
    hi = np.percentile(points.positions, 100.0 - percentile, axis=0)
    width = hi - lo
    return Aabb(lo - margin * width, hi + margin * width)


def _apply_mask(cloud: SplatCloud, keep: np.ndarray, rule: str) -> tuple[SplatCloud, PruneReport]:
    removed = np.nonzero(~keep)[0]
    if keep.sum() == 0:
        raise SplatkitError("pruned to empty cloud")
    report = PruneReport(before=cloud.n, after=int(keep.sum()))
    report.add_rule(rule, removed)
    return cloud.select(np.nonzero(keep)[0]), report


def prune_by_bounds(cloud: SplatCloud, box: Aabb) -> tuple[SplatCloud, PruneReport]:
    """Remove Gaussians whose position lies strictly outside the (closed) box."""
    return _apply_mask(cloud, box.contains(cloud.positions), "bounds")


def compute_support(cloud: SplatCloud, bundle: SceneBundle,
                    options: RenderOptions = DEFAULT_OPTIONS) -> np.ndarray:
    """Per-Gaussian max over all training views and pixels of the blend weight
    alpha' * T; Gaussians never touched get 0."""
    support = np.zeros(cloud.n)
    for pose in bundle.poses:
        intr = bundle.intrinsics[pose.camera_id]
        out = render(cloud, intr, pose, options=options)
        support = np.maximum(support, out.per_gaussian_max_blend)
    return support


def prune_by_support(cloud: SplatCloud, support: np.ndarray,
                     threshold: float = 1e-3) -> tuple[SplatCloud, PruneReport]:
    """Remove Gaussians lacking photometric evidence in every training view."""
    support = np.asarray(support).reshape(cloud.n)
    return _apply_mask(cloud, support >= threshold, "support")


def prune_by_opacity(cloud: SplatCloud, threshold: float = 0.005) -> tuple[SplatCloud, PruneReport]:
    return _apply_mask(cloud, sigmoid(cloud.opacity_logits) >= threshold, "opacity")


def prune_by_knn(cloud: SplatCloud, k: int = 8, m: float = 3.0) -> tuple[SplatCloud, PruneReport]:
    """Statistical outlier removal: drop Gaussians whose mean distance to their
    k nearest neighbors exceeds mu + m * sigma of that statistic."""
    if cloud.n <= k:
        raise SplatkitError(f"kNN prune needs more than k={k} Gaussians, have {cloud.n}")
    d = mean_knn_distance(cloud.positions, k=k)
    mu = d.mean()
    sigma = max(d.std(), 1e-12)
    return _apply_mask(cloud, d <= mu + m * sigma, "knn")


@dataclass
class PruneChainConfig:
    use_bounds: bool = True
    use_support: bool = True
    use_opacity: bool = True
    use_knn: bool = True
    bounds_percentile: float = 1.0
    bounds_margin: float = 0.1
    bounds_box: Aabb | None = None  # explicit box overrides auto_bounds
    support_threshold: float = 1e-3
    opacity_threshold: float = 0.005
    knn_k: int = 8
    knn_m: float = 3.0


def run_prune_chain(cloud: SplatCloud, config: PruneChainConfig,
                    bundle: SceneBundle | None = None,
                    points: SparsePoints | None = None) -> tuple[SplatCloud, PruneReport]:
    """Apply the enabled rules in order bounds -> support -> opacity -> knn.

    Removed indices in the report refer to the original cloud indexing, so the
    per-rule sets are disjoint and reconcile with before - after.
    """
    original = np.arange(cloud.n)
    report = PruneReport(before=cloud.n, after=cloud.n)
    current = cloud

    def apply(result):
        nonlocal current, original
        new_cloud, step = result
        (rule, (_, removed)), = step.rules.items()
        report.add_rule(rule, original[removed])
        keep = np.ones(current.n, dtype=bool)
        keep[removed] = False
        original = original[keep]
        current = new_cloud

    if config.use_bounds:
        if config.bounds_box is not None:
            box = config.bounds_box
        else:
            if points is None:
                raise SplatkitError("bounds rule needs sparse points or an explicit box")
            box = auto_bounds(points, config.bounds_percentile, config.bounds_margin)
        apply(prune_by_bounds(current, box))
    if config.use_support:
        if bundle is None:
            raise SplatkitError("support rule needs a dataset (training views)")
        support = compute_support(current, bundle)
        apply(prune_by_support(current, support, config.support_threshold))
    if config.use_opacity:
        apply(prune_by_opacity(current, config.opacity_threshold))
    if config.use_knn and current.n > config.knn_k:
        apply(prune_by_knn(current, config.knn_k, config.knn_m))
    report.after = current.n
    return current, report
