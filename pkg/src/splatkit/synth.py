"""Synthetic desk-scale capture rig: a tornado-like ground-truth splat scene,
an inward-facing camera ring, rendered ground-truth images, and evaluation.

Ground-truth images come from this codebase's own renderer in exact
(oracle-equivalent) mode, so downstream metrics measure optimization and
pruning correctness rather than renderer mismatch.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InvalidParameterError
from .formats.colmap import (CameraIntrinsics, CameraModel, CameraPose,
                             SceneBundle, SparsePoints, parse_colmap_dir,
                             write_cameras_txt, write_images_txt,
                             write_points3d_txt)
from .formats.image import ImageBuffer, write_image
from .formats.splat_ply import write_splat_ply
from .geom import look_at_quat, quat_to_rot
from .losses import psnr, ssim
from .model import SplatCloud, logit
from .rasterizer import RenderOptions, render
from .sh import SH_C0


@dataclass
class RigSpec:
    n_cameras: int = 8                 # evenly spaced ring (training protocol)
    ring_radius: float = 2.0
    height: float = 0.55               # camera elevation above the floor plane
    look_at: tuple = (0.0, 0.0, 0.5)
    width: int = 128
    height_px: int = 128
    focal: float = 140.0
    extra_azimuths_deg: tuple = (22.5,)  # additional cameras appended after the ring
    held_out: tuple = (8,)               # camera indices excluded from training

    def __post_init__(self):
        if self.n_cameras < 2:
            raise InvalidParameterError("rig needs at least 2 cameras")
        total = self.n_cameras + len(self.extra_azimuths_deg)
        if any(not 0 <= i < total for i in self.held_out):
            raise InvalidParameterError("held_out indices outside camera set")

    def image_name(self, index: int) -> str:
        return f"cam{index:02d}.ppm"


@dataclass
class VortexSpec:
    n_gaussians: int = 2000
    height: float = 1.0
    base_radius: float = 0.35
    top_radius: float = 0.12
    swirl: float = 1.5                 # helix turns per unit height
    strands: int = 3
    opacity_range: tuple = (0.3, 0.8)
    gray_range: tuple = (0.45, 0.95)
    floor_gaussians: int = 500
    floor_radius: float = 1.4
    seed: int = 0

    def __post_init__(self):
        if self.base_radius <= 0 or self.top_radius <= 0:
            raise InvalidParameterError("vortex radii must be positive")
        lo, hi = self.opacity_range
        if not (0.0 < lo <= hi < 1.0):
            raise InvalidParameterError("opacity range must lie inside (0, 1)")


def generate_scene(spec: VortexSpec) -> SplatCloud:
    """Seeded tornado-like cloud: Gaussians on a helical conical shell plus a
    textured floor disc for pose-conditioning."""
    rng = np.random.default_rng(spec.seed)
    pos, scale, gray, opac = [], [], [], []
    n = spec.n_gaussians
    if n > 0:
        t = rng.uniform(0.0, 1.0, n)
        z = t * spec.height
        r_local = spec.base_radius + (spec.top_radius - spec.base_radius) * t
        strand = rng.integers(0, spec.strands, n)
        theta = 2.0 * np.pi * (spec.swirl * z + strand / spec.strands
                               + rng.normal(0.0, 0.03, n))
        radial = r_local * rng.uniform(0.82, 1.0, n)
        pos.append(np.stack([radial * np.cos(theta), radial * np.sin(theta), z], 1))
        s = 2.5 * r_local / np.sqrt(n)
        scale.append(np.repeat(np.log(s)[:, None], 3, axis=1))
        gray.append(rng.uniform(*spec.gray_range, n))
        opac.append(rng.uniform(*spec.opacity_range, n))
    if spec.floor_gaussians > 0:
        nf = spec.floor_gaussians
        rad = spec.floor_radius * np.sqrt(rng.uniform(0.0, 1.0, nf))
        ang = rng.uniform(0.0, 2.0 * np.pi, nf)
        pos.append(np.stack([rad * np.cos(ang), rad * np.sin(ang),
                             np.zeros(nf)], 1))
        s = np.full(nf, 2.5 * spec.floor_radius / np.sqrt(nf))
        ls = np.log(np.stack([s, s, s / 4.0], 1))  # flattened against the floor
        scale.append(ls)
        gray.append(rng.uniform(0.05, 0.9, nf))
        opac.append(rng.uniform(0.7, 0.95, nf))
    if not pos:
        return SplatCloud(np.zeros((0, 3)), np.zeros((0, 3)), np.zeros((0, 4)),
                          np.zeros(0), np.zeros((0, 3, 16)))
    positions = np.concatenate(pos)
    m = len(positions)
    rot = np.zeros((m, 4))
    rot[:, 0] = 1.0
    sh = np.zeros((m, 3, 16))
    sh[:, :, 0] = ((np.concatenate(gray) - 0.5) / SH_C0)[:, None]
    return SplatCloud(positions, np.concatenate(scale), rot,
                      logit(np.concatenate(opac)), sh, active_sh_degree=0)


def generate_rig(spec: RigSpec) -> tuple[dict[int, CameraIntrinsics], list[CameraPose]]:
    """Shared intrinsics plus one inward-facing pose per camera."""
    intr = CameraIntrinsics(1, CameraModel.PINHOLE, spec.width, spec.height_px,
                            spec.focal, spec.focal, spec.width / 2.0,
                            spec.height_px / 2.0)
    azimuths = [360.0 * k / spec.n_cameras for k in range(spec.n_cameras)]
    azimuths += list(spec.extra_azimuths_deg)
    poses = []
    look = np.asarray(spec.look_at, dtype=np.float64)
    for i, az in enumerate(azimuths):
        a = np.deg2rad(az)
        center = np.array([spec.ring_radius * np.cos(a),
                           spec.ring_radius * np.sin(a), spec.height])
        q = look_at_quat(center, look)
        R = quat_to_rot(q)
        t = -R @ center
        poses.append(CameraPose(i + 1, q, t, 1, spec.image_name(i)))
    return {1: intr}, poses


def make_dataset(vortex: VortexSpec, rig: RigSpec, out_dir,
                 subsample: float = 1.0, noise_sigma: float = 0.0,
                 noise_seed: int = 1) -> SceneBundle:
    """Render ground-truth images and write a COLMAP-text-layout dataset.

    points3D.txt holds ground-truth Gaussian centers subsampled at `subsample`
    with seeded positional noise of stddev `noise_sigma` (world units),
    standing in for real SfM output. Returns the dataset re-parsed from disk.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "images").mkdir(exist_ok=True)
    cloud = generate_scene(vortex)
    intrinsics, poses = generate_rig(rig)
    exact = RenderOptions.exact()
    for pose in poses:
        out = render(cloud, intrinsics[pose.camera_id], pose, options=exact)
        write_image(out.image(), out_dir / "images" / pose.image_name)

    rng = np.random.default_rng(noise_seed)
    n = cloud.n
    n_sel = max(1, int(round(subsample * n))) if n > 0 else 0
    if n_sel > 0:
        sel = np.sort(rng.choice(n, size=n_sel, replace=False))
        positions = cloud.positions[sel] + noise_sigma * rng.standard_normal((n_sel, 3))
        colors = np.clip((0.5 + SH_C0 * cloud.sh_coeffs[sel, :, 0]) * 255.0, 0, 255)
        points = SparsePoints(positions, colors,
                              np.full(n_sel, rig.n_cameras, dtype=np.int64))
    else:
        points = SparsePoints(np.zeros((0, 3)), np.zeros((0, 3)),
                              np.zeros(0, dtype=np.int64))
    for pose in poses:
        pose.num_points2d = len(points)

    write_cameras_txt(intrinsics, out_dir / "cameras.txt")
    write_images_txt(poses, out_dir / "images.txt",
                     valid_point_id=1 if len(points) else -1)
    write_points3d_txt(points, out_dir / "points3D.txt",
                       track_image_ids=[p.image_id for p in poses])
    write_splat_ply(cloud, out_dir / "ground_truth.ply")

    held_names = [rig.image_name(i) for i in rig.held_out]
    meta = [f"n_cameras = {rig.n_cameras}",
            f"ring_radius = {rig.ring_radius!r}",
            f"camera_height = {rig.height!r}",
            f"focal = {rig.focal!r}",
            f"vortex_seed = {vortex.seed}",
            f"noise_seed = {noise_seed}",
            f"subsample = {subsample!r}",
            f"noise_sigma = {noise_sigma!r}",
            f"held_out = {','.join(held_names)}"]
    (out_dir / "rigspec.txt").write_text("\n".join(meta) + "\n")
    return parse_colmap_dir(out_dir)


def read_held_out_names(dataset_dir) -> list[str]:
    """Held-out image names from the rigspec metadata file, if present."""
    path = Path(dataset_dir) / "rigspec.txt"
    if not path.is_file():
        return []
    for line in path.read_text().splitlines():
        if line.startswith("held_out"):
            _, _, value = line.partition("=")
            value = value.strip()
            return [v for v in value.split(",") if v]
    return []


@dataclass
class EvalRecord:
    view: str
    psnr: float
    ssim: float


@dataclass
class EvalTable:
    records: list[EvalRecord] = field(default_factory=list)

    def mean_psnr(self) -> float:
        return float(np.mean([r.psnr for r in self.records])) if self.records else float("nan")

    def mean_ssim(self) -> float:
        return float(np.mean([r.ssim for r in self.records])) if self.records else float("nan")

    def lines(self) -> list[str]:
        out = [f"{r.view} psnr {r.psnr:.4f} ssim {r.ssim:.6f}" for r in self.records]
        if self.records:
            out.append(f"mean psnr {self.mean_psnr():.4f} ssim {self.mean_ssim():.6f}")
        return out


def evaluate(cloud: SplatCloud, bundle: SceneBundle, held_out_names) -> EvalTable:
    """Render each held-out view in exact mode, quantize to 8 bits (the stored
    ground truth is 8-bit), and compute PSNR/SSIM."""
    table = EvalTable()
    exact = RenderOptions.exact()
    by_name = {p.image_name: p for p in bundle.poses}
    for name in held_out_names:
        if name not in by_name:
            raise InvalidParameterError(f"unknown held-out view: {name}")
        pose = by_name[name]
        intr = bundle.intrinsics[pose.camera_id]
        out = render(cloud, intr, pose, options=exact)
        rendered = ImageBuffer(out.image().quantized().astype(np.float64) / 255.0)
        target = bundle.images[name]
        table.records.append(EvalRecord(name, psnr(rendered, target),
                                        ssim(rendered, target)))
    return table
