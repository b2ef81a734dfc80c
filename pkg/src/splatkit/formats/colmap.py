"""COLMAP sparse-reconstruction text format: parsing, serialization, diagnostics."""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from ..errors import InvalidParameterError, ParseError
from ..geom import camera_center, quat_normalize
from .image import ImageBuffer, read_image


class CameraModel(Enum):
    SIMPLE_PINHOLE = "SIMPLE_PINHOLE"
    PINHOLE = "PINHOLE"
    SIMPLE_RADIAL = "SIMPLE_RADIAL"


@dataclass(frozen=True)
class CameraIntrinsics:
    camera_id: int
    model: CameraModel
    width: int
    height: int
    fx: float
    fy: float
    cx: float
    cy: float
    radial_k: float = 0.0

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise InvalidParameterError("camera dimensions must be positive")
        if self.fx <= 0 or self.fy <= 0:
            raise InvalidParameterError("focal lengths must be positive")
        if not (0 <= self.cx <= self.width and 0 <= self.cy <= self.height):
            raise InvalidParameterError("principal point outside image")
        if self.model is CameraModel.SIMPLE_PINHOLE and self.fx != self.fy:
            raise InvalidParameterError("SIMPLE_PINHOLE requires fx == fy")


@dataclass
class CameraPose:
    """World-to-camera pose: x_cam = R(q) @ x_world + t."""

    image_id: int
    q: np.ndarray  # unit quaternion (w, x, y, z)
    t: np.ndarray
    camera_id: int
    image_name: str
    num_points2d: int = 0  # 2D observations with a valid 3D point id

    def __post_init__(self):
        self.q = quat_normalize(np.asarray(self.q, dtype=np.float64))
        self.t = np.asarray(self.t, dtype=np.float64).reshape(3)

    def center(self) -> np.ndarray:
        return camera_center(self.q, self.t)


@dataclass
class SparsePoints:
    """SfM triangulated points; colors are RGB in [0, 255]."""

    positions: np.ndarray  # (n, 3)
    colors: np.ndarray  # (n, 3)
    track_lengths: np.ndarray  # (n,)

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=np.float64).reshape(-1, 3)
        self.colors = np.asarray(self.colors, dtype=np.float64).reshape(-1, 3)
        self.track_lengths = np.asarray(self.track_lengths, dtype=np.int64).reshape(-1)
        n = len(self.positions)
        if len(self.colors) != n or len(self.track_lengths) != n:
            raise InvalidParameterError("sparse point arrays must share length")

    def __len__(self) -> int:
        return len(self.positions)


@dataclass
class Diagnostic:
    kind: str
    message: str


@dataclass
class SceneBundle:
    intrinsics: dict[int, CameraIntrinsics]
    poses: list[CameraPose]
    points: SparsePoints
    images: dict[str, ImageBuffer]
    warnings: list[Diagnostic] = field(default_factory=list)


def _data_lines(path: Path) -> list[tuple[int, str]]:
    try:
        text = path.read_text()
    except FileNotFoundError:
        raise ParseError(f"missing file: {path}")
    except UnicodeDecodeError as e:
        raise ParseError(f"{path}: not a text file: {e}") from e
    out = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if stripped.startswith("#"):
            continue
        out.append((lineno, stripped))
    return out


def _floats(tokens, path, lineno):
    try:
        return [float(t) for t in tokens]
    except ValueError as e:
        raise ParseError(f"{path}:{lineno}: malformed numeric field: {e}") from e


def read_cameras_txt(path) -> tuple[dict[int, CameraIntrinsics], list[Diagnostic]]:
    path = Path(path)
    intrinsics: dict[int, CameraIntrinsics] = {}
    warnings: list[Diagnostic] = []
    for lineno, line in _data_lines(path):
        if not line:
            continue
        toks = line.split()
        if len(toks) < 4:
            raise ParseError(f"{path}:{lineno}: expected CAMERA_ID MODEL WIDTH HEIGHT PARAMS...")
        try:
            camera_id = int(toks[0])
        except ValueError as e:
            raise ParseError(f"{path}:{lineno}: malformed camera id: {e}") from e
        model_str = toks[1]
        try:
            model = CameraModel(model_str)
        except ValueError:
            raise ParseError(f"{path}:{lineno}: unknown camera model: {model_str}")
        nums = _floats(toks[2:], path, lineno)
        width, height = int(nums[0]), int(nums[1])
        params = nums[2:]
        expected = {CameraModel.SIMPLE_PINHOLE: 3, CameraModel.PINHOLE: 4,
                    CameraModel.SIMPLE_RADIAL: 4}[model]
        if len(params) != expected:
            raise ParseError(f"{path}:{lineno}: model {model_str} expects {expected} "
                             f"parameters, got {len(params)}")
        radial_k = 0.0
        if model is CameraModel.SIMPLE_PINHOLE:
            fx = fy = params[0]
            cx, cy = params[1], params[2]
        elif model is CameraModel.PINHOLE:
            fx, fy, cx, cy = params
        else:  # SIMPLE_RADIAL: radial term ignored, reconstruction assumes pinhole
            fx = fy = params[0]
            cx, cy = params[1], params[2]
            radial_k = params[3]
            if radial_k != 0.0:
                warnings.append(Diagnostic(
                    "radial_ignored",
                    f"camera {camera_id}: SIMPLE_RADIAL k={radial_k:g} ignored "
                    f"(treated as pinhole)"))
        try:
            intrinsics[camera_id] = CameraIntrinsics(
                camera_id, model, width, height, fx, fy, cx, cy, radial_k)
        except InvalidParameterError as e:
            raise ParseError(f"{path}:{lineno}: {e}") from e
    return intrinsics, warnings


def read_images_txt(path) -> list[CameraPose]:
    path = Path(path)
    lines = _data_lines(path)
    poses = []
    i = 0
    while i < len(lines):
        lineno, line = lines[i]
        if not line:
            # stray blank line between pairs (a zero-observation image's
            # empty observation line is consumed below, not here)
            i += 1
            continue
        toks = line.split()
        if len(toks) < 10:
            raise ParseError(f"{path}:{lineno}: expected IMAGE_ID QW QX QY QZ TX TY TZ "
                             f"CAMERA_ID NAME")
        try:
            image_id = int(toks[0])
            camera_id = int(toks[8])
        except ValueError as e:
            raise ParseError(f"{path}:{lineno}: malformed integer field: {e}") from e
        nums = _floats(toks[1:8], path, lineno)
        name = " ".join(toks[9:])
        # the observation line is the next physical data line, possibly empty
        if i + 1 < len(lines):
            obs_lineno, obs_line = lines[i + 1]
        else:
            obs_lineno, obs_line = lineno, ""
        obs_toks = obs_line.split()
        if len(obs_toks) % 3 != 0:
            raise ParseError(f"{path}:{obs_lineno}: 2D observation line length "
                             f"not a multiple of 3")
        num_points2d = 0
        for j in range(0, len(obs_toks), 3):
            _floats(obs_toks[j:j + 2], path, obs_lineno)
            try:
                pid = int(obs_toks[j + 2])
            except ValueError as e:
                raise ParseError(f"{path}:{obs_lineno}: malformed point id: {e}") from e
            if pid != -1:
                num_points2d += 1
        try:
            poses.append(CameraPose(image_id, np.array(nums[0:4]), np.array(nums[4:7]),
                                    camera_id, name, num_points2d))
        except InvalidParameterError as e:
            raise ParseError(f"{path}:{lineno}: {e}") from e
        i += 2
    return poses


def read_points3d_txt(path) -> SparsePoints:
    path = Path(path)
    positions, colors, track_lengths = [], [], []
    for lineno, line in _data_lines(path):
        if not line:
            continue
        toks = line.split()
        if len(toks) < 8:
            raise ParseError(f"{path}:{lineno}: expected POINT3D_ID X Y Z R G B ERROR TRACK...")
        nums = _floats(toks[1:8], path, lineno)
        track = toks[8:]
        if len(track) % 2 != 0:
            raise ParseError(f"{path}:{lineno}: track length not a multiple of 2")
        _floats(track, path, lineno)
        positions.append(nums[0:3])
        colors.append(nums[3:6])
        track_lengths.append(len(track) // 2)
    if not positions:
        return SparsePoints(np.zeros((0, 3)), np.zeros((0, 3)), np.zeros((0,), dtype=np.int64))
    return SparsePoints(np.array(positions), np.array(colors), np.array(track_lengths))


def parse_colmap_dir(path, images_subdir: str = "images") -> SceneBundle:
    """Parse a COLMAP text export directory into a cross-linked SceneBundle.

    Expects cameras.txt, images.txt, points3D.txt plus an image subdirectory
    containing every image referenced from images.txt.
    """
    path = Path(path)
    intrinsics, warnings = read_cameras_txt(path / "cameras.txt")
    poses = read_images_txt(path / "images.txt")
    points = read_points3d_txt(path / "points3D.txt")
    images: dict[str, ImageBuffer] = {}
    img_dir = path / images_subdir
    for pose in poses:
        if pose.camera_id not in intrinsics:
            raise ParseError(f"image {pose.image_name} references unknown camera "
                             f"{pose.camera_id}")
        img_path = img_dir / pose.image_name
        if not img_path.is_file():
            raise ParseError(f"image file referenced but absent: {img_path}")
        img = read_image(img_path)
        intr = intrinsics[pose.camera_id]
        if img.width != intr.width or img.height != intr.height:
            raise ParseError(
                f"image {pose.image_name} is {img.width}x{img.height} but camera "
                f"{pose.camera_id} declares {intr.width}x{intr.height}")
        images[pose.image_name] = img
    return SceneBundle(intrinsics, poses, points, images, warnings)


def diagnose_registration(bundle: SceneBundle, expected_cameras: int) -> list[Diagnostic]:
    """Warn about registration shortfalls; never fatal.

    Checks: fewer registered views than expected; camera centers closer than
    1% of the rig diameter (possible merged views); poses observing fewer than
    10 sparse points.
    """
    if expected_cameras < 1:
        raise InvalidParameterError("expected_cameras must be >= 1")
    out: list[Diagnostic] = []
    names = [p.image_name for p in bundle.poses]
    if len(bundle.poses) < expected_cameras:
        out.append(Diagnostic(
            "missing_view",
            f"{len(bundle.poses)} of {expected_cameras} cameras registered; "
            f"registered views: {', '.join(sorted(names))}"))
    centers = np.array([p.center() for p in bundle.poses]).reshape(-1, 3)
    if len(centers) >= 2:
        diff = centers[:, None, :] - centers[None, :, :]
        dists = np.sqrt((diff ** 2).sum(-1))
        diameter = float(dists.max())
        for i in range(len(centers)):
            for j in range(i + 1, len(centers)):
                if dists[i, j] <= 0.01 * diameter:
                    out.append(Diagnostic(
                        "merged_view",
                        f"views {names[i]} and {names[j]} have nearly identical "
                        f"camera centers (separation {dists[i, j]:.3g}, rig "
                        f"diameter {diameter:.3g})"))
    for pose in bundle.poses:
        if pose.num_points2d < 10:
            out.append(Diagnostic(
                "few_observations",
                f"view {pose.image_name} observes only {pose.num_points2d} sparse points"))
    return out


def _fnum(x) -> str:
    """Shortest exact decimal for a float (handles numpy scalars)."""
    return repr(float(x))


def write_cameras_txt(intrinsics: dict[int, CameraIntrinsics], path) -> None:
    lines = ["# Camera list with one line of data per camera:",
             "#   CAMERA_ID, MODEL, WIDTH, HEIGHT, PARAMS[]"]
    for cid in sorted(intrinsics):
        c = intrinsics[cid]
        if c.model is CameraModel.SIMPLE_PINHOLE:
            params = [c.fx, c.cx, c.cy]
        elif c.model is CameraModel.PINHOLE:
            params = [c.fx, c.fy, c.cx, c.cy]
        else:
            params = [c.fx, c.cx, c.cy, c.radial_k]
        lines.append(f"{c.camera_id} {c.model.value} {c.width} {c.height} "
                     + " ".join(_fnum(p) for p in params))
    _atomic_write_text(path, "\n".join(lines) + "\n")


def write_images_txt(poses: list[CameraPose], path, valid_point_id: int = -1) -> None:
    """Serialize poses. Only observation counts were retained from parsing, so
    the 2D observation line is filled with placeholder entries referencing
    `valid_point_id` (counts survive a re-parse; coordinates do not matter)."""
    lines = ["# Image list with two lines of data per image:",
             "#   IMAGE_ID, QW, QX, QY, QZ, TX, TY, TZ, CAMERA_ID, NAME",
             "#   POINTS2D[] as (X, Y, POINT3D_ID)"]
    for p in poses:
        q, t = p.q, p.t
        qs = " ".join(_fnum(v) for v in q)
        ts = " ".join(_fnum(v) for v in t)
        lines.append(f"{p.image_id} {qs} {ts} {p.camera_id} {p.image_name}")
        n = p.num_points2d if valid_point_id != -1 else 0
        lines.append(" ".join(["0.0 0.0 %d" % valid_point_id] * n))
    _atomic_write_text(path, "\n".join(lines) + "\n")


def write_points3d_txt(points: SparsePoints, path, track_image_ids=None) -> None:
    """Serialize sparse points. Tracks are rebuilt as placeholder pairs of the
    retained length, cycling through `track_image_ids` (default: id 1)."""
    if track_image_ids is None or len(track_image_ids) == 0:
        track_image_ids = [1]
    lines = ["# 3D point list with one line of data per point:",
             "#   POINT3D_ID, X, Y, Z, R, G, B, ERROR, TRACK[] as (IMAGE_ID, POINT2D_IDX)"]
    for i in range(len(points)):
        pos = points.positions[i]
        col = points.colors[i]
        track = " ".join(
            f"{track_image_ids[j % len(track_image_ids)]} {j}"
            for j in range(int(points.track_lengths[i])))
        lines.append(f"{i + 1} {_fnum(pos[0])} {_fnum(pos[1])} {_fnum(pos[2])} "
                     f"{int(round(col[0]))} {int(round(col[1]))} {int(round(col[2]))} "
                     f"0.0 {track}")
    _atomic_write_text(path, "\n".join(lines) + "\n")


def write_colmap_dir(bundle: SceneBundle, path, images_subdir: str = "images") -> None:
    """Write a bundle back out in the COLMAP text layout (plus images)."""
    from .image import write_image

    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    write_cameras_txt(bundle.intrinsics, path / "cameras.txt")
    valid_pid = 1 if len(bundle.points) > 0 else -1
    write_images_txt(bundle.poses, path / "images.txt", valid_point_id=valid_pid)
    image_ids = [p.image_id for p in bundle.poses]
    write_points3d_txt(bundle.points, path / "points3D.txt", track_image_ids=image_ids)
    img_dir = path / images_subdir
    img_dir.mkdir(exist_ok=True)
    for name, img in bundle.images.items():
        write_image(img, img_dir / name)


def _atomic_write_text(path, text: str) -> None:
    tmp = f"{path}.tmp{os.getpid()}"
    with open(tmp, "w") as f:
        f.write(text)
    os.replace(tmp, path)
