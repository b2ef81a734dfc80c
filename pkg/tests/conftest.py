"""Shared scene builders for the test suite."""
import numpy as np
import pytest

from splatkit.formats.colmap import CameraIntrinsics, CameraModel, CameraPose
from splatkit.geom import look_at_quat
from splatkit.model import SplatCloud, logit


def make_intrinsics(width=32, height=32, focal=40.0, camera_id=1):
    return CameraIntrinsics(
        camera_id=camera_id, model=CameraModel.PINHOLE,
        width=width, height=height, fx=focal, fy=focal,
        cx=width / 2.0, cy=height / 2.0)


def make_pose(center=(0.0, 0.0, -4.0), target=(0.0, 0.0, 0.0),
              image_id=1, camera_id=1, name="view.ppm"):
    center = np.asarray(center, dtype=np.float64)
    q = look_at_quat(center, np.asarray(target, dtype=np.float64))
    from splatkit.geom import quat_to_rot
    t = -quat_to_rot(q) @ center
    return CameraPose(image_id=image_id, q=q, t=t, camera_id=camera_id,
                      image_name=name, num_points2d=0)


def random_cloud(n, rng, spread=1.0, scale_range=(-2.5, -1.0),
                 sh_degree=3, sh_rest_scale=0.1):
    """Seeded cloud of well-conditioned random Gaussians near the origin."""
    positions = rng.uniform(-spread, spread, size=(n, 3))
    log_scales = rng.uniform(scale_range[0], scale_range[1], size=(n, 3))
    rotations = rng.normal(size=(n, 4))
    rotations[np.abs(rotations).sum(axis=1) < 1e-3] = (1.0, 0.0, 0.0, 0.0)
    opacity = logit(rng.uniform(0.2, 0.9, size=n))
    sh = rng.normal(scale=sh_rest_scale, size=(n, 3, 16))
    sh[:, :, 0] = rng.uniform(0.3, 1.5, size=(n, 3))
    return SplatCloud(positions=positions, log_scales=log_scales,
                      rotations=rotations, opacity_logits=opacity,
                      sh_coeffs=sh, active_sh_degree=sh_degree)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
