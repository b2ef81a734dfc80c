"""Real spherical-harmonics basis (degree <= 3) for view-dependent color.

Basis ordering and constants follow the common splat interchange convention:
index 0 is the constant band, indices 1..3 band 1, 4..8 band 2, 9..15 band 3.
Colors decode as max(0, 0.5 + sum(coeff * basis)).
"""

from __future__ import annotations

import numpy as np

from .errors import InvalidParameterError

SH_C0 = 0.28209479177387814
SH_C1 = 0.4886025119029199
SH_C2 = (1.0925484305920792, -1.0925484305920792, 0.31539156525252005,
         -1.0925484305920792, 0.5462742152960396)
SH_C3 = (-0.5900435899266435, 2.890611442640554, -0.4570457994644658,
         0.3731763325901154, -0.4570457994644658, 1.445305721320277,
         -0.5900435899266435)

N_COEFFS = 16


def num_coeffs(degree: int) -> int:
    return (degree + 1) ** 2


def sh_basis(dirs: np.ndarray) -> np.ndarray:
    """Evaluate all 16 basis polynomials at unit direction(s); (..., 3) -> (..., 16)."""
    dirs = np.asarray(dirs, dtype=np.float64)
    x, y, z = dirs[..., 0], dirs[..., 1], dirs[..., 2]
    b = np.empty(dirs.shape[:-1] + (N_COEFFS,), dtype=np.float64)
    b[..., 0] = SH_C0
    b[..., 1] = -SH_C1 * y
    b[..., 2] = SH_C1 * z
    b[..., 3] = -SH_C1 * x
    xx, yy, zz = x * x, y * y, z * z
    xy, yz, xz = x * y, y * z, x * z
    b[..., 4] = SH_C2[0] * xy
    b[..., 5] = SH_C2[1] * yz
    b[..., 6] = SH_C2[2] * (2.0 * zz - xx - yy)
    b[..., 7] = SH_C2[3] * xz
    b[..., 8] = SH_C2[4] * (xx - yy)
    b[..., 9] = SH_C3[0] * y * (3.0 * xx - yy)
    b[..., 10] = SH_C3[1] * xy * z
    b[..., 11] = SH_C3[2] * y * (4.0 * zz - xx - yy)
    b[..., 12] = SH_C3[3] * z * (2.0 * zz - 3.0 * xx - 3.0 * yy)
    b[..., 13] = SH_C3[4] * x * (4.0 * zz - xx - yy)
    b[..., 14] = SH_C3[5] * z * (xx - yy)
    b[..., 15] = SH_C3[6] * x * (xx - 3.0 * yy)
    return b


def sh_basis_jacobian(dirs: np.ndarray) -> np.ndarray:
    """d(basis)/d(dir) for unit direction(s); (..., 3) -> (..., 16, 3)."""
    dirs = np.asarray(dirs, dtype=np.float64)
    x, y, z = dirs[..., 0], dirs[..., 1], dirs[..., 2]
    zero = np.zeros_like(x)
    J = np.zeros(dirs.shape[:-1] + (N_COEFFS, 3), dtype=np.float64)
    xx, yy, zz = x * x, y * y, z * z
    J[..., 1, 1] = -SH_C1
    J[..., 2, 2] = SH_C1
    J[..., 3, 0] = -SH_C1
    J[..., 4, 0] = SH_C2[0] * y
    J[..., 4, 1] = SH_C2[0] * x
    J[..., 5, 1] = SH_C2[1] * z
    J[..., 5, 2] = SH_C2[1] * y
    J[..., 6, 0] = -2.0 * SH_C2[2] * x
    J[..., 6, 1] = -2.0 * SH_C2[2] * y
    J[..., 6, 2] = 4.0 * SH_C2[2] * z
    J[..., 7, 0] = SH_C2[3] * z
    J[..., 7, 2] = SH_C2[3] * x
    J[..., 8, 0] = 2.0 * SH_C2[4] * x
    J[..., 8, 1] = -2.0 * SH_C2[4] * y
    J[..., 9, 0] = SH_C3[0] * 6.0 * x * y
    J[..., 9, 1] = SH_C3[0] * 3.0 * (xx - yy)
    J[..., 10, 0] = SH_C3[1] * y * z
    J[..., 10, 1] = SH_C3[1] * x * z
    J[..., 10, 2] = SH_C3[1] * x * y
    J[..., 11, 0] = SH_C3[2] * (-2.0 * x * y)
    J[..., 11, 1] = SH_C3[2] * (4.0 * zz - xx - 3.0 * yy)
    J[..., 11, 2] = SH_C3[2] * 8.0 * y * z
    J[..., 12, 0] = SH_C3[3] * (-6.0 * x * z)
    J[..., 12, 1] = SH_C3[3] * (-6.0 * y * z)
    J[..., 12, 2] = SH_C3[3] * (6.0 * zz - 3.0 * xx - 3.0 * yy)
    J[..., 13, 0] = SH_C3[4] * (4.0 * zz - 3.0 * xx - yy)
    J[..., 13, 1] = SH_C3[4] * (-2.0 * x * y)
    J[..., 13, 2] = SH_C3[4] * 8.0 * x * z
    J[..., 14, 0] = SH_C3[5] * 2.0 * x * z
    J[..., 14, 1] = SH_C3[5] * (-2.0 * y * z)
    J[..., 14, 2] = SH_C3[5] * (xx - yy)
    J[..., 15, 0] = SH_C3[6] * 3.0 * (xx - yy)
    J[..., 15, 1] = SH_C3[6] * (-6.0 * x * y)
    _ = zero
    return J


def eval_sh_color(coeffs: np.ndarray, degree: int, direction: np.ndarray) -> np.ndarray:
    """Decode RGB from SH coefficients at a unit view direction.

    coeffs: (..., 3, 16); returns (..., 3) with channels clamped at zero.
    """
    if not 0 <= degree <= 3:
        raise InvalidParameterError(f"SH degree must be in [0, 3], got {degree}")
    direction = np.asarray(direction, dtype=np.float64)
    if abs(np.linalg.norm(direction, axis=-1) - 1.0).max() > 1e-6:
        raise InvalidParameterError("view direction must be a unit vector")
    coeffs = np.asarray(coeffs, dtype=np.float64)
    k = num_coeffs(degree)
    basis = sh_basis(direction)[..., :k]
    raw = 0.5 + np.einsum("...ck,...k->...c", coeffs[..., :k], basis)
    return np.maximum(raw, 0.0)
