"""External file formats: COLMAP text exports, splat PLY, PPM images."""

from .image import ImageBuffer, read_image, write_image, quantize_roundtrip
from .colmap import (
    CameraIntrinsics,
    CameraModel,
    CameraPose,
    Diagnostic,
    SceneBundle,
    SparsePoints,
    diagnose_registration,
    parse_colmap_dir,
    write_colmap_dir,
)
from .splat_ply import read_splat_ply, write_splat_ply, REQUIRED_PROPERTIES

__all__ = [
    "ImageBuffer", "read_image", "write_image", "quantize_roundtrip",
    "CameraIntrinsics", "CameraModel", "CameraPose", "Diagnostic",
    "SceneBundle", "SparsePoints", "diagnose_registration",
    "parse_colmap_dir", "write_colmap_dir",
    "read_splat_ply", "write_splat_ply", "REQUIRED_PROPERTIES",
]
