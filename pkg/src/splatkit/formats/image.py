"""Image buffers and the binary PPM (P6) codec."""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from ..errors import InvalidParameterError, ParseError


@dataclass
class ImageBuffer:
    """RGB image with channels as reals in [0, 1], stored (height, width, 3)."""

    array: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.array, dtype=np.float64)
        if a.ndim != 3 or a.shape[2] != 3:
            raise InvalidParameterError(f"image array must be (h, w, 3), got {a.shape}")
        if not np.all(np.isfinite(a)):
            raise InvalidParameterError("image contains non-finite values")
        if a.min() < 0.0 or a.max() > 1.0:
            raise InvalidParameterError("image channels must lie in [0, 1]")
        self.array = a

    @property
    def width(self) -> int:
        return self.array.shape[1]

    @property
    def height(self) -> int:
        return self.array.shape[0]

    def quantized(self) -> np.ndarray:
        """8-bit quantization, shape (h, w, 3) uint8."""
        return np.clip(np.rint(self.array * 255.0), 0, 255).astype(np.uint8)


def quantize_roundtrip(img: ImageBuffer) -> ImageBuffer:
    """The image as it survives an 8-bit write/read cycle."""
    return ImageBuffer(img.quantized().astype(np.float64) / 255.0)


def _read_ppm_token(data: bytes, pos: int) -> tuple[bytes, int]:
    # skip whitespace and '#' comments between header tokens
    n = len(data)
    while pos < n:
        c = data[pos:pos + 1]
        if c == b"#":
            while pos < n and data[pos:pos + 1] != b"\n":
                pos += 1
        elif c.isspace():
            pos += 1
        else:
            break
    start = pos
    while pos < n and not data[pos:pos + 1].isspace():
        pos += 1
    if start == pos:
        raise ParseError("truncated PPM header")
    return data[start:pos], pos


def read_image(path) -> ImageBuffer:
    """Read a binary PPM (P6, maxval 255) file."""
    with open(path, "rb") as f:
        data = f.read()
    if not data.startswith(b"P6"):
        raise ParseError(f"{path}: not a binary PPM (P6) file")
    pos = 2
    try:
        wtok, pos = _read_ppm_token(data, pos)
        htok, pos = _read_ppm_token(data, pos)
        mtok, pos = _read_ppm_token(data, pos)
        width, height, maxval = int(wtok), int(htok), int(mtok)
    except ValueError as e:
        raise ParseError(f"{path}: malformed PPM header: {e}") from e
    if maxval != 255:
        raise ParseError(f"{path}: unsupported PPM maxval {maxval} (only 255)")
    pos += 1  # single whitespace byte after maxval
    need = width * height * 3
    raw = data[pos:pos + need]
    if len(raw) < need:
        raise ParseError(
            f"{path}: truncated pixel data at byte offset {pos + len(raw)} "
            f"(expected {need} bytes, got {len(raw)})")
    pix = np.frombuffer(raw, dtype=np.uint8).reshape(height, width, 3)
    return ImageBuffer(pix.astype(np.float64) / 255.0)


def write_image(img: ImageBuffer, path) -> None:
    """Write a binary PPM (P6, maxval 255) file atomically."""
    header = f"P6\n{img.width} {img.height}\n255\n".encode("ascii")
    payload = header + img.quantized().tobytes()
    tmp = f"{path}.tmp{os.getpid()}"
    with open(tmp, "wb") as f:
        f.write(payload)
    os.replace(tmp, path)
