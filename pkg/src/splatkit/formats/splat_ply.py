"""Binary splat PLY interchange (the de-facto layout external editors read).

All vertex properties are 32-bit little-endian floats. `f_rest` is
channel-major: the 15 degree>=1 coefficients for R, then G, then B. Scales are
log-scales, opacity is a logit, rotation is an unnormalized (w, x, y, z)
quaternion. Normals are written as zeros and ignored on read.
"""

from __future__ import annotations

import os
from pathlib import Path

import numpy as np

from ..errors import ParseError
from ..model import SplatCloud
from .colmap import Diagnostic

REQUIRED_PROPERTIES = (
    ["x", "y", "z", "nx", "ny", "nz"]
    + [f"f_dc_{i}" for i in range(3)]
    + [f"f_rest_{i}" for i in range(45)]
    + ["opacity"]
    + [f"scale_{i}" for i in range(3)]
    + [f"rot_{i}" for i in range(4)]
)

_PLY_TYPES = {
    "char": "i1", "int8": "i1", "uchar": "u1", "uint8": "u1",
    "short": "i2", "int16": "i2", "ushort": "u2", "uint16": "u2",
    "int": "i4", "int32": "i4", "uint": "u4", "uint32": "u4",
    "float": "f4", "float32": "f4", "double": "f8", "float64": "f8",
}


def cloud_to_records(cloud: SplatCloud) -> np.ndarray:
    """Flatten a cloud into the (n, 62) float32 vertex record layout."""
    n = cloud.n
    rec = np.zeros((n, len(REQUIRED_PROPERTIES)), dtype=np.float32)
    rec[:, 0:3] = cloud.positions
    # normals stay zero
    rec[:, 6:9] = cloud.sh_coeffs[:, :, 0]
    rec[:, 9:54] = cloud.sh_coeffs[:, :, 1:].reshape(n, 45)  # channel-major
    rec[:, 54] = cloud.opacity_logits
    rec[:, 55:58] = cloud.log_scales
    rec[:, 58:62] = cloud.rotations
    return rec


def records_to_cloud(rec: np.ndarray) -> SplatCloud:
    rec = np.asarray(rec, dtype=np.float32)
    n = len(rec)
    sh = np.zeros((n, 3, 16), dtype=np.float64)
    sh[:, :, 0] = rec[:, 6:9]
    sh[:, :, 1:] = rec[:, 9:54].reshape(n, 3, 15)
    return SplatCloud(rec[:, 0:3], rec[:, 55:58], rec[:, 58:62], rec[:, 54], sh,
                      active_sh_degree=3)


def write_splat_ply(cloud: SplatCloud, path) -> None:
    rec = cloud_to_records(cloud)
    header = ["ply", "format binary_little_endian 1.0",
              f"element vertex {cloud.n}"]
    header += [f"property float {name}" for name in REQUIRED_PROPERTIES]
    header.append("end_header")
    payload = ("\n".join(header) + "\n").encode("ascii") + rec.astype("<f4").tobytes()
    tmp = f"{path}.tmp{os.getpid()}"
    with open(tmp, "wb") as f:
        f.write(payload)
    os.replace(tmp, path)


def read_splat_ply(path, warnings: list | None = None) -> SplatCloud:
    """Read a binary little-endian splat PLY. Unknown extra properties are
    skipped with a warning appended to `warnings` (if given)."""
    path = Path(path)
    with open(path, "rb") as f:
        data = f.read()
    end_marker = b"end_header\n"
    end = data.find(end_marker)
    if not data.startswith(b"ply\n") and not data.startswith(b"ply\r\n"):
        raise ParseError(f"{path}: not a PLY file (bad magic)")
    if end < 0:
        raise ParseError(f"{path}: PLY header without end_header")
    header_lines = data[:end].decode("ascii", errors="replace").splitlines()
    body = data[end + len(end_marker):]

    fmt = None
    n_vertices = None
    props: list[tuple[str, str]] = []
    in_vertex = False
    for line in header_lines[1:]:
        toks = line.split()
        if not toks or toks[0] == "comment":
            continue
        if toks[0] == "format":
            fmt = toks[1]
        elif toks[0] == "element":
            in_vertex = toks[1] == "vertex"
            if in_vertex:
                n_vertices = int(toks[2])
        elif toks[0] == "property" and in_vertex:
            if toks[1] == "list":
                raise ParseError(f"{path}: list properties unsupported in vertex element")
            if toks[1] not in _PLY_TYPES:
                raise ParseError(f"{path}: unsupported property type {toks[1]}")
            props.append((toks[2], _PLY_TYPES[toks[1]]))
    if fmt == "ascii":
        raise ParseError(f"{path}: ASCII PLY not supported (need binary_little_endian)")
    if fmt != "binary_little_endian":
        raise ParseError(f"{path}: unsupported PLY format {fmt!r}")
    if n_vertices is None:
        raise ParseError(f"{path}: no vertex element in header")
    names = [name for name, _ in props]
    for req in REQUIRED_PROPERTIES:
        if req not in names:
            raise ParseError(f"{path}: missing required property: {req}")
    extra = [name for name in names if name not in REQUIRED_PROPERTIES]
    if extra and warnings is not None:
        warnings.append(Diagnostic(
            "unknown_ply_properties",
            f"skipped unknown vertex properties: {', '.join(extra)}"))

    dtype = np.dtype([(name, "<" + t) for name, t in props])
    need = dtype.itemsize * n_vertices
    if len(body) < need:
        raise ParseError(f"{path}: truncated vertex data "
                         f"(expected {need} bytes, got {len(body)})")
    table = np.frombuffer(body[:need], dtype=dtype)
    rec = np.empty((n_vertices, len(REQUIRED_PROPERTIES)), dtype=np.float32)
    for j, name in enumerate(REQUIRED_PROPERTIES):
        rec[:, j] = table[name].astype(np.float32)
    return records_to_cloud(rec)
