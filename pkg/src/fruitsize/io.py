"""Point-cloud, depth and mask file I/O, plus depth-to-cloud conversion.

Formats:
  * csv-xyz    -- one "x,y,z" line per point, mm, '.' decimal, LF newlines
  * ply-ascii  -- element vertex with float x y z properties
  * depth PNG  -- 16-bit grayscale, value = millimeters, 0 = invalid
  * mask PNG   -- 8-bit grayscale, nonzero = object
  * intrinsics -- JSON {fx, fy, cx, cy, width, height}

Depth and mask are assumed pre-aligned; no distortion model is applied.
"""

from __future__ import annotations

import json
import os
import tempfile
from enum import Enum
from io import BytesIO
from pathlib import Path
from typing import Union

import numpy as np
from PIL import Image

from .errors import InvalidArgumentError, ParseError
from .types import CameraIntrinsics, DepthFrame, MaskRegion, PointCloud

DEFAULT_MIN_DEPTH_MM = 100.0
DEFAULT_MAX_DEPTH_MM = 10000.0
DEFAULT_ERODE_PX = 1

# 9 significant digits: enough for mm-scale geometry, short enough for
# human-readable fixtures; writers are idempotent at this precision.
_FLOAT_FMT = "%.9g"


class CloudFileFormat(Enum):
    CSV_XYZ = "csv-xyz"
    PLY_ASCII = "ply-ascii"


PathLike = Union[str, os.PathLike]


def atomic_write_bytes(path: PathLike, data: bytes) -> None:
    """Write via a temp file + rename so failures leave nothing partial."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _parse_float(token: str, path, line_no: int) -> float:
    try:
        value = float(token)
    except ValueError:
        raise ParseError(path, line_no, f"not a number: {token!r}") from None
    if not np.isfinite(value):
        raise ParseError(path, line_no, f"non-finite coordinate: {token!r}")
    return value


def load_point_cloud(path: PathLike,
                     format: CloudFileFormat = CloudFileFormat.CSV_XYZ
                     ) -> PointCloud:
    """Read a cloud, preserving file order; raises ParseError with the
    offending line number on malformed input."""
    path = Path(path)
    text = path.read_text(encoding="ascii")
    if format is CloudFileFormat.CSV_XYZ:
        return _parse_csv(text, path)
    if format is CloudFileFormat.PLY_ASCII:
        return _parse_ply(text, path)
    raise InvalidArgumentError(f"unsupported cloud format: {format!r}")


def _parse_csv(text: str, path) -> PointCloud:
    rows = []
    for line_no, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        fields = line.split(",")
        if len(fields) != 3:
            raise ParseError(path, line_no,
                             f"expected 3 comma-separated values, got {len(fields)}")
        rows.append([_parse_float(f, path, line_no) for f in fields])
    return PointCloud(np.array(rows, dtype=np.float64).reshape(-1, 3),
                      source=str(path))


def _parse_ply(text: str, path) -> PointCloud:
    lines = text.splitlines()
    if not lines or lines[0].strip() != "ply":
        raise ParseError(path, 1, "missing 'ply' magic")
    n_vertices = None
    body_start = None
    for line_no, line in enumerate(lines[1:], start=2):
        token = line.strip()
        if token.startswith("element vertex"):
            try:
                n_vertices = int(token.split()[2])
            except (IndexError, ValueError):
                raise ParseError(path, line_no, "bad element vertex count") from None
        elif token == "end_header":
            body_start = line_no
            break
    if body_start is None:
        raise ParseError(path, len(lines), "missing end_header")
    if n_vertices is None:
        raise ParseError(path, body_start, "missing 'element vertex' declaration")

    rows = []
    for offset, line in enumerate(lines[body_start:body_start + n_vertices]):
        line_no = body_start + 1 + offset
        fields = line.split()
        if len(fields) < 3:
            raise ParseError(path, line_no,
                             f"expected 3 vertex coordinates, got {len(fields)}")
        rows.append([_parse_float(f, path, line_no) for f in fields[:3]])
    if len(rows) != n_vertices:
        raise ParseError(path, len(lines),
                         f"declared {n_vertices} vertices, found {len(rows)}")
    return PointCloud(np.array(rows, dtype=np.float64).reshape(-1, 3),
                      source=str(path))


def save_point_cloud(cloud: PointCloud, path: PathLike,
                     format: CloudFileFormat = CloudFileFormat.CSV_XYZ) -> None:
    """Write a cloud; byte output is deterministic for identical input."""
    if format is CloudFileFormat.CSV_XYZ:
        lines = [",".join(_FLOAT_FMT % v for v in row) for row in cloud.xyz]
        data = ("\n".join(lines) + ("\n" if lines else "")).encode("ascii")
    elif format is CloudFileFormat.PLY_ASCII:
        header = (
            "ply\nformat ascii 1.0\n"
            f"element vertex {len(cloud)}\n"
            "property float x\nproperty float y\nproperty float z\n"
            "end_header\n"
        )
        body = "".join(" ".join(_FLOAT_FMT % v for v in row) + "\n"
                       for row in cloud.xyz)
        data = (header + body).encode("ascii")
    else:
        raise InvalidArgumentError(f"unsupported cloud format: {format!r}")
    atomic_write_bytes(path, data)


def save_depth_png(frame: DepthFrame, path: PathLike) -> None:
    """16-bit grayscale PNG, value = mm (rounded), 0 = invalid."""
    values = np.round(frame.depth).astype(np.uint16)
    img = Image.fromarray(values)  # uint16 -> 16-bit grayscale
    buf = BytesIO()
    img.save(buf, format="PNG")
    atomic_write_bytes(path, buf.getvalue())


def load_depth_png(path: PathLike) -> DepthFrame:
    img = Image.open(path)
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim != 2:
        raise InvalidArgumentError(f"{path}: depth PNG must be single-channel")
    return DepthFrame(width=arr.shape[1], height=arr.shape[0], depth=arr)


def save_mask_png(mask: MaskRegion, path: PathLike) -> None:
    img = Image.fromarray(np.where(mask.bitmap, 255, 0).astype(np.uint8), mode="L")
    buf = BytesIO()
    img.save(buf, format="PNG")
    atomic_write_bytes(path, buf.getvalue())


def load_mask_png(path: PathLike) -> MaskRegion:
    img = Image.open(path).convert("L")
    arr = np.asarray(img)
    return MaskRegion(width=arr.shape[1], height=arr.shape[0], bitmap=arr > 0)


def save_intrinsics_json(intr: CameraIntrinsics, path: PathLike) -> None:
    doc = {"fx": intr.fx, "fy": intr.fy, "cx": intr.cx, "cy": intr.cy,
           "width": intr.width, "height": intr.height}
    atomic_write_bytes(path, (json.dumps(doc, indent=2) + "\n").encode("ascii"))


def load_intrinsics_json(path: PathLike) -> CameraIntrinsics:
    with open(path, "r", encoding="ascii") as fh:
        doc = json.load(fh)
    try:
        return CameraIntrinsics(
            fx=float(doc["fx"]), fy=float(doc["fy"]),
            cx=float(doc["cx"]), cy=float(doc["cy"]),
            width=int(doc["width"]), height=int(doc["height"]),
        )
    except KeyError as exc:
        raise InvalidArgumentError(f"{path}: intrinsics JSON missing {exc}") from None


def back_project(depth: DepthFrame, mask: MaskRegion, intr: CameraIntrinsics,
                 min_depth_mm: float = DEFAULT_MIN_DEPTH_MM,
                 max_depth_mm: float = DEFAULT_MAX_DEPTH_MM) -> PointCloud:
    """Pinhole back-projection of masked depth pixels into a metric cloud.

    x = (u - cx) z / fx, y = (v - cy) z / fy, z = depth(u, v). Pixels with
    zero depth or depth outside [min_depth_mm, max_depth_mm] are skipped;
    output points follow row-major pixel order.
    """
    if not 0 < min_depth_mm < max_depth_mm:
        raise InvalidArgumentError("need 0 < min_depth_mm < max_depth_mm")
    if (depth.width, depth.height) != (intr.width, intr.height):
        raise InvalidArgumentError(
            f"depth {depth.width}x{depth.height} does not match intrinsics "
            f"{intr.width}x{intr.height}"
        )
    if (mask.width, mask.height) != (intr.width, intr.height):
        raise InvalidArgumentError(
            f"mask {mask.width}x{mask.height} does not match intrinsics "
            f"{intr.width}x{intr.height}"
        )
    z = depth.depth
    keep = mask.bitmap & (z >= min_depth_mm) & (z <= max_depth_mm)
    v_idx, u_idx = np.nonzero(keep)
    zs = z[v_idx, u_idx]
    xs = (u_idx - intr.cx) * zs / intr.fx
    ys = (v_idx - intr.cy) * zs / intr.fy
    return PointCloud(np.column_stack([xs, ys, zs]))


def erode_mask(mask: MaskRegion, radius: int) -> MaskRegion:
    """Chebyshev (square structuring element) erosion; pixels beyond the
    image border count as background. radius 0 is the identity."""
    if radius < 0:
        raise InvalidArgumentError("erosion radius must be >= 0")
    if radius == 0:
        return mask
    from scipy.ndimage import binary_erosion

    size = 2 * radius + 1
    eroded = binary_erosion(mask.bitmap, structure=np.ones((size, size), bool),
                            border_value=0)
    return MaskRegion(width=mask.width, height=mask.height, bitmap=eroded)
