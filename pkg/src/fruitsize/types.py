"""Shared domain types and elementary geometric transforms.

All lengths are millimeters throughout the package; there are no per-call
unit switches. Every type validates at construction and is immutable
afterwards (arrays are copied and marked read-only), so instances can be
shared freely across threads.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .errors import EmptyInputError, InvalidArgumentError, InvalidModelError

_ORTHO_TOL = 1e-9
_SYM_REL_TOL = 1e-9


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64, copy=True)
    a.setflags(write=False)
    return a


def _require_finite(a: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(a)):
        raise InvalidArgumentError(f"{what} must be finite (no NaN/Inf)")


def is_rotation_like(r: np.ndarray, tol: float = _ORTHO_TOL) -> bool:
    """True if r is a 3x3 matrix with r.T @ r = I within tol."""
    r = np.asarray(r, dtype=np.float64)
    if r.shape != (3, 3) or not np.all(np.isfinite(r)):
        return False
    return bool(np.max(np.abs(r.T @ r - np.eye(3))) <= tol)


@dataclass(frozen=True)
class Point3:
    """A single 3D point in millimeters."""

    x: float
    y: float
    z: float

    def __post_init__(self):
        for v in (self.x, self.y, self.z):
            if not np.isfinite(v):
                raise InvalidArgumentError("Point3 coordinates must be finite")

    def asarray(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=np.float64)

    @classmethod
    def fromarray(cls, a) -> "Point3":
        a = np.asarray(a, dtype=np.float64).reshape(3)
        return cls(float(a[0]), float(a[1]), float(a[2]))


@dataclass(frozen=True)
class PointCloud:
    """An ordered set of 3D points (n x 3, mm). Order is significant:
    inlier index sets produced by robust fitting refer to it."""

    xyz: np.ndarray
    source: Optional[str] = None

    def __post_init__(self):
        a = np.asarray(self.xyz, dtype=np.float64)
        if a.ndim != 2 or a.shape[1] != 3:
            if a.size == 0:
                a = a.reshape(0, 3)
            else:
                raise InvalidArgumentError(
                    f"point array must have shape (n, 3), got {a.shape}"
                )
        _require_finite(a, "point coordinates")
        object.__setattr__(self, "xyz", _readonly(a))

    def __len__(self) -> int:
        return self.xyz.shape[0]

    def point(self, i: int) -> Point3:
        return Point3.fromarray(self.xyz[i])

    @classmethod
    def from_points(cls, points: Sequence[Union[Point3, Sequence[float]]],
                    source: Optional[str] = None) -> "PointCloud":
        rows = [p.asarray() if isinstance(p, Point3) else np.asarray(p, dtype=np.float64)
                for p in points]
        a = np.vstack(rows) if rows else np.empty((0, 3))
        return cls(a, source=source)


@dataclass(frozen=True)
class SphereModel:
    """Sphere with center (a, b, c) and radius r, all in mm."""

    center: Point3
    radius: float

    def __post_init__(self):
        if not np.isfinite(self.radius) or self.radius <= 0:
            raise InvalidArgumentError("sphere radius must be finite and > 0")

    @property
    def diameter(self) -> float:
        return 2.0 * self.radius

    def distances(self, cloud: PointCloud) -> np.ndarray:
        """Euclidean distance of each cloud point from the center."""
        return np.linalg.norm(cloud.xyz - self.center.asarray(), axis=1)


def _canonical_axes(shape_matrix: np.ndarray):
    """Semi-axis lengths (descending) and matched unit eigenvectors.

    Sign convention: each axis direction has its first component of
    magnitude > 1e-12 positive. Equal-length axes are ordered by
    lexicographic comparison of their (sign-fixed) directions. If the
    resulting basis is left-handed, the last axis is negated so the
    orientation is a proper rotation.
    """
    evals, evecs = np.linalg.eigh(shape_matrix)
    if evals[0] <= 0:
        raise InvalidModelError("shape matrix must be positive-definite")
    lengths = 1.0 / np.sqrt(evals)  # ascending evals -> descending lengths
    vecs = evecs.copy()
    for k in range(3):
        v = vecs[:, k]
        nz = np.nonzero(np.abs(v) > 1e-12)[0]
        if nz.size and v[nz[0]] < 0:
            vecs[:, k] = -v
    # stable ordering for ties: descending length, then lexicographic direction
    order = sorted(range(3), key=lambda k: (-lengths[k], tuple(vecs[:, k])))
    lengths = lengths[order]
    vecs = vecs[:, order]
    if np.linalg.det(vecs) < 0:
        vecs[:, 2] = -vecs[:, 2]
    return lengths, vecs


@dataclass(frozen=True)
class EllipsoidModel:
    """Ellipsoid (p - center)^T shape_matrix (p - center) <= 1.

    shape_matrix is symmetric positive-definite with units mm^-2;
    semi_axes are stored descending and orientation columns are the
    matching principal directions (a proper rotation).
    """

    center: np.ndarray
    shape_matrix: np.ndarray
    semi_axes: np.ndarray
    orientation: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.center, dtype=np.float64).reshape(3)
        a = np.asarray(self.shape_matrix, dtype=np.float64)
        _require_finite(c, "ellipsoid center")
        _require_finite(a, "shape matrix")
        if a.shape != (3, 3):
            raise InvalidModelError("shape matrix must be 3x3")
        scale = max(np.max(np.abs(a)), 1.0)
        if np.max(np.abs(a - a.T)) > _SYM_REL_TOL * scale:
            raise InvalidModelError("shape matrix must be symmetric")
        s = np.asarray(self.semi_axes, dtype=np.float64).reshape(3)
        r = np.asarray(self.orientation, dtype=np.float64)
        if np.any(s <= 0) or np.any(np.diff(s) > 0):
            raise InvalidModelError("semi-axes must be positive and descending")
        if not is_rotation_like(r):
            raise InvalidModelError("orientation must be orthonormal")
        evals = np.linalg.eigvalsh(0.5 * (a + a.T))
        if evals[0] <= 0:
            raise InvalidModelError("shape matrix must be positive-definite")
        object.__setattr__(self, "center", _readonly(c))
        object.__setattr__(self, "shape_matrix", _readonly(0.5 * (a + a.T)))
        object.__setattr__(self, "semi_axes", _readonly(s))
        object.__setattr__(self, "orientation", _readonly(r))

    @classmethod
    def from_shape_matrix(cls, center, shape_matrix) -> "EllipsoidModel":
        a = np.asarray(shape_matrix, dtype=np.float64)
        a = 0.5 * (a + a.T)
        lengths, vecs = _canonical_axes(a)
        return cls(center, a, lengths, vecs)

    @classmethod
    def from_axes(cls, center, semi_axes, orientation) -> "EllipsoidModel":
        """Rebuild the shape matrix from semi-axes and orientation."""
        s = np.asarray(semi_axes, dtype=np.float64).reshape(3)
        r = np.asarray(orientation, dtype=np.float64)
        if np.any(s <= 0):
            raise InvalidModelError("semi-axes must be positive")
        a = r @ np.diag(1.0 / s**2) @ r.T
        return cls.from_shape_matrix(center, a)

    @property
    def diameter(self) -> float:
        """2x the major semi-axis: the widest caliper opening."""
        return 2.0 * float(self.semi_axes[0])

    def residuals(self, cloud: PointCloud) -> np.ndarray:
        """(p-c)^T A (p-c) for every cloud point; 1.0 is on the surface."""
        d = cloud.xyz - self.center
        return np.einsum("ij,jk,ik->i", d, self.shape_matrix, d)


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole parameters: focal lengths and principal point in pixels."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if not (np.isfinite(self.fx) and np.isfinite(self.fy)
                and self.fx > 0 and self.fy > 0):
            raise InvalidArgumentError("focal lengths must be finite and > 0")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise InvalidArgumentError("principal point must lie inside the image")
        if self.width <= 0 or self.height <= 0:
            raise InvalidArgumentError("image dimensions must be positive")


@dataclass(frozen=True)
class DepthFrame:
    """Metric depth image: z in mm per pixel, 0 marks an invalid pixel."""

    width: int
    height: int
    depth: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.depth, dtype=np.float64)
        if d.shape != (self.height, self.width):
            raise InvalidArgumentError(
                f"depth grid shape {d.shape} != (height, width) = "
                f"({self.height}, {self.width})"
            )
        _require_finite(d, "depth values")
        if np.any(d < 0):
            raise InvalidArgumentError("depth values must be >= 0")
        object.__setattr__(self, "depth", _readonly(d))


@dataclass(frozen=True)
class MaskRegion:
    """Binary segmentation mask stored row-major, True = object pixel."""

    width: int
    height: int
    bitmap: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.bitmap)
        if b.shape != (self.height, self.width):
            raise InvalidArgumentError(
                f"mask shape {b.shape} != (height, width) = "
                f"({self.height}, {self.width})"
            )
        b = np.ascontiguousarray(b != 0)
        b.setflags(write=False)
        object.__setattr__(self, "bitmap", b)

    def pixel_count(self) -> int:
        return int(np.count_nonzero(self.bitmap))


@dataclass(frozen=True)
class FitReport:
    """Scalar summary of one shape fit on one object."""

    kind: str  # "sphere-lsq" | "sphere-ransac" | "ellipsoid"
    model: Union[SphereModel, EllipsoidModel]
    diameter_mm: float
    rms_residual_mm: float
    iterations: int
    converged: bool = True
    inlier_count: Optional[int] = None
    inlier_fraction: Optional[float] = None

    def __post_init__(self):
        if not np.isfinite(self.diameter_mm) or self.diameter_mm <= 0:
            raise InvalidArgumentError("diameter must be finite and > 0")
        if self.inlier_fraction is not None and not 0 <= self.inlier_fraction <= 1:
            raise InvalidArgumentError("inlier fraction must lie in [0, 1]")


def transform_cloud(cloud: PointCloud, rotation, translation) -> PointCloud:
    """Apply the rigid transform p -> R p + t to every point, keeping order."""
    r = np.asarray(rotation, dtype=np.float64)
    t = np.asarray(translation, dtype=np.float64).reshape(3)
    if not is_rotation_like(r):
        raise InvalidArgumentError("rotation must be orthonormal within 1e-9")
    _require_finite(t, "translation")
    return PointCloud(cloud.xyz @ r.T + t, source=cloud.source)


def centroid(cloud: PointCloud) -> Point3:
    """Arithmetic mean of the cloud coordinates."""
    if len(cloud) == 0:
        raise EmptyInputError("centroid of an empty cloud is undefined")
    return Point3.fromarray(cloud.xyz.mean(axis=0))
