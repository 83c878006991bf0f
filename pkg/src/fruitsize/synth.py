"""Ground-truthed synthetic data: surface-sampled clouds and ray-cast
depth scenes, the oracle stand-in for bench and field experiments.

Noise model: Gaussian range error along the surface normal for sampled
clouds and along the viewing ray for rendered depth, plus an optional
fraction of uniform box outliers for clouds. The two sensor presets
("azure-like", "realsense-like") are artifact constants chosen to give a
low-noise and a high-noise profile; they are not manufacturer data.

``visible_fraction`` measures the camera-facing hemisphere: 1.0 is the
whole front hemisphere, values below 1 keep the cap of surface normals
closest to the camera, and 2.0 extends the cap to the entire closed
surface. Full-surface clouds additionally pin the six principal-axis
endpoints so that noiseless clouds determine their generating shape
exactly (the enclosing-ellipsoid fit of a finite random sample is
otherwise strictly smaller than the true surface).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np

from . import kernels
from .errors import InvalidArgumentError
from .io import CloudFileFormat, atomic_write_bytes, save_point_cloud
from .types import (
    CameraIntrinsics,
    DepthFrame,
    MaskRegion,
    Point3,
    PointCloud,
    is_rotation_like,
)

SENSOR_PRESETS = {
    "azure-like": 0.5,       # mm range noise, 1-sigma
    "realsense-like": 2.0,
}

MANIFEST_NAME = "manifest.csv"
MANIFEST_HEADER = ("id,shape,diameter_mm,ax_mm,bx_mm,cx_mm,noise_sigma_mm,"
                   "outlier_fraction,visible_fraction,path")

_FMT = "%.9g"


@dataclass(frozen=True)
class FruitSpec:
    """Geometry of one synthetic fruit."""

    shape: str  # "sphere" | "ellipsoid"
    center: Point3
    semi_axes: Tuple[float, float, float]
    orientation: np.ndarray
    label: int = 0

    def __post_init__(self):
        if self.shape not in ("sphere", "ellipsoid"):
            raise InvalidArgumentError(f"unknown shape: {self.shape!r}")
        s = np.asarray(self.semi_axes, dtype=np.float64)
        if s.shape != (3,) or np.any(s <= 0) or not np.all(np.isfinite(s)):
            raise InvalidArgumentError("semi-axes must be three positive values")
        if self.shape == "sphere" and not (s[0] == s[1] == s[2]):
            raise InvalidArgumentError("sphere requires equal semi-axes")
        r = np.asarray(self.orientation, dtype=np.float64)
        if not is_rotation_like(r):
            raise InvalidArgumentError("orientation must be orthonormal")
        object.__setattr__(self, "semi_axes", (float(s[0]), float(s[1]), float(s[2])))
        object.__setattr__(self, "orientation", r.copy())

    @property
    def diameter_mm(self) -> float:
        return 2.0 * max(self.semi_axes)

    @classmethod
    def sphere(cls, center, radius: float, label: int = 0) -> "FruitSpec":
        c = center if isinstance(center, Point3) else Point3.fromarray(center)
        return cls("sphere", c, (radius, radius, radius), np.eye(3), label)


@dataclass(frozen=True)
class NoiseSpec:
    """Sensor noise model: radial sigma, outlier rate and box, RNG seed."""

    gaussian_sigma: float = 0.0
    outlier_fraction: float = 0.0
    outlier_box_halfwidth: float = 50.0
    rng_seed: int = 0

    def __post_init__(self):
        if self.gaussian_sigma < 0:
            raise InvalidArgumentError("gaussian_sigma must be >= 0")
        if not 0 <= self.outlier_fraction <= 1:
            raise InvalidArgumentError("outlier_fraction must lie in [0, 1]")
        if self.outlier_box_halfwidth <= 0:
            raise InvalidArgumentError("outlier_box_halfwidth must be > 0")


@dataclass(frozen=True)
class CloudTruth:
    """What a generated cloud actually contains."""

    spec: FruitSpec
    noise: NoiseSpec
    visible_fraction: float
    view_direction: Tuple[float, float, float]
    n_points: int
    n_outliers: int


@dataclass(frozen=True)
class SceneRecord:
    """Per-fruit ground truth of a rendered scene."""

    spec: FruitSpec
    pixel_count: int


def _subseed(master: int, index: int) -> int:
    """Stable per-item stream derived from a master seed."""
    ss = np.random.SeedSequence(entropy=master, spawn_key=(index,))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    """Uniform random rotation via a normalized quaternion."""
    q = rng.standard_normal(4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def _axis_endpoints(spec: FruitSpec) -> np.ndarray:
    """Local unit directions of the six principal-axis endpoints."""
    return np.array([
        [1.0, 0, 0], [-1.0, 0, 0],
        [0, 1.0, 0], [0, -1.0, 0],
        [0, 0, 1.0], [0, 0, -1.0],
    ])


def sample_surface_cloud(spec: FruitSpec, n_points: int,
                         visible_fraction: float, view_direction,
                         noise: NoiseSpec = NoiseSpec()
                         ) -> Tuple[PointCloud, CloudTruth]:
    """Sample the surface region facing the camera.

    Points are area-uniform on the part of the surface whose outward
    normal n satisfies n . (-view) >= 1 - visible_fraction. Gaussian
    radial noise is applied along the local normal, then the last
    floor(outlier_fraction * n) points are replaced by uniform samples in
    the outlier box around the center. Deterministic per noise.rng_seed.
    """
    if n_points < 1:
        raise InvalidArgumentError("n_points must be >= 1")
    if not 0.0 < visible_fraction <= 2.0:
        raise InvalidArgumentError(
            "visible_fraction must lie in (0, 2]: fraction of the facing "
            "hemisphere, 2.0 = whole surface"
        )
    view = np.asarray(view_direction, dtype=np.float64).reshape(3)
    norm = np.linalg.norm(view)
    if not np.isfinite(norm) or norm == 0:
        raise InvalidArgumentError("view_direction must be a nonzero vector")
    view = view / norm

    rng = np.random.default_rng(noise.rng_seed)
    semi = np.asarray(spec.semi_axes)
    rot = spec.orientation
    center = spec.center.asarray()
    cos_min = 1.0 - visible_fraction

    locals_u: List[np.ndarray] = []
    count = 0
    if visible_fraction >= 2.0:
        ends = _axis_endpoints(spec)[:n_points]
        locals_u.append(ends)
        count += len(ends)

    a, b, c = semi
    pair = np.array([b * c, a * c, a * b])
    pair_max = pair.max()
    batch = max(256, 2 * n_points)
    while count < n_points:
        u = rng.standard_normal((batch, 3))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        accept_area = rng.uniform(size=batch)
        weight = np.sqrt((pair[0] * u[:, 0]) ** 2 + (pair[1] * u[:, 1]) ** 2
                         + (pair[2] * u[:, 2]) ** 2) / pair_max
        keep = accept_area < weight
        n_local = u / semi
        n_world = (n_local / np.linalg.norm(n_local, axis=1, keepdims=True)) @ rot.T
        keep &= (n_world @ -view) >= cos_min
        kept = u[keep]
        if kept.shape[0]:
            take = kept[: n_points - count]
            locals_u.append(take)
            count += take.shape[0]

    u_all = np.vstack(locals_u)
    pts = (u_all * semi) @ rot.T + center

    if noise.gaussian_sigma > 0:
        n_local = u_all / semi
        n_world = (n_local / np.linalg.norm(n_local, axis=1, keepdims=True)) @ rot.T
        pts = pts + noise.gaussian_sigma * rng.standard_normal((n_points, 1)) * n_world

    n_out = int(np.floor(noise.outlier_fraction * n_points))
    if n_out > 0:
        hw = noise.outlier_box_halfwidth
        pts[n_points - n_out:] = center + rng.uniform(-hw, hw, (n_out, 3))

    truth = CloudTruth(
        spec=spec, noise=noise, visible_fraction=visible_fraction,
        view_direction=(float(view[0]), float(view[1]), float(view[2])),
        n_points=n_points, n_outliers=n_out,
    )
    return PointCloud(pts, source=f"synth:{spec.label}"), truth


def render_depth_scene(fruits: Sequence[FruitSpec], intr: CameraIntrinsics,
                       noise: NoiseSpec = NoiseSpec()
                       ) -> Tuple[DepthFrame, List[MaskRegion], List[SceneRecord]]:
    """Ray-cast the fruits into a depth frame with per-fruit masks.

    The camera sits at the origin looking along +z; rays pass through
    integer pixel coordinates. The nearest ray-quadric intersection wins
    each pixel; its depth (z, mm) gets Gaussian noise added; pixels that
    hit nothing stay 0.
    """
    nf = len(fruits)
    origins = np.zeros((nf, 3))
    rot_t = np.zeros((nf, 3, 3))
    inv_sq = np.zeros((nf, 3))
    c_coeff = np.zeros(nf)
    for k, fruit in enumerate(fruits):
        s = np.asarray(fruit.semi_axes)
        cz = fruit.center.z
        if cz <= s.max():
            raise InvalidArgumentError(
                f"fruit {fruit.label} is not strictly in front of the camera"
            )
        rt = fruit.orientation.T
        o = rt @ (-fruit.center.asarray())
        origins[k] = o
        rot_t[k] = rt
        inv_sq[k] = 1.0 / s**2
        c_coeff[k] = float(np.sum(inv_sq[k] * o**2) - 1.0)

    if nf:
        depth, winner = kernels.raycast_depth(
            intr.width, intr.height, intr.fx, intr.fy, intr.cx, intr.cy,
            np.ascontiguousarray(origins), np.ascontiguousarray(rot_t),
            np.ascontiguousarray(inv_sq), np.ascontiguousarray(c_coeff),
        )
    else:
        depth = np.zeros((intr.height, intr.width))
        winner = np.full((intr.height, intr.width), -1, dtype=np.int32)

    hit = winner >= 0
    if noise.gaussian_sigma > 0 and np.any(hit):
        rng = np.random.default_rng(noise.rng_seed)
        jitter = noise.gaussian_sigma * rng.standard_normal(depth.shape)
        depth = np.where(hit, np.maximum(depth + jitter, 0.0), 0.0)

    frame = DepthFrame(width=intr.width, height=intr.height, depth=depth)
    masks = [MaskRegion(width=intr.width, height=intr.height,
                        bitmap=(winner == k)) for k in range(nf)]
    records = [SceneRecord(spec=fruit, pixel_count=masks[k].pixel_count())
               for k, fruit in enumerate(fruits)]
    return frame, masks, records


@dataclass(frozen=True)
class ManifestRow:
    """One line of the benchmark manifest."""

    id: str
    shape: str
    diameter_mm: float
    ax_mm: float
    bx_mm: float
    cx_mm: float
    noise_sigma_mm: float
    outlier_fraction: float
    visible_fraction: float
    path: str


def generate_benchmark(n_fruit: int, diameter_range_mm: Tuple[float, float],
                       shape_mix: float, noise: NoiseSpec, out_dir,
                       n_points: int = 800, visible_fraction: float = 2.0,
                       view_direction=(0.0, 0.0, 1.0),
                       axis_ratio_max: float = 1.3,
                       diameters: Optional[Sequence[float]] = None
                       ) -> List[ManifestRow]:
    """Write n_fruit cloud files plus a manifest csv into out_dir.

    Diameters are drawn uniformly from diameter_range_mm unless an
    explicit ``diameters`` list pins them. ``shape_mix`` is the
    probability of an ellipsoid (vs sphere); ellipsoid off-axis ratios
    are uniform in [1, axis_ratio_max]. Per-fruit RNG streams derive from
    noise.rng_seed, so output trees are byte-identical across reruns.
    """
    lo, hi = diameter_range_mm
    if diameters is None:
        if not (0 < lo < hi):
            raise InvalidArgumentError("need 0 < lo < hi diameter range")
    else:
        if len(diameters) != n_fruit:
            raise InvalidArgumentError("diameters list must have n_fruit entries")
        if any(d <= 0 for d in diameters):
            raise InvalidArgumentError("diameters must be positive")
    if not 0 <= shape_mix <= 1:
        raise InvalidArgumentError("shape_mix must lie in [0, 1]")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    param_rng = np.random.default_rng(_subseed(noise.rng_seed, 0))
    rows: List[ManifestRow] = []
    for i in range(n_fruit):
        d = float(diameters[i]) if diameters is not None \
            else float(param_rng.uniform(lo, hi))
        is_ell = bool(param_rng.uniform() < shape_mix)
        if is_ell:
            ratios = param_rng.uniform(1.0, axis_ratio_max, size=2)
            semi = (d / 2.0, d / 2.0 / float(ratios[0]), d / 2.0 / float(ratios[1]))
            orient = random_rotation(param_rng)
            shape = "ellipsoid"
        else:
            semi = (d / 2.0, d / 2.0, d / 2.0)
            orient = random_rotation(param_rng)
            shape = "sphere"
        spec = FruitSpec(shape=shape, center=Point3(0.0, 0.0, 0.0),
                         semi_axes=semi, orientation=orient, label=i)
        fruit_noise = replace(noise, rng_seed=_subseed(noise.rng_seed, i + 1))
        cloud, _ = sample_surface_cloud(spec, n_points, visible_fraction,
                                        view_direction, fruit_noise)
        fname = f"cloud_{i:04d}.csv"
        save_point_cloud(cloud, out / fname, CloudFileFormat.CSV_XYZ)
        rows.append(ManifestRow(
            id=f"cloud_{i:04d}", shape=shape, diameter_mm=d,
            ax_mm=semi[0], bx_mm=semi[1], cx_mm=semi[2],
            noise_sigma_mm=noise.gaussian_sigma,
            outlier_fraction=noise.outlier_fraction,
            visible_fraction=visible_fraction, path=fname,
        ))

    lines = [MANIFEST_HEADER]
    for r in rows:
        lines.append(",".join([
            r.id, r.shape, _FMT % r.diameter_mm, _FMT % r.ax_mm,
            _FMT % r.bx_mm, _FMT % r.cx_mm, _FMT % r.noise_sigma_mm,
            _FMT % r.outlier_fraction, _FMT % r.visible_fraction, r.path,
        ]))
    atomic_write_bytes(out / MANIFEST_NAME,
                       ("\n".join(lines) + "\n").encode("ascii"))
    return rows


def load_manifest(path) -> List[ManifestRow]:
    """Read a manifest written by generate_benchmark."""
    rows = []
    with open(path, newline="", encoding="ascii") as fh:
        for rec in csv.DictReader(fh):
            rows.append(ManifestRow(
                id=rec["id"], shape=rec["shape"],
                diameter_mm=float(rec["diameter_mm"]),
                ax_mm=float(rec["ax_mm"]), bx_mm=float(rec["bx_mm"]),
                cx_mm=float(rec["cx_mm"]),
                noise_sigma_mm=float(rec["noise_sigma_mm"]),
                outlier_fraction=float(rec["outlier_fraction"]),
                visible_fraction=float(rec["visible_fraction"]),
                path=rec["path"],
            ))
    return rows
