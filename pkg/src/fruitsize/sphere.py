"""Sphere fitting: algebraic + geometric least squares, and RANSAC.

The least-squares path linearizes (x-a)^2 + (y-b)^2 + (z-c)^2 = r^2 into
2ax + 2by + 2cz + k = x^2 + y^2 + z^2 (k = r^2 - a^2 - b^2 - c^2), solves
the 4-unknown linear system, then polishes center and radius with damped
Gauss-Newton on the geometric residuals ||p - c|| - r. RANSAC draws
4-point minimal samples (the circumsphere of a tetrahedron; three points
do not determine a sphere), scores them by inlier count, and refits on
the winning consensus set.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from . import kernels
from .errors import (
    DegenerateGeometryError,
    DegenerateSampleError,
    InsufficientPointsError,
    InvalidArgumentError,
    NoConsensusError,
)
from .types import FitReport, Point3, PointCloud, SphereModel

MIN_LSQ_POINTS = 10
TETRA_VOLUME_TOL = 1e-6  # mm^3
COPLANAR_EIG_RATIO = 1e-12
GN_STEP_TOL = 1e-9
GN_MAX_ITER = 100


@dataclass(frozen=True)
class RansacParams:
    """Knobs for RANSAC sphere fitting."""

    inlier_threshold: float = 1.0
    confidence: float = 0.99
    max_iterations: int = 10000
    min_points: int = 10
    rng_seed: int = 0

    def __post_init__(self):
        if not self.inlier_threshold > 0:
            raise InvalidArgumentError("inlier_threshold must be > 0")
        if not 0 < self.confidence < 1:
            raise InvalidArgumentError("confidence must lie in (0, 1)")
        if self.max_iterations < 1:
            raise InvalidArgumentError("max_iterations must be >= 1")
        if self.min_points < 4:
            raise InvalidArgumentError("min_points must be >= 4")


@dataclass(frozen=True)
class RansacResult:
    """Winning model plus the consensus set that supports it."""

    model: SphereModel
    inlier_indices: np.ndarray
    iterations_run: int


def _coplanarity_check(xyz: np.ndarray) -> None:
    centered = xyz - xyz.mean(axis=0)
    evals = np.linalg.eigvalsh(centered.T @ centered / xyz.shape[0])
    if evals[0] < COPLANAR_EIG_RATIO * max(evals[-1], 1e-300):
        raise DegenerateGeometryError("points are coplanar; no unique sphere")


def sphere_from_four_points(p1: Point3, p2: Point3, p3: Point3,
                            p4: Point3) -> SphereModel:
    """Circumsphere of a non-degenerate tetrahedron."""
    pts = np.array([p.asarray() for p in (p1, p2, p3, p4)])
    return _sphere_from_sample(pts)


def _sphere_from_sample(pts: np.ndarray) -> SphereModel:
    edges = pts[1:] - pts[0]
    volume = abs(np.linalg.det(edges)) / 6.0
    if volume <= TETRA_VOLUME_TOL:
        raise DegenerateSampleError(
            f"sample tetrahedron volume {volume:.3e} mm^3 below "
            f"{TETRA_VOLUME_TOL} mm^3"
        )
    design = np.hstack([2.0 * pts, np.ones((4, 1))])
    rhs = np.sum(pts**2, axis=1)
    sol = np.linalg.solve(design, rhs)
    center = sol[:3]
    r_sq = sol[3] + center @ center
    if r_sq <= 0:
        raise DegenerateSampleError("sample does not define a real sphere")
    return SphereModel(Point3.fromarray(center), float(np.sqrt(r_sq)))


def _kasa_solve(xyz: np.ndarray) -> Tuple[np.ndarray, float]:
    design = np.hstack([2.0 * xyz, np.ones((xyz.shape[0], 1))])
    rhs = np.sum(xyz**2, axis=1)
    sol, *_ = np.linalg.lstsq(design, rhs, rcond=None)
    center = sol[:3]
    r_sq = sol[3] + center @ center
    if r_sq <= 0:
        raise DegenerateGeometryError("algebraic solve yields no real radius")
    return center, float(np.sqrt(r_sq))


def _objective(xyz: np.ndarray, center: np.ndarray, radius: float) -> float:
    d = np.linalg.norm(xyz - center, axis=1)
    return float(np.sum((d - radius) ** 2))


def _refine(xyz: np.ndarray, center: np.ndarray, radius: float):
    """Damped Gauss-Newton on sum((||p - c|| - r)^2).

    Step halving keeps the objective non-increasing relative to the
    algebraic start. Returns (center, radius, converged).
    """
    c = center.copy()
    r = radius
    s = _objective(xyz, c, r)
    for _ in range(GN_MAX_ITER):
        diff = xyz - c
        d = np.linalg.norm(diff, axis=1)
        d = np.maximum(d, 1e-12)
        resid = d - r
        jac = np.empty((xyz.shape[0], 4))
        jac[:, :3] = -diff / d[:, None]
        jac[:, 3] = -1.0
        jtj = jac.T @ jac
        jtr = jac.T @ resid
        try:
            step = np.linalg.solve(jtj, -jtr)
        except np.linalg.LinAlgError:
            return c, r, False
        scale = 1.0
        for _ in range(30):
            c_new = c + scale * step[:3]
            r_new = r + scale * step[3]
            s_new = _objective(xyz, c_new, r_new)
            if s_new <= s and r_new > 0:
                break
            scale *= 0.5
        else:
            return c, r, True  # no descent direction left: at a minimum
        c, r, s = c_new, r_new, s_new
        if scale * float(np.max(np.abs(step))) < GN_STEP_TOL:
            return c, r, True
    return c, r, False


def _lsq_engine(xyz: np.ndarray):
    """Shared core: algebraic init + refinement, no point-count gate."""
    _coplanarity_check(xyz)
    center0, radius0 = _kasa_solve(xyz)
    center, radius, converged = _refine(xyz, center0, radius0)
    if not converged:
        center, radius = center0, radius0
    rms = float(np.sqrt(_objective(xyz, center, radius) / xyz.shape[0]))
    model = SphereModel(Point3.fromarray(center), radius)
    return model, rms, converged


def fit_sphere_lsq(cloud: PointCloud) -> FitReport:
    """Least-squares sphere fit (algebraic init, Gauss-Newton polish)."""
    if len(cloud) < MIN_LSQ_POINTS:
        raise InsufficientPointsError(
            f"least-squares sphere fit needs >= {MIN_LSQ_POINTS} points, "
            f"got {len(cloud)}"
        )
    model, rms, converged = _lsq_engine(cloud.xyz)
    return FitReport(
        kind="sphere-lsq",
        model=model,
        diameter_mm=model.diameter,
        rms_residual_mm=rms,
        iterations=1,
        converged=converged,
    )


def _adaptive_iterations(inlier_ratio: float, confidence: float,
                         max_iterations: int) -> int:
    if inlier_ratio <= 0.0:
        return max_iterations
    w4 = inlier_ratio**4
    if w4 >= 1.0 - 1e-15:
        return 1
    n = np.log1p(-confidence) / np.log1p(-w4)
    return int(min(max_iterations, np.ceil(n)))


def fit_sphere_ransac(cloud: PointCloud,
                      params: RansacParams = RansacParams()
                      ) -> Tuple[FitReport, RansacResult]:
    """RANSAC sphere fit: best-consensus 4-point hypothesis, then a
    least-squares refit on its inliers.

    The iteration budget adapts as N = ceil(log(1-confidence) /
    log(1 - w^4)) with w the best inlier ratio seen, capped at
    max_iterations. Ties on inlier count prefer lower inlier RMS, then
    the earlier iteration. Deterministic for a fixed rng_seed.
    """
    xyz = cloud.xyz
    n = xyz.shape[0]
    if n < params.min_points:
        raise InsufficientPointsError(
            f"RANSAC needs >= {params.min_points} points, got {n}"
        )

    rng = np.random.default_rng(params.rng_seed)
    best_count = 0
    best_rss = np.inf
    best_model = None
    budget = params.max_iterations
    it = 0
    while it < budget:
        idx = rng.choice(n, size=4, replace=False)
        it += 1
        try:
            hypo = _sphere_from_sample(xyz[idx])
        except DegenerateSampleError:
            continue
        c = hypo.center
        count, rss = kernels.sphere_inlier_stats(
            xyz, c.x, c.y, c.z, hypo.radius, params.inlier_threshold
        )
        if count > best_count or (count == best_count and rss < best_rss):
            best_count = count
            best_rss = rss
            best_model = hypo
            budget = min(budget, max(it, _adaptive_iterations(
                count / n, params.confidence, params.max_iterations)))

    if best_model is None or best_count < params.min_points:
        raise NoConsensusError(
            f"no hypothesis reached {params.min_points} inliers "
            f"(best: {best_count})"
        )

    c = best_model.center
    d = np.linalg.norm(xyz - c.asarray(), axis=1)
    inliers = np.nonzero(np.abs(d - best_model.radius)
                         <= params.inlier_threshold)[0]
    try:
        model, _, converged = _lsq_engine(xyz[inliers])
    except DegenerateGeometryError:
        model, converged = best_model, True

    # report the consensus set of the refit model so the stated
    # threshold inequality holds against the returned parameters
    d = np.linalg.norm(xyz - model.center.asarray(), axis=1)
    resid = d - model.radius
    final = np.nonzero(np.abs(resid) <= params.inlier_threshold)[0]
    if final.size == 0:  # refit drifted off every point; keep hypothesis set
        final = inliers
        model = best_model
        resid = d - model.radius
    rms = float(np.sqrt(np.mean(resid[final] ** 2)))

    report = FitReport(
        kind="sphere-ransac",
        model=model,
        diameter_mm=model.diameter,
        rms_residual_mm=rms,
        iterations=it,
        converged=converged,
        inlier_count=int(final.size),
        inlier_fraction=float(final.size / n),
    )
    return report, RansacResult(model=model, inlier_indices=final,
                                iterations_run=it)
