import numpy as np
import pytest

from fruitsize import (
    DegenerateGeometryError,
    DegenerateSampleError,
    FruitSpec,
    InsufficientPointsError,
    NoConsensusError,
    NoiseSpec,
    Point3,
    PointCloud,
    RansacParams,
    fit_sphere_lsq,
    fit_sphere_ransac,
    sample_surface_cloud,
    sphere_from_four_points,
    transform_cloud,
)
from fruitsize.sphere import _kasa_solve, _objective
from fruitsize.synth import random_rotation


def surface_cloud(center, radius, n, seed, sigma=0.0):
    rng = np.random.default_rng(seed)
    v = rng.standard_normal((n, 3))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    r = radius + sigma * rng.standard_normal((n, 1))
    return PointCloud(v * r + np.asarray(center, dtype=float))


# ------------------------------------------------------- four-point solver

def test_four_points_unit_sphere():
    model = sphere_from_four_points(Point3(1, 0, 0), Point3(-1, 0, 0),
                                    Point3(0, 1, 0), Point3(0, 0, 1))
    assert np.allclose(model.center.asarray(), 0.0, atol=1e-12)
    assert model.radius == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("seed", range(5))
def test_four_points_exact_recovery(seed):
    rng = np.random.default_rng(seed)
    center = np.array([10.0, 20.0, 30.0])
    while True:
        v = rng.standard_normal((4, 3))
        v /= np.linalg.norm(v, axis=1, keepdims=True)
        if abs(np.linalg.det(v[1:] - v[0])) > 0.1:
            break
    pts = [Point3.fromarray(p) for p in center + 15.0 * v]
    model = sphere_from_four_points(*pts)
    assert np.linalg.norm(model.center.asarray() - center) <= 1e-6
    assert model.radius == pytest.approx(15.0, abs=1e-6)
    for p in pts:
        d = np.linalg.norm(p.asarray() - model.center.asarray())
        assert abs(d - model.radius) <= 1e-6


def test_four_coplanar_points_degenerate():
    with pytest.raises(DegenerateSampleError):
        sphere_from_four_points(Point3(0, 0, 0), Point3(1, 0, 0),
                                Point3(0, 1, 0), Point3(1, 1, 0))


# ------------------------------------------------------- least squares

def test_lsq_six_axis_points_exact():
    pts = np.array([[1, 0, 0], [-1, 0, 0], [0, 1, 0],
                    [0, -1, 0], [0, 0, 1], [0, 0, -1]], dtype=float)
    # pad to the 10-point minimum with more unit-sphere points
    extra = np.array([[1, 1, 1], [-1, 1, 1], [1, -1, 1], [1, 1, -1]],
                     dtype=float) / np.sqrt(3)
    rep = fit_sphere_lsq(PointCloud(np.vstack([pts, extra])))
    assert np.allclose(rep.model.center.asarray(), 0.0, atol=1e-9)
    assert rep.model.radius == pytest.approx(1.0, abs=1e-9)
    assert rep.rms_residual_mm <= 1e-9


def test_lsq_noiseless_recovery():
    cloud = surface_cloud([10, 20, 30], 15.0, 200, seed=1)
    rep = fit_sphere_lsq(cloud)
    assert np.linalg.norm(rep.model.center.asarray() - [10, 20, 30]) <= 1e-6
    assert rep.model.radius == pytest.approx(15.0, abs=1e-6)
    assert rep.diameter_mm == pytest.approx(30.0, abs=2e-6)


def test_lsq_noisy_monte_carlo():
    # 500 points, sigma 0.5 mm, full surface: mean |R - 12.5| over 100 seeds
    errors = []
    for seed in range(100):
        cloud = surface_cloud([0, 0, 0], 12.5, 500, seed=seed, sigma=0.5)
        rep = fit_sphere_lsq(cloud)
        errors.append(abs(rep.model.radius - 12.5))
    assert np.mean(errors) <= 0.15


def test_lsq_too_few_points():
    with pytest.raises(InsufficientPointsError):
        fit_sphere_lsq(PointCloud(np.eye(3)))


def test_lsq_coplanar_cloud():
    rng = np.random.default_rng(2)
    flat = rng.uniform(-10, 10, (50, 3))
    flat[:, 2] = 4.0
    with pytest.raises(DegenerateGeometryError):
        fit_sphere_lsq(PointCloud(flat))


def test_lsq_refinement_never_increases_objective():
    for seed in range(10):
        cloud = surface_cloud([5, -3, 8], 20.0, 120, seed=seed, sigma=1.5)
        center0, radius0 = _kasa_solve(cloud.xyz)
        s0 = _objective(cloud.xyz, center0, radius0)
        rep = fit_sphere_lsq(cloud)
        s1 = _objective(cloud.xyz, rep.model.center.asarray(), rep.model.radius)
        assert s1 <= s0 + 1e-12


@pytest.mark.parametrize("seed", [3, 4])
def test_lsq_rigid_motion_equivariance(seed):
    rng = np.random.default_rng(seed)
    cloud = surface_cloud([0, 0, 0], 12.0, 150, seed=seed, sigma=0.2)
    rot = random_rotation(rng)
    t = rng.uniform(-100, 100, 3)
    rep0 = fit_sphere_lsq(cloud)
    rep1 = fit_sphere_lsq(transform_cloud(cloud, rot, t))
    moved = rot @ rep0.model.center.asarray() + t
    assert np.linalg.norm(rep1.model.center.asarray() - moved) <= 1e-6
    assert rep1.model.radius == pytest.approx(rep0.model.radius, rel=1e-9)


def test_lsq_scale_equivariance():
    cloud = surface_cloud([4, 5, 6], 10.0, 150, seed=9, sigma=0.3)
    rep0 = fit_sphere_lsq(cloud)
    scaled = PointCloud(cloud.xyz * 2.5)
    rep1 = fit_sphere_lsq(scaled)
    assert rep1.model.radius == pytest.approx(2.5 * rep0.model.radius, rel=1e-6)
    assert np.allclose(rep1.model.center.asarray(),
                       2.5 * rep0.model.center.asarray(), atol=1e-6)


# ------------------------------------------------------- RANSAC

def outlier_cloud(seed, n=500, radius=12.0, frac=0.3, sigma=0.3):
    spec = FruitSpec.sphere((0.0, 0.0, 0.0), radius)
    noise = NoiseSpec(gaussian_sigma=sigma, outlier_fraction=frac,
                      outlier_box_halfwidth=50.0, rng_seed=seed)
    cloud, _ = sample_surface_cloud(spec, n, 2.0, (0, 0, 1), noise)
    return cloud


def test_ransac_matches_lsq_without_outliers():
    cloud = surface_cloud([1, 2, 3], 14.0, 300, seed=11)
    lsq = fit_sphere_lsq(cloud)
    rep, res = fit_sphere_ransac(cloud, RansacParams(rng_seed=5))
    assert np.linalg.norm(rep.model.center.asarray()
                          - lsq.model.center.asarray()) <= 1e-6
    assert rep.model.radius == pytest.approx(lsq.model.radius, abs=1e-6)
    assert res.inlier_indices.size == len(cloud)


def test_ransac_monte_carlo_robustness():
    hits = 0
    for seed in range(50):
        cloud = outlier_cloud(seed)
        rep, _ = fit_sphere_ransac(cloud, RansacParams(rng_seed=seed + 1))
        if abs(rep.model.radius - 12.0) <= 0.02 * 12.0:
            hits += 1
    assert hits >= 48
    assert rep.inlier_fraction >= 0.65


def test_ransac_inliers_satisfy_threshold():
    cloud = outlier_cloud(123)
    params = RansacParams(rng_seed=7)
    rep, res = fit_sphere_ransac(cloud, params)
    d = np.linalg.norm(cloud.xyz[res.inlier_indices]
                       - res.model.center.asarray(), axis=1)
    assert np.all(np.abs(d - res.model.radius) <= params.inlier_threshold)
    assert np.all(np.diff(res.inlier_indices) > 0)  # sorted ascending


def test_ransac_three_point_cloud_insufficient():
    with pytest.raises(InsufficientPointsError):
        fit_sphere_ransac(PointCloud(np.eye(3)), RansacParams())


def test_ransac_no_consensus():
    # 12 widely separated points, essentially exact threshold: any sphere
    # through four of them misses the other eight
    rng = np.random.default_rng(13)
    pts = rng.uniform(-500, 500, (12, 3))
    with pytest.raises(NoConsensusError):
        fit_sphere_ransac(PointCloud(pts),
                          RansacParams(inlier_threshold=1e-6, rng_seed=1,
                                       max_iterations=200))


def test_ransac_deterministic_given_seed():
    cloud = outlier_cloud(77)
    params = RansacParams(rng_seed=99)
    rep1, res1 = fit_sphere_ransac(cloud, params)
    rep2, res2 = fit_sphere_ransac(cloud, params)
    assert rep1.model.center == rep2.model.center
    assert rep1.model.radius == rep2.model.radius
    assert np.array_equal(res1.inlier_indices, res2.inlier_indices)
    assert res1.iterations_run == res2.iterations_run


@pytest.mark.parametrize("seed", [21, 22])
def test_ransac_rigid_motion_equivariance(seed):
    rng = np.random.default_rng(seed)
    cloud = outlier_cloud(seed)
    rot = random_rotation(rng)
    t = rng.uniform(-50, 50, 3)
    params = RansacParams(rng_seed=55)
    rep0, _ = fit_sphere_ransac(cloud, params)
    rep1, _ = fit_sphere_ransac(transform_cloud(cloud, rot, t), params)
    moved = rot @ rep0.model.center.asarray() + t
    assert np.linalg.norm(rep1.model.center.asarray() - moved) <= 1e-6
    assert rep1.model.radius == pytest.approx(rep0.model.radius, rel=1e-9)


def test_ransac_scale_equivariance():
    cloud = outlier_cloud(31, sigma=0.2)
    s = 3.0
    p0 = RansacParams(inlier_threshold=1.0, rng_seed=8)
    p1 = RansacParams(inlier_threshold=1.0 * s, rng_seed=8)
    rep0, _ = fit_sphere_ransac(cloud, p0)
    rep1, _ = fit_sphere_ransac(PointCloud(cloud.xyz * s), p1)
    assert rep1.model.radius == pytest.approx(s * rep0.model.radius, rel=1e-6)
    assert np.allclose(rep1.model.center.asarray(),
                       s * rep0.model.center.asarray(), atol=1e-5)
