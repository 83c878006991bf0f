import numpy as np
import pytest

from fruitsize import (
    EllipsoidModel,
    InvalidArgumentError,
    InvalidModelError,
    Point3,
    PointCloud,
    SphereModel,
    centroid,
    transform_cloud,
)
from fruitsize.errors import EmptyInputError
from fruitsize.synth import random_rotation


def test_point3_rejects_nan():
    with pytest.raises(InvalidArgumentError):
        Point3(0.0, np.nan, 1.0)
    with pytest.raises(InvalidArgumentError):
        Point3(np.inf, 0.0, 1.0)


def test_cloud_rejects_nonfinite():
    with pytest.raises(InvalidArgumentError):
        PointCloud(np.array([[0.0, 0.0, np.inf]]))


def test_cloud_is_immutable():
    cloud = PointCloud(np.zeros((3, 3)))
    with pytest.raises(ValueError):
        cloud.xyz[0, 0] = 1.0


def test_cloud_preserves_order():
    a = np.arange(12, dtype=float).reshape(4, 3)
    cloud = PointCloud(a)
    assert np.array_equal(cloud.xyz, a)
    assert cloud.point(2) == Point3(6.0, 7.0, 8.0)


def test_sphere_model_invariants():
    with pytest.raises(InvalidArgumentError):
        SphereModel(Point3(0, 0, 0), 0.0)
    with pytest.raises(InvalidArgumentError):
        SphereModel(Point3(0, 0, 0), -1.0)


def test_transform_identity():
    cloud = PointCloud(np.array([[1.0, 2.0, 3.0], [-4.0, 0.0, 5.0]]))
    out = transform_cloud(cloud, np.eye(3), np.zeros(3))
    assert np.array_equal(out.xyz, cloud.xyz)


def test_transform_pure_translation():
    cloud = PointCloud(np.array([[0.0, 0.0, 0.0]]))
    out = transform_cloud(cloud, np.eye(3), np.array([5.0, 0.0, 0.0]))
    assert np.array_equal(out.xyz, np.array([[5.0, 0.0, 0.0]]))


def test_transform_rejects_non_orthonormal():
    cloud = PointCloud(np.zeros((1, 3)))
    with pytest.raises(InvalidArgumentError):
        transform_cloud(cloud, np.eye(3) * 1.001, np.zeros(3))


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_transform_inverse_restores(seed):
    rng = np.random.default_rng(seed)
    cloud = PointCloud(rng.uniform(-50, 50, (100, 3)))
    r = random_rotation(rng)
    t = rng.uniform(-20, 20, 3)
    fwd = transform_cloud(cloud, r, t)
    back = transform_cloud(fwd, r.T, -r.T @ t)
    assert np.max(np.abs(back.xyz - cloud.xyz)) <= 1e-9


def test_centroid_midpoint():
    cloud = PointCloud(np.array([[0.0, 0.0, 0.0], [2.0, 0.0, 0.0]]))
    assert centroid(cloud) == Point3(1.0, 0.0, 0.0)


def test_centroid_single_point():
    cloud = PointCloud(np.array([[3.0, -1.0, 7.0]]))
    assert centroid(cloud) == Point3(3.0, -1.0, 7.0)


def test_centroid_empty_errors():
    with pytest.raises(EmptyInputError):
        centroid(PointCloud(np.empty((0, 3))))


def test_centroid_of_sphere_samples_near_center():
    # Monte-Carlo: 1e4 uniform surface samples, fixed seed
    rng = np.random.default_rng(42)
    v = rng.standard_normal((10_000, 3))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    cloud = PointCloud(v * 25.0 + np.array([10.0, 20.0, 30.0]))
    c = centroid(cloud).asarray()
    assert np.linalg.norm(c - np.array([10.0, 20.0, 30.0])) <= 0.5


def test_ellipsoid_round_trip():
    rng = np.random.default_rng(3)
    for _ in range(20):
        semi = np.sort(rng.uniform(5, 30, 3))[::-1]
        rot = random_rotation(rng)
        center = rng.uniform(-10, 10, 3)
        model = EllipsoidModel.from_axes(center, semi, rot)
        rebuilt = model.orientation @ np.diag(1.0 / model.semi_axes**2) \
            @ model.orientation.T
        rel = np.linalg.norm(rebuilt - model.shape_matrix) \
            / np.linalg.norm(model.shape_matrix)
        assert rel <= 1e-9
        assert np.allclose(np.sort(model.semi_axes)[::-1], model.semi_axes)


def test_ellipsoid_orientation_is_proper_rotation():
    rng = np.random.default_rng(4)
    for _ in range(10):
        model = EllipsoidModel.from_axes(
            np.zeros(3), np.array([20.0, 15.0, 10.0]), random_rotation(rng))
        r = model.orientation
        assert np.max(np.abs(r.T @ r - np.eye(3))) <= 1e-9
        assert np.linalg.det(r) > 0


def test_ellipsoid_rejects_indefinite_matrix():
    with pytest.raises(InvalidModelError):
        EllipsoidModel.from_shape_matrix(np.zeros(3), -np.eye(3))
    with pytest.raises(InvalidModelError):
        EllipsoidModel.from_shape_matrix(np.zeros(3),
                                         np.diag([1.0, 1.0, 0.0]))
