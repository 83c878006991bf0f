"""Size estimation for roughly-spherical objects from 3D point clouds.

Fits spheres (least squares, RANSAC) and minimum-volume enclosing
ellipsoids to segmented depth-camera point clouds, generates ground-
truthed synthetic clouds and depth scenes for validation, and scores
sizing and segmentation quality.
"""

from .ellipsoid import (
    MveeParams,
    ellipsoid_axes,
    fit_ellipsoid_mvee,
    point_ellipsoid_residual,
)
from .errors import (
    DegenerateGeometryError,
    DegenerateSampleError,
    EmptyInputError,
    FruitSizeError,
    InsufficientPointsError,
    InvalidArgumentError,
    InvalidModelError,
    NoConsensusError,
    ParseError,
    UndefinedStatisticError,
)
from .io import (
    CloudFileFormat,
    back_project,
    erode_mask,
    load_depth_png,
    load_intrinsics_json,
    load_mask_png,
    load_point_cloud,
    save_depth_png,
    save_intrinsics_json,
    save_mask_png,
    save_point_cloud,
)
from .metrics import (
    MatchCounts,
    ScoredDetection,
    SizeSeries,
    average_precision,
    mae,
    map_over_thresholds,
    mape,
    mask_iou,
    match_instances,
    precision_recall_f1,
    r_squared,
    rmse,
    size_report,
)
from .sphere import (
    RansacParams,
    RansacResult,
    fit_sphere_lsq,
    fit_sphere_ransac,
    sphere_from_four_points,
)
from .synth import (
    SENSOR_PRESETS,
    CloudTruth,
    FruitSpec,
    ManifestRow,
    NoiseSpec,
    SceneRecord,
    generate_benchmark,
    load_manifest,
    render_depth_scene,
    sample_surface_cloud,
)
from .types import (
    CameraIntrinsics,
    DepthFrame,
    EllipsoidModel,
    FitReport,
    MaskRegion,
    Point3,
    PointCloud,
    SphereModel,
    centroid,
    transform_cloud,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
