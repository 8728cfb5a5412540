"""Geometry and evaluation toolkit for monocular 3D glass detection."""

from .centerness import centerness_loss, centerness_map, contour, fuse
from .errors import (
    DegenerateGeometry,
    EmptyDataset,
    EmptyEvaluation,
    EmptyInstance,
    GenerationFailed,
    GlassKitError,
    InvalidPlane,
    NearOriginPlane,
    OutOfRange,
    PlaneBehindCamera,
    RayParallelToPlane,
    ShapeError,
    SingularConfiguration,
)
from .losses import (
    grad_plane_loss,
    head_activation,
    plane_distance_loss,
    plane_loss_aggregate,
    plane_loss_pixel,
    plane_param_loss,
    seg_loss,
    stage_weighted,
    total_loss,
)
from .metrics import DepthMetrics, SegMetrics, depth_metrics, seg_metrics
from .plane import (
    Plane,
    PolarPlane,
    RigidTransform,
    canonicalize,
    fit_plane_lsq,
    fit_plane_svd,
    from_polar,
    to_polar,
    transform_points,
)
from .projection import (
    CameraIntrinsics,
    backproject,
    pixel_ray,
    plane_depth_at_pixel,
    render_depth,
)
from .synth import SceneSpec, SyntheticScene, generate_scene, scene_round_trip

__version__ = "0.1.0"
