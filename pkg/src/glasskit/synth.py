"""Deterministic synthetic glass scenes: the ground-truth oracle for the
annotation pipeline, metrics and losses.

Glass primitives are 3D rectangles. Scene categories:
  * coplanar        - all rectangles lie on one plane;
  * multi_angle     - per-instance planes with pairwise normal angles in
                      [2, 15] degrees;
  * multi_occluded  - rectangles at distinct depths with overlapping
                      projections; the front surface wins each pixel, so
                      stored masks stay non-overlapping.

Randomness comes from numpy's default PCG64 generator seeded by the spec;
draws happen in a fixed order, so a seed fully determines the scene.
The camera-frame plane of every instance is re-fit from the transformed
world corners through the same transform_points -> fit_plane_lsq ->
render_depth path the annotation pipeline uses, which makes pipeline
output bit-identical to the stored ground truth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .centerness import centerness_map
from .errors import GenerationFailed
from .plane import Plane, RigidTransform, fit_plane_lsq, fit_plane_svd, transform_points
from .projection import CameraIntrinsics, pixel_center_rays, render_depth

CATEGORIES = ("coplanar", "multi_angle", "multi_occluded")

DEFAULT_INTRINSICS = CameraIntrinsics(fx=520.0, fy=520.0, cx=315.0, cy=252.0,
                                      width=630, height=504)
DEFAULT_DEPTH_RANGE = (0.07, 17.76)

MIN_VISIBLE_PIXELS = 25
MAX_ATTEMPTS = 200


@dataclass(frozen=True)
class SceneSpec:
    seed: int
    category: str = "multi_angle"
    plane_count: int = 3
    depth_range: tuple[float, float] = DEFAULT_DEPTH_RANGE
    intrinsics: CameraIntrinsics = DEFAULT_INTRINSICS

    def __post_init__(self):
        if self.category not in CATEGORIES:
            raise ValueError(f"unknown category {self.category!r}")
        if not 1 <= self.plane_count <= 10:
            raise ValueError("plane_count must be in [1, 10]")
        lo, hi = self.depth_range
        if not (DEFAULT_DEPTH_RANGE[0] <= lo < hi <= DEFAULT_DEPTH_RANGE[1]):
            raise ValueError(f"depth_range must lie within {DEFAULT_DEPTH_RANGE}")


@dataclass
class GlassInstance:
    corners_world: np.ndarray  # (4, 3)
    plane: Plane               # camera frame, canonical


@dataclass
class SyntheticScene:
    spec: SceneSpec
    intrinsics: CameraIntrinsics
    pose: RigidTransform       # world -> camera
    instances: list[GlassInstance]
    masks: np.ndarray          # (H, W) instance labels
    depth: np.ndarray          # (H, W) meters, 0 = background
    centerness: np.ndarray     # (H, W) in [0, 1]


@dataclass
class RoundTripReport:
    angular_errors: list[float]  # radians, per instance
    intercept_errors: list[float]

    @property
    def max_residual(self) -> float:
        vals = self.angular_errors + self.intercept_errors
        return max(vals) if vals else 0.0


def _rotation(axis: np.ndarray, angle: float) -> np.ndarray:
    """Rodrigues rotation matrix about a unit axis."""
    x, y, z = axis
    K = np.array([[0, -z, y], [z, 0, -x], [-y, x, 0]], dtype=np.float64)
    return np.eye(3) + math.sin(angle) * K + (1 - math.cos(angle)) * (K @ K)


def _random_pose(rng: np.random.Generator) -> RigidTransform:
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    R = _rotation(axis, rng.uniform(0, math.pi))
    t = rng.uniform(-5.0, 5.0, size=3)
    return RigidTransform(R, t)


def _tilted_normal(gamma: float, phi: float) -> np.ndarray:
    """Unit normal at angle gamma from -z, azimuth phi."""
    return np.array([math.sin(gamma) * math.cos(phi),
                     math.sin(gamma) * math.sin(phi),
                     -math.cos(gamma)])


def _plane_basis(n: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    a = np.array([0.0, 1.0, 0.0]) if abs(n[0]) > 0.9 else np.array([1.0, 0.0, 0.0])
    e1 = np.cross(a, n)
    e1 /= np.linalg.norm(e1)
    return e1, np.cross(n, e1)


def _project(K: CameraIntrinsics, pts: np.ndarray) -> np.ndarray:
    """(N, 3) camera points -> (N, 2) continuous image coordinates."""
    return np.stack([K.fx * pts[:, 0] / pts[:, 2] + K.cx,
                     K.fy * pts[:, 1] / pts[:, 2] + K.cy], axis=1)


def _rasterize_quad(K: CameraIntrinsics, poly: np.ndarray) -> np.ndarray:
    """Boolean mask of pixels whose center lies inside a convex quad."""
    mask = np.zeros((K.height, K.width), dtype=bool)
    x0 = max(int(math.floor(poly[:, 0].min())), 0)
    x1 = min(int(math.ceil(poly[:, 0].max())), K.width - 1)
    y0 = max(int(math.floor(poly[:, 1].min())), 0)
    y1 = min(int(math.ceil(poly[:, 1].max())), K.height - 1)
    if x1 < x0 or y1 < y0:
        return mask
    # ensure counter-clockwise winding (image coords)
    area = 0.0
    for i in range(4):
        a, b = poly[i], poly[(i + 1) % 4]
        area += a[0] * b[1] - b[0] * a[1]
    if area < 0:
        poly = poly[::-1]
    xs = np.arange(x0, x1 + 1, dtype=np.float64) + 0.5
    ys = np.arange(y0, y1 + 1, dtype=np.float64) + 0.5
    px, py = np.meshgrid(xs, ys)
    inside = np.ones(px.shape, dtype=bool)
    for i in range(4):
        a, b = poly[i], poly[(i + 1) % 4]
        inside &= (b[0] - a[0]) * (py - a[1]) - (b[1] - a[1]) * (px - a[0]) >= 0
    mask[y0:y1 + 1, x0:x1 + 1] = inside
    return mask


def _ray(K: CameraIntrinsics, u: float, v: float) -> np.ndarray:
    return np.array([(u - K.cx) / K.fx, (v - K.cy) / K.fy, 1.0])


def _corners(center: np.ndarray, n: np.ndarray, h1: float, h2: float) -> np.ndarray:
    e1, e2 = _plane_basis(n)
    return np.array([center + h1 * e1 + h2 * e2,
                     center - h1 * e1 + h2 * e2,
                     center - h1 * e1 - h2 * e2,
                     center + h1 * e1 - h2 * e2])


def _grid_anchors(rng, K: CameraIntrinsics, count: int) -> list[tuple[float, float]]:
    """Up to 12 jittered anchor pixels on a 4x3 grid (keeps rects disjoint)."""
    cols, rows = 4, 3
    cells = [(i, j) for j in range(rows) for i in range(cols)]
    order = rng.permutation(len(cells))[:count]
    anchors = []
    for k in order:
        ci, cj = cells[int(k)]
        u = K.width * (0.10 + 0.80 * (ci + 0.5) / cols + rng.uniform(-0.015, 0.015))
        v = K.height * (0.10 + 0.80 * (cj + 0.5) / rows + rng.uniform(-0.015, 0.015))
        anchors.append((u, v))
    return anchors


def _sample_normals(rng, spec: SceneSpec) -> list[np.ndarray]:
    n_inst = spec.plane_count
    if spec.category == "coplanar":
        n = _tilted_normal(rng.uniform(0.0, math.radians(30)), rng.uniform(0, 2 * math.pi))
        return [n] * n_inst
    if spec.category == "multi_angle":
        if n_inst == 1:
            return [_tilted_normal(rng.uniform(0.0, math.radians(30)),
                                   rng.uniform(0, 2 * math.pi))]
        for _ in range(MAX_ATTEMPTS):
            base_g = rng.uniform(0.0, math.radians(15))
            base_phi = rng.uniform(0, 2 * math.pi)
            base = _tilted_normal(base_g, base_phi)
            e1, e2 = _plane_basis(base)
            normals = []
            for _ in range(n_inst):
                alpha = rng.uniform(math.radians(1.5), math.radians(7.4))
                psi = rng.uniform(0, 2 * math.pi)
                tilt_axis = math.cos(psi) * e1 + math.sin(psi) * e2
                n = _rotation(tilt_axis, alpha) @ base
                normals.append(n / np.linalg.norm(n))
            ok = True
            for i in range(n_inst):
                for j in range(i + 1, n_inst):
                    ang = math.acos(min(1.0, max(-1.0, float(normals[i] @ normals[j]))))
                    if not math.radians(2.0) <= ang <= math.radians(15.0):
                        ok = False
            if ok:
                return normals
        raise GenerationFailed(
            f"could not satisfy pairwise normal angles for {n_inst} instances")
    # multi_occluded: mild independent tilts
    return [_tilted_normal(rng.uniform(0.0, math.radians(20)),
                           rng.uniform(0, 2 * math.pi))
            for _ in range(n_inst)]


def generate_scene(spec: SceneSpec, with_centerness: bool = True) -> SyntheticScene:
    """Build a fully-determined synthetic scene from a spec (seeded)."""
    rng = np.random.default_rng(spec.seed)
    K = spec.intrinsics
    z_min, z_max = spec.depth_range
    # interior sampling band; tilt can push pixel depths beyond the center depth
    z_lo = z_min + 0.25 * (z_max - z_min)
    z_hi = z_min + 0.70 * (z_max - z_min)
    last_error = "no attempts"
    for _ in range(MAX_ATTEMPTS):
        pose = _random_pose(rng)
        normals = _sample_normals(rng, spec)
        scene = _attempt_scene(rng, spec, K, pose, normals, z_lo, z_hi)
        if isinstance(scene, str):
            last_error = scene
            continue
        if with_centerness:
            scene.centerness = centerness_map(scene.masks)
        return scene
    raise GenerationFailed(f"scene generation failed after {MAX_ATTEMPTS} attempts: {last_error}")


def _attempt_scene(rng, spec, K, pose, normals, z_lo, z_hi):
    """One rejection-sampling attempt; returns a scene or a failure reason."""
    n_inst = spec.plane_count
    occluded = spec.category == "multi_occluded"
    if occluded and n_inst < 2:
        raise GenerationFailed("multi_occluded needs at least 2 planes")

    rect_cam = []
    if occluded:
        # stack rectangles around one image anchor at distinct depths
        u0 = K.width * rng.uniform(0.35, 0.65)
        v0 = K.height * rng.uniform(0.35, 0.65)
        depths = np.sort(rng.uniform(z_lo, z_hi, size=n_inst))
        if np.min(np.diff(depths)) < 1e-3 * (z_hi - z_lo):
            return "occluded depths not distinct"
        for i, n in enumerate(normals):
            du = rng.uniform(-0.04, 0.04) * K.width
            dv = rng.uniform(-0.04, 0.04) * K.height
            center = float(depths[i]) * _ray(K, u0 + du, v0 + dv)
            h = center[2] * rng.uniform(0.10, 0.18)
            rect_cam.append(_corners(center, n, h, h * rng.uniform(0.7, 1.3)))
    elif spec.category == "coplanar":
        anchors = _grid_anchors(rng, K, n_inst)
        z0 = math.exp(rng.uniform(math.log(z_lo), math.log(z_hi)))
        n0 = normals[0]
        c0 = z0 * _ray(K, K.width / 2.0, K.height / 2.0)
        d0 = -float(n0 @ c0)
        for (u, v) in anchors:
            r = _ray(K, u, v)
            t = -d0 / float(n0 @ r)
            if t <= 0.05:
                return "shared plane behind an anchor ray"
            center = t * r
            h = t * min(K.width / K.fx, K.height / K.fy) * rng.uniform(0.035, 0.055)
            rect_cam.append(_corners(center, n0, h, h * rng.uniform(0.7, 1.3)))
    else:
        anchors = _grid_anchors(rng, K, n_inst)
        for (u, v), n in zip(anchors, normals):
            z0 = math.exp(rng.uniform(math.log(z_lo), math.log(z_hi)))
            center = z0 * _ray(K, u, v)
            h = z0 * min(K.width / K.fx, K.height / K.fy) * rng.uniform(0.035, 0.055)
            rect_cam.append(_corners(center, n, h, h * rng.uniform(0.7, 1.3)))
    for corners in rect_cam:
        if corners[:, 2].min() <= 0.05:
            return "rectangle too close to the camera"

    # world corners are the stored ground truth; everything downstream is
    # recomputed from them through the shared annotate code path
    inv = pose.inverse()
    instances = []
    per_masks, per_depth = [], []
    rays = pixel_center_rays(K)
    for corners in rect_cam:
        corners_world = transform_points(inv, corners)
        p_cam = transform_points(pose, corners_world)
        plane = fit_plane_lsq(p_cam)
        poly = _project(K, p_cam)
        m = _rasterize_quad(K, poly)
        if np.count_nonzero(m) < MIN_VISIBLE_PIXELS:
            return "instance projection too small"
        denom = rays[..., 0] * plane.n[0] + rays[..., 1] * plane.n[1] + rays[..., 2] * plane.n[2]
        with np.errstate(divide="ignore"):
            d_full = -plane.d / denom
        instances.append(GlassInstance(corners_world=corners_world, plane=plane))
        per_masks.append(m)
        per_depth.append(d_full)

    masks = np.zeros((K.height, K.width), dtype=np.int32)
    if occluded:
        stack = np.where(np.stack(per_masks), np.stack(per_depth), np.inf)
        best = np.argmin(stack, axis=0)
        covered = np.isfinite(stack.min(axis=0))
        masks[covered] = best[covered] + 1
        overlap = np.stack(per_masks).sum(axis=0) >= 2
        if not np.any(overlap):
            return "no overlapping projections"
    else:
        for i, m in enumerate(per_masks, start=1):
            if np.any(masks[m] != 0):
                return "projections overlap"
            masks[m] = i
    for i in range(1, len(instances) + 1):
        if np.count_nonzero(masks == i) < MIN_VISIBLE_PIXELS:
            return "instance fully occluded"

    depth = render_depth(masks, [inst.plane for inst in instances], K)
    nz = depth[depth > 0]
    if nz.min() < spec.depth_range[0] or nz.max() > spec.depth_range[1]:
        return "rendered depth outside the requested range"
    return SyntheticScene(spec=spec, intrinsics=K, pose=pose, instances=instances,
                          masks=masks, depth=depth,
                          centerness=np.zeros((K.height, K.width)))


def scene_round_trip(scene: SyntheticScene, depth: np.ndarray | None = None) -> RoundTripReport:
    """Re-fit each instance plane from rendered depth; report residuals.

    Exact scenes give residuals < 1e-6 through the strict lsq fit; a
    perturbed/quantized depth override is re-fit with the noise-tolerant
    SVD fit to measure error propagation instead.
    """
    fit_fn = fit_plane_lsq if depth is None else fit_plane_svd
    depth = scene.depth if depth is None else np.asarray(depth, dtype=np.float64)
    rays = pixel_center_rays(scene.intrinsics)
    ang, inter = [], []
    for i, inst in enumerate(scene.instances, start=1):
        sel = scene.masks == i
        pts = depth[sel][:, None] * rays[sel]
        fit = fit_fn(pts)
        cosang = min(1.0, max(-1.0, float(fit.n @ inst.plane.n)))
        ang.append(math.acos(cosang))
        inter.append(abs(fit.d - inst.plane.d))
    return RoundTripReport(angular_errors=ang, intercept_errors=inter)
