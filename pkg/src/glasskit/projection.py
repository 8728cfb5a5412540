"""Pinhole geometry: pixel rays, ray-plane depth and dense depth rendering.

The printed projection formula depth = d / (n^T K^-1 u) yields negative
depths under this toolkit's conventions (least-squares fits give d > 0 and
front-facing normals give n . ray < 0), so the implemented form carries the
required minus sign: depth = -d / (n . ray).

Pixel-center convention: integer pixel (x, y) samples the continuous image
coordinate (x + 0.5, y + 0.5); pixel_ray itself takes continuous coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import PlaneBehindCamera, RayParallelToPlane, ShapeError
from .plane import Plane

PARALLEL_TOL = 1e-9


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValueError("principal point outside image")


def pixel_ray(K: CameraIntrinsics, u) -> np.ndarray:
    """Ray ((u_x - cx)/fx, (u_y - cy)/fy, 1) for continuous pixel coords.

    Accepts a single (u_x, u_y) pair or an (N, 2) array; z-component is
    exactly 1.
    """
    u = np.asarray(u, dtype=np.float64)
    x = (u[..., 0] - K.cx) / K.fx
    y = (u[..., 1] - K.cy) / K.fy
    return np.stack([x, y, np.ones_like(x)], axis=-1)


def plane_depth_at_pixel(p: Plane, K: CameraIntrinsics, u) -> float:
    """Depth (z-coordinate) of the ray-plane intersection at pixel u."""
    r = pixel_ray(K, u)
    denom = float(r @ p.n)
    if abs(denom) < PARALLEL_TOL:
        raise RayParallelToPlane(f"|n . ray| = {abs(denom):.3e} at pixel {tuple(np.asarray(u))}")
    depth = -p.d / denom
    if depth <= 0:
        raise PlaneBehindCamera(f"depth {depth:.4f} <= 0 at pixel {tuple(np.asarray(u))}")
    return depth


def backproject(p: Plane, K: CameraIntrinsics, u) -> np.ndarray:
    """3D point depth * ray on the plane; satisfies n . v + d = 0."""
    return plane_depth_at_pixel(p, K, u) * pixel_ray(K, u)


def pixel_center_rays(K: CameraIntrinsics) -> np.ndarray:
    """(H, W, 3) rays through every pixel center (x + 0.5, y + 0.5)."""
    xs = (np.arange(K.width, dtype=np.float64) + 0.5 - K.cx) / K.fx
    ys = (np.arange(K.height, dtype=np.float64) + 0.5 - K.cy) / K.fy
    rx, ry = np.meshgrid(xs, ys)
    return np.stack([rx, ry, np.ones_like(rx)], axis=-1)


def validate_masks(masks: np.ndarray) -> int:
    """Check instance labels form a contiguous 1..N range; return N."""
    masks = np.asarray(masks)
    if masks.ndim != 2:
        raise ShapeError(f"mask grid must be 2D, got {masks.shape}")
    labels = np.unique(masks)
    labels = labels[labels != 0]
    n = len(labels)
    if n and (labels.min() != 1 or labels.max() != n):
        raise ValueError(f"instance labels not contiguous 1..N: {labels.tolist()}")
    return n


def render_depth(masks: np.ndarray, planes: list[Plane], K: CameraIntrinsics) -> np.ndarray:
    """Dense depth map: plane depth at every labeled pixel, 0 on background.

    Raises RayParallelToPlane / PlaneBehindCamera naming the instance and a
    offending pixel when any mask pixel cannot be projected (annotation
    inconsistency signal).
    """
    masks = np.asarray(masks)
    n = validate_masks(masks)
    if masks.shape != (K.height, K.width):
        raise ShapeError(f"mask shape {masks.shape} != image {(K.height, K.width)}")
    if len(planes) != n:
        raise ValueError(f"{len(planes)} planes for {n} instances")
    rays = pixel_center_rays(K)
    depth = np.zeros((K.height, K.width), dtype=np.float64)
    for i, plane in enumerate(planes, start=1):
        sel = masks == i
        if not np.any(sel):
            continue
        denom = rays[sel] @ plane.n
        bad = np.abs(denom) < PARALLEL_TOL
        if np.any(bad):
            y, x = _first_bad_pixel(sel, bad)
            raise RayParallelToPlane(f"instance {i}, pixel ({x}, {y})")
        vals = -plane.d / denom
        neg = vals <= 0
        if np.any(neg):
            y, x = _first_bad_pixel(sel, neg)
            raise PlaneBehindCamera(f"instance {i}, pixel ({x}, {y})")
        depth[sel] = vals
    return depth


def _first_bad_pixel(sel: np.ndarray, bad_within_sel: np.ndarray) -> tuple[int, int]:
    ys, xs = np.nonzero(sel)
    k = int(np.flatnonzero(bad_within_sel)[0])
    return int(ys[k]), int(xs[k])
