"""Training-loss stack: head activations, plane losses, segmentation loss,
instance-normalized aggregation, stage weighting, and analytic gradients.

Plane distance loss: backproject the pixel onto the predicted plane, take
four points at distance delta from it along an in-plane orthonormal basis,
and sum the unsigned distances from those points to the ground-truth plane.
Zero iff the two planes coincide.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import RayParallelToPlane, ShapeError, SingularConfiguration
from .plane import Plane, PolarPlane, from_polar
from .projection import CameraIntrinsics, pixel_ray

BCE_EPS = 1e-7
PARALLEL_TOL = 1e-9
GRAD_SMOOTH_MU = 1e-9  # |x| -> sqrt(x^2 + mu^2) - mu, gradients only
DEFAULT_DELTA = 1.0    # meters; offset of the four sample points

PLANE_STAGE_WEIGHTS = (0.1, 0.1, 0.2, 0.6)
SEG_STAGE_WEIGHTS = (0.1, 0.1, 0.2, 0.6)
CENTERNESS_STAGE_WEIGHTS = (0.2, 0.3, 0.5)

_AXIS_X = np.array([1.0, 0.0, 0.0])
_AXIS_Y = np.array([0.0, 1.0, 0.0])


def head_activation(a1: float, a2: float, b: float) -> tuple[float, float, float]:
    """Raw head outputs -> (theta1, theta2, d): tanh scaled by pi/2, d by 5."""
    half_pi = np.pi / 2
    return float(half_pi * np.tanh(a1)), float(half_pi * np.tanh(a2)), float(5.0 * b)


def in_plane_basis(n: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic orthonormal (e1, e2) spanning the plane with normal n.

    e1 = normalize(a x n) with a = x-axis, falling back to the y-axis when
    |n_x| > 0.9; e2 = n x e1. Total for unit normals.
    """
    a = _AXIS_Y if abs(n[0]) > 0.9 else _AXIS_X
    w = np.cross(a, n)
    e1 = w / np.linalg.norm(w)
    return e1, np.cross(n, e1)


def plane_param_loss(pred, gt, weights=(1.0, 1.0, 1.0)) -> float:
    """Plain L1 on (theta1, theta2, d) triples (radians + meters summed)."""
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    return float(np.sum(np.asarray(weights) * np.abs(pred - gt)))


def plane_distance_loss(pred: PolarPlane, gt: Plane, K: CameraIntrinsics, u,
                        delta: float = DEFAULT_DELTA) -> float:
    """Sum of unsigned distances from four predicted-plane points to gt.

    The pixel is backprojected onto the predicted plane; negative-depth
    intersections are still accepted (the points stay on the predicted
    plane), only a near-parallel ray is an error.
    """
    n_p = from_polar(pred.theta1, pred.theta2)
    r = pixel_ray(K, u)
    denom = float(r @ n_p)
    if abs(denom) < PARALLEL_TOL:
        raise RayParallelToPlane(f"|n . ray| = {abs(denom):.3e}")
    p = (-pred.d / denom) * r
    e1, e2 = in_plane_basis(n_p)
    loss = 0.0
    for q in (p + delta * e1, p - delta * e1, p + delta * e2, p - delta * e2):
        loss += abs(float(gt.n @ q) + gt.d)
    return loss


def plane_loss_pixel(pred, gt, K: CameraIntrinsics, u,
                     delta: float = DEFAULT_DELTA) -> float:
    """Per-pixel plane loss: parameter L1 + plane distance loss.

    pred and gt are (theta1, theta2, d) triples.
    """
    gt_plane = Plane(from_polar(gt[0], gt[1]), gt[2])
    return plane_param_loss(pred, gt) + plane_distance_loss(
        PolarPlane(*pred), gt_plane, K, u, delta)


@dataclass
class InstanceLossReport:
    """Instance-normalized plane-loss aggregate (per-instance means)."""

    pixel_counts: list[int]
    instance_means: list[float]
    instance_count: int
    aggregate: float
    skipped_pixels: int = 0


def plane_loss_aggregate(pixel_losses: np.ndarray, masks: np.ndarray) -> InstanceLossReport:
    """Average pixel losses per instance, then across instances.

    L = (1/N) sum_i (1/M_i) sum_j L_(i,j); a frame with no instances
    aggregates to 0.
    """
    pixel_losses = np.asarray(pixel_losses, dtype=np.float64)
    masks = np.asarray(masks)
    if pixel_losses.shape != masks.shape:
        raise ShapeError(f"{pixel_losses.shape} != {masks.shape}")
    n = int(masks.max())
    counts, means = [], []
    for i in range(1, n + 1):
        sel = masks == i
        m = int(np.count_nonzero(sel))
        counts.append(m)
        means.append(float(pixel_losses[sel].mean()) if m else 0.0)
    agg = float(np.mean(means)) if n else 0.0
    return InstanceLossReport(counts, means, n, agg)


def seg_loss(pred: np.ndarray, gt: np.ndarray) -> float:
    """Composite segmentation loss 0.5 * BCE + soft-IoU.

    Soft IoU loss is 1 - sum(p g) / sum(p + g - p g); an empty union
    (all-background gt, all-zero pred) counts as 0.
    """
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if pred.shape != gt.shape:
        raise ShapeError(f"{pred.shape} != {gt.shape}")
    p = np.clip(pred, BCE_EPS, 1.0 - BCE_EPS)
    bce = float(np.mean(-(gt * np.log(p) + (1.0 - gt) * np.log(1.0 - p))))
    inter = float(np.sum(pred * gt))
    union = float(np.sum(pred + gt - pred * gt))
    iou_loss = 0.0 if union == 0.0 else 1.0 - inter / union
    return 0.5 * bce + iou_loss


def total_loss(l_c: float, l_s: float, l_p: float) -> float:
    """Total supervision loss: centerness + segmentation + plane."""
    return l_c + l_s + l_p


def stage_weighted(plane_stages, seg_stages, centerness_stages) -> tuple[float, float, float]:
    """Stage-weighted (L_p, L_s, L_c): 0.1/0.1/0.2/0.6 for plane and
    segmentation stages, 0.2/0.3/0.5 for the three centerness stages."""
    if len(plane_stages) != 4 or len(seg_stages) != 4 or len(centerness_stages) != 3:
        raise ShapeError("expected 4 plane, 4 seg and 3 centerness stage losses")
    l_p = float(np.dot(PLANE_STAGE_WEIGHTS, plane_stages))
    l_s = float(np.dot(SEG_STAGE_WEIGHTS, seg_stages))
    l_c = float(np.dot(CENTERNESS_STAGE_WEIGHTS, centerness_stages))
    return l_p, l_s, l_c


def plane_loss_map(pred_params: np.ndarray, gt_params, masks: np.ndarray,
                   K: CameraIntrinsics, delta: float = DEFAULT_DELTA
                   ) -> tuple[np.ndarray, InstanceLossReport]:
    """Vectorized plane_loss_pixel over a frame.

    pred_params: (3, H, W) per-pixel (theta1, theta2, d) predictions;
    gt_params: per-instance (theta1, theta2, d) triples; masks: instance
    labels. Pixels whose predicted plane is parallel to their ray are
    skipped and counted in the report. Returns the per-pixel loss grid and
    the Eq-style instance-normalized aggregate.
    """
    pred_params = np.asarray(pred_params, dtype=np.float64)
    masks = np.asarray(masks)
    if pred_params.shape != (3,) + masks.shape:
        raise ShapeError(f"params {pred_params.shape} vs masks {masks.shape}")
    h, w = masks.shape
    n_inst = int(masks.max())
    if len(gt_params) != n_inst:
        raise ValueError(f"{len(gt_params)} gt planes for {n_inst} instances")
    xs = (np.arange(w, dtype=np.float64) + 0.5 - K.cx) / K.fx
    ys = (np.arange(h, dtype=np.float64) + 0.5 - K.cy) / K.fy
    rx, ry = np.meshgrid(xs, ys)

    losses = np.zeros((h, w))
    counts, means, skipped = [], [], 0
    for i in range(1, n_inst + 1):
        sel = masks == i
        m = int(np.count_nonzero(sel))
        counts.append(m)
        if m == 0:
            means.append(0.0)
            continue
        gt_t1, gt_t2, gt_d = (float(v) for v in gt_params[i - 1])
        n_g = from_polar(gt_t1, gt_t2)
        t1 = pred_params[0][sel]
        t2 = pred_params[1][sel]
        d = pred_params[2][sel]
        c1, s1, c2, s2 = np.cos(t1), np.sin(t1), np.cos(t2), np.sin(t2)
        n_p = np.stack([c1 * s2, s1, -c1 * c2], axis=1)  # (m, 3)
        rays = np.stack([rx[sel], ry[sel], np.ones(m)], axis=1)
        denom = np.einsum("ij,ij->i", n_p, rays)
        ok = np.abs(denom) >= PARALLEL_TOL
        skipped += int(np.count_nonzero(~ok))
        p = (-d / np.where(ok, denom, 1.0))[:, None] * rays
        a = np.where(np.abs(n_p[:, 0]) > 0.9, 1, 0)  # 1 -> y-axis fallback
        axes = np.where(a[:, None].astype(bool), _AXIS_Y, _AXIS_X)
        wvec = np.cross(axes, n_p)
        e1 = wvec / np.linalg.norm(wvec, axis=1, keepdims=True)
        e2 = np.cross(n_p, e1)
        dist = np.zeros(m)
        for sign, e in ((1, e1), (-1, e1), (1, e2), (-1, e2)):
            dist += np.abs((p + sign * delta * e) @ n_g + gt_d)
        param = np.abs(t1 - gt_t1) + np.abs(t2 - gt_t2) + np.abs(d - gt_d)
        pix = np.where(ok, param + dist, 0.0)
        grid = np.zeros((h, w))
        grid[sel] = pix
        losses += grid
        n_valid = int(np.count_nonzero(ok))
        means.append(float(pix[ok].mean()) if n_valid else 0.0)
    agg = float(np.mean(means)) if n_inst else 0.0
    report = InstanceLossReport(counts, means, n_inst, agg, skipped)
    return losses, report


def _smooth_abs_grad(x: float, mu: float = GRAD_SMOOTH_MU) -> float:
    return x / np.sqrt(x * x + mu * mu)


def grad_plane_loss(pred, gt, K: CameraIntrinsics, u,
                    delta: float = DEFAULT_DELTA) -> np.ndarray:
    """Analytic gradient of plane_loss_pixel w.r.t. pred = (theta1, theta2, d).

    Kinks of |.| are handled by the smooth replacement sqrt(x^2 + mu^2) - mu
    inside the gradient only; loss evaluation stays exact.
    """
    t1, t2, d = float(pred[0]), float(pred[1]), float(pred[2])
    gt = np.asarray(gt, dtype=np.float64)
    gt_plane = Plane(from_polar(gt[0], gt[1]), gt[2])
    c1, s1, c2, s2 = np.cos(t1), np.sin(t1), np.cos(t2), np.sin(t2)
    n = np.array([c1 * s2, s1, -c1 * c2])
    dn = [
        np.array([-s1 * s2, c1, s1 * c2]),   # d n / d theta1
        np.array([c1 * c2, 0.0, c1 * s2]),   # d n / d theta2
        np.zeros(3),
    ]
    r = pixel_ray(K, u)
    denom = float(r @ n)
    if abs(denom) < PARALLEL_TOL:
        raise SingularConfiguration("predicted plane parallel to pixel ray")

    t = -d / denom
    dt = [d * float(dn[0] @ r) / denom**2,
          d * float(dn[1] @ r) / denom**2,
          -1.0 / denom]
    p = t * r
    dp = [dt[k] * r for k in range(3)]

    a = _AXIS_Y if abs(n[0]) > 0.9 else _AXIS_X
    w = np.cross(a, n)
    wn = np.linalg.norm(w)
    e1 = w / wn
    e2 = np.cross(n, e1)
    de1, de2 = [], []
    for k in range(3):
        dw = np.cross(a, dn[k])
        d_e1 = (dw - e1 * float(e1 @ dw)) / wn
        de1.append(d_e1)
        de2.append(np.cross(dn[k], e1) + np.cross(n, d_e1))

    grad = np.zeros(3)
    for sign, e, de in ((1, e1, de1), (-1, e1, de1), (1, e2, de2), (-1, e2, de2)):
        q = p + sign * delta * e
        val = float(gt_plane.n @ q) + gt_plane.d
        g = _smooth_abs_grad(val)
        for k in range(3):
            grad[k] += g * float(gt_plane.n @ (dp[k] + sign * delta * de[k]))

    for k in range(3):  # parameter L1 term
        grad[k] += _smooth_abs_grad(float(pred[k]) - gt[k])
    return grad
