import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from glasskit.errors import ShapeError
from glasskit.losses import (
    CENTERNESS_STAGE_WEIGHTS,
    PLANE_STAGE_WEIGHTS,
    grad_plane_loss,
    head_activation,
    in_plane_basis,
    plane_distance_loss,
    plane_loss_aggregate,
    plane_loss_map,
    plane_loss_pixel,
    plane_param_loss,
    seg_loss,
    stage_weighted,
    total_loss,
)
from glasskit.plane import Plane, PolarPlane, from_polar, to_polar
from glasskit.projection import CameraIntrinsics


def random_pred_gt(rng, max_offset=0.3):
    gt = (rng.uniform(-0.6, 0.6), rng.uniform(-0.6, 0.6), rng.uniform(0.5, 5.0))
    pred = tuple(np.array(gt) + rng.normal(scale=max_offset, size=3))
    pred = (float(np.clip(pred[0], -1.5, 1.5)), float(np.clip(pred[1], -1.5, 1.5)),
            float(pred[2]))
    return pred, gt


class TestHeadActivation:
    def test_zero(self):
        assert head_activation(0, 0, 0) == (0.0, 0.0, 0.0)

    def test_saturation(self):
        t1, _, _ = head_activation(50.0, 0, 0)
        assert t1 == pytest.approx(math.pi / 2, abs=1e-12)

    def test_derived_values(self):
        t1, t2, d = head_activation(0.5, 0.0, 0.2)
        assert t1 == pytest.approx(math.pi / 2 * math.tanh(0.5), abs=1e-15)
        assert t1 == pytest.approx(0.72589, abs=1e-5)
        assert t2 == 0.0 and d == pytest.approx(1.0)


class TestPlaneDistanceLoss:
    def test_exact_match_zero(self, intr):
        rng = np.random.default_rng(0)
        for _ in range(50):
            t1, t2, d = rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5), rng.uniform(0.5, 5)
            pred = PolarPlane(t1, t2, d)
            gt = Plane(from_polar(t1, t2), d)
            u = rng.uniform(0, [intr.width, intr.height])
            delta = rng.uniform(0.1, 3.0)
            assert plane_distance_loss(pred, gt, intr, u, delta) < 1e-12

    def test_parallel_offset(self, intr):
        # same normal, intercepts differ by 0.7 -> every point at offset 0.7
        n = from_polar(0.2, -0.3)
        pred = PolarPlane(0.2, -0.3, 2.0)
        gt = Plane(n, 2.7)
        loss = plane_distance_loss(pred, gt, intr, (100.0, 50.0), delta=1.0)
        assert loss == pytest.approx(4 * 0.7, abs=1e-12)

    def test_one_degree_tilt(self, intr):
        # gt z = 2; pred tilted 1 degree about the y axis through p = (0, 0, 2)
        gt = Plane(np.array([0.0, 0.0, -1.0]), 2.0)
        a = math.radians(1.0)
        n_pred = np.array([math.sin(a), 0.0, -math.cos(a)])
        d_pred = -float(n_pred @ np.array([0.0, 0.0, 2.0]))
        t1, t2 = to_polar(n_pred)
        loss = plane_distance_loss(PolarPlane(t1, t2, d_pred), gt, intr,
                                   (intr.cx, intr.cy), delta=1.0)
        assert loss == pytest.approx(2 * math.sin(a), abs=1e-12)
        assert loss == pytest.approx(0.034905, abs=1e-6)

    def test_nonnegative_and_zero_iff_same(self, intr):
        rng = np.random.default_rng(2)
        for _ in range(300):
            pred, gt = random_pred_gt(rng)
            gt_plane = Plane(from_polar(gt[0], gt[1]), gt[2])
            u = rng.uniform([0, 0], [intr.width, intr.height])
            loss = plane_distance_loss(PolarPlane(*pred), gt_plane, intr, u)
            assert loss >= 0.0
            same = np.allclose(pred, gt, atol=0)
            if not same:
                assert loss > 0.0 or plane_param_loss(pred, gt) == 0.0

    def test_basis_rotation_invariance_parallel_case(self, intr):
        # for parallel planes the loss is 4|offset| for any in-plane basis angle
        n = from_polar(0.3, 0.1)
        pred = PolarPlane(0.3, 0.1, 1.5)
        gt = Plane(n, 2.0)
        u = (200.0, 100.0)
        base = plane_distance_loss(pred, gt, intr, u, delta=1.0)
        e1, e2 = in_plane_basis(n)
        denom = float(np.append(pixel := ((200.0 - intr.cx) / intr.fx,
                                          (100.0 - intr.cy) / intr.fy), 1.0) @ n)
        p = (-1.5 / denom) * np.array([pixel[0], pixel[1], 1.0])
        for phi in np.linspace(0, 2 * math.pi, 13):
            f1 = math.cos(phi) * e1 + math.sin(phi) * e2
            f2 = -math.sin(phi) * e1 + math.cos(phi) * e2
            loss = sum(abs(float(gt.n @ q) + gt.d)
                       for q in (p + f1, p - f1, p + f2, p - f2))
            assert loss == pytest.approx(base, abs=1e-12)


class TestPlaneParamLoss:
    def test_identical(self):
        assert plane_param_loss((0.1, 0.2, 3.0), (0.1, 0.2, 3.0)) == 0.0

    def test_intercept_only(self):
        assert plane_param_loss((0, 0, 2.0), (0, 0, 3.0)) == 1.0

    def test_mixed(self):
        assert plane_param_loss((0.1, -0.2, 2.0), (0.0, 0.0, 2.5)) == pytest.approx(0.8)

    def test_channel_weights(self):
        assert plane_param_loss((1, 1, 1), (0, 0, 0), weights=(2, 0, 1)) == 3.0


class TestPlaneLossPixel:
    def test_exact_match(self, intr):
        gt = (0.2, -0.1, 2.5)
        assert plane_loss_pixel(gt, gt, intr, (intr.cx, intr.cy)) < 1e-12

    def test_parallel_offset_composition(self, intr):
        gt = (0.0, 0.0, 2.0)
        pred = (0.0, 0.0, 2.5)
        loss = plane_loss_pixel(pred, gt, intr, (intr.cx, intr.cy), delta=1.0)
        assert loss == pytest.approx(0.5 + 4 * 0.5, abs=1e-12)


class TestAggregate:
    def test_uniform_single_instance(self):
        masks = np.zeros((4, 4), np.int32)
        masks[1:3, 1:3] = 1
        losses = np.where(masks == 1, 3.25, 0.0)
        rep = plane_loss_aggregate(losses, masks)
        assert rep.aggregate == pytest.approx(3.25) and rep.instance_count == 1

    def test_instance_normalization(self):
        masks = np.zeros((2, 8), np.int32)
        masks[0, :5] = 1
        masks[1, :2] = 2
        losses = np.where(masks == 1, 1.0, 0.0) + np.where(masks == 2, 3.0, 0.0)
        assert plane_loss_aggregate(losses, masks).aggregate == pytest.approx(2.0)

    def test_size_invariance_demo(self):
        # sizes 1 and 1000 with per-pixel losses 5 and 0.1
        masks = np.zeros((1, 1001), np.int32)
        masks[0, 0] = 1
        masks[0, 1:] = 2
        losses = np.where(masks == 1, 5.0, 0.0) + np.where(masks == 2, 0.1, 0.0)
        rep = plane_loss_aggregate(losses, masks)
        assert rep.aggregate == pytest.approx(2.55, abs=1e-12)
        naive = losses[masks > 0].mean()
        assert naive == pytest.approx(0.1049, abs=1e-3)

    def test_no_glass_frame(self):
        rep = plane_loss_aggregate(np.zeros((4, 4)), np.zeros((4, 4), np.int32))
        assert rep.aggregate == 0.0 and rep.instance_count == 0

    def test_duplicate_pixels_invariant(self):
        rng = np.random.default_rng(4)
        masks = np.zeros((6, 6), np.int32)
        masks[1:4, 1:5] = 1
        masks[5, :3] = 2
        losses = rng.uniform(0, 2, size=(6, 6)) * (masks > 0)
        base = plane_loss_aggregate(losses, masks).aggregate
        up_m = np.kron(masks, np.ones((2, 2), np.int32))
        up_l = np.kron(losses, np.ones((2, 2)))
        assert abs(plane_loss_aggregate(up_l, up_m).aggregate - base) < 1e-12

    def test_report_consistent_with_means(self):
        masks = np.zeros((3, 3), np.int32)
        masks[0] = 1
        masks[2] = 2
        losses = np.where(masks == 1, 2.0, 0.0) + np.where(masks == 2, 4.0, 0.0)
        rep = plane_loss_aggregate(losses, masks)
        recomputed = sum(rep.instance_means) / rep.instance_count
        assert abs(rep.aggregate - recomputed) < 1e-12


class TestSegLoss:
    def test_exact_match_near_zero(self):
        gt = np.zeros((6, 6))
        gt[2:4, 2:4] = 1.0
        assert seg_loss(gt, gt) <= 1e-6

    def test_half_prediction_closed_form(self):
        gt = np.array([[0.0, 1.0]])
        pred = np.full((1, 2), 0.5)
        bce = math.log(2)
        inter = 0.5
        union = (0.5 + 0 - 0) + (0.5 + 1 - 0.5)
        expect = 0.5 * bce + (1 - inter / union)
        assert seg_loss(pred, gt) == pytest.approx(expect, abs=1e-12)

    def test_complement_worst_direction(self):
        gt = np.zeros((4, 4))
        gt[:2] = 1.0
        loss = seg_loss(1.0 - gt, gt)
        assert loss > 1.0

    def test_empty_union_convention(self):
        assert seg_loss(np.zeros((3, 3)), np.zeros((3, 3))) <= 1e-6

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            seg_loss(np.ones((2, 2)), np.ones((3, 3)))


class TestTotalAndStageWeights:
    def test_total(self):
        assert total_loss(0, 0, 0) == 0
        assert total_loss(1, 2, 3) == 6

    def test_weights_exact(self):
        assert PLANE_STAGE_WEIGHTS == (0.1, 0.1, 0.2, 0.6)
        assert CENTERNESS_STAGE_WEIGHTS == (0.2, 0.3, 0.5)

    def test_uniform_stages_identity(self):
        c = 0.73
        l_p, l_s, l_c = stage_weighted([c] * 4, [c] * 4, [c] * 3)
        assert abs(l_p - c) < 1e-15 and abs(l_s - c) < 1e-15 and abs(l_c - c) < 1e-15

    def test_single_stage(self):
        l_p, _, _ = stage_weighted([0, 0, 0, 1.0], [0] * 4, [0] * 3)
        assert l_p == pytest.approx(0.6)
        _, _, l_c = stage_weighted([0] * 4, [0] * 4, [1.0, 1.0, 0])
        assert l_c == pytest.approx(0.5)

    def test_wrong_arity(self):
        with pytest.raises(ShapeError):
            stage_weighted([1, 2], [0] * 4, [0] * 3)


class TestGradient:
    def central_diff(self, pred, gt, intr, u, h=1e-6):
        fd = np.zeros(3)
        pred = np.asarray(pred, dtype=np.float64)
        for k in range(3):
            e = np.zeros(3)
            e[k] = h
            fd[k] = (plane_loss_pixel(pred + e, gt, intr, u)
                     - plane_loss_pixel(pred - e, gt, intr, u)) / (2 * h)
        return fd

    def test_stationary_at_match(self, intr):
        gt = (0.15, -0.25, 2.0)
        g = grad_plane_loss(gt, gt, intr, (intr.cx + 40, intr.cy - 25))
        assert np.max(np.abs(g)) < 1e-6

    def test_intercept_offset_direction(self, intr):
        gt = (0.0, 0.0, 2.0)
        pred = (0.0, 0.0, 2.5)
        g = grad_plane_loss(pred, gt, intr, (intr.cx, intr.cy))
        fd = self.central_diff(pred, gt, intr, (intr.cx, intr.cy))
        assert np.allclose(g, fd, rtol=1e-5, atol=1e-8)
        assert g[2] > 0  # moving d down reduces the loss

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=100, deadline=None)
    def test_matches_finite_differences(self, seed):
        intr = CameraIntrinsics(500.0, 500.0, 320.0, 240.0, 640, 480)
        rng = np.random.default_rng(seed)
        pred, gt = random_pred_gt(rng)
        u = rng.uniform([0, 0], [intr.width, intr.height])
        if _near_kink(pred, gt, intr, u):
            return
        g = grad_plane_loss(pred, gt, intr, u)
        fd = self.central_diff(pred, gt, intr, u)
        denom = np.maximum(np.abs(fd), 1e-3)
        assert np.max(np.abs(g - fd) / denom) < 1e-5


def _near_kink(pred, gt, intr, u, h=1e-4):
    """Skip configurations near |.| kinks or the basis-selection switch."""
    n = from_polar(pred[0], pred[1])
    if abs(abs(n[0]) - 0.9) < 0.02:
        return True
    if np.any(np.abs(np.asarray(pred) - np.asarray(gt)) < h):
        return True
    from glasskit.losses import in_plane_basis as basis
    from glasskit.projection import pixel_ray

    r = pixel_ray(intr, u)
    denom = float(r @ n)
    if abs(denom) < 1e-3:
        return True
    p = (-pred[2] / denom) * r
    gt_plane = Plane(from_polar(gt[0], gt[1]), gt[2])
    e1, e2 = basis(n)
    for q in (p + e1, p - e1, p + e2, p - e2):
        if abs(float(gt_plane.n @ q) + gt_plane.d) < h:
            return True
    return False


class TestPlaneLossMap:
    def test_matches_scalar_ops(self, small_intr):
        rng = np.random.default_rng(8)
        masks = np.zeros((small_intr.height, small_intr.width), np.int32)
        masks[10:30, 10:40] = 1
        masks[50:70, 60:100] = 2
        gt_params = [(0.1, -0.2, 2.0), (-0.3, 0.25, 4.0)]
        params = np.zeros((3, small_intr.height, small_intr.width))
        for i, gp in enumerate(gt_params, start=1):
            noise = rng.normal(scale=0.05, size=3)
            for c in range(3):
                params[c][masks == i] = gp[c] + noise[c]
        grid, rep = plane_loss_map(params, gt_params, masks, small_intr)
        assert rep.skipped_pixels == 0
        ys, xs = np.nonzero(masks)
        for k in range(0, len(ys), 97):
            y, x = ys[k], xs[k]
            i = masks[y, x]
            pred = (params[0, y, x], params[1, y, x], params[2, y, x])
            expect = plane_loss_pixel(pred, gt_params[i - 1], small_intr,
                                      (x + 0.5, y + 0.5))
            assert grid[y, x] == pytest.approx(expect, rel=1e-12)
        agg = plane_loss_aggregate(grid, masks)
        assert rep.aggregate == pytest.approx(agg.aggregate, rel=1e-12)
