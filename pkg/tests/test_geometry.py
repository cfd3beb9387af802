import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import brute_min_area
from scenequery.errors import EmptyPointSet
from scenequery.geometry import (Aabb3, CameraFrame, CameraIntrinsics,
                                 DepthTolerance, PointCloud, aabb_of,
                                 back_project, centroid_of, crop_rect,
                                 enlarge_box, is_visible, min_area_bbox_2d,
                                 project_point, project_points)


def make_frame(width=200, height=100, fx=100.0, fy=100.0, cx=50.0, cy=50.0,
               rotation=None, translation=None, depth=None):
    intr = CameraIntrinsics(fx, fy, cx, cy, width, height)
    depth = np.zeros((height, width)) if depth is None else depth
    zeros = np.zeros((height, width), dtype=int)
    return CameraFrame(0, intr,
                       np.eye(3) if rotation is None else rotation,
                       np.zeros(3) if translation is None else translation,
                       depth, zeros.copy(), zeros.copy())


class TestProjection:
    def test_principal_axis_point(self):
        frame = make_frame()
        assert project_point([0, 0, 1], frame) == (50.0, 50.0, 1.0)

    def test_pinhole_formula(self):
        frame = make_frame()
        assert project_point([1, 0, 2], frame) == (100.0, 50.0, 2.0)

    def test_point_behind_camera_absent(self):
        frame = make_frame()
        assert project_point([0, 0, -1], frame) is None

    def test_outside_image_absent(self):
        frame = make_frame(width=60)
        assert project_point([1, 0, 1], frame) is None  # u = 150 >= 60

    def test_pose_applies_world_to_camera(self):
        # camera at (0, -2, 0) looking along +y: world y maps to camera z
        rot = np.array([[1.0, 0, 0], [0, 0, -1.0], [0, 1.0, 0]])
        t = -rot @ np.array([0.0, -2.0, 0.0])
        frame = make_frame(rotation=rot, translation=t)
        u, v, d = project_point([0, 0, 0], frame)
        assert (u, v) == (50.0, 50.0)
        assert d == pytest.approx(2.0)

    @settings(max_examples=50, deadline=None)
    @given(st.floats(-0.5, 0.5), st.floats(-0.5, 0.5), st.floats(0.5, 5.0))
    def test_round_trip_recovers_world_point(self, x, y, z):
        rot = np.array([[0, 1.0, 0], [0, 0, -1.0], [-1.0, 0, 0]])
        t = np.array([0.3, -0.2, 1.5])
        frame = make_frame(width=2000, height=2000, cx=1000, cy=1000,
                           rotation=rot, translation=t)
        cam_pt = rot.T @ (np.array([x, y, z]) - t)
        res = project_point(cam_pt, frame)
        if res is None:
            return
        u, v, d = res
        recovered = back_project(u, v, d, frame)
        assert np.linalg.norm(recovered - cam_pt) < 1e-6

    def test_vectorized_matches_scalar(self):
        frame = make_frame()
        pts = np.array([[0, 0, 1], [1, 0, 2], [0, 0, -1], [5, 5, 0.1]])
        uv, z, valid = project_points(pts, frame)
        for i, p in enumerate(pts):
            single = project_point(p, frame)
            if single is None:
                assert not valid[i]
            else:
                assert valid[i]
                assert single == (uv[i, 0], uv[i, 1], z[i])


class TestVisibility:
    def test_within_absolute_tolerance(self):
        depth = np.full((100, 200), 2.0)
        frame = make_frame(depth=depth)
        tol = DepthTolerance(abs=0.02, rel=0.01)
        assert is_visible([0, 0, 2.005], frame, tol)

    def test_occluder_in_front(self):
        depth = np.full((100, 200), 1.0)
        frame = make_frame(depth=depth)
        assert not is_visible([0, 0, 2.0], frame)

    def test_projection_outside_image(self):
        depth = np.full((100, 200), 5.0)
        frame = make_frame(depth=depth)
        assert not is_visible([50, 0, 1], frame)

    def test_invalid_depth_pixel(self):
        frame = make_frame()  # all-zero depth map
        assert not is_visible([0, 0, 2.0], frame)

    @settings(max_examples=30, deadline=None)
    @given(st.floats(0.001, 0.05), st.floats(0.0, 0.02),
           st.floats(1.9, 2.1))
    def test_monotone_in_tolerance(self, eps_abs, eps_rel, z):
        depth = np.full((100, 200), 2.0)
        frame = make_frame(depth=depth)
        small = DepthTolerance(eps_abs, eps_rel)
        large = DepthTolerance(eps_abs * 2 + 0.01, eps_rel * 2 + 0.005)
        if is_visible([0, 0, z], frame, small):
            assert is_visible([0, 0, z], frame, large)

    def test_depth_lookup_uses_floor(self):
        depth = np.zeros((100, 200))
        depth[50, 50] = 2.0     # only the floored pixel carries valid depth
        frame = make_frame(depth=depth)
        assert is_visible([0.018, 0.01, 2.0], frame)  # u = 50.9, v = 50.5


class TestSummaries:
    def test_centroid_midpoint(self):
        assert np.allclose(centroid_of([(0, 0, 0), (2, 0, 0)]), [1, 0, 0])

    def test_centroid_single_point(self):
        assert np.allclose(centroid_of([(3, 4, 5)]), [3, 4, 5])

    def test_centroid_constant_set(self):
        assert np.allclose(centroid_of([(1, 1, 1)] * 17), [1, 1, 1])

    def test_centroid_empty_raises(self):
        with pytest.raises(EmptyPointSet):
            centroid_of([])

    def test_aabb_envelope(self):
        box = aabb_of([(0, 0, 0), (1, 2, 3)])
        assert box.min == (0, 0, 0) and box.max == (1, 2, 3)

    def test_aabb_degenerate(self):
        box = aabb_of([(1, 1, 1)])
        assert box.min == box.max == (1, 1, 1)

    def test_aabb_interior_point_no_change(self):
        base = aabb_of([(0, 0, 0), (1, 2, 3)])
        grown = aabb_of([(0, 0, 0), (1, 2, 3), (0.5, 1.0, 1.5)])
        assert base == grown

    def test_aabb_empty_raises(self):
        with pytest.raises(EmptyPointSet):
            aabb_of([])

    @settings(max_examples=30, deadline=None)
    @given(st.lists(st.tuples(st.floats(-5, 5), st.floats(-5, 5),
                              st.floats(-5, 5)), min_size=1, max_size=30),
           st.randoms())
    def test_permutation_invariance(self, pts, rnd):
        shuffled = list(pts)
        rnd.shuffle(shuffled)
        assert np.allclose(centroid_of(pts), centroid_of(shuffled))
        assert aabb_of(pts) == aabb_of(shuffled)


class TestMinAreaBox:
    def test_axis_aligned_unit_square(self):
        box = min_area_bbox_2d([(0, 0), (1, 0), (1, 1), (0, 1)])
        assert box.area == pytest.approx(1.0)
        assert box.angle == pytest.approx(0.0)
        assert box.center == pytest.approx((0.5, 0.5))

    def test_rotated_square_beats_aabb(self):
        h = math.sqrt(2) / 2
        pts = [(0, 0), (h, h), (0, 2 * h), (-h, h)]
        box = min_area_bbox_2d(pts)
        assert box.area == pytest.approx(1.0, rel=1e-9)
        assert abs(box.angle) == pytest.approx(math.pi / 4, rel=1e-9)
        aabb_area = (2 * h) * (2 * h)
        assert box.area < aabb_area

    def test_single_point_degenerate(self):
        box = min_area_bbox_2d([(3, 4)])
        assert box.area == 0.0
        assert box.center == pytest.approx((3, 4))

    def test_collinear_points(self):
        box = min_area_bbox_2d([(0, 0), (1, 1), (2, 2)])
        assert box.area == pytest.approx(0.0)
        assert box.half_extents[0] == pytest.approx(math.sqrt(2))
        assert box.half_extents[1] == pytest.approx(0.0)

    def test_empty_raises(self):
        with pytest.raises(EmptyPointSet):
            min_area_bbox_2d([])

    def test_matches_angle_grid_oracle(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            pts = rng.random((rng.integers(3, 40), 2)) * 10
            ours = min_area_bbox_2d(pts).area
            ref = brute_min_area(pts)
            assert ours == pytest.approx(ref, rel=1e-6)

    def test_never_exceeds_axis_aligned_area(self):
        rng = np.random.default_rng(4)
        for _ in range(50):
            pts = rng.random((12, 2)) * 5
            box = min_area_bbox_2d(pts)
            ext = pts.max(axis=0) - pts.min(axis=0)
            assert box.area <= ext[0] * ext[1] + 1e-9

    @settings(max_examples=40, deadline=None)
    @given(st.floats(0, 2 * math.pi))
    def test_rotation_invariant_area(self, theta):
        rng = np.random.default_rng(7)
        pts = rng.random((15, 2)) * 4
        rot = np.array([[math.cos(theta), -math.sin(theta)],
                        [math.sin(theta), math.cos(theta)]])
        a0 = min_area_bbox_2d(pts).area
        a1 = min_area_bbox_2d(pts @ rot.T).area
        assert a1 == pytest.approx(a0, rel=1e-6)

    def test_angle_range_invariant(self):
        rng = np.random.default_rng(9)
        for _ in range(30):
            box = min_area_bbox_2d(rng.random((8, 2)) * 3)
            assert -math.pi / 2 <= box.angle < math.pi / 2

    def test_corners_enclose_inputs(self):
        rng = np.random.default_rng(5)
        pts = rng.random((25, 2)) * 6
        box = min_area_bbox_2d(pts)
        c, s = math.cos(box.angle), math.sin(box.angle)
        u = (pts - np.asarray(box.center)) @ np.array([c, s])
        v = (pts - np.asarray(box.center)) @ np.array([-s, c])
        assert np.all(np.abs(u) <= box.half_extents[0] + 1e-9)
        assert np.all(np.abs(v) <= box.half_extents[1] + 1e-9)


class TestEnlargeAndCrop:
    def test_scale_half_extents(self):
        box = min_area_bbox_2d([(0, 0), (10, 0), (10, 10), (0, 10)])
        big = enlarge_box(box, 1.2)
        assert big.half_extents == pytest.approx((6.0, 6.0))
        assert big.center == box.center and big.angle == box.angle

    def test_factor_one_is_identity(self):
        box = min_area_bbox_2d([(2, 3), (4, 3), (4, 8), (2, 8)])
        same = enlarge_box(box, 1.0)
        assert same.half_extents == box.half_extents

    def test_factor_below_one_rejected(self):
        box = min_area_bbox_2d([(0, 0), (1, 1)])
        with pytest.raises(ValueError):
            enlarge_box(box, 0.9)

    def test_crop_clamped_to_image(self):
        box = min_area_bbox_2d([(95, 95), (105, 95), (105, 105), (95, 105)])
        big = enlarge_box(box, 1.4)
        u0, v0, u1, v1 = crop_rect(big, 100, 100)
        assert 0 <= u0 < u1 <= 100
        assert 0 <= v0 < v1 <= 100

    def test_crop_inside_image_covers_box(self):
        box = min_area_bbox_2d([(10, 20), (30, 20), (30, 40), (10, 40)])
        u0, v0, u1, v1 = crop_rect(box, 100, 100)
        assert (u0, v0, u1, v1) == (10, 20, 30, 40)


class TestTypes:
    def test_point_cloud_rejects_nan(self):
        with pytest.raises(ValueError):
            PointCloud(np.array([[0.0, 0.0, float("nan")]]))

    def test_intrinsics_validation(self):
        with pytest.raises(ValueError):
            CameraIntrinsics(-1, 1, 0, 0, 10, 10)
        with pytest.raises(ValueError):
            CameraIntrinsics(1, 1, 0, 0, 0, 10)

    def test_aabb_ordering_enforced(self):
        with pytest.raises(ValueError):
            Aabb3((1, 0, 0), (0, 1, 1))

    def test_rotation_orthonormality_enforced(self):
        bad = np.eye(3)
        bad[0, 1] = 1e-3
        with pytest.raises(ValueError):
            make_frame(rotation=bad)

    def test_aabb_contains(self):
        box = Aabb3((0, 0, 0), (1, 1, 1))
        assert box.contains((0.5, 0.5, 0.5))
        assert box.contains((1, 1, 1))
        assert not box.contains((1.1, 0, 0))
