import math

import numpy as np
import pytest

from oracles import dijkstra_cost
from scenequery.errors import (EmptyPointSet, GoalUnreachable, PathNotFound,
                               StartBlocked)
from scenequery.geometry import Aabb3, PointCloud
from scenequery.nav import (NavPath, OccupancyGrid, _goal_cells, plan_path,
                            rasterize_occupancy)


def grid_from_array(occ, cell=1.0, origin=(0.0, 0.0), inflation=0.0):
    occ = np.asarray(occ, dtype=bool)
    return OccupancyGrid(origin, cell, occ.shape[1], occ.shape[0], occ,
                         inflation)


def empty_grid(n=20, cell=1.0):
    return grid_from_array(np.zeros((n, n), dtype=bool), cell)


def point_box(x, y):
    return Aabb3((x, y, 0.0), (x, y, 0.0))


class TestRasterize:
    def test_index_arithmetic(self):
        cloud = PointCloud(np.array([[1.00, 1.00, 0.5]]))
        grid = rasterize_occupancy(cloud, cell_size=0.05,
                                   height_band=(0.05, 1.5),
                                   inflation_radius=0.0,
                                   origin=(0.0, 0.0), size=(40, 40))
        assert grid.occupied[20, 20]
        assert grid.occupied.sum() == 1

    def test_band_filter(self):
        cloud = PointCloud(np.array([[1.0, 1.0, 2.0]]))
        grid = rasterize_occupancy(cloud, cell_size=0.05,
                                   height_band=(0.05, 1.5),
                                   inflation_radius=0.0,
                                   origin=(0.0, 0.0), size=(40, 40))
        assert grid.occupied.sum() == 0

    def test_dilation_radius_two_cells(self):
        cloud = PointCloud(np.array([[1.00, 1.00, 0.5]]))
        grid = rasterize_occupancy(cloud, cell_size=0.05,
                                   height_band=(0.05, 1.5),
                                   inflation_radius=0.1,
                                   origin=(0.0, 0.0), size=(40, 40))
        expected = sum(1 for dx in range(-2, 3) for dy in range(-2, 3)
                       if dx * dx + dy * dy <= 4)
        assert grid.occupied.sum() == expected
        assert grid.occupied[22, 20] and grid.occupied[20, 22]
        assert not grid.occupied[23, 20]

    def test_empty_cloud_rejected(self):
        with pytest.raises(EmptyPointSet):
            rasterize_occupancy(PointCloud(np.empty((0, 3))))

    def test_point_order_independent(self):
        rng = np.random.default_rng(0)
        pts = rng.random((200, 3)) * np.array([4, 4, 1])
        a = rasterize_occupancy(PointCloud(pts), origin=(-1, -1),
                                size=(120, 120))
        b = rasterize_occupancy(PointCloud(pts[::-1].copy()), origin=(-1, -1),
                                size=(120, 120))
        assert np.array_equal(a.occupied, b.occupied)


class TestPlanPath:
    def test_straight_diagonal_cost(self):
        grid = empty_grid(20)
        path = plan_path(grid, (0.5, 0.5), point_box(5.5, 5.5))
        # diagonal of 5 cells, within one cell of discretization slack
        assert path.cost_cells == pytest.approx(5 * math.sqrt(2), abs=1.5)
        ref = dijkstra_cost(grid.occupied, (0, 0),
                            _goal_cells(grid, point_box(5.5, 5.5)))
        assert path.cost_cells == pytest.approx(ref, abs=1e-9)

    def test_wall_blocks_path(self):
        occ = np.zeros((20, 20), dtype=bool)
        occ[:, 10] = True
        grid = grid_from_array(occ)
        with pytest.raises(PathNotFound):
            plan_path(grid, (0.5, 0.5), point_box(15.5, 15.5))

    def test_goal_inside_obstacle_reaches_perimeter(self):
        occ = np.zeros((30, 30), dtype=bool)
        occ[12:18, 12:18] = True
        grid = grid_from_array(occ, inflation=1.0)
        goal = Aabb3((12.0, 12.0, 0.0), (18.0, 18.0, 1.0))
        path = plan_path(grid, (2.5, 2.5), goal)
        end = path.waypoints[-1]
        gx, gy = grid.world_to_cell(*end)
        assert not grid.occupied[gy, gx]
        dx = max(goal.min[0] - end[0], 0.0, end[0] - goal.max[0])
        dy = max(goal.min[1] - end[1], 0.0, end[1] - goal.max[1])
        assert math.hypot(dx, dy) <= max(grid.inflation_radius, grid.cell_size) + 1e-9

    def test_fully_sealed_goal_unreachable(self):
        occ = np.zeros((10, 10), dtype=bool)
        occ[4:7, 4:7] = True
        grid = grid_from_array(occ)
        with pytest.raises(GoalUnreachable):
            plan_path(grid, (0.5, 0.5), Aabb3((5.0, 5.0, 0.0), (5.4, 5.4, 1.0)))

    def test_start_snaps_to_nearest_free(self):
        occ = np.zeros((10, 10), dtype=bool)
        occ[0, 0] = True
        grid = grid_from_array(occ, cell=0.2)
        path = plan_path(grid, (0.1, 0.1), point_box(1.5, 1.5),
                         snap_radius=0.5)
        sx, sy = path.waypoints[0]
        assert not grid.occupied[grid.world_to_cell(sx, sy)[1],
                                 grid.world_to_cell(sx, sy)[0]]

    def test_start_unsnappable_raises(self):
        occ = np.ones((10, 10), dtype=bool)
        occ[9, 9] = False
        grid = grid_from_array(occ, cell=0.2)
        with pytest.raises(StartBlocked):
            plan_path(grid, (0.1, 0.1), point_box(1.9, 1.9), snap_radius=0.5)

    def test_no_waypoint_in_occupied_cell(self):
        rng = np.random.default_rng(1)
        occ = rng.random((40, 40)) < 0.25
        occ[0, 0] = False
        occ[39, 39] = False
        grid = grid_from_array(occ)
        try:
            path = plan_path(grid, (0.5, 0.5), point_box(39.5, 39.5))
        except PathNotFound:
            return
        for x, y in path.waypoints:
            gx, gy = grid.world_to_cell(x, y)
            assert not grid.occupied[gy, gx]

    def test_smoothing_keeps_waypoints_free_and_shortens(self):
        occ = np.zeros((30, 30), dtype=bool)
        occ[10:20, 14] = True
        grid = grid_from_array(occ)
        rough = plan_path(grid, (2.5, 2.5), point_box(27.5, 27.5))
        smooth = plan_path(grid, (2.5, 2.5), point_box(27.5, 27.5),
                           smooth=True)
        assert smooth.length <= rough.length + 1e-9
        assert len(smooth.waypoints) <= len(rough.waypoints)
        for x, y in smooth.waypoints:
            gx, gy = grid.world_to_cell(x, y)
            assert not grid.occupied[gy, gx]

    def test_cost_monotone_as_obstacles_added(self):
        occ = np.zeros((25, 25), dtype=bool)
        base_grid = grid_from_array(occ.copy())
        base = plan_path(base_grid, (0.5, 12.5), point_box(24.5, 12.5))
        occ[5:20, 12] = True
        walled = plan_path(grid_from_array(occ), (0.5, 12.5),
                           point_box(24.5, 12.5))
        assert walled.cost_cells >= base.cost_cells

    def test_matches_dijkstra_on_random_grids(self):
        rng = np.random.default_rng(2)
        agreements = 0
        for _ in range(15):
            n = int(rng.integers(15, 60))
            occ = rng.random((n, n)) < 0.3
            occ[1, 1] = False
            grid = grid_from_array(occ)
            goal = point_box(n - 1.5, n - 1.5)
            try:
                cells = _goal_cells(grid, goal)
                ref = dijkstra_cost(occ, (1, 1), cells) if cells else None
            except Exception:
                ref = None
            try:
                path = plan_path(grid, (1.5, 1.5), goal)
                got = path.cost_cells
            except (PathNotFound, GoalUnreachable):
                got = None
            if ref is None:
                assert got is None
            else:
                assert got == pytest.approx(ref, abs=1e-9)
            agreements += 1
        assert agreements == 15

    def test_path_json_schema(self):
        grid = empty_grid(10)
        path = plan_path(grid, (0.5, 0.5), point_box(5.5, 5.5),
                         goal_object_id=7)
        doc = path.to_json_dict()
        assert set(doc) == {"waypoints", "length", "goal_object_id"}
        assert doc["goal_object_id"] == 7
        assert all(len(w) == 2 for w in doc["waypoints"])
