"""Occupancy-grid rasterization and A* planning to a queried object's box.

The point cloud is sliced by a height band and rasterized into a 2D grid;
obstacles are dilated by the robot radius. Planning is 8-connected A* with
the octile heuristic; the goal set is the free ring around the target
box's footprint (centroids sit inside obstacles, so the perimeter is the
reachable goal).
"""

import heapq
import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from .errors import EmptyPointSet, GoalUnreachable, PathNotFound, StartBlocked
from .geometry import Aabb3, PointCloud

SQRT2 = math.sqrt(2.0)


@dataclass
class OccupancyGrid:
    origin: Tuple[float, float]          # world xy of cell (0, 0) corner
    cell_size: float
    width: int
    height: int
    occupied: np.ndarray                 # (height, width) bool
    inflation_radius: float = 0.0

    def world_to_cell(self, x: float, y: float) -> Tuple[int, int]:
        return (int(math.floor((x - self.origin[0]) / self.cell_size)),
                int(math.floor((y - self.origin[1]) / self.cell_size)))

    def cell_center(self, gx: int, gy: int) -> Tuple[float, float]:
        return (self.origin[0] + (gx + 0.5) * self.cell_size,
                self.origin[1] + (gy + 0.5) * self.cell_size)

    def in_bounds(self, gx: int, gy: int) -> bool:
        return 0 <= gx < self.width and 0 <= gy < self.height

    def is_free(self, gx: int, gy: int) -> bool:
        return self.in_bounds(gx, gy) and not self.occupied[gy, gx]

    def to_json_dict(self) -> dict:
        return {"origin": [self.origin[0], self.origin[1]],
                "cell_size": self.cell_size, "width": self.width,
                "height": self.height,
                "inflation_radius": self.inflation_radius}


@dataclass
class NavPath:
    waypoints: List[Tuple[float, float]]
    length: float
    goal_object_id: Optional[int] = None
    cost_cells: float = 0.0              # grid cost before smoothing, cell units

    def to_json_dict(self) -> dict:
        return {"waypoints": [[float(x), float(y)] for x, y in self.waypoints],
                "length": self.length, "goal_object_id": self.goal_object_id}


def _disk_offsets(radius_cells: int) -> List[Tuple[int, int]]:
    out = []
    for dy in range(-radius_cells, radius_cells + 1):
        for dx in range(-radius_cells, radius_cells + 1):
            if dx * dx + dy * dy <= radius_cells * radius_cells:
                out.append((dx, dy))
    return out


def _dilate(occ: np.ndarray, radius_cells: int) -> np.ndarray:
    if radius_cells <= 0:
        return occ.copy()
    h, w = occ.shape
    out = np.zeros_like(occ)
    for dx, dy in _disk_offsets(radius_cells):
        src_y = slice(max(0, -dy), min(h, h - dy))
        dst_y = slice(max(0, dy), min(h, h + dy))
        src_x = slice(max(0, -dx), min(w, w - dx))
        dst_x = slice(max(0, dx), min(w, w + dx))
        out[dst_y, dst_x] |= occ[src_y, src_x]
    return out


def rasterize_occupancy(cloud: PointCloud, cell_size: float = 0.05,
                        height_band: Tuple[float, float] = (0.05, 1.5),
                        inflation_radius: float = 0.3,
                        origin: Optional[Tuple[float, float]] = None,
                        size: Optional[Tuple[int, int]] = None,
                        margin: Optional[float] = None) -> OccupancyGrid:
    """Occupy every cell holding a point inside the height band, then dilate.

    The grid covers the whole cloud's xy extent plus a free margin, so
    starts and goals around the scene land in bounds.
    """
    if cell_size <= 0:
        raise ValueError("cell_size must be positive")
    z_min, z_max = height_band
    if z_min >= z_max:
        raise ValueError("height band must satisfy z_min < z_max")
    if len(cloud) == 0:
        raise EmptyPointSet("cannot rasterize an empty point cloud")
    xy = cloud.xyz[:, :2]
    if margin is None:
        margin = inflation_radius + 4 * cell_size
    if origin is None:
        origin = (float(xy[:, 0].min() - margin), float(xy[:, 1].min() - margin))
    if size is None:
        width = int(math.ceil((xy[:, 0].max() + margin - origin[0]) / cell_size)) + 1
        height = int(math.ceil((xy[:, 1].max() + margin - origin[1]) / cell_size)) + 1
    else:
        width, height = size
    occ = np.zeros((height, width), dtype=bool)
    band = (cloud.xyz[:, 2] >= z_min) & (cloud.xyz[:, 2] <= z_max)
    pts = xy[band]
    if len(pts):
        gx = np.floor((pts[:, 0] - origin[0]) / cell_size).astype(int)
        gy = np.floor((pts[:, 1] - origin[1]) / cell_size).astype(int)
        keep = (gx >= 0) & (gx < width) & (gy >= 0) & (gy < height)
        occ[gy[keep], gx[keep]] = True
    radius_cells = int(round(inflation_radius / cell_size))
    occ = _dilate(occ, radius_cells)
    return OccupancyGrid(origin, cell_size, width, height, occ, inflation_radius)


# ---------------------------------------------------------------------------
# A* planning

_MOVES = [(-1, -1, SQRT2), (0, -1, 1.0), (1, -1, SQRT2),
          (-1, 0, 1.0), (1, 0, 1.0),
          (-1, 1, SQRT2), (0, 1, 1.0), (1, 1, SQRT2)]


def _octile(dx: int, dy: int) -> float:
    dx, dy = abs(dx), abs(dy)
    return (dx + dy) + (SQRT2 - 2.0) * min(dx, dy)


def _snap_start(grid: OccupancyGrid, start_xy, snap_radius: float) -> Tuple[int, int]:
    gx, gy = grid.world_to_cell(*start_xy)
    if grid.is_free(gx, gy):
        return gx, gy
    max_r = int(math.ceil(snap_radius / grid.cell_size))
    best = None
    for dy in range(-max_r, max_r + 1):
        for dx in range(-max_r, max_r + 1):
            cx, cy = gx + dx, gy + dy
            if not grid.is_free(cx, cy):
                continue
            wx, wy = grid.cell_center(cx, cy)
            d = math.hypot(wx - start_xy[0], wy - start_xy[1])
            if d <= snap_radius:
                key = (d, cy * grid.width + cx)
                if best is None or key < best[0]:
                    best = (key, (cx, cy))
    if best is None:
        raise StartBlocked(
            f"start {start_xy} is occupied and no free cell lies within "
            f"{snap_radius} m")
    return best[1]


def _goal_cells(grid: OccupancyGrid, goal_box: Aabb3) -> List[Tuple[int, int]]:
    """Free cells whose center is within one inflation radius of the goal
    box's xy footprint."""
    reach = max(grid.inflation_radius, grid.cell_size)
    x0, y0 = goal_box.min[0] - reach, goal_box.min[1] - reach
    x1, y1 = goal_box.max[0] + reach, goal_box.max[1] + reach
    gx0, gy0 = grid.world_to_cell(x0, y0)
    gx1, gy1 = grid.world_to_cell(x1, y1)
    cells = []
    for gy in range(max(0, gy0), min(grid.height, gy1 + 1)):
        for gx in range(max(0, gx0), min(grid.width, gx1 + 1)):
            if not grid.is_free(gx, gy):
                continue
            cx, cy = grid.cell_center(gx, gy)
            dx = max(goal_box.min[0] - cx, 0.0, cx - goal_box.max[0])
            dy = max(goal_box.min[1] - cy, 0.0, cy - goal_box.max[1])
            if math.hypot(dx, dy) <= reach:
                cells.append((gx, gy))
    return cells


def _line_is_free(grid: OccupancyGrid, a: Tuple[float, float],
                  b: Tuple[float, float]) -> bool:
    dist = math.hypot(b[0] - a[0], b[1] - a[1])
    steps = max(2, int(dist / (grid.cell_size / 8.0)) + 1)
    for i in range(steps + 1):
        t = i / steps
        x = a[0] + t * (b[0] - a[0])
        y = a[1] + t * (b[1] - a[1])
        if not grid.is_free(*grid.world_to_cell(x, y)):
            return False
    return True


def _smooth(grid: OccupancyGrid, waypoints: List[Tuple[float, float]]):
    if len(waypoints) <= 2:
        return list(waypoints)
    out = [waypoints[0]]
    i = 0
    while i < len(waypoints) - 1:
        j = len(waypoints) - 1
        while j > i + 1 and not _line_is_free(grid, waypoints[i], waypoints[j]):
            j -= 1
        out.append(waypoints[j])
        i = j
    return out


def plan_path(grid: OccupancyGrid, start_xy: Tuple[float, float],
              goal_box: Aabb3, goal_object_id: Optional[int] = None,
              smooth: bool = False, snap_radius: float = 0.5) -> NavPath:
    """Optimal 8-connected A* path from start to the goal box's perimeter.

    Heuristic is octile distance to the goal set's bounding box (admissible
    and consistent). Ties pop deterministically by (f, g, cell index).
    """
    start = _snap_start(grid, start_xy, snap_radius)
    goals = _goal_cells(grid, goal_box)
    if not goals:
        raise GoalUnreachable("no free cell borders the goal box")
    goal_set = set(goals)
    gxs = [g[0] for g in goals]
    gys = [g[1] for g in goals]
    bx0, bx1, by0, by1 = min(gxs), max(gxs), min(gys), max(gys)

    def heuristic(gx, gy):
        dx = max(bx0 - gx, 0, gx - bx1)
        dy = max(by0 - gy, 0, gy - by1)
        return _octile(dx, dy)

    w = grid.width
    g_cost = {start: 0.0}
    came = {}
    start_idx = start[1] * w + start[0]
    heap = [(heuristic(*start), 0.0, start_idx)]
    closed = set()
    found = None
    while heap:
        f, g, idx = heapq.heappop(heap)
        cell = (idx % w, idx // w)
        if cell in closed:
            continue
        closed.add(cell)
        if cell in goal_set:
            found = cell
            break
        cx, cy = cell
        for dx, dy, step in _MOVES:
            nx, ny = cx + dx, cy + dy
            if not grid.is_free(nx, ny):
                continue
            ng = g + step
            nb = (nx, ny)
            if nb not in g_cost or ng < g_cost[nb] - 1e-12:
                g_cost[nb] = ng
                came[nb] = cell
                heapq.heappush(heap, (ng + heuristic(nx, ny), ng, ny * w + nx))
    if found is None:
        raise PathNotFound("no collision-free path to the goal")

    cells = [found]
    while cells[-1] != start:
        cells.append(came[cells[-1]])
    cells.reverse()
    waypoints = [grid.cell_center(*c) for c in cells]
    if smooth:
        waypoints = _smooth(grid, waypoints)
    length = float(sum(math.hypot(b[0] - a[0], b[1] - a[1])
                       for a, b in zip(waypoints, waypoints[1:])))
    return NavPath(waypoints, length, goal_object_id, cost_cells=g_cost[found])
