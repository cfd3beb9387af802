"""Pinhole projection, depth-consistency visibility, and box primitives.

Conventions (declared in every bundle manifest): world frame is
right-handed, meters, z-up; camera frame is x right, y down, z forward.
Pixel coordinates are continuous with u along width and v along height;
depth/mask lookups floor to integer indices (nearest-pixel, never
interpolated — depth maps are discontinuous at object boundaries).
"""

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import EmptyPointSet, MaskShapeMismatch


@dataclass(frozen=True)
class DepthTolerance:
    """Absolute (meters) + relative depth-match tolerance for visibility."""
    abs: float = 0.02
    rel: float = 0.01


@dataclass
class PointCloud:
    """Ordered point set; indices are stable object identifiers."""
    xyz: np.ndarray                      # (N, 3) float64, world meters
    rgb: Optional[np.ndarray] = None     # (N, 3) uint8

    def __post_init__(self):
        self.xyz = np.asarray(self.xyz, dtype=np.float64).reshape(-1, 3)
        if not np.all(np.isfinite(self.xyz)):
            raise ValueError("point cloud contains non-finite coordinates")
        if self.rgb is not None:
            self.rgb = np.asarray(self.rgb, dtype=np.uint8).reshape(-1, 3)
            if len(self.rgb) != len(self.xyz):
                raise ValueError("rgb length does not match xyz")

    def __len__(self):
        return len(self.xyz)


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
        if self.width < 1 or self.height < 1:
            raise ValueError("image size must be at least 1x1")


@dataclass
class CameraFrame:
    """Posed frame: intrinsics, world->camera rigid transform, depth, masks."""
    frame_id: int
    intrinsics: CameraIntrinsics
    rotation: np.ndarray                 # (3, 3), world->camera
    translation: np.ndarray              # (3,), meters
    depth: np.ndarray                    # (H, W) float, <=0 means invalid
    semantic_mask: np.ndarray            # (H, W) int class ids, 0 = stuff
    instance_mask: np.ndarray            # (H, W) int instance ids, 0 = background
    rgb: Optional[np.ndarray] = None     # (H, W, 3) uint8, optional

    def __post_init__(self):
        self.rotation = np.asarray(self.rotation, dtype=np.float64).reshape(3, 3)
        self.translation = np.asarray(self.translation, dtype=np.float64).reshape(3)
        err = np.abs(self.rotation @ self.rotation.T - np.eye(3)).max()
        if err > 1e-6:
            raise ValueError(f"rotation is not orthonormal (max error {err:.2e})")
        shape = (self.intrinsics.height, self.intrinsics.width)
        for name, arr in (("depth", self.depth),
                          ("semantic_mask", self.semantic_mask),
                          ("instance_mask", self.instance_mask)):
            if arr.shape != shape:
                raise MaskShapeMismatch(
                    f"frame {self.frame_id}: {name} shape {arr.shape} != {shape}")


@dataclass(frozen=True)
class Aabb3:
    min: tuple
    max: tuple

    def __post_init__(self):
        lo = np.asarray(self.min, dtype=float)
        hi = np.asarray(self.max, dtype=float)
        if np.any(lo > hi):
            raise ValueError("aabb min exceeds max")
        object.__setattr__(self, "min", tuple(lo.tolist()))
        object.__setattr__(self, "max", tuple(hi.tolist()))

    def contains(self, p) -> bool:
        p = np.asarray(p, dtype=float)
        return bool(np.all(p >= np.asarray(self.min)) and np.all(p <= np.asarray(self.max)))

    def center(self) -> np.ndarray:
        return (np.asarray(self.min) + np.asarray(self.max)) / 2.0


@dataclass
class OrientedBox2:
    """Oriented pixel-space rectangle: center, half extents, angle in [-pi/2, pi/2)."""
    center: tuple
    half_extents: tuple
    angle: float

    def __post_init__(self):
        a, b = self.half_extents
        if a < 0 or b < 0:
            raise ValueError("half extents must be non-negative")

    @property
    def area(self) -> float:
        return 4.0 * self.half_extents[0] * self.half_extents[1]

    def corners(self) -> np.ndarray:
        """(4, 2) corner pixels, counter-clockwise."""
        c, s = math.cos(self.angle), math.sin(self.angle)
        u = np.array([c, s])
        v = np.array([-s, c])
        a, b = self.half_extents
        ctr = np.asarray(self.center, dtype=float)
        return np.array([ctr + a * u + b * v, ctr - a * u + b * v,
                         ctr - a * u - b * v, ctr + a * u - b * v])


# ---------------------------------------------------------------------------
# projection / visibility

def _to_camera(xyz: np.ndarray, frame: CameraFrame) -> np.ndarray:
    return xyz @ frame.rotation.T + frame.translation


def project_points(xyz: np.ndarray, frame: CameraFrame):
    """Project (N, 3) world points into a frame.

    Returns (uv, z, valid): continuous pixel coords, camera-space depth,
    and a mask that is true where depth > 0 and the pixel lies inside the
    image bounds.
    """
    xyz = np.asarray(xyz, dtype=np.float64).reshape(-1, 3)
    cam = _to_camera(xyz, frame)
    z = cam[:, 2]
    k = frame.intrinsics
    with np.errstate(divide="ignore", invalid="ignore"):
        u = k.fx * cam[:, 0] / z + k.cx
        v = k.fy * cam[:, 1] / z + k.cy
    uv = np.stack([u, v], axis=1)
    valid = (z > 0) & (u >= 0) & (u < k.width) & (v >= 0) & (v < k.height)
    return uv, z, valid


def project_point(p, frame: CameraFrame):
    """Single-point projection; returns (u, v, depth) or None when not projectable."""
    uv, z, valid = project_points(np.asarray(p, dtype=float).reshape(1, 3), frame)
    if not valid[0]:
        return None
    return float(uv[0, 0]), float(uv[0, 1]), float(z[0])


def back_project(u: float, v: float, depth: float, frame: CameraFrame) -> np.ndarray:
    """Inverse of project_point: pixel + camera depth back to a world point."""
    k = frame.intrinsics
    cam = np.array([(u - k.cx) / k.fx * depth, (v - k.cy) / k.fy * depth, depth])
    return frame.rotation.T @ (cam - frame.translation)


def visibility_mask(xyz: np.ndarray, frame: CameraFrame,
                    tol: DepthTolerance = DepthTolerance()):
    """Vectorized depth-consistency check.

    A point is visible when it projects inside the image, the depth map at
    the floored pixel is valid, and |z - d_map| <= max(tol.abs, tol.rel * d_map).
    Returns (visible, uv, z).
    """
    uv, z, valid = project_points(xyz, frame)
    visible = np.zeros(len(z), dtype=bool)
    if not valid.any():
        return visible, uv, z
    idx = np.nonzero(valid)[0]
    ui = np.floor(uv[idx, 0]).astype(int)
    vi = np.floor(uv[idx, 1]).astype(int)
    d_map = frame.depth[vi, ui]
    ok = d_map > 0
    lim = np.maximum(tol.abs, tol.rel * d_map)
    ok &= np.abs(z[idx] - d_map) <= lim
    visible[idx[ok]] = True
    return visible, uv, z


def is_visible(p, frame: CameraFrame, tol: DepthTolerance = DepthTolerance()) -> bool:
    vis, _, _ = visibility_mask(np.asarray(p, dtype=float).reshape(1, 3), frame, tol)
    return bool(vis[0])


# ---------------------------------------------------------------------------
# point-set summaries

def centroid_of(points) -> np.ndarray:
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if len(pts) == 0:
        raise EmptyPointSet("centroid of empty point set")
    return pts.mean(axis=0)


def aabb_of(points) -> Aabb3:
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if len(pts) == 0:
        raise EmptyPointSet("aabb of empty point set")
    return Aabb3(tuple(pts.min(axis=0)), tuple(pts.max(axis=0)))


# ---------------------------------------------------------------------------
# 2D minimum-area boxes (for image crops)

def _convex_hull(pts: np.ndarray) -> np.ndarray:
    """Andrew monotone chain; returns hull vertices CCW, collinear dropped."""
    pts = np.unique(pts, axis=0)
    if len(pts) <= 2:
        return pts
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    pts = pts[order]

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    def build(seq):
        out = []
        for p in seq:
            while len(out) >= 2 and cross(out[-2], out[-1], p) <= 0:
                out.pop()
            out.append(p)
        return out

    lower = build(pts)
    upper = build(pts[::-1])
    hull = np.array(lower[:-1] + upper[:-1])
    return hull


def _normalize_box(center, a, b, angle) -> OrientedBox2:
    # rotating a rect by pi/2 swaps its extents; reduce angle into [-pi/2, pi/2)
    angle = math.remainder(angle, math.pi)
    if angle >= math.pi / 2:
        angle -= math.pi / 2
        a, b = b, a
    elif angle < -math.pi / 2:
        angle += math.pi / 2
        a, b = b, a
    return OrientedBox2(tuple(center), (float(a), float(b)), float(angle))


def min_area_bbox_2d(pixels) -> OrientedBox2:
    """Minimum-area oriented rectangle over 2D points.

    The optimum has one side collinear with a convex-hull edge, so the
    search runs over hull-edge directions. Degenerate inputs (single point,
    collinear set) yield zero-thickness boxes along the point span.
    """
    pts = np.asarray(pixels, dtype=np.float64).reshape(-1, 2)
    if len(pts) == 0:
        raise EmptyPointSet("min-area box of empty pixel set")
    hull = _convex_hull(pts)
    if len(hull) == 1:
        return OrientedBox2(tuple(hull[0]), (0.0, 0.0), 0.0)
    if len(hull) == 2:
        d = hull[1] - hull[0]
        length = float(np.linalg.norm(d))
        angle = math.atan2(d[1], d[0])
        center = (hull[0] + hull[1]) / 2.0
        return _normalize_box(center, length / 2.0, 0.0, angle)

    best = None
    for i in range(len(hull)):
        edge = hull[(i + 1) % len(hull)] - hull[i]
        norm = np.linalg.norm(edge)
        if norm == 0:
            continue
        d = edge / norm
        n = np.array([-d[1], d[0]])
        proj_u = hull @ d
        proj_v = hull @ n
        u0, u1 = proj_u.min(), proj_u.max()
        v0, v1 = proj_v.min(), proj_v.max()
        area = (u1 - u0) * (v1 - v0)
        if best is None or area < best[0] - 1e-15:
            center = d * (u0 + u1) / 2.0 + n * (v0 + v1) / 2.0
            best = (area, center, (u1 - u0) / 2.0, (v1 - v0) / 2.0,
                    math.atan2(d[1], d[0]))
    _, center, a, b, angle = best
    return _normalize_box(center, a, b, angle)


def enlarge_box(box: OrientedBox2, factor: float,
                bounds: Optional[tuple] = None) -> OrientedBox2:
    """Scale half extents about the same center/angle; factor >= 1.

    Bounds clamping happens at rasterization (crop_rect), not here — the
    oriented box itself is unchanged apart from scale.
    """
    if factor < 1.0:
        raise ValueError("enlargement factor must be >= 1")
    a, b = box.half_extents
    return OrientedBox2(box.center, (a * factor, b * factor), box.angle)


def crop_rect(box: OrientedBox2, width: int, height: int) -> tuple:
    """Axis-aligned integer crop rectangle for a box, clamped to the image.

    Returns (u0, v0, u1, v1) half-open; always at least 1x1 when the box
    center is inside the image.
    """
    corners = box.corners()
    u0 = int(math.floor(corners[:, 0].min()))
    v0 = int(math.floor(corners[:, 1].min()))
    u1 = int(math.ceil(corners[:, 0].max()))
    v1 = int(math.ceil(corners[:, 1].max()))
    u0, v0 = max(0, u0), max(0, v0)
    u1, v1 = min(width, u1), min(height, v1)
    if u1 <= u0:
        u0 = min(max(0, u0), width - 1)
        u1 = u0 + 1
    if v1 <= v0:
        v0 = min(max(0, v0), height - 1)
        v1 = v0 + 1
    return u0, v0, u1, v1
