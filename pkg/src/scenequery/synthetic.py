"""Synthetic scene-bundle generator: the ground-truth oracle for the pipeline.

Scenes are collections of analytic primitives (boxes, spheres, cylinders).
Surface points are sampled with known instance ids; depth maps and panoptic
masks are rendered by exact ray casting against the same primitives, so the
generated bundle is self-consistent by construction. Everything is driven by
one seeded RNG and is byte-deterministic.
"""

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

from .bundle import (COORDINATE_NOTE, MANIFEST_VERSION, SceneBundle, load_bundle,
                     write_depth, write_mask, write_ply, write_rgb)
from .canonical import canonical_write
from .errors import RecipeError
from .geometry import Aabb3

_EPS = 1e-9

# name -> rgb, cycled over instances; flat shading makes crops color-codable
PALETTE = [
    ("red", (200, 40, 40)),
    ("green", (40, 180, 60)),
    ("blue", (50, 80, 220)),
    ("yellow", (220, 200, 40)),
    ("purple", (150, 60, 200)),
    ("cyan", (40, 200, 200)),
    ("orange", (230, 140, 30)),
    ("white", (240, 240, 240)),
]

# caption/attribute templates for the fixture providers shipped in a bundle
CLASS_LEXICON = {
    "chair": ("a seat to sit on", "sitting", ["sit", "seat"]),
    "sofa": ("a wide soft seat to sit on", "sitting", ["sit", "seat", "soft"]),
    "bench": ("a long seat to sit on", "sitting", ["sit", "seat"]),
    "stool": ("a small seat to sit on", "sitting", ["sit", "seat"]),
    "table": ("a flat surface to place items on", "holding items", ["surface", "place"]),
    "shelf": ("a unit to store and display items", "storage", ["store", "display"]),
    "plant": ("a leafy green decoration", "decoration", ["decoration", "leafy"]),
    "vase": ("a container to hold flowers", "holding flowers", ["flowers", "container"]),
    "lamp": ("a source of light", "lighting", ["light"]),
    "book": ("something to read", "reading", ["read"]),
    "ball": ("a round toy", "play", ["round", "toy"]),
    "bin": ("a container for waste", "waste", ["container", "waste"]),
}

ON_TOP_TOL = 0.05     # meters, vertical contact tolerance
NEXT_TO_GAP = 0.5     # meters, max xy gap between boxes


@dataclass
class Primitive:
    shape: str                 # box | sphere | cylinder
    cls: str
    instance_id: int           # 0 = untracked obstacle (renders, never votes)
    class_id: int
    color: Tuple[int, int, int]
    color_name: str
    center: np.ndarray
    size: Optional[np.ndarray] = None    # box full extents
    radius: float = 0.0
    height: float = 0.0
    n_points: int = 0

    def aabb(self) -> Aabb3:
        c = self.center
        if self.shape == "box":
            h = self.size / 2.0
            return Aabb3(tuple(c - h), tuple(c + h))
        if self.shape == "sphere":
            r = np.full(3, self.radius)
            return Aabb3(tuple(c - r), tuple(c + r))
        r = np.array([self.radius, self.radius, self.height / 2.0])
        return Aabb3(tuple(c - r), tuple(c + r))

    # -- surface sampling -------------------------------------------------
    def sample_surface(self, rng: np.random.Generator) -> np.ndarray:
        n = self.n_points
        if self.shape == "box":
            return self._sample_box(rng, n)
        if self.shape == "sphere":
            dirs = rng.normal(size=(n, 3))
            dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
            return self.center + self.radius * dirs
        return self._sample_cylinder(rng, n)

    def _sample_box(self, rng, n):
        sx, sy, sz = self.size
        areas = np.array([sy * sz, sy * sz, sx * sz, sx * sz, sx * sy, sx * sy])
        faces = rng.choice(6, size=n, p=areas / areas.sum())
        u = rng.random(n)
        v = rng.random(n)
        pts = np.zeros((n, 3))
        half = self.size / 2.0
        for f in range(6):
            m = faces == f
            axis = f // 2
            sign = 1.0 if f % 2 == 0 else -1.0
            others = [a for a in range(3) if a != axis]
            pts[m, axis] = sign * half[axis]
            pts[m, others[0]] = (u[m] - 0.5) * self.size[others[0]]
            pts[m, others[1]] = (v[m] - 0.5) * self.size[others[1]]
        return self.center + pts

    def _sample_cylinder(self, rng, n):
        r, h = self.radius, self.height
        side_area = 2 * math.pi * r * h
        cap_area = math.pi * r * r
        areas = np.array([side_area, cap_area, cap_area])
        part = rng.choice(3, size=n, p=areas / areas.sum())
        theta = rng.random(n) * 2 * math.pi
        pts = np.zeros((n, 3))
        side = part == 0
        pts[side, 0] = r * np.cos(theta[side])
        pts[side, 1] = r * np.sin(theta[side])
        pts[side, 2] = (rng.random(side.sum()) - 0.5) * h
        for which, zsign in ((1, 1.0), (2, -1.0)):
            m = part == which
            rr = r * np.sqrt(rng.random(m.sum()))
            pts[m, 0] = rr * np.cos(theta[m])
            pts[m, 1] = rr * np.sin(theta[m])
            pts[m, 2] = zsign * h / 2.0
        return self.center + pts

    # -- ray casting -------------------------------------------------------
    def intersect(self, origin: np.ndarray, dirs: np.ndarray) -> np.ndarray:
        """Smallest positive hit parameter per ray, inf on miss.

        Rays are origin + t * dirs with dirs scaled so that t equals the
        camera-space z depth.
        """
        if self.shape == "box":
            return self._intersect_box(origin, dirs)
        if self.shape == "sphere":
            return self._intersect_sphere(origin, dirs)
        return self._intersect_cylinder(origin, dirs)

    def _intersect_box(self, o, d):
        half = self.size / 2.0
        lo, hi = self.center - half, self.center + half
        d_safe = np.where(np.abs(d) < 1e-12, 1e-12, d)
        t1 = (lo - o) / d_safe
        t2 = (hi - o) / d_safe
        tnear = np.minimum(t1, t2).max(axis=1)
        tfar = np.maximum(t1, t2).min(axis=1)
        hit = (tnear <= tfar) & (tfar > _EPS)
        t = np.where(tnear > _EPS, tnear, tfar)
        return np.where(hit, t, np.inf)

    def _intersect_sphere(self, o, d):
        oc = o - self.center
        a = np.sum(d * d, axis=1)
        b = 2.0 * d @ oc
        c0 = oc @ oc - self.radius ** 2
        disc = b * b - 4 * a * c0
        ok = disc >= 0
        sq = np.sqrt(np.where(ok, disc, 0.0))
        t1 = (-b - sq) / (2 * a)
        t2 = (-b + sq) / (2 * a)
        t = np.where(t1 > _EPS, t1, np.where(t2 > _EPS, t2, np.inf))
        return np.where(ok, t, np.inf)

    def _intersect_cylinder(self, o, d):
        cx, cy, cz = self.center
        r, h = self.radius, self.height
        z0, z1 = cz - h / 2.0, cz + h / 2.0
        best = np.full(len(d), np.inf)
        # lateral surface
        ox, oy = o[0] - cx, o[1] - cy
        a = d[:, 0] ** 2 + d[:, 1] ** 2
        b = 2.0 * (d[:, 0] * ox + d[:, 1] * oy)
        c0 = ox * ox + oy * oy - r * r
        disc = b * b - 4 * a * c0
        ok = (disc >= 0) & (a > 1e-12)
        sq = np.sqrt(np.where(ok, disc, 0.0))
        a_safe = np.where(a > 1e-12, a, 1.0)
        for sign in (-1.0, 1.0):
            t = (-b + sign * sq) / (2 * a_safe)
            z = o[2] + t * d[:, 2]
            valid = ok & (t > _EPS) & (z >= z0) & (z <= z1)
            best = np.where(valid & (t < best), t, best)
        # caps
        dz_safe = np.where(np.abs(d[:, 2]) < 1e-12, 1e-12, d[:, 2])
        for zcap in (z0, z1):
            t = (zcap - o[2]) / dz_safe
            px = o[0] + t * d[:, 0] - cx
            py = o[1] + t * d[:, 1] - cy
            valid = (t > _EPS) & (px * px + py * py <= r * r)
            best = np.where(valid & (t < best), t, best)
        return best


@dataclass
class GroundTruth:
    """Exact labels and geometry the generator knows by construction."""
    labels: np.ndarray                    # per-point instance id, -1 for outliers
    class_of: Dict[int, str]
    centroids: Dict[int, np.ndarray]
    aabbs: Dict[int, Aabb3]
    relations: List[Tuple[int, str, int]]

    def to_json_dict(self) -> dict:
        return {
            "format": "ground-truth",
            "version": 1,
            "labels": [int(v) for v in self.labels],
            "classes": {str(k): v for k, v in self.class_of.items()},
            "centroids": {str(k): [float(x) for x in v]
                          for k, v in self.centroids.items()},
            "aabbs": {str(k): {"min": list(v.min), "max": list(v.max)}
                      for k, v in self.aabbs.items()},
            "relations": [[int(s), r, int(d)] for s, r, d in self.relations],
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "GroundTruth":
        return cls(
            labels=np.asarray(data["labels"], dtype=np.int32),
            class_of={int(k): v for k, v in data["classes"].items()},
            centroids={int(k): np.asarray(v, dtype=float)
                       for k, v in data["centroids"].items()},
            aabbs={int(k): Aabb3(tuple(v["min"]), tuple(v["max"]))
                   for k, v in data["aabbs"].items()},
            relations=[(int(s), r, int(d)) for s, r, d in data["relations"]],
        )


def oracle_relations(gt: GroundTruth) -> List[Tuple[int, str, int]]:
    """Above/next-to relations derived from true AABBs.

    "on top of" when the upper box rests on the lower one (vertical contact
    within ON_TOP_TOL, overlapping xy footprints); "next to" (both
    directions) when the xy gap is at most NEXT_TO_GAP and the z ranges
    overlap.
    """
    rels = []
    ids = sorted(gt.aabbs)
    for a in ids:
        for b in ids:
            if a == b:
                continue
            A, B = gt.aabbs[a], gt.aabbs[b]
            xy_overlap = (A.min[0] < B.max[0] and B.min[0] < A.max[0]
                          and A.min[1] < B.max[1] and B.min[1] < A.max[1])
            if xy_overlap and abs(A.min[2] - B.max[2]) <= ON_TOP_TOL:
                rels.append((a, "on top of", b))
                continue
            z_overlap = A.min[2] <= B.max[2] and B.min[2] <= A.max[2]
            gx = max(0.0, max(A.min[0] - B.max[0], B.min[0] - A.max[0]))
            gy = max(0.0, max(A.min[1] - B.max[1], B.min[1] - A.max[1]))
            gap = math.hypot(gx, gy)
            if z_overlap and not xy_overlap and gap <= NEXT_TO_GAP:
                rels.append((a, "next to", b))
    return rels


# ---------------------------------------------------------------------------
# recipe parsing

def _parse_primitive(spec: dict, instance_id: int, class_id: int,
                     color_idx: int, tracked: bool) -> Primitive:
    shape = spec.get("shape", "box")
    if shape not in ("box", "sphere", "cylinder"):
        raise RecipeError(f"unknown shape {shape!r}")
    cls = spec.get("class", "obstacle")
    color_name, color = PALETTE[color_idx % len(PALETTE)]
    center = np.asarray(spec["center"], dtype=float)
    prim = Primitive(shape=shape, cls=cls,
                     instance_id=instance_id if tracked else 0,
                     class_id=class_id, color=color, color_name=color_name,
                     center=center, n_points=int(spec.get("points", 1200)))
    if shape == "box":
        prim.size = np.asarray(spec["size"], dtype=float)
        if np.any(prim.size <= 0):
            raise RecipeError("box size must be positive")
    elif shape == "sphere":
        prim.radius = float(spec["radius"])
        if prim.radius <= 0:
            raise RecipeError("sphere radius must be positive")
    else:
        prim.radius = float(spec["radius"])
        prim.height = float(spec["height"])
        if prim.radius <= 0 or prim.height <= 0:
            raise RecipeError("cylinder radius/height must be positive")
    return prim


def parse_recipe(recipe: dict):
    objects = recipe.get("objects", [])
    if not objects:
        raise RecipeError("recipe has no objects")
    cam_spec = recipe.get("cameras", {})
    if cam_spec.get("count", 8) < 1:
        raise RecipeError("recipe needs at least one camera")
    class_names = sorted({o.get("class", "object") for o in objects}
                         | {o.get("class", "obstacle") for o in recipe.get("obstacles", [])})
    class_ids = {name: i + 1 for i, name in enumerate(class_names)}
    prims = []
    for i, spec in enumerate(objects):
        cls = spec.get("class", "object")
        prims.append(_parse_primitive(spec, i + 1, class_ids[cls], i, tracked=True))
    for j, spec in enumerate(recipe.get("obstacles", [])):
        cls = spec.get("class", "obstacle")
        prims.append(_parse_primitive(spec, 0, class_ids[cls],
                                      len(objects) + j, tracked=False))
    room = np.asarray(recipe.get("room", [8.0, 8.0, 3.0]), dtype=float)
    for prim in prims:
        box = prim.aabb()
        if (np.any(np.asarray(box.min)[:2] < -room[:2] / 2)
                or np.any(np.asarray(box.max)[:2] > room[:2] / 2)
                or box.max[2] > room[2] or box.min[2] < -0.01):
            raise RecipeError(f"object {prim.cls} exceeds room extents")
    return prims, class_ids, room, cam_spec, recipe.get("noise", {})


# ---------------------------------------------------------------------------
# cameras + rendering

def _look_at_rotation(eye: np.ndarray, target: np.ndarray) -> np.ndarray:
    forward = target - eye
    forward = forward / np.linalg.norm(forward)
    up = np.array([0.0, 0.0, 1.0])
    right = np.cross(forward, up)
    norm = np.linalg.norm(right)
    if norm < 1e-9:  # looking straight up/down
        right = np.array([1.0, 0.0, 0.0])
    else:
        right = right / norm
    down = np.cross(forward, right)
    return np.stack([right, down, forward])  # rows: world->camera


def _camera_ring(prims, cam_spec):
    count = int(cam_spec.get("count", 8))
    width = int(cam_spec.get("width", 320))
    height = int(cam_spec.get("height_px", 240))
    hfov = math.radians(float(cam_spec.get("hfov_deg", 70.0)))
    fx = (width / 2.0) / math.tan(hfov / 2.0)
    centers = np.array([p.center for p in prims if p.instance_id > 0])
    target = np.asarray(cam_spec.get("look_at", centers.mean(axis=0)), dtype=float)
    spread = max(1.0, float(np.max(np.linalg.norm(
        (centers - target)[:, :2], axis=1)))) if len(centers) else 1.0
    radius = float(cam_spec.get("radius") or spread + 2.0)
    cam_h = float(cam_spec.get("height", 1.8))
    cams = []
    for i in range(count):
        ang = 2 * math.pi * i / count
        eye = target + np.array([radius * math.cos(ang), radius * math.sin(ang), 0.0])
        eye[2] = cam_h
        rot = _look_at_rotation(eye, target)
        cams.append({
            "frame_id": i, "fx": fx, "fy": fx,
            "cx": width / 2.0, "cy": height / 2.0,
            "width": width, "height": height,
            "rotation": rot, "translation": -rot @ eye, "eye": eye,
        })
    return cams


def render_views(cam: dict, prims: List[Primitive]):
    """Exact per-pixel nearest-hit render: depth, instance, semantic, rgb."""
    w, h = cam["width"], cam["height"]
    ii, jj = np.meshgrid(np.arange(w), np.arange(h))
    dirs_cam = np.stack([
        (ii.ravel() + 0.5 - cam["cx"]) / cam["fx"],
        (jj.ravel() + 0.5 - cam["cy"]) / cam["fy"],
        np.ones(w * h),
    ], axis=1)
    dirs_world = dirs_cam @ cam["rotation"]          # R^T per row
    eye = cam["eye"]
    best_t = np.full(w * h, np.inf)
    inst = np.zeros(w * h, dtype=np.int32)
    sem = np.zeros(w * h, dtype=np.int32)
    color = np.zeros((w * h, 3), dtype=np.uint8)
    for prim in prims:
        t = prim.intersect(eye, dirs_world)
        closer = t < best_t
        best_t = np.where(closer, t, best_t)
        inst[closer] = prim.instance_id
        sem[closer] = prim.class_id
        color[closer] = prim.color
    depth = np.where(np.isfinite(best_t), best_t, 0.0)
    return (depth.reshape(h, w), inst.reshape(h, w),
            sem.reshape(h, w), color.reshape(h, w, 3))


def _corrupt_mask(mask: np.ndarray, rate: float, rng) -> np.ndarray:
    ids = np.unique(mask)
    if rate <= 0 or len(ids) < 2:
        return mask
    flat = mask.ravel().copy()
    flip = rng.random(flat.size) < rate
    pos = {v: i for i, v in enumerate(ids)}
    cur = np.array([pos[v] for v in flat[flip]])
    offset = rng.integers(1, len(ids), size=cur.size)
    flat[flip] = ids[(cur + offset) % len(ids)]
    return flat.reshape(mask.shape)


# ---------------------------------------------------------------------------
# fixture provider assets

def _caption_entry(cls: str, color_name: str) -> dict:
    phrase, function, _ = CLASS_LEXICON.get(
        cls, (f"a {cls} in the room", "unknown", []))
    caption = f"a {color_name} {cls}: {phrase}"
    return {
        "caption": caption,
        "attributes": {
            "type": cls,
            "colour": color_name,
            "material": "painted composite",
            "shape": "rounded" if cls in ("ball", "vase") else "boxy",
            "function": function,
        },
    }


def _vocabulary(prims: List[Primitive]) -> List[str]:
    terms = set()
    for p in prims:
        if p.instance_id == 0:
            continue
        terms.add(p.cls)
        terms.add(p.color_name)
        _, _, keywords = CLASS_LEXICON.get(p.cls, ("", "", []))
        terms.update(keywords)
    return sorted(terms)


# ---------------------------------------------------------------------------
# top-level generation

def generate_bundle(recipe: dict, seed: int, out_dir) -> Tuple[SceneBundle, GroundTruth]:
    """Render a full bundle + ground truth into out_dir, deterministic per seed."""
    prims, class_ids, room, cam_spec, noise = parse_recipe(recipe)
    rng = np.random.default_rng(seed)
    out = Path(out_dir)
    (out / "frames").mkdir(parents=True, exist_ok=True)

    pts_list, labels_list, colors_list = [], [], []
    for prim in prims:
        pts = prim.sample_surface(rng)
        pts_list.append(pts)
        gt_label = prim.instance_id if prim.instance_id > 0 else -1
        labels_list.append(np.full(len(pts), gt_label, dtype=np.int32))
        colors_list.append(np.tile(np.asarray(prim.color, dtype=np.uint8),
                                   (len(pts), 1)))
    n_outliers = int(noise.get("outlier_points", 0))
    if n_outliers:
        lo = np.array([-room[0] / 2, -room[1] / 2, 0.0])
        hi = np.array([room[0] / 2, room[1] / 2, room[2]])
        pts_list.append(rng.random((n_outliers, 3)) * (hi - lo) + lo)
        labels_list.append(np.full(n_outliers, -1, dtype=np.int32))
        colors_list.append(np.full((n_outliers, 3), 128, dtype=np.uint8))
    # fold to float32 up front: the PLY stores float32, and ground truth
    # must be self-consistent with the cloud a consumer actually reads
    xyz = np.concatenate(pts_list).astype(np.float32).astype(np.float64)
    labels = np.concatenate(labels_list)
    rgb = np.concatenate(colors_list)

    cams = _camera_ring([p for p in prims if p.instance_id > 0] or prims, cam_spec)
    corruption = float(noise.get("mask_corruption", 0.0))
    depth_sigma = float(noise.get("depth_sigma", 0.0))
    frame_entries = []
    for cam in cams:
        depth, inst, sem, color = render_views(cam, prims)
        if corruption > 0:
            inst = _corrupt_mask(inst, corruption, rng)
            sem = _corrupt_mask(sem, corruption, rng)
        if depth_sigma > 0:
            valid = depth > 0
            depth = depth + valid * rng.normal(0.0, depth_sigma, size=depth.shape)
            depth = np.where(valid, np.maximum(depth, 0.01), 0.0)
        fdir = out / "frames" / f"{cam['frame_id']:03d}"
        fdir.mkdir(parents=True, exist_ok=True)
        # full float precision: rotations rounded to 6 decimals would fail
        # the orthonormality invariant
        pose = {
            "frame_id": cam["frame_id"], "fx": cam["fx"], "fy": cam["fy"],
            "cx": cam["cx"], "cy": cam["cy"],
            "width": cam["width"], "height": cam["height"],
            "rotation": [[float(v) for v in row] for row in cam["rotation"]],
            "translation": [float(v) for v in cam["translation"]],
        }
        with open(fdir / "pose.json", "w", encoding="utf-8", newline="\n") as f:
            json.dump(pose, f, sort_keys=True)
            f.write("\n")
        write_depth(fdir / "depth.depth", depth)
        write_mask(fdir / "semantic.png", sem)
        write_mask(fdir / "instance.png", inst)
        write_rgb(fdir / "rgb.png", color)
        frame_entries.append({"frame_id": cam["frame_id"],
                              "dir": f"frames/{cam['frame_id']:03d}"})

    write_ply(out / "cloud.ply", xyz, rgb)

    tracked = [p for p in prims if p.instance_id > 0]
    centroids, aabbs = {}, {}
    for prim in tracked:
        member = labels == prim.instance_id
        centroids[prim.instance_id] = xyz[member].mean(axis=0)
        aabbs[prim.instance_id] = Aabb3(tuple(xyz[member].min(axis=0)),
                                        tuple(xyz[member].max(axis=0)))
    gt = GroundTruth(labels=labels,
                     class_of={p.instance_id: p.cls for p in tracked},
                     centroids=centroids, aabbs=aabbs, relations=[])
    gt.relations = oracle_relations(gt)

    manifest = {
        "format": "scene-bundle",
        "version": MANIFEST_VERSION,
        "scene_id": recipe.get("name", f"synthetic-{seed}"),
        "units": "meters",
        "coordinate_convention": COORDINATE_NOTE,
        "point_cloud": "cloud.ply",
        "classes": {str(cid): name for name, cid in class_ids.items()},
        "colors": {str(p.instance_id): list(p.color) for p in tracked},
        "frames": frame_entries,
        "config": recipe.get("config", {}),
    }
    canonical_write(out / "manifest.json", manifest)
    canonical_write(out / "ground_truth.json", gt.to_json_dict())

    providers = {
        "captions": {p.cls: _caption_entry(p.cls, p.color_name) for p in tracked},
        "vocab": _vocabulary(prims),
        "color_classes": {",".join(str(c) for c in p.color): p.cls for p in tracked},
    }
    canonical_write(out / "providers.json", providers)
    return load_bundle(out), gt


def load_ground_truth(bundle_dir) -> GroundTruth:
    with open(Path(bundle_dir) / "ground_truth.json", "r", encoding="utf-8") as f:
        return GroundTruth.from_json_dict(json.load(f))
