"""Scene-bundle file formats and loading.

A bundle directory holds:
    manifest.json          scene id, conventions, class/color tables, frame list
    cloud.ply              binary little-endian PLY (x,y,z float32, rgb uint8)
    frames/<nnn>/pose.json 3x3 row-major world->camera rotation + translation,
                           intrinsics and image size
    frames/<nnn>/depth.depth     raw little-endian float32 meters, row-major
    frames/<nnn>/semantic.png    16-bit grayscale PNG, pixel value = class id
    frames/<nnn>/instance.png    16-bit grayscale PNG, pixel value = instance id
    frames/<nnn>/rgb.png         8-bit RGB render (optional)
    derived/               pipeline outputs + hashes.json ledger
Everything is bit-exact and parseable without exotic dependencies.
"""

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np
from PIL import Image

from .errors import BundleError
from .geometry import CameraFrame, CameraIntrinsics, PointCloud

MANIFEST_VERSION = 1
COORDINATE_NOTE = ("world: right-handed, meters, z-up; "
                   "camera: x right, y down, z forward; "
                   "pixel lookups floor to integer indices")


# ---------------------------------------------------------------------------
# low-level format helpers

def write_ply(path, xyz: np.ndarray, rgb: Optional[np.ndarray] = None) -> None:
    xyz = np.asarray(xyz, dtype="<f4").reshape(-1, 3)
    n = len(xyz)
    header = ["ply", "format binary_little_endian 1.0", f"element vertex {n}",
              "property float x", "property float y", "property float z"]
    if rgb is not None:
        rgb = np.asarray(rgb, dtype=np.uint8).reshape(-1, 3)
        header += ["property uchar red", "property uchar green", "property uchar blue"]
    header.append("end_header")
    with open(path, "wb") as f:
        f.write(("\n".join(header) + "\n").encode("ascii"))
        if rgb is None:
            f.write(xyz.tobytes())
        else:
            row = np.dtype([("xyz", "<f4", 3), ("rgb", "u1", 3)])
            packed = np.empty(n, dtype=row)
            packed["xyz"] = xyz
            packed["rgb"] = rgb
            f.write(packed.tobytes())


def read_ply(path) -> PointCloud:
    with open(path, "rb") as f:
        data = f.read()
    end = data.find(b"end_header\n")
    if end < 0:
        raise BundleError(f"{path}: not a PLY file")
    header = data[:end].decode("ascii", errors="replace").splitlines()
    body = data[end + len(b"end_header\n"):]
    n = None
    props = []
    for line in header:
        parts = line.split()
        if parts[:2] == ["element", "vertex"]:
            n = int(parts[2])
        elif parts and parts[0] == "property" and n is not None:
            props.append(parts[2])
        elif parts[:2] == ["format", "binary_little_endian"]:
            pass
    if n is None:
        raise BundleError(f"{path}: missing vertex element")
    has_rgb = "red" in props
    row = np.dtype([("xyz", "<f4", 3), ("rgb", "u1", 3)] if has_rgb
                   else [("xyz", "<f4", 3)])
    expected = n * row.itemsize
    if len(body) < expected:
        raise BundleError(f"{path}: truncated vertex data")
    packed = np.frombuffer(body[:expected], dtype=row)
    rgb = packed["rgb"].copy() if has_rgb else None
    return PointCloud(packed["xyz"].astype(np.float64), rgb)


def write_depth(path, depth: np.ndarray) -> None:
    np.asarray(depth, dtype="<f4").tofile(path)


def read_depth(path, width: int, height: int) -> np.ndarray:
    raw = np.fromfile(path, dtype="<f4")
    if raw.size != width * height:
        raise BundleError(
            f"{path}: depth has {raw.size} values, expected {width * height}")
    return raw.reshape(height, width).astype(np.float64)


def write_mask(path, mask: np.ndarray) -> None:
    arr = np.asarray(mask)
    if arr.min() < 0 or arr.max() > 0xFFFF:
        raise ValueError("mask ids must fit uint16")
    Image.fromarray(arr.astype(np.uint16)).save(path)


def read_mask(path) -> np.ndarray:
    return np.asarray(Image.open(path), dtype=np.int64).astype(np.int32)


def write_rgb(path, rgb: np.ndarray) -> None:
    Image.fromarray(np.asarray(rgb, dtype=np.uint8), mode="RGB").save(path)


def read_rgb(path) -> np.ndarray:
    return np.asarray(Image.open(path).convert("RGB"), dtype=np.uint8)


def write_pgm(path, occupied: np.ndarray) -> None:
    with open(path, "wb") as f:
        f.write(pgm_bytes(occupied))


def pgm_bytes(occupied: np.ndarray) -> bytes:
    """Binary PGM: occupied cells 0 (black), free 255."""
    occ = np.asarray(occupied, dtype=bool)
    h, w = occ.shape
    img = np.where(occ, 0, 255).astype(np.uint8)
    return f"P5\n{w} {h}\n255\n".encode("ascii") + img.tobytes()


def read_pgm(path) -> np.ndarray:
    """Inverse of pgm_bytes: boolean occupancy (pixel 0 = occupied)."""
    with open(path, "rb") as f:
        data = f.read()
    parts = data.split(b"\n", 3)
    if parts[0] != b"P5" or len(parts) < 4:
        raise BundleError(f"{path}: not a binary PGM")
    w, h = (int(v) for v in parts[1].split())
    img = np.frombuffer(parts[3][:w * h], dtype=np.uint8).reshape(h, w)
    return img == 0


# ---------------------------------------------------------------------------
# bundle

@dataclass
class SceneBundle:
    path: Path
    manifest: dict
    _cloud: Optional[PointCloud] = field(default=None, repr=False)
    _frames: Optional[List[CameraFrame]] = field(default=None, repr=False)

    @property
    def scene_id(self) -> str:
        return self.manifest["scene_id"]

    @property
    def class_names(self) -> Dict[int, str]:
        return {int(k): v for k, v in self.manifest.get("classes", {}).items()}

    @property
    def instance_colors(self) -> Dict[int, tuple]:
        return {int(k): tuple(v) for k, v in self.manifest.get("colors", {}).items()}

    @property
    def config_overrides(self) -> dict:
        return dict(self.manifest.get("config", {}))

    @property
    def derived_dir(self) -> Path:
        return self.path / "derived"

    def cloud(self) -> PointCloud:
        if self._cloud is None:
            self._cloud = read_ply(self.path / self.manifest["point_cloud"])
        return self._cloud

    def load_frame(self, entry: dict) -> CameraFrame:
        fdir = self.path / entry["dir"]
        try:
            with open(fdir / "pose.json", "r", encoding="utf-8") as f:
                pose = json.load(f)
        except (OSError, json.JSONDecodeError) as e:
            raise BundleError(f"frame {entry['dir']}: bad pose.json ({e})")
        try:
            intr = CameraIntrinsics(pose["fx"], pose["fy"], pose["cx"], pose["cy"],
                                    pose["width"], pose["height"])
            depth = read_depth(fdir / "depth.depth", intr.width, intr.height)
            sem = read_mask(fdir / "semantic.png")
            inst = read_mask(fdir / "instance.png")
            rgb_path = fdir / "rgb.png"
            rgb = read_rgb(rgb_path) if rgb_path.exists() else None
            return CameraFrame(pose["frame_id"], intr,
                               np.asarray(pose["rotation"], dtype=float),
                               np.asarray(pose["translation"], dtype=float),
                               depth, sem, inst, rgb)
        except (KeyError, ValueError, BundleError) as e:
            raise BundleError(f"frame {entry['dir']}: {e}")

    def frames(self) -> List[CameraFrame]:
        if self._frames is None:
            self._frames = [self.load_frame(e) for e in self.manifest["frames"]]
        return self._frames


def load_bundle(path) -> SceneBundle:
    """Parse and validate a bundle directory; file contents load lazily."""
    path = Path(path)
    manifest_path = path / "manifest.json"
    if not manifest_path.exists():
        raise BundleError(f"{path}: missing manifest.json")
    try:
        with open(manifest_path, "r", encoding="utf-8") as f:
            manifest = json.load(f)
    except json.JSONDecodeError as e:
        raise BundleError(f"{manifest_path}: invalid JSON ({e})")
    if manifest.get("format") != "scene-bundle":
        raise BundleError(f"{manifest_path}: format field must be 'scene-bundle'")
    if manifest.get("version") != MANIFEST_VERSION:
        raise BundleError(
            f"{manifest_path}: unsupported version {manifest.get('version')!r}")
    for key in ("scene_id", "point_cloud", "frames"):
        if key not in manifest:
            raise BundleError(f"{manifest_path}: missing field '{key}'")
    if not (path / manifest["point_cloud"]).exists():
        raise BundleError(f"{path}: missing point cloud {manifest['point_cloud']}")
    for entry in manifest["frames"]:
        fdir = path / entry["dir"]
        for name in ("pose.json", "depth.depth", "semantic.png", "instance.png"):
            if not (fdir / name).exists():
                raise BundleError(f"frame {entry['dir']}: missing {name}")
    return SceneBundle(path, manifest)
