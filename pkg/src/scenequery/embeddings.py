"""Per-object embeddings and exact cosine retrieval.

Image-side vectors average multi-view, multi-scale crop embeddings (top
visible views, minimum-area crops enlarged for context). Doc-side vectors
embed a deterministic text rendering of each node. Retrieval is an exact
scan — object counts are small, so nothing approximate is worth its
nondeterminism; the persisted format reserves an "ann" field anyway.
"""

import json
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from .config import EngineConfig
from .errors import DimensionMismatch, EmptyIndex, NoVisibleViews
from .geometry import (CameraFrame, DepthTolerance, crop_rect, enlarge_box,
                       min_area_bbox_2d, visibility_mask)
from .graph import SceneGraph3D, SceneObject

INDEX_FORMAT = "embedding-index"
INDEX_VERSION = 1


@dataclass
class EmbeddingIndex:
    provider_name: str
    dimension: int
    image_vectors: Dict[int, np.ndarray] = field(default_factory=dict)
    doc_vectors: Dict[int, np.ndarray] = field(default_factory=dict)
    provider: Optional[object] = None      # re-attached after load, not persisted

    def side(self, name: str) -> Dict[int, np.ndarray]:
        if name == "image":
            return self.image_vectors
        if name == "doc":
            return self.doc_vectors
        raise ValueError(f"unknown index side {name!r}")

    def save(self, path) -> None:
        image_ids = sorted(self.image_vectors)
        doc_ids = sorted(self.doc_vectors)
        header = {"format": INDEX_FORMAT, "version": INDEX_VERSION,
                  "provider": self.provider_name, "dimension": self.dimension,
                  "image_ids": image_ids, "doc_ids": doc_ids, "ann": None}
        rows = [self.image_vectors[i] for i in image_ids]
        rows += [self.doc_vectors[i] for i in doc_ids]
        body = (np.stack(rows).astype("<f4").tobytes() if rows else b"")
        with open(path, "wb") as f:
            f.write(json.dumps(header, sort_keys=True).encode("utf-8") + b"\n")
            f.write(body)

    @classmethod
    def load(cls, path, provider=None) -> "EmbeddingIndex":
        with open(path, "rb") as f:
            raw = f.read()
        nl = raw.find(b"\n")
        header = json.loads(raw[:nl].decode("utf-8"))
        if header.get("format") != INDEX_FORMAT or header.get("version") != INDEX_VERSION:
            raise ValueError(f"{path}: not a supported embedding index")
        dim = header["dimension"]
        body = np.frombuffer(raw[nl + 1:], dtype="<f4").reshape(-1, dim)
        idx = cls(header["provider"], dim, provider=provider)
        off = 0
        for i in header["image_ids"]:
            idx.image_vectors[int(i)] = body[off].astype(np.float64)
            off += 1
        for i in header["doc_ids"]:
            idx.doc_vectors[int(i)] = body[off].astype(np.float64)
            off += 1
        return idx


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionMismatch(f"vector shapes differ: {a.shape} vs {b.shape}")
    return float(a @ b)


# ---------------------------------------------------------------------------
# view selection + crop embedding

def select_views(points_xyz: np.ndarray, frames: List[CameraFrame],
                 tol: DepthTolerance = DepthTolerance(), k: int = 10) -> List[int]:
    """Frame ids ranked by how many of the object's points pass the
    visibility check; top k, ties to the smaller frame id."""
    if k < 1:
        raise ValueError("k must be at least 1")
    counts = []
    for frame in frames:
        visible, _, _ = visibility_mask(points_xyz, frame, tol)
        n = int(visible.sum())
        if n > 0:
            counts.append((-n, frame.frame_id))
    if not counts:
        raise NoVisibleViews("object is not visible in any frame")
    counts.sort()
    return [fid for _, fid in counts[:k]]


def object_crops(points_xyz: np.ndarray, frame: CameraFrame,
                 tol: DepthTolerance = DepthTolerance(),
                 scales=(1.0, 1.2, 1.4)) -> List[np.ndarray]:
    """RGB crops around the visible projected points at the given scales."""
    if frame.rgb is None:
        raise ValueError(f"frame {frame.frame_id} has no RGB image to crop")
    visible, uv, _ = visibility_mask(points_xyz, frame, tol)
    if not visible.any():
        return []
    box = min_area_bbox_2d(uv[visible])
    crops = []
    for scale in scales:
        scaled = enlarge_box(box, scale) if scale > 1.0 else box
        u0, v0, u1, v1 = crop_rect(scaled, frame.intrinsics.width,
                                   frame.intrinsics.height)
        crops.append(frame.rgb[v0:v1, u0:u1])
    return crops


def build_object_embedding(points_xyz: np.ndarray, frames: List[CameraFrame],
                           provider, tol: DepthTolerance = DepthTolerance(),
                           k: int = 10, scales=(1.0, 1.2, 1.4)) -> np.ndarray:
    """Mean of all crop embeddings over the selected views, L2-normalized."""
    by_id = {f.frame_id: f for f in frames}
    vectors = []
    for fid in select_views(points_xyz, frames, tol, k):
        for crop in object_crops(points_xyz, by_id[fid], tol, scales):
            vectors.append(np.asarray(provider.embed_image(crop), dtype=np.float64))
    mean = np.mean(vectors, axis=0)
    norm = np.linalg.norm(mean)
    if norm == 0:
        # pathological cancellation; fall back to the first crop's direction
        mean = vectors[0]
        norm = np.linalg.norm(mean)
    return mean / norm


def build_node_document(node: SceneObject) -> str:
    """Deterministic text rendering of a node for doc-side embedding."""
    parts = [node.cls]
    if node.attributes:
        attrs = node.attributes.to_dict()
        parts += [f"{key}: {attrs[key]}" for key in sorted(attrs)]
    if node.caption:
        parts.append(node.caption[:300])
    c = node.centroid
    parts.append(f"centroid ({c[0]:.2f}, {c[1]:.2f}, {c[2]:.2f})")
    lo, hi = node.aabb.min, node.aabb.max
    parts.append("extent ({:.2f}, {:.2f}, {:.2f})".format(
        hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]))
    return ". ".join(parts)


def build_index(graph: SceneGraph3D, cloud, frames: List[CameraFrame],
                provider, config: EngineConfig = EngineConfig()
                ) -> Tuple[EmbeddingIndex, List[str]]:
    """Both index sides for every graph node; returns (index, warnings)."""
    tol = DepthTolerance(config.depth_tol_abs, config.depth_tol_rel)
    index = EmbeddingIndex(type(provider).__name__, provider.dimension,
                           provider=provider)
    warnings = []
    for k in sorted(graph.nodes):
        node = graph.nodes[k]
        pts = cloud.xyz[node.point_indices]
        try:
            index.image_vectors[k] = build_object_embedding(
                pts, frames, provider, tol, config.view_count, config.crop_scales)
        except NoVisibleViews:
            warnings.append(f"object {k}: no visible views, image side skipped")
        index.doc_vectors[k] = provider.embed_text(build_node_document(node))
    return index, warnings


# ---------------------------------------------------------------------------
# retrieval

def query_index(text: str, index: EmbeddingIndex, side: str = "doc",
                top_k: int = 5, threshold: float = 0.0,
                score_band: float = 0.02) -> List[Tuple[int, float]]:
    """Exact cosine scan, ranked (score desc, id asc).

    Entries below `threshold` are dropped; beyond top_k, entries within
    `score_band` of the best score are still included so near-duplicates of
    the best match are never cut.
    """
    entries = index.side(side)
    if not entries:
        raise EmptyIndex(f"index has no {side}-side entries")
    if index.provider is None:
        raise EmptyIndex("index has no embedding provider attached")
    q = np.asarray(index.provider.embed_text(text), dtype=np.float64)
    ids = sorted(entries)
    matrix = np.stack([entries[i] for i in ids])
    if matrix.shape[1] != q.shape[0]:
        raise DimensionMismatch(
            f"query dimension {q.shape[0]} != index dimension {matrix.shape[1]}")
    scores = matrix @ q
    order = sorted(range(len(ids)), key=lambda i: (-scores[i], ids[i]))
    ranked = [(ids[i], float(scores[i])) for i in order
              if scores[i] >= threshold]
    if len(ranked) <= top_k:
        return ranked
    best = ranked[0][1]
    kept = ranked[:top_k]
    for oid, score in ranked[top_k:]:
        if score >= best - score_band:
            kept.append((oid, score))
    return kept
