"""Lift consistent 2D panoptic masks into a per-point 3D instance labeling.

Pipeline: per-point vote histograms over visible frames -> majority vote ->
radius-based label propagation for unseen points -> per-instance DBSCAN
refinement -> per-instance semantic class by mask IoU majority.

Instance ids are the mask pixel values; 0 is the background/stuff sentinel
and never votes. Unlabeled points carry the sentinel -1.
"""

from collections import deque
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from .config import EngineConfig
from .errors import EmptyPointSet, MaskShapeMismatch, NoFrames, NoSemanticMasks
from .geometry import CameraFrame, DepthTolerance, PointCloud, visibility_mask

UNLABELED = 0
VOTED = 1
PROPAGATED = 2

PROVENANCE_NAMES = {UNLABELED: "unlabeled", VOTED: "voted", PROPAGATED: "propagated"}


@dataclass(frozen=True)
class DbscanParams:
    eps: float
    min_pts: int

    def __post_init__(self):
        if self.eps <= 0:
            raise ValueError("eps must be positive")
        if self.min_pts < 1:
            raise ValueError("min_pts must be at least 1")


@dataclass
class InstanceLabeling:
    """Per-point instance assignment plus per-instance semantic classes."""
    labels: np.ndarray                  # (N,) int32, -1 = unlabeled
    class_of: Dict[int, str]
    provenance: np.ndarray              # (N,) uint8, see PROVENANCE_NAMES
    warnings: List[str] = field(default_factory=list)
    refine_flags: set = field(default_factory=set)

    def instance_ids(self) -> List[int]:
        ids = np.unique(self.labels)
        return [int(i) for i in ids if i > 0]

    def points_of(self, instance_id: int) -> np.ndarray:
        return np.nonzero(self.labels == instance_id)[0]

    def to_json_dict(self) -> dict:
        counts = {name: int((self.provenance == code).sum())
                  for code, name in PROVENANCE_NAMES.items()}
        instances = {}
        for k in self.instance_ids():
            instances[str(k)] = {
                "class": self.class_of.get(k, "unknown"),
                "points": int((self.labels == k).sum()),
                "refine_warning": k in self.refine_flags,
            }
        return {
            "format": "instance-labeling",
            "version": 1,
            "labels": [int(v) for v in self.labels],
            "provenance": [PROVENANCE_NAMES[int(p)] for p in self.provenance],
            "provenance_counts": counts,
            "instances": instances,
            "warnings": list(self.warnings),
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "InstanceLabeling":
        codes = {name: code for code, name in PROVENANCE_NAMES.items()}
        labels = np.asarray(data["labels"], dtype=np.int32)
        prov = np.array([codes[p] for p in data["provenance"]], dtype=np.uint8)
        class_of = {int(k): v["class"] for k, v in data.get("instances", {}).items()}
        flags = {int(k) for k, v in data.get("instances", {}).items()
                 if v.get("refine_warning")}
        return cls(labels, class_of, prov, list(data.get("warnings", [])), flags)


# ---------------------------------------------------------------------------
# semantic-class assignment (highest-IoU rule)

def mask_iou(a: np.ndarray, b: np.ndarray) -> float:
    """|a & b| / |a | b|; 0.0 when both masks are empty."""
    if a.shape != b.shape:
        raise MaskShapeMismatch(f"mask shapes differ: {a.shape} vs {b.shape}")
    a = np.asarray(a, dtype=bool)
    b = np.asarray(b, dtype=bool)
    union = int(np.logical_or(a, b).sum())
    if union == 0:
        return 0.0
    return float(np.logical_and(a, b).sum() / union)


def assign_semantic_class(instance_mask: np.ndarray,
                          semantic_masks: Dict[str, np.ndarray]) -> str:
    """Class whose mask maximises IoU with the instance mask.

    Ties break lexicographically by class name; a best IoU of zero yields
    the reserved class "unknown".
    """
    if not semantic_masks:
        raise NoSemanticMasks("no semantic masks supplied")
    best_name, best_iou = None, -1.0
    for name in sorted(semantic_masks):
        iou = mask_iou(instance_mask, semantic_masks[name])
        if iou > best_iou:
            best_name, best_iou = name, iou
    return "unknown" if best_iou == 0.0 else best_name


# ---------------------------------------------------------------------------
# vote accumulation + majority

def accumulate_votes(cloud: PointCloud, frames: List[CameraFrame],
                     tol: DepthTolerance = DepthTolerance()) -> np.ndarray:
    """Per-point (N, C) vote histogram over frames where the point is visible.

    C is one past the highest instance id present; the background id 0
    contributes no votes, so column 0 stays zero.
    """
    num_ids = 1
    for frame in frames:
        num_ids = max(num_ids, int(frame.instance_mask.max()) + 1)
    votes = np.zeros((len(cloud), num_ids), dtype=np.int32)
    for frame in frames:
        visible, uv, _ = visibility_mask(cloud.xyz, frame, tol)
        idx = np.nonzero(visible)[0]
        if idx.size == 0:
            continue
        ui = np.floor(uv[idx, 0]).astype(int)
        vi = np.floor(uv[idx, 1]).astype(int)
        inst = frame.instance_mask[vi, ui]
        keep = inst > 0
        np.add.at(votes, (idx[keep], inst[keep].astype(int)), 1)
    return votes


def majority_label(histogram) -> int:
    """Argmax over counts; -1 when all counts are zero; smallest id on ties."""
    h = np.asarray(histogram)
    if h.sum() == 0:
        return -1
    return int(np.argmax(h))


def majority_labels(votes: np.ndarray) -> np.ndarray:
    labels = np.argmax(votes, axis=1).astype(np.int32)
    labels[votes.sum(axis=1) == 0] = -1
    return labels


# ---------------------------------------------------------------------------
# exact radius neighborhoods via a uniform spatial hash grid

class _GridIndex:
    """Uniform hash grid with cell size = radius; exact ball queries."""

    def __init__(self, pts: np.ndarray, cell: float):
        self.pts = pts
        self.cell = cell
        keys = np.floor(pts / cell).astype(np.int64)
        cells: Dict[tuple, list] = {}
        for i, key in enumerate(map(tuple, keys)):
            cells.setdefault(key, []).append(i)
        self.cells = {k: np.asarray(v, dtype=np.int64) for k, v in cells.items()}
        self.keys = keys

    def _candidates(self, key: tuple) -> np.ndarray:
        found = []
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                for dz in (-1, 0, 1):
                    block = self.cells.get((key[0] + dx, key[1] + dy, key[2] + dz))
                    if block is not None:
                        found.append(block)
        return np.concatenate(found) if found else np.empty(0, dtype=np.int64)

    def neighbor_lists(self, radius: float,
                       query: Optional[np.ndarray] = None) -> Dict[int, np.ndarray]:
        """Indices within `radius` (inclusive, self included) per query point.

        Batched cell-by-cell so the distance math stays vectorized.
        """
        if query is None:
            query = np.arange(len(self.pts))
        out: Dict[int, np.ndarray] = {}
        by_cell: Dict[tuple, list] = {}
        for i in query:
            by_cell.setdefault(tuple(self.keys[i]), []).append(int(i))
        r2 = radius * radius
        for key, members in by_cell.items():
            cand = self._candidates(key)
            cand_pts = self.pts[cand]
            for i in members:
                d2 = np.sum((cand_pts - self.pts[i]) ** 2, axis=1)
                out[i] = cand[d2 <= r2]
        return out


# ---------------------------------------------------------------------------
# DBSCAN (deterministic: cluster ids by first core point index)

def dbscan(points, params: DbscanParams) -> np.ndarray:
    """Standard DBSCAN over 3D points; returns per-point cluster ids, -1 = noise.

    A core point has >= min_pts neighbors within eps, itself included.
    Clusters are grown to completion from core points in index order, so a
    border point reachable from several clusters joins the earliest one.
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    n = len(pts)
    labels = np.full(n, -1, dtype=np.int32)
    if n == 0:
        return labels
    neigh = _GridIndex(pts, params.eps).neighbor_lists(params.eps)
    core = np.array([len(neigh[i]) >= params.min_pts for i in range(n)])
    cluster = 0
    for seed in range(n):
        if labels[seed] != -1 or not core[seed]:
            continue
        labels[seed] = cluster
        queue = deque([seed])
        while queue:
            j = queue.popleft()
            for nb in neigh[j]:
                if labels[nb] == -1:
                    labels[nb] = cluster
                    if core[nb]:
                        queue.append(int(nb))
        cluster += 1
    return labels


def refine_instance(points, params: DbscanParams):
    """Keep the largest DBSCAN cluster (core + border) of one instance.

    Returns (keep_mask, warning). When DBSCAN finds no cluster at all the
    original set is retained and the warning flag set. Equal-size clusters
    tie-break to the one containing the lowest point index.
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if len(pts) == 0:
        raise EmptyPointSet("refine of empty instance")
    labels = dbscan(pts, params)
    if labels.max() < 0:
        return np.ones(len(pts), dtype=bool), True
    sizes = np.bincount(labels[labels >= 0])
    best_size = sizes.max()
    candidates = np.nonzero(sizes == best_size)[0]
    winner = min(candidates, key=lambda c: int(np.nonzero(labels == c)[0][0]))
    return labels == winner, False


# ---------------------------------------------------------------------------
# label propagation for points unseen in any view

def propagate_labels(cloud: PointCloud, labeling: InstanceLabeling,
                     radius: float, max_rounds: int) -> InstanceLabeling:
    """Fill unlabeled points from the majority label of nearby labeled points.

    Rounds are synchronous. Voted neighbors take precedence; a point with no
    voted neighbor in its ball falls back to neighbors labeled in *earlier*
    propagation rounds, letting fronts advance one radius per round. Voted
    points are never relabeled.
    """
    if radius <= 0:
        raise ValueError("propagation radius must be positive")
    labels = labeling.labels.copy()
    prov = labeling.provenance.copy()
    pending = np.nonzero(labels < 0)[0]
    if pending.size == 0 or max_rounds <= 0:
        return InstanceLabeling(labels, dict(labeling.class_of), prov,
                                list(labeling.warnings), set(labeling.refine_flags))
    grid = _GridIndex(cloud.xyz, radius)
    neigh = grid.neighbor_lists(radius, pending)
    for _ in range(max_rounds):
        assigned = {}
        for i in pending:
            if labels[i] >= 0:
                continue
            nb = neigh[int(i)]
            nb = nb[nb != i]
            if nb.size == 0:
                continue
            src = nb[prov[nb] == VOTED]
            if src.size == 0:
                src = nb[prov[nb] == PROPAGATED]
            if src.size == 0:
                continue
            counts = np.bincount(labels[src])
            assigned[int(i)] = int(np.argmax(counts))
        if not assigned:
            break
        for i, lab in assigned.items():
            labels[i] = lab
            prov[i] = PROPAGATED
    return InstanceLabeling(labels, dict(labeling.class_of), prov,
                            list(labeling.warnings), set(labeling.refine_flags))


# ---------------------------------------------------------------------------
# end-to-end segmentation

def _frame_class_votes(frame: CameraFrame, instance_ids,
                       class_names: Dict[int, str]) -> Dict[int, str]:
    """Per-frame class choice for every listed instance present in the frame."""
    present_inst = [k for k in instance_ids if (frame.instance_mask == k).any()]
    if not present_inst:
        return {}
    sem_ids = [int(c) for c in np.unique(frame.semantic_mask) if c > 0]
    masks = {class_names.get(c, f"class_{c}"): frame.semantic_mask == c
             for c in sem_ids}
    out = {}
    for k in present_inst:
        if not masks:
            out[k] = "unknown"
            continue
        out[k] = assign_semantic_class(frame.instance_mask == k, masks)
    return out


def segment_point_cloud(cloud: PointCloud, frames: List[CameraFrame],
                        config: EngineConfig = EngineConfig(),
                        class_names: Optional[Dict[int, str]] = None) -> InstanceLabeling:
    """Full lifting pipeline: votes -> majority -> propagate -> refine -> classes.

    Points dropped by per-instance refinement revert to unlabeled. The
    semantic class of an instance is chosen per frame by the highest-IoU
    rule, then by majority across frames.
    """
    if not frames:
        raise NoFrames("segmentation needs at least one frame")
    if len(cloud) == 0:
        raise EmptyPointSet("segmentation needs a non-empty point cloud")
    class_names = class_names or {}
    tol = DepthTolerance(config.depth_tol_abs, config.depth_tol_rel)

    votes = accumulate_votes(cloud, frames, tol)
    labels = majority_labels(votes)
    prov = np.where(labels >= 0, VOTED, UNLABELED).astype(np.uint8)
    labeling = InstanceLabeling(labels, {}, prov)
    labeling = propagate_labels(cloud, labeling, config.propagate_radius,
                                config.propagate_rounds)

    params = DbscanParams(config.dbscan_eps, config.dbscan_min_pts)
    labels = labeling.labels
    prov = labeling.provenance
    for k in labeling.instance_ids():
        members = np.nonzero(labels == k)[0]
        keep, warn = refine_instance(cloud.xyz[members], params)
        dropped = members[~keep]
        labels[dropped] = -1
        prov[dropped] = UNLABELED
        if warn:
            labeling.refine_flags.add(k)

    remaining = labeling.instance_ids()
    per_frame = [_frame_class_votes(f, remaining, class_names) for f in frames]
    class_of = {}
    for k in remaining:
        tally: Dict[str, int] = {}
        for frame_votes in per_frame:
            if k in frame_votes:
                tally[frame_votes[k]] = tally.get(frame_votes[k], 0) + 1
        if tally:
            class_of[k] = min(tally, key=lambda name: (-tally[name], name))
        else:
            class_of[k] = "unknown"
    labeling.class_of = class_of

    if not remaining:
        labeling.warnings.append("EmptySegmentation: no point received a label")
    return labeling
