"""Frame-level scene graphs, aggregation into a 3D scene graph, metric edge
pruning, canonical serialization, and scene consolidation diffing."""

import json
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from .canonical import canonical_dumps
from .captioning import CaptionRecord, ObjectAttributes, extract_attributes
from .errors import GraphParseError, IdMismatch
from .geometry import Aabb3, PointCloud, aabb_of, centroid_of
from .labeling import InstanceLabeling

GRAPH_FORMAT = "scene-graph"
GRAPH_VERSION = 1


@dataclass
class SceneObject:
    object_id: int
    cls: str
    caption: str
    attributes: Optional[ObjectAttributes]
    centroid: np.ndarray
    aabb: Aabb3
    point_indices: np.ndarray

    def __post_init__(self):
        self.centroid = np.asarray(self.centroid, dtype=float).reshape(3)
        self.point_indices = np.asarray(self.point_indices, dtype=np.int64)
        if len(self.point_indices) == 0:
            raise ValueError(f"object {self.object_id} has no member points")
        if not self.aabb.contains(self.centroid):
            raise ValueError(f"object {self.object_id}: centroid outside aabb")

    def info(self) -> dict:
        """Plain-dict view used by relation providers and RAG contexts."""
        return {
            "object_id": self.object_id,
            "class": self.cls,
            "centroid": [float(v) for v in self.centroid],
            "aabb": {"min": list(self.aabb.min), "max": list(self.aabb.max)},
        }


@dataclass(frozen=True)
class RelationEdge:
    src: int
    dst: int
    relation: str
    support: int = 1

    def __post_init__(self):
        if self.src == self.dst:
            raise ValueError("edge endpoints must differ")
        if self.support < 1:
            raise ValueError("edge support must be at least 1")


@dataclass
class FrameGraph:
    frame_id: int
    node_ids: List[int]
    edges: List[RelationEdge] = field(default_factory=list)
    warnings: List[str] = field(default_factory=list)


@dataclass
class SceneGraph3D:
    nodes: Dict[int, SceneObject] = field(default_factory=dict)
    edges: List[RelationEdge] = field(default_factory=list)

    def validate(self) -> None:
        seen = set()
        for e in self.edges:
            if e.src not in self.nodes or e.dst not in self.nodes:
                raise GraphParseError(
                    f"edge {e.src}->{e.dst} references a missing node")
            key = (e.src, e.dst, e.relation)
            if key in seen:
                raise GraphParseError(f"duplicate edge triple {key}")
            seen.add(key)


@dataclass
class SceneChange:
    kind: str          # added | removed | moved | relabeled
    object_id: int
    detail: dict = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        return {"kind": self.kind, "object_id": self.object_id,
                "detail": self.detail}


# ---------------------------------------------------------------------------
# construction

def build_frame_graph(frame_id: int, frame_objects: List[dict], relation_provider,
                      pair_radius: float) -> FrameGraph:
    """Relation inference over one frame's objects.

    frame_objects are info dicts ({"object_id", "centroid", ...}); only
    ordered pairs with centroid distance <= pair_radius reach the provider.
    Provider failures skip the pair with a warning; "none" adds no edge.
    """
    graph = FrameGraph(frame_id, [o["object_id"] for o in frame_objects])
    for a in frame_objects:
        for b in frame_objects:
            if a["object_id"] == b["object_id"]:
                continue
            dist = np.linalg.norm(np.asarray(a["centroid"]) - np.asarray(b["centroid"]))
            if dist > pair_radius:
                continue
            try:
                rel = relation_provider.relation(a, b)
            except Exception as e:
                graph.warnings.append(
                    f"pair {a['object_id']}->{b['object_id']}: {e}")
                continue
            if rel and rel != "none":
                graph.edges.append(RelationEdge(a["object_id"], b["object_id"], rel))
    return graph


def aggregate_graphs(frame_graphs: List[FrameGraph], labeling: InstanceLabeling,
                     cloud: PointCloud,
                     captions: Optional[Dict[int, CaptionRecord]] = None) -> SceneGraph3D:
    """Merge frame graphs into one 3D scene graph.

    One node per instance with centroid/aabb over its refined points; edge
    supports sum across frames; conflicting relations for the same ordered
    pair keep the highest support (lexicographic tie-break).
    """
    captions = captions or {}
    instance_ids = labeling.instance_ids()
    unknown = set(captions) - set(instance_ids)
    if unknown:
        raise IdMismatch(f"caption records for unknown instances: {sorted(unknown)}")

    nodes: Dict[int, SceneObject] = {}
    for k in instance_ids:
        members = labeling.points_of(k)
        pts = cloud.xyz[members]
        record = captions.get(k)
        cls = record.refined_class if record else labeling.class_of.get(k, "unknown")
        nodes[k] = SceneObject(
            object_id=k, cls=cls,
            caption=record.unified_caption if record else "",
            attributes=record.attributes if record else None,
            centroid=centroid_of(pts), aabb=aabb_of(pts), point_indices=members)

    support: Dict[Tuple[int, int, str], int] = {}
    for fg in frame_graphs:
        for e in fg.edges:
            if e.src not in nodes or e.dst not in nodes:
                continue
            key = (e.src, e.dst, e.relation)
            support[key] = support.get(key, 0) + e.support
    by_pair: Dict[Tuple[int, int], List[Tuple[str, int]]] = {}
    for (src, dst, rel), count in support.items():
        by_pair.setdefault((src, dst), []).append((rel, count))
    edges = []
    for (src, dst), cands in by_pair.items():
        rel, count = min(cands, key=lambda rc: (-rc[1], rc[0]))
        edges.append(RelationEdge(src, dst, rel, count))
    edges.sort(key=lambda e: (e.src, e.dst, e.relation))
    graph = SceneGraph3D(nodes, edges)
    graph.validate()
    return graph


def prune_edges(graph: SceneGraph3D, max_dist: float = 1.0) -> SceneGraph3D:
    """Keep edges whose endpoint centroids are within max_dist (inclusive)."""
    if max_dist <= 0:
        raise ValueError("max_dist must be positive")
    kept = []
    for e in graph.edges:
        d = np.linalg.norm(graph.nodes[e.src].centroid - graph.nodes[e.dst].centroid)
        if d <= max_dist:
            kept.append(e)
    return SceneGraph3D(dict(graph.nodes), kept)


# ---------------------------------------------------------------------------
# consolidation (pre-scanned graph vs freshly observed graph)

def _match_nodes(prescanned: SceneGraph3D, observed: SceneGraph3D,
                 match_radius: float):
    """Two-pass matching: same class + nearest centroid, then proximity-only
    (those pairs are relabel candidates). Returns (matches, relabels)."""
    pre_ids = sorted(prescanned.nodes)
    obs_ids = sorted(observed.nodes)
    taken = set()
    matches: Dict[int, int] = {}      # observed id -> prescanned id
    for oid in obs_ids:
        obs = observed.nodes[oid]
        candidates = []
        for pid in pre_ids:
            if pid in taken:
                continue
            pre = prescanned.nodes[pid]
            if pre.cls.lower() != obs.cls.lower():
                continue
            d = float(np.linalg.norm(pre.centroid - obs.centroid))
            if d <= match_radius:
                candidates.append((d, pid))
        if candidates:
            _, pid = min(candidates)
            matches[oid] = pid
            taken.add(pid)
    relabels: Dict[int, int] = {}
    for oid in obs_ids:
        if oid in matches:
            continue
        obs = observed.nodes[oid]
        candidates = []
        for pid in pre_ids:
            if pid in taken:
                continue
            d = float(np.linalg.norm(prescanned.nodes[pid].centroid - obs.centroid))
            if d <= match_radius:
                candidates.append((d, pid))
        if candidates:
            _, pid = min(candidates)
            relabels[oid] = pid
            taken.add(pid)
    return matches, relabels


def consolidate(prescanned: SceneGraph3D, observed: SceneGraph3D,
                move_threshold: float,
                match_radius: float = 0.5) -> Tuple[SceneGraph3D, List[SceneChange]]:
    """Diff an observed graph against the pre-scanned one.

    Matched nodes take the observed geometry but keep pre-scanned
    attributes/captions; proximity-only matches are relabels and take the
    observed class/attributes; unmatched nodes become added/removed.
    """
    matches, relabels = _match_nodes(prescanned, observed, match_radius)
    changes: List[SceneChange] = []
    updated_nodes: Dict[int, SceneObject] = {}
    obs_to_updated: Dict[int, int] = {}

    matched_pre = set(matches.values()) | set(relabels.values())
    for pid in sorted(prescanned.nodes):
        if pid not in matched_pre:
            changes.append(SceneChange("removed", pid,
                                       {"class": prescanned.nodes[pid].cls}))

    next_id = max(list(prescanned.nodes) + list(observed.nodes), default=0) + 1
    for oid in sorted(observed.nodes):
        obs = observed.nodes[oid]
        if oid in matches or oid in relabels:
            relabeled = oid in relabels
            pid = relabels[oid] if relabeled else matches[oid]
            pre = prescanned.nodes[pid]
            displacement = float(np.linalg.norm(pre.centroid - obs.centroid))
            if relabeled:
                changes.append(SceneChange("relabeled", pid,
                                           {"old_class": pre.cls,
                                            "new_class": obs.cls}))
            if displacement > move_threshold:
                changes.append(SceneChange("moved", pid, {
                    "displacement": displacement,
                    "old_centroid": [float(v) for v in pre.centroid],
                    "new_centroid": [float(v) for v in obs.centroid]}))
            source = obs if relabeled else pre
            updated_nodes[pid] = SceneObject(
                object_id=pid, cls=source.cls, caption=source.caption,
                attributes=source.attributes, centroid=obs.centroid,
                aabb=obs.aabb, point_indices=obs.point_indices)
            obs_to_updated[oid] = pid
        else:
            new_id = oid if oid not in prescanned.nodes else next_id
            if new_id == next_id:
                next_id += 1
            updated_nodes[new_id] = SceneObject(
                object_id=new_id, cls=obs.cls, caption=obs.caption,
                attributes=obs.attributes, centroid=obs.centroid,
                aabb=obs.aabb, point_indices=obs.point_indices)
            obs_to_updated[oid] = new_id
            changes.append(SceneChange("added", new_id, {"class": obs.cls}))

    seen = set()
    edges: List[RelationEdge] = []
    for e in prescanned.edges:
        if e.src in updated_nodes and e.dst in updated_nodes:
            edges.append(e)
            seen.add((e.src, e.dst, e.relation))
    for e in observed.edges:
        src = obs_to_updated.get(e.src)
        dst = obs_to_updated.get(e.dst)
        if src is None or dst is None:
            continue
        key = (src, dst, e.relation)
        if key not in seen:
            edges.append(RelationEdge(src, dst, e.relation, e.support))
            seen.add(key)
    edges.sort(key=lambda e: (e.src, e.dst, e.relation))

    order = {"removed": 0, "relabeled": 1, "moved": 2, "added": 3}
    changes.sort(key=lambda c: (order[c.kind], c.object_id))
    updated = SceneGraph3D(updated_nodes, edges)
    updated.validate()
    return updated, changes


# ---------------------------------------------------------------------------
# canonical serialization

def graph_to_json_dict(graph: SceneGraph3D) -> dict:
    nodes = {}
    for k in sorted(graph.nodes):
        n = graph.nodes[k]
        nodes[str(k)] = {
            "object_id": n.object_id,
            "class": n.cls,
            "caption": n.caption,
            "attributes": n.attributes.to_dict() if n.attributes else None,
            "centroid": [float(v) for v in n.centroid],
            "aabb": {"min": list(n.aabb.min), "max": list(n.aabb.max)},
            "point_indices": [int(i) for i in n.point_indices],
        }
    edges = [{"src": e.src, "dst": e.dst, "relation": e.relation,
              "support": e.support}
             for e in sorted(graph.edges, key=lambda e: (e.src, e.dst, e.relation))]
    return {"format": GRAPH_FORMAT, "version": GRAPH_VERSION,
            "nodes": nodes, "edges": edges}


def serialize(graph: SceneGraph3D) -> str:
    """Byte-stable canonical JSON (sorted keys, 6-decimal floats)."""
    return canonical_dumps(graph_to_json_dict(graph))


def deserialize(data) -> SceneGraph3D:
    """Parse canonical graph JSON (str or dict); GraphParseError on violations."""
    if isinstance(data, str):
        try:
            data = json.loads(data)
        except json.JSONDecodeError as e:
            raise GraphParseError(f"invalid JSON: {e}")
    if not isinstance(data, dict) or data.get("format") != GRAPH_FORMAT:
        raise GraphParseError("not a scene-graph document")
    if data.get("version") != GRAPH_VERSION:
        raise GraphParseError(f"unsupported graph version {data.get('version')!r}")
    nodes: Dict[int, SceneObject] = {}
    try:
        for key, n in data.get("nodes", {}).items():
            attrs = extract_attributes(n["attributes"]) if n.get("attributes") else None
            node = SceneObject(
                object_id=int(n["object_id"]), cls=n["class"],
                caption=n.get("caption", ""), attributes=attrs,
                centroid=np.asarray(n["centroid"], dtype=float),
                aabb=Aabb3(tuple(n["aabb"]["min"]), tuple(n["aabb"]["max"])),
                point_indices=np.asarray(n["point_indices"], dtype=np.int64))
            if int(key) != node.object_id:
                raise GraphParseError(f"node key {key} != object_id {node.object_id}")
            nodes[node.object_id] = node
        edges = [RelationEdge(int(e["src"]), int(e["dst"]), e["relation"],
                              int(e.get("support", 1)))
                 for e in data.get("edges", [])]
    except GraphParseError:
        raise
    except Exception as e:
        raise GraphParseError(f"malformed scene graph: {e}")
    graph = SceneGraph3D(nodes, edges)
    graph.validate()
    return graph
