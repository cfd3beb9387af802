"""Bundle -> SceneState orchestration.

Stages (segment -> caption -> graph -> index -> grid) persist their outputs
under <bundle>/derived/ with a hashes.json ledger of input/config/output
content hashes. Re-runs skip stages whose recorded input hashes still match
and whose outputs verify — so a rebuild with nothing changed executes zero
stages, and any input edit invalidates exactly the stages downstream of it.
"""

import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from .bundle import SceneBundle, load_bundle, write_pgm
from .canonical import canonical_dumps, canonical_write
from .captioning import CaptionRecord, caption_object
from .config import EngineConfig
from .embeddings import EmbeddingIndex, build_index, object_crops
from .errors import CaptionUnavailable, EngineError, NoViews, NoVisibleViews
from .geometry import DepthTolerance
from .graph import (SceneGraph3D, aggregate_graphs, build_frame_graph,
                    deserialize, prune_edges, serialize)
from .labeling import InstanceLabeling, segment_point_cloud
from .nav import OccupancyGrid, rasterize_occupancy
from .providers import (FixtureAnswerProvider, GeometricRelationProvider,
                        Providers, resolve_providers)

STAGES = ("labeling", "captions", "graph", "index", "grid")


@dataclass
class SceneState:
    bundle: SceneBundle
    config: EngineConfig
    providers: Providers
    labeling: Optional[InstanceLabeling] = None
    captions: Dict[int, CaptionRecord] = field(default_factory=dict)
    graph: Optional[SceneGraph3D] = None
    index: Optional[EmbeddingIndex] = None
    grid: Optional[OccupancyGrid] = None
    statuses: Dict[str, str] = field(default_factory=dict)
    warnings: List[str] = field(default_factory=list)
    build_hash: str = ""

    @property
    def scene_id(self) -> str:
        return self.bundle.scene_id

    @property
    def object_count(self) -> int:
        return len(self.graph.nodes) if self.graph else 0


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _file_hash(path: Path) -> str:
    return _sha256(path.read_bytes())


def _bundle_input_hash(bundle: SceneBundle) -> str:
    digest = hashlib.sha256()
    files = [bundle.path / bundle.manifest["point_cloud"]]
    for entry in bundle.manifest["frames"]:
        fdir = bundle.path / entry["dir"]
        files += [fdir / n for n in ("pose.json", "depth.depth",
                                     "semantic.png", "instance.png")]
        if (fdir / "rgb.png").exists():
            files.append(fdir / "rgb.png")
    for f in files:
        digest.update(f.name.encode())
        digest.update(f.read_bytes())
    return digest.hexdigest()


def _stage_key(inputs_hash: str, config: EngineConfig, extra: str = "") -> str:
    return _sha256((inputs_hash + canonical_dumps(config.to_dict()) + extra)
                   .encode("utf-8"))


class _Ledger:
    def __init__(self, derived: Path):
        self.path = derived / "hashes.json"
        self.data = {}
        if self.path.exists():
            try:
                with open(self.path, "r", encoding="utf-8") as f:
                    self.data = json.load(f)
            except json.JSONDecodeError:
                self.data = {}

    def fresh(self, stage: str, key: str, derived: Path) -> bool:
        entry = self.data.get(stage)
        if not entry or entry.get("key") != key:
            return False
        for name, digest in entry.get("outputs", {}).items():
            path = derived / name
            if not path.exists() or _file_hash(path) != digest:
                return False
        return True

    def record(self, stage: str, key: str, derived: Path, outputs: List[str]):
        self.data[stage] = {
            "key": key,
            "outputs": {name: _file_hash(derived / name) for name in outputs},
        }

    def save(self) -> str:
        ordered = {s: self.data[s] for s in STAGES if s in self.data}
        build_hash = _sha256(canonical_dumps(ordered).encode("utf-8"))
        ordered["build_hash"] = build_hash
        canonical_write(self.path, ordered)
        return build_hash


def effective_config(bundle: SceneBundle,
                     overrides: Optional[dict] = None) -> EngineConfig:
    """defaults < bundle manifest config < explicit overrides."""
    return EngineConfig().merged(bundle.config_overrides).merged(overrides or {})


# ---------------------------------------------------------------------------
# stage implementations

def _run_captions(state: SceneState) -> Dict[int, CaptionRecord]:
    cfg = state.config
    tol = DepthTolerance(cfg.depth_tol_abs, cfg.depth_tol_rel)
    frames = state.bundle.frames()
    by_id = {f.frame_id: f for f in frames}
    cloud = state.bundle.cloud()
    from .embeddings import select_views

    def caption_one(k: int):
        pts = cloud.xyz[state.labeling.points_of(k)]
        hint = state.labeling.class_of.get(k, "unknown")
        try:
            view_ids = select_views(pts, frames, tol, cfg.caption_views)
            views = []
            for fid in view_ids:
                crops = object_crops(pts, by_id[fid], tol, (cfg.caption_scale,))
                if crops:
                    views.append((fid, crops[0]))
            return k, caption_object(k, hint, views, state.providers.caption), None
        except (NoVisibleViews, NoViews, CaptionUnavailable) as e:
            return k, CaptionRecord(k, [], "", None, hint, hint,
                                    warnings=[str(e)]), str(e)

    # per-object tasks are independent; bound in-flight provider requests
    ids = state.labeling.instance_ids()
    with ThreadPoolExecutor(max_workers=max(1, cfg.max_inflight)) as pool:
        results = list(pool.map(caption_one, ids))
    records: Dict[int, CaptionRecord] = {}
    for k, record, problem in results:
        records[k] = record
        if problem:
            state.warnings.append(f"captions: object {k} degraded ({problem})")
    return records


def _node_infos(state: SceneState) -> Dict[int, dict]:
    cloud = state.bundle.cloud()
    infos = {}
    for k in state.labeling.instance_ids():
        pts = cloud.xyz[state.labeling.points_of(k)]
        record = state.captions.get(k)
        cls = record.refined_class if record else state.labeling.class_of.get(k, "unknown")
        infos[k] = {
            "object_id": k,
            "class": cls,
            "centroid": [float(v) for v in pts.mean(axis=0)],
            "aabb": {"min": [float(v) for v in pts.min(axis=0)],
                     "max": [float(v) for v in pts.max(axis=0)]},
        }
    return infos


def _run_graph(state: SceneState) -> SceneGraph3D:
    cfg = state.config
    infos = _node_infos(state)
    provider = state.providers.relation or GeometricRelationProvider()
    frame_graphs = []
    for frame in state.bundle.frames():
        present = np.unique(frame.instance_mask)
        objs = [infos[int(i)] for i in present if int(i) in infos]
        fg = build_frame_graph(frame.frame_id, objs, provider, cfg.pair_radius)
        state.warnings.extend(f"graph frame {frame.frame_id}: {w}"
                              for w in fg.warnings)
        frame_graphs.append(fg)
    graph = aggregate_graphs(frame_graphs, state.labeling, state.bundle.cloud(),
                             state.captions or None)
    return prune_edges(graph, cfg.prune_dist)


# ---------------------------------------------------------------------------
# build

def build_scene(bundle: SceneBundle, config: Optional[EngineConfig] = None,
                providers: Optional[Providers] = None,
                force: bool = False) -> SceneState:
    """Run (or reuse) every pipeline stage; artifacts persist in derived/."""
    config = config or effective_config(bundle)
    providers = providers or resolve_providers(bundle.path, config)
    if providers.answer is None:
        providers.answer = FixtureAnswerProvider()
    state = SceneState(bundle, config, providers)
    derived = bundle.derived_dir
    derived.mkdir(exist_ok=True)
    ledger = _Ledger(derived)
    inputs = _bundle_input_hash(bundle)

    # -- labeling
    key = _stage_key(inputs, config, "labeling")
    if not force and ledger.fresh("labeling", key, derived):
        with open(derived / "labeling.json", "r", encoding="utf-8") as f:
            state.labeling = InstanceLabeling.from_json_dict(json.load(f))
        state.statuses["labeling"] = "skipped"
    else:
        state.labeling = segment_point_cloud(bundle.cloud(), bundle.frames(),
                                             config, bundle.class_names)
        state.warnings.extend(state.labeling.warnings)
        canonical_write(derived / "labeling.json", state.labeling.to_json_dict())
        ledger.record("labeling", key, derived, ["labeling.json"])
        state.statuses["labeling"] = "built"

    # -- captions
    caption_name = type(providers.caption).__name__ if providers.caption else "none"
    key = _stage_key(inputs, config, "captions:" + caption_name)
    if not force and ledger.fresh("captions", key, derived):
        with open(derived / "captions.json", "r", encoding="utf-8") as f:
            data = json.load(f)
        state.captions = {int(k): CaptionRecord.from_json_dict(v)
                          for k, v in data.get("records", {}).items()}
        state.statuses["captions"] = "degraded" if data.get("degraded") else "skipped"
    else:
        if providers.caption is None:
            state.captions = {}
            state.warnings.append(
                "captions: no provider, keeping panoptic classes")
            state.statuses["captions"] = "degraded"
            payload = {"records": {}, "degraded": True}
        else:
            state.captions = _run_captions(state)
            state.statuses["captions"] = "built"
            payload = {"records": {str(k): r.to_json_dict()
                                   for k, r in state.captions.items()},
                       "degraded": False}
        canonical_write(derived / "captions.json", payload)
        ledger.record("captions", key, derived, ["captions.json"])

    # -- graph
    key = _stage_key(inputs, config, "graph:" + caption_name)
    if not force and ledger.fresh("graph", key, derived):
        with open(derived / "scene_graph.json", "r", encoding="utf-8") as f:
            state.graph = deserialize(f.read())
        state.statuses["graph"] = "skipped"
    else:
        state.graph = _run_graph(state)
        (derived / "scene_graph.json").write_text(serialize(state.graph),
                                                  encoding="utf-8")
        ledger.record("graph", key, derived, ["scene_graph.json"])
        state.statuses["graph"] = "built"

    # -- embedding index
    embed_name = type(providers.embedding).__name__ if providers.embedding else "none"
    key = _stage_key(inputs, config, "index:" + embed_name + caption_name)
    if providers.embedding is None:
        state.statuses["index"] = "degraded"
        state.warnings.append("index: no embedding provider, queries unavailable")
    elif not force and ledger.fresh("index", key, derived):
        state.index = EmbeddingIndex.load(derived / "index.qsre",
                                          providers.embedding)
        state.statuses["index"] = "skipped"
    else:
        state.index, warnings = build_index(state.graph, bundle.cloud(),
                                            bundle.frames(),
                                            providers.embedding, config)
        state.warnings.extend(f"index: {w}" for w in warnings)
        state.index.save(derived / "index.qsre")
        ledger.record("index", key, derived, ["index.qsre"])
        state.statuses["index"] = "built"

    # -- occupancy grid
    key = _stage_key(inputs, config, "grid")
    if not force and ledger.fresh("grid", key, derived):
        with open(derived / "grid.json", "r", encoding="utf-8") as f:
            meta = json.load(f)
        from .bundle import read_pgm
        occupied = read_pgm(derived / "grid.pgm")
        state.grid = OccupancyGrid(tuple(meta["origin"]), meta["cell_size"],
                                   meta["width"], meta["height"], occupied,
                                   meta["inflation_radius"])
        state.statuses["grid"] = "skipped"
    else:
        state.grid = rasterize_occupancy(
            bundle.cloud(), config.grid_cell,
            (config.band_z_min, config.band_z_max), config.inflation_radius,
            margin=config.grid_margin)
        canonical_write(derived / "grid.json", state.grid.to_json_dict())
        write_pgm(derived / "grid.pgm", state.grid.occupied)
        ledger.record("grid", key, derived, ["grid.json", "grid.pgm"])
        state.statuses["grid"] = "built"

    state.build_hash = ledger.save()
    return state


def build_scene_dir(path, overrides: Optional[dict] = None,
                    providers: Optional[Providers] = None,
                    force: bool = False) -> SceneState:
    bundle = load_bundle(path)
    return build_scene(bundle, effective_config(bundle, overrides),
                       providers, force)
