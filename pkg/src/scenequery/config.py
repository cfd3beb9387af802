"""Engine configuration: every tolerance and default in one place.

Values can be overridden per bundle (manifest "config" block) or by an
explicit config file; environment variables override provider endpoints
only (SCENEQUERY_CAPTION_URL, SCENEQUERY_EMBED_URL, SCENEQUERY_LLM_URL).
"""

import dataclasses
import json
from dataclasses import dataclass


@dataclass
class EngineConfig:
    # depth-consistency visibility
    depth_tol_abs: float = 0.02     # meters
    depth_tol_rel: float = 0.01

    # label lifting
    propagate_radius: float = 0.05  # meters
    propagate_rounds: int = 3
    dbscan_eps: float = 0.05        # meters
    dbscan_min_pts: int = 10

    # captioning
    caption_views: int = 3
    caption_scale: float = 1.2

    # scene graph
    pair_radius: float = 1.5        # meters, relation-inference filter
    prune_dist: float = 1.0         # meters, edge retention
    match_radius: float = 0.5       # meters, consolidation matching
    move_threshold: float = 0.1     # meters

    # embedding / retrieval
    view_count: int = 10
    crop_scales: tuple = (1.0, 1.2, 1.4)
    doc_threshold: float = 0.25
    image_threshold: float = 0.2
    score_band: float = 0.02        # adaptive inclusion around best score
    top_k: int = 5

    # navigation grid
    grid_cell: float = 0.05         # meters
    band_z_min: float = 0.05        # meters
    band_z_max: float = 1.5
    inflation_radius: float = 0.3   # meters
    grid_margin: float = 2.0        # free border around the scene AABB

    # providers
    provider_timeout: float = 10.0  # seconds
    provider_retries: int = 2
    max_inflight: int = 4

    def merged(self, overrides: dict) -> "EngineConfig":
        """Return a copy with the given key/value overrides applied."""
        if not overrides:
            return self
        known = {f.name for f in dataclasses.fields(self)}
        unknown = set(overrides) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        values = dataclasses.asdict(self)
        values.update(overrides)
        values["crop_scales"] = tuple(values["crop_scales"])
        return EngineConfig(**values)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["crop_scales"] = list(d["crop_scales"])
        return d

    @classmethod
    def from_file(cls, path) -> "EngineConfig":
        with open(path, "r", encoding="utf-8") as f:
            return cls().merged(json.load(f))
