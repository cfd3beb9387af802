import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from scenequery.pipeline import build_scene_dir
from scenequery.synthetic import generate_bundle

# one small scene reused by graph/query/eval/service/cli tests:
# table+book stacked, chair next to them, sofa/vase/plant spread out
DEMO_RECIPE = {
    "name": "demo-room",
    "room": [8, 8, 3],
    "config": {"dbscan_eps": 0.08},
    "objects": [
        {"class": "chair", "shape": "box", "center": [1.2, 0.0, 0.25],
         "size": [0.5, 0.5, 0.5], "points": 2000},
        {"class": "sofa", "shape": "box", "center": [-1.2, 0.8, 0.3],
         "size": [1.2, 0.6, 0.6], "points": 2500},
        {"class": "vase", "shape": "cylinder", "center": [0.0, -1.5, 0.2],
         "radius": 0.15, "height": 0.4, "points": 1500},
        {"class": "table", "shape": "box", "center": [1.75, 0.1, 0.2],
         "size": [0.4, 0.4, 0.4], "points": 2000},
        {"class": "book", "shape": "box", "center": [1.75, 0.1, 0.45],
         "size": [0.2, 0.25, 0.08], "points": 1200},
        {"class": "plant", "shape": "sphere", "center": [-1.0, -1.2, 0.35],
         "radius": 0.3, "points": 1800},
    ],
    "cameras": {"count": 10, "height": 1.8, "width": 320, "height_px": 240},
}

DEMO_SEED = 11


@pytest.fixture(scope="session")
def demo_bundle_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("demo") / "bundle"
    generate_bundle(DEMO_RECIPE, DEMO_SEED, out)
    return out


@pytest.fixture(scope="session")
def demo_scene(demo_bundle_dir):
    return build_scene_dir(demo_bundle_dir)


@pytest.fixture(scope="session")
def demo_gt(demo_bundle_dir):
    from scenequery.synthetic import load_ground_truth
    return load_ground_truth(demo_bundle_dir)
