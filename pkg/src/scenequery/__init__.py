"""scenequery: an object-centric queryable 3D scene engine.

Fuses panoptic 2D segmentation with 3D point clouds into an attributed
scene graph plus an embedding index, answers natural-language object
queries, and serves centroids/bounding boxes/navigation paths over REST.
"""

__version__ = "0.1.0"

from .config import EngineConfig
from .errors import EngineError

__all__ = ["EngineConfig", "EngineError", "__version__"]
