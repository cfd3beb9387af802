"""Exception types shared across the engine."""


class EngineError(Exception):
    """Base class for scenequery errors."""


class EmptyPointSet(EngineError):
    pass


class MaskShapeMismatch(EngineError):
    pass


class NoSemanticMasks(EngineError):
    pass


class NoFrames(EngineError):
    pass


class NoViews(EngineError):
    pass


class NoVisibleViews(EngineError):
    pass


class CaptionUnavailable(EngineError):
    pass


class AttributeParseError(EngineError):
    pass


class ProviderError(EngineError):
    pass


class IdMismatch(EngineError):
    pass


class GraphParseError(EngineError):
    pass


class DimensionMismatch(EngineError):
    pass


class EmptyIndex(EngineError):
    pass


class InvalidGroundTruth(EngineError):
    pass


class BadRequest(EngineError):
    pass


class GoalUnreachable(EngineError):
    pass


class PathNotFound(EngineError):
    pass


class StartBlocked(EngineError):
    pass


class BundleError(EngineError):
    pass


class RecipeError(EngineError):
    pass
