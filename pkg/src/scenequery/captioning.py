"""Two-stage multi-view captioning and structured attribute extraction.

Stage 1 captions each selected view crop (with the panoptic class as a
hint the model may overrule); stage 2 synthesizes one unified description
and a structured attribute block. The refined object class is the
attribute "type" — this is how mislabeled panoptic classes get corrected
(e.g. a bowl recaptioned as a vase).
"""

import json
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

from .errors import AttributeParseError, CaptionUnavailable, NoViews, ProviderError

ATTRIBUTE_FIELDS = ("type", "colour", "material", "shape", "function",
                    "texture", "pattern", "confidence_note")


@dataclass
class ObjectAttributes:
    type: str
    colour: Optional[str] = None
    material: Optional[str] = None
    shape: Optional[str] = None
    function: Optional[str] = None
    texture: Optional[str] = None
    pattern: Optional[str] = None
    confidence_note: Optional[str] = None

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in ATTRIBUTE_FIELDS
                if getattr(self, k) is not None}


@dataclass
class CaptionRecord:
    object_id: int
    per_view_captions: List[Tuple[int, str]]
    unified_caption: str
    attributes: Optional[ObjectAttributes]
    original_class: str
    refined_class: str
    warnings: List[str] = field(default_factory=list)

    def to_json_dict(self) -> dict:
        return {
            "object_id": self.object_id,
            "per_view_captions": [[fid, text] for fid, text in self.per_view_captions],
            "unified_caption": self.unified_caption,
            "attributes": self.attributes.to_dict() if self.attributes else None,
            "original_class": self.original_class,
            "refined_class": self.refined_class,
            "warnings": list(self.warnings),
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "CaptionRecord":
        attrs = data.get("attributes")
        return cls(
            object_id=int(data["object_id"]),
            per_view_captions=[(int(f), t) for f, t in data["per_view_captions"]],
            unified_caption=data["unified_caption"],
            attributes=extract_attributes(attrs) if attrs else None,
            original_class=data["original_class"],
            refined_class=data["refined_class"],
            warnings=list(data.get("warnings", [])),
        )


def extract_attributes(raw) -> ObjectAttributes:
    """Parse/validate a structured attribute block (JSON text or mapping).

    Requires a non-empty "type"; values are lowercased and trimmed; unknown
    provider fields are ignored.
    """
    if isinstance(raw, str):
        try:
            raw = json.loads(raw)
        except json.JSONDecodeError as e:
            raise AttributeParseError(f"attribute block is not valid JSON: {e}")
    if not isinstance(raw, dict):
        raise AttributeParseError("attribute block must be a JSON object")
    cleaned = {}
    for key in ATTRIBUTE_FIELDS:
        value = raw.get(key)
        if value is None:
            continue
        if not isinstance(value, str):
            raise AttributeParseError(f"attribute {key!r} must be a string")
        cleaned[key] = value.strip().lower()
    if not cleaned.get("type"):
        raise AttributeParseError("attribute block is missing a non-empty 'type'")
    return ObjectAttributes(**cleaned)


def correct_label(original_class: str, attributes: ObjectAttributes) -> str:
    """The attribute type wins when it disagrees with the panoptic class."""
    if attributes.type and attributes.type.lower() != original_class.lower():
        return attributes.type
    return original_class


def caption_object(object_id: int, hint_class: str, views, provider) -> CaptionRecord:
    """Caption one object from its view crops.

    views: list of (frame_id, crop image). Per-view provider failures are
    tolerated while at least one view succeeds; total failure raises
    CaptionUnavailable.
    """
    if not views:
        raise NoViews(f"object {object_id}: no views to caption")
    per_view = []
    warnings = []
    for frame_id, crop in views:
        try:
            per_view.append((frame_id, provider.per_view(crop, hint_class)))
        except ProviderError as e:
            warnings.append(f"view {frame_id}: {e}")
    if not per_view:
        raise CaptionUnavailable(
            f"object {object_id}: caption provider failed on all views")
    try:
        unified, raw_attributes = provider.synthesize(
            [text for _, text in per_view], hint_class)
    except ProviderError as e:
        raise CaptionUnavailable(f"object {object_id}: synthesis failed ({e})")
    attributes = None
    refined = hint_class
    try:
        attributes = extract_attributes(raw_attributes)
        refined = correct_label(hint_class, attributes)
    except AttributeParseError as e:
        warnings.append(f"attributes: {e}")
    return CaptionRecord(object_id, per_view, unified, attributes,
                         hint_class, refined, warnings)
