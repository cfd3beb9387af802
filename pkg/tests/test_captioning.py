import json

import numpy as np
import pytest

from scenequery.captioning import (CaptionRecord, ObjectAttributes,
                                   caption_object, correct_label,
                                   extract_attributes)
from scenequery.errors import (AttributeParseError, CaptionUnavailable,
                               NoViews)
from scenequery.providers import FixtureCaptionProvider

VASE_MAPPING = {
    "vase": {"caption": "a glossy white ceramic vase",
             "attributes": {"type": "vase", "colour": "white",
                            "material": "ceramic"}},
    "bowl": {"caption": "a rounded white vessel holding stems",
             "attributes": {"type": "vase", "colour": "white"}},
    "tv": {"caption": "a dual-screen unit with integrated camera and speakers",
           "attributes": {"type": "video conferencing system",
                          "colour": "white"}},
}

CROP = np.zeros((8, 8, 3), dtype=np.uint8)


class TestExtractAttributes:
    def test_parse_json_text(self):
        attrs = extract_attributes('{"type": "vase", "colour": "white"}')
        assert attrs.type == "vase" and attrs.colour == "white"

    def test_missing_type_rejected(self):
        with pytest.raises(AttributeParseError):
            extract_attributes({"colour": "white"})

    def test_values_lowercase_normalized(self):
        attrs = extract_attributes({"type": " Vase ", "colour": "WHITE"})
        assert attrs.type == "vase" and attrs.colour == "white"

    def test_malformed_json_rejected(self):
        with pytest.raises(AttributeParseError):
            extract_attributes("{not json")

    def test_unknown_fields_ignored(self):
        attrs = extract_attributes({"type": "vase", "price": "cheap"})
        assert attrs.to_dict() == {"type": "vase"}

    def test_non_string_value_rejected(self):
        with pytest.raises(AttributeParseError):
            extract_attributes({"type": "vase", "colour": 3})

    def test_serialization_round_trip_identity(self):
        attrs = extract_attributes({"type": "vase", "colour": "white",
                                    "pattern": "plain"})
        again = extract_attributes(json.dumps(attrs.to_dict()))
        assert again == attrs


class TestCorrectLabel:
    def test_bowl_becomes_vase(self):
        attrs = ObjectAttributes(type="vase")
        assert correct_label("bowl", attrs) == "vase"

    def test_tv_becomes_video_conferencing_system(self):
        attrs = ObjectAttributes(type="video conferencing system")
        assert correct_label("tv", attrs) == "video conferencing system"

    def test_identity_when_agreeing(self):
        attrs = ObjectAttributes(type="chair")
        assert correct_label("chair", attrs) == "chair"

    def test_case_insensitive_comparison(self):
        attrs = ObjectAttributes(type="chair")
        assert correct_label("Chair", attrs) == "Chair"

    def test_never_returns_empty(self):
        attrs = ObjectAttributes(type="vase")
        assert correct_label("", attrs) == "vase"


class TestCaptionObject:
    def test_fixture_round_trip(self):
        provider = FixtureCaptionProvider(VASE_MAPPING)
        views = [(0, CROP), (1, CROP), (2, CROP)]
        record = caption_object(7, "vase", views, provider)
        assert record.object_id == 7
        assert len(record.per_view_captions) == 3
        assert record.unified_caption == "a glossy white ceramic vase"
        assert record.attributes.type == "vase"
        assert record.refined_class == "vase"

    def test_label_correction_through_pipeline(self):
        provider = FixtureCaptionProvider(VASE_MAPPING)
        record = caption_object(3, "bowl", [(0, CROP)], provider)
        assert record.original_class == "bowl"
        assert record.refined_class == "vase"

    def test_partial_view_failure_tolerated(self):
        provider = FixtureCaptionProvider(VASE_MAPPING)
        calls = {"n": 0}
        orig = provider.per_view

        def flaky(image, hint):
            calls["n"] += 1
            if calls["n"] == 2:
                from scenequery.errors import ProviderError
                raise ProviderError("transient")
            return orig(image, hint)

        provider.per_view = flaky
        record = caption_object(1, "vase", [(0, CROP), (1, CROP), (2, CROP)],
                                provider)
        assert len(record.per_view_captions) == 2
        assert record.unified_caption

    def test_all_views_fail(self):
        provider = FixtureCaptionProvider(VASE_MAPPING, fail_hints={"vase"})
        with pytest.raises(CaptionUnavailable):
            caption_object(1, "vase", [(0, CROP)], provider)

    def test_zero_views_rejected(self):
        provider = FixtureCaptionProvider(VASE_MAPPING)
        with pytest.raises(NoViews):
            caption_object(1, "vase", [], provider)

    def test_deterministic_record(self):
        provider = FixtureCaptionProvider(VASE_MAPPING)
        views = [(0, CROP), (1, CROP)]
        a = caption_object(1, "tv", views, provider).to_json_dict()
        b = caption_object(1, "tv", views, provider).to_json_dict()
        assert json.dumps(a, sort_keys=True) == json.dumps(b, sort_keys=True)

    def test_record_json_round_trip(self):
        provider = FixtureCaptionProvider(VASE_MAPPING)
        record = caption_object(2, "tv", [(0, CROP)], provider)
        back = CaptionRecord.from_json_dict(record.to_json_dict())
        assert back.to_json_dict() == record.to_json_dict()
