import json

import numpy as np
import pytest

from scenequery.errors import BadRequest, ProviderError
from scenequery.querying import (Query, classify_mode, extract_target_terms,
                                 query_point_cloud, query_scene_graph,
                                 route_query, two_step_query)


class TestRouting:
    def test_negation_mode_maps_to_two_step(self, demo_scene):
        r = route_query(Query("anything to sit on other than a chair?",
                              mode="negation"), demo_scene)
        assert r.route_taken == "two_step"

    def test_affordance_mode_maps_to_two_step(self, demo_scene):
        r = route_query(Query("somewhere to sit", mode="affordance"),
                        demo_scene)
        assert r.route_taken == "two_step"

    def test_explicit_route_overrides_mode(self, demo_scene):
        r = route_query(Query("anything to sit on other than a chair?",
                              mode="negation", route="point_cloud"),
                        demo_scene)
        assert r.route_taken == "point_cloud"

    def test_auto_mode_classification(self):
        assert classify_mode("anything to sit on other than a chair?") == "negation"
        assert classify_mode("something soft, unlike a table") == "negation"
        assert classify_mode("where is the vase?") == "descriptive"
        # "not" must match as a word, not inside "nothing"
        assert classify_mode("is there nothing here?") == "descriptive"

    def test_empty_text_rejected(self, demo_scene):
        with pytest.raises(BadRequest):
            route_query(Query("   "), demo_scene)

    def test_unknown_route_rejected(self, demo_scene):
        with pytest.raises(BadRequest):
            route_query(Query("hello", route="warp"), demo_scene)

    def test_unknown_mode_rejected(self, demo_scene):
        with pytest.raises(BadRequest):
            route_query(Query("hello", mode="interpretive-dance"), demo_scene)


class TestPointCloudRoute:
    def test_plant_decoration_query(self, demo_scene):
        r = query_point_cloud(Query("any plant decoration in the room?"),
                              demo_scene)
        assert r.hits
        assert r.hits[0].cls == "plant"

    def test_no_match_above_threshold_is_valid_empty(self, demo_scene):
        r = query_point_cloud(Query("xylophone quartet"), demo_scene)
        assert r.hits == []

    def test_top_k_one(self, demo_scene):
        r = query_point_cloud(Query("the vase", top_k=1), demo_scene)
        assert len(r.hits) == 1
        assert r.hits[0].cls == "vase"

    def test_hits_carry_geometry_consistent_with_graph(self, demo_scene):
        r = query_point_cloud(Query("the green sofa"), demo_scene)
        for h in r.hits:
            node = demo_scene.graph.nodes[h.object_id]
            assert h.aabb.contains(h.centroid)
            assert np.allclose(h.centroid, node.centroid)


class TestSceneGraphRoute:
    def test_vase_lookup_with_geometry(self, demo_scene):
        r = query_scene_graph(Query("where is the vase?"), demo_scene)
        assert r.hits and r.hits[0].cls == "vase"
        assert r.hits[0].centroid is not None

    def test_no_hits_message(self, demo_scene):
        r = query_scene_graph(Query("zzz nothing matches this"), demo_scene)
        assert r.hits == []
        assert r.answer_text == "No relevant objects found."

    def test_answer_provider_cites_hits(self, demo_scene):
        r = query_scene_graph(Query("where is the vase?"), demo_scene,
                              answer_provider=demo_scene.providers.answer)
        assert r.answer_text
        assert r.answer_object_ids
        hit_ids = {h.object_id for h in r.hits}
        assert set(r.answer_object_ids) <= hit_ids

    def test_provider_failure_degrades_with_warning(self, demo_scene):
        class Broken:
            def answer(self, *a, **k):
                raise ProviderError("llm offline")

        r = query_scene_graph(Query("where is the vase?"), demo_scene,
                              answer_provider=Broken())
        assert r.hits
        assert any("degraded" in w for w in r.warnings)


class FakeHit:
    def __init__(self, cls):
        self.cls = cls


class FakeResult:
    def __init__(self, classes):
        self.hits = [FakeHit(c) for c in classes]


class TestExtractTerms:
    def test_exclusion_after_cue(self):
        q = Query("Anything to sit on other than a chair?")
        terms = extract_target_terms(q, FakeResult(["sofa", "chair"]))
        assert terms == ["sofa"]

    def test_no_cue_keeps_all(self):
        q = Query("somewhere to put books")
        terms = extract_target_terms(q, FakeResult(["shelf"]))
        assert terms == ["shelf"]

    def test_empty_hits_empty_terms(self):
        q = Query("anything else?")
        assert extract_target_terms(q, FakeResult([])) == []

    def test_class_named_after_cue_never_survives(self):
        for text in ("something other than a sofa",
                     "something unlike the sofa",
                     "anything, not the sofa",
                     "all seating except sofa"):
            terms = extract_target_terms(Query(text),
                                         FakeResult(["chair", "sofa"]))
            assert "sofa" not in terms, text

    def test_term_provider_wins_when_healthy(self):
        class Term:
            def extract(self, text, entities):
                return ["bench"]

        q = Query("anything to sit on other than a chair?")
        assert extract_target_terms(q, FakeResult(["sofa", "chair"]),
                                    Term()) == ["bench"]

    def test_term_provider_failure_falls_back(self):
        class Broken:
            def extract(self, text, entities):
                raise ProviderError("down")

        q = Query("anything to sit on other than a chair?")
        assert extract_target_terms(q, FakeResult(["sofa", "chair"]),
                                    Broken()) == ["sofa"]

    def test_dedupes_preserving_rank_order(self):
        q = Query("seating")
        terms = extract_target_terms(q, FakeResult(["sofa", "chair", "sofa"]))
        assert terms == ["sofa", "chair"]


class TestTwoStep:
    def test_negation_fixture(self, demo_scene):
        r = two_step_query(Query("anything to sit on other than a chair?"),
                           demo_scene)
        classes = {h.cls for h in r.hits}
        assert "sofa" in classes
        assert "chair" not in classes
        assert r.extracted_terms == ["sofa"]

    def test_point_cloud_route_fails_same_query(self, demo_scene):
        r = query_point_cloud(Query("anything to sit on other than a chair?"),
                              demo_scene)
        classes = {h.cls for h in r.hits}
        assert "sofa" not in classes  # the failure the two-step path fixes

    def test_composition_equals_union_of_term_queries(self, demo_scene):
        q = Query("the sofa next to the chair")
        r = two_step_query(q, demo_scene)
        merged = {}
        for term in r.extracted_terms:
            sub = query_point_cloud(Query(term, top_k=q.top_k), demo_scene)
            for h in sub.hits:
                merged[h.object_id] = max(h.score,
                                          merged.get(h.object_id, -1.0))
        expect = sorted(merged.items(), key=lambda kv: (-kv[1], kv[0]))[:q.top_k]
        assert [(h.object_id, h.score) for h in r.hits] == expect

    def test_empty_sg_step_returned_unchanged(self, demo_scene):
        r = two_step_query(Query("zzz qqq nothing"), demo_scene)
        assert r.hits == []
        assert r.route_taken == "two_step"
        assert r.extracted_terms == []

    def test_deterministic_result_bytes(self, demo_scene):
        q = Query("anything to sit on other than a chair?")
        a = json.dumps(two_step_query(q, demo_scene).to_json_dict(),
                       sort_keys=True)
        b = json.dumps(two_step_query(q, demo_scene).to_json_dict(),
                       sort_keys=True)
        assert a == b
