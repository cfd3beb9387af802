import json

import pytest

from scenequery.captioning import ObjectAttributes
from scenequery.errors import InvalidGroundTruth
from scenequery.evaluation import (REFERENCE_ROWS, QuerySpec, load_suite,
                                   precision_recall, resolve_predicate,
                                   run_suite, soft_success)
from scenequery.querying import Hit, QueryResult
from scenequery.geometry import Aabb3


def result_with(classes):
    hits = [Hit(i + 1, c, 1.0 - i * 0.1, [0.0, 0.0, 0.0],
                Aabb3((-1, -1, -1), (1, 1, 1)))
            for i, c in enumerate(classes)]
    return QueryResult(hits, "point_cloud")


class TestPrecisionRecall:
    # hand-computed cases; the first mirrors {a,b} vs {a} -> 0.5 / 1.0
    CASES = [
        ({"a", "b"}, {"a"}, 0.5, 1.0),
        ({"a"}, {"a"}, 1.0, 1.0),
        (set(), {"a"}, 0.0, 0.0),
        ({"a", "b", "c"}, {"a", "b", "c"}, 1.0, 1.0),
        ({"a", "b", "c", "d"}, {"a", "b"}, 0.5, 1.0),
        ({"a"}, {"a", "b"}, 1.0, 0.5),
        ({"x", "y"}, {"a", "b"}, 0.0, 0.0),
        ({"a", "x"}, {"a", "b", "c", "d"}, 0.5, 0.25),
        ({"a", "b", "x", "y", "z"}, {"a", "b", "c", "d"}, 0.4, 0.5),
        ({"q"}, {"q", "r", "s"}, 1.0, 1 / 3),
    ]

    @pytest.mark.parametrize("retrieved,truth,p,r", CASES)
    def test_hand_computed(self, retrieved, truth, p, r):
        got_p, got_r = precision_recall(retrieved, truth)
        assert got_p == pytest.approx(p)
        assert got_r == pytest.approx(r)

    def test_empty_truth_rejected(self):
        with pytest.raises(InvalidGroundTruth):
            precision_recall({"a"}, set())


class TestSoftSuccess:
    CASES = [
        (["sofa"], "is_seating", True),
        ([], "is_seating", False),
        (["table"], "is_seating", False),
        (["table", "bench"], "is_seating", True),
        (["shelf"], "is_storage", True),
        (["plant"], "is_plant", True),
        (["lamp"], "is_seating", False),
        (["chair"], "class_not_in:chair", False),
        (["chair", "sofa"], "all_of:is_seating;class_not_in:chair", True),
        (["chair"], "all_of:is_seating;class_not_in:chair", False),
    ]

    @pytest.mark.parametrize("classes,pred,expect", CASES)
    def test_hand_computed(self, classes, pred, expect):
        ok, _ = soft_success(result_with(classes), pred)
        assert ok is expect

    def test_unknown_predicate_rejected(self):
        with pytest.raises(InvalidGroundTruth):
            soft_success(result_with(["sofa"]), "does_not_exist")

    def test_attribute_predicate_with_graph(self, demo_scene):
        hits = [Hit(oid, node.cls, 1.0, list(node.centroid), node.aabb)
                for oid, node in demo_scene.graph.nodes.items()
                if node.cls == "sofa"]
        result = QueryResult(hits, "scene_graph")
        colour = demo_scene.graph.nodes[hits[0].object_id].attributes.colour
        ok, flag = soft_success(result, f"attr_equals:colour={colour}",
                                demo_scene.graph)
        assert ok and flag is None

    def test_missing_attributes_flagged_unscorable(self):
        ok, flag = soft_success(result_with(["sofa"]),
                                "attr_equals:colour=red")
        assert not ok and flag == "unscorable"


class TestSpecsAndSuiteFiles:
    def test_descriptive_empty_truth_rejected(self):
        with pytest.raises(InvalidGroundTruth):
            QuerySpec("find it", "descriptive", truth_ids=set()).validate()

    def test_suite_file_round_trip(self, tmp_path):
        suite = {"queries": [
            {"text": "where is the vase?", "mode": "descriptive",
             "ground_truth": {"object_ids": [3]}},
            {"text": "somewhere to sit", "mode": "affordance",
             "ground_truth": {"predicate": "is_seating"}},
            {"text": "a query with no truth", "mode": "descriptive"},
        ]}
        path = tmp_path / "suite.json"
        path.write_text(json.dumps(suite))
        specs = load_suite(path)
        assert specs[0].truth_ids == {3}
        assert specs[1].predicate == "is_seating"
        assert not specs[2].scored

    def test_shipped_example_suites_parse(self):
        from importlib import resources
        count = 0
        for entry in resources.files("scenequery.assets.suites").iterdir():
            if entry.name.endswith(".json"):
                data = json.loads(entry.read_text(encoding="utf-8"))
                queries = data["queries"]
                assert len(queries) == 20
                modes = [q["mode"] for q in queries]
                assert modes.count("descriptive") == 10
                assert modes.count("affordance") == 5
                assert modes.count("negation") == 5
                count += 1
        assert count == 6


def demo_suite(scene):
    by_class = {}
    for oid, node in scene.graph.nodes.items():
        by_class.setdefault(node.cls, set()).add(oid)
    return [
        QuerySpec("where is the vase?", "descriptive",
                  truth_ids=by_class["vase"]),
        QuerySpec("any plant decoration in the room?", "descriptive",
                  truth_ids=by_class["plant"]),
        QuerySpec("somewhere to sit and relax", "affordance",
                  predicate="is_seating"),
        QuerySpec("anything to sit on other than a chair?", "negation",
                  predicate="all_of:is_seating;class_not_in:chair"),
        QuerySpec("show me the sofa, not the chair", "negation",
                  predicate="all_of:is_seating;class_not_in:chair"),
    ]


class TestRunSuite:
    def test_metrics_shape_and_ranges(self, demo_scene):
        report = run_suite(demo_scene, demo_suite(demo_scene),
                           ["point_cloud", "two_step"])
        for route, metrics in report.routes.items():
            for key, value in metrics.items():
                if value is not None:
                    assert 0.0 <= value <= 1.0, (route, key)
        assert len(report.records) == 10

    def test_two_step_fixes_negation(self, demo_scene):
        report = run_suite(demo_scene, demo_suite(demo_scene),
                           ["point_cloud", "two_step"])
        pc = report.routes["point_cloud"]["negation_success"]
        ts = report.routes["two_step"]["negation_success"]
        assert ts - pc >= 0.5

    def test_affordance_ratio(self, demo_scene):
        specs = [QuerySpec(f"somewhere to sit {i}", "affordance",
                           predicate="is_seating") for i in range(4)]
        specs.append(QuerySpec("zzz nothing här", "affordance",
                               predicate="is_seating"))
        report = run_suite(demo_scene, specs, ["two_step"])
        success = report.routes["two_step"]["affordance_success"]
        assert success == pytest.approx(0.8)

    def test_permutation_invariant_metrics(self, demo_scene):
        specs = demo_suite(demo_scene)
        a = run_suite(demo_scene, specs, ["two_step"]).routes
        b = run_suite(demo_scene, list(reversed(specs)), ["two_step"]).routes
        assert a == b

    def test_adding_success_never_lowers_rate(self, demo_scene):
        base = demo_suite(demo_scene)
        more = base + [QuerySpec("the sofa", "affordance",
                                 predicate="is_seating")]
        r0 = run_suite(demo_scene, base, ["two_step"]).routes["two_step"]
        r1 = run_suite(demo_scene, more, ["two_step"]).routes["two_step"]
        assert r1["affordance_success"] >= r0["affordance_success"]

    def test_perfect_oracle_route_reaches_one(self, demo_scene):
        # descriptive specs whose truth matches exactly what retrieval returns
        from scenequery.querying import Query, route_query
        specs = []
        for text in ("the vase", "the plant", "the book"):
            hits = route_query(Query(text, route="point_cloud"),
                               demo_scene).hits
            specs.append(QuerySpec(text, "descriptive",
                                   truth_ids={h.object_id for h in hits}))
        report = run_suite(demo_scene, specs, ["point_cloud"])
        assert report.routes["point_cloud"]["descriptive_precision"] == 1.0
        assert report.routes["point_cloud"]["descriptive_recall"] == 1.0

    def test_report_json_round_trip_and_reference_rows(self, demo_scene):
        report = run_suite(demo_scene, demo_suite(demo_scene), ["two_step"])
        doc = report.to_json_dict()
        again = json.loads(json.dumps(doc))
        assert again == doc
        assert again["reference"]["label"] == "paper-reported"
        assert again["reference"]["rows"] == REFERENCE_ROWS

    def test_unscored_queries_excluded_from_metrics(self, demo_scene):
        specs = [QuerySpec("where is the vase?", "descriptive")]
        report = run_suite(demo_scene, specs, ["point_cloud"])
        metrics = report.routes["point_cloud"]
        assert metrics["descriptive_precision"] is None
        assert report.records[0]["scored"] is False

    def test_table_rendering_includes_reference(self, demo_scene):
        report = run_suite(demo_scene, demo_suite(demo_scene), ["two_step"])
        table = report.to_table_str()
        assert "paper-reported" in table
        assert "two_step" in table
