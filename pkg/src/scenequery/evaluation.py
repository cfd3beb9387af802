"""Query-suite evaluation: precision/recall for descriptive queries and
soft-binary success for affordance/negation, aggregated per route.

Affordance/negation ground truth is a named predicate over node class +
attributes (open-ended queries admit many valid objects, so "any retrieved
object satisfies the condition" counts as success). Reports embed the
published reference metrics as rows labeled "paper-reported" for context
only — they are never asserted.
"""

import json
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Set, Tuple

from .errors import EngineError, InvalidGroundTruth
from .querying import Query, QueryResult, route_query

SEATING_CLASSES = {"chair", "sofa", "bench", "armchair", "ottoman", "stool"}
STORAGE_CLASSES = {"shelf", "cabinet", "bin", "box", "dresser", "wardrobe",
                   "bookcase", "sideboard"}

# predicate: (class, attributes or None) -> bool, or None when not checkable
_REGISTRY: Dict[str, Callable] = {
    "is_seating": lambda cls, attrs: cls.lower() in SEATING_CLASSES,
    "is_storage": lambda cls, attrs: cls.lower() in STORAGE_CLASSES,
    "is_plant": lambda cls, attrs: cls.lower() in {"plant", "flower", "succulent"},
    "is_light_source": lambda cls, attrs: cls.lower() in {"lamp", "light", "chandelier"},
    "is_readable": lambda cls, attrs: cls.lower() in {"book", "magazine", "newspaper"},
}


def register_predicate(name: str, fn: Callable) -> None:
    _REGISTRY[name] = fn


def resolve_predicate(spec: str) -> Callable:
    """Look up a registered predicate or build a parametric one.

    Parametric forms: "class_in:a,b", "class_not_in:a,b",
    "attr_equals:field=value" (None when attributes are missing), and
    "all_of:p1;p2" conjunctions.
    """
    if spec in _REGISTRY:
        return _REGISTRY[spec]
    if ":" in spec:
        kind, arg = spec.split(":", 1)
        if kind == "class_in":
            allowed = {c.strip().lower() for c in arg.split(",") if c.strip()}
            return lambda cls, attrs: cls.lower() in allowed
        if kind == "class_not_in":
            banned = {c.strip().lower() for c in arg.split(",") if c.strip()}
            return lambda cls, attrs: cls.lower() not in banned
        if kind == "attr_equals":
            if "=" not in arg:
                raise InvalidGroundTruth(f"bad attr_equals spec {spec!r}")
            key, value = (s.strip().lower() for s in arg.split("=", 1))
            def check(cls, attrs, key=key, value=value):
                if attrs is None:
                    return None
                actual = attrs.to_dict().get(key)
                return None if actual is None else actual == value
            return check
        if kind == "all_of":
            parts = [resolve_predicate(p.strip()) for p in arg.split(";") if p.strip()]
            if not parts:
                raise InvalidGroundTruth(f"empty all_of spec {spec!r}")
            def conj(cls, attrs, parts=parts):
                values = [p(cls, attrs) for p in parts]
                if any(v is False for v in values):
                    return False
                if any(v is None for v in values):
                    return None
                return True
            return conj
    raise InvalidGroundTruth(f"unknown predicate {spec!r}")


@dataclass
class QuerySpec:
    text: str
    mode: str
    truth_ids: Optional[Set[int]] = None       # descriptive ground truth
    predicate: Optional[str] = None            # affordance/negation ground truth

    @property
    def scored(self) -> bool:
        return self.truth_ids is not None or self.predicate is not None

    def validate(self) -> None:
        if self.mode == "descriptive" and self.truth_ids is not None \
                and not self.truth_ids:
            raise InvalidGroundTruth(f"descriptive spec {self.text!r} has empty truth")
        if self.predicate is not None:
            resolve_predicate(self.predicate)


def load_suite(path) -> List[QuerySpec]:
    with open(path, "r", encoding="utf-8") as f:
        data = json.load(f)
    specs = []
    for entry in data["queries"]:
        gt = entry.get("ground_truth") or {}
        spec = QuerySpec(
            text=entry["text"], mode=entry.get("mode", "descriptive"),
            truth_ids=set(gt["object_ids"]) if "object_ids" in gt else None,
            predicate=gt.get("predicate"))
        spec.validate()
        specs.append(spec)
    return specs


# ---------------------------------------------------------------------------
# metrics

def precision_recall(retrieved: Set[int], truth: Set[int]) -> Tuple[float, float]:
    """P = |r & t| / |r| (0 when nothing retrieved, callers flag it);
    R = |r & t| / |t|. Empty truth is a ground-truth defect."""
    if not truth:
        raise InvalidGroundTruth("descriptive ground truth is empty")
    hit = len(set(retrieved) & set(truth))
    precision = hit / len(retrieved) if retrieved else 0.0
    recall = hit / len(truth)
    return precision, recall


def soft_success(result: QueryResult, predicate: str, graph=None):
    """(success, flag): success iff any hit satisfies the predicate.

    Hits whose predicate needs attributes the node lacks are not checkable;
    when no hit was checkable the query fails with an "unscorable" flag.
    """
    fn = resolve_predicate(predicate)
    checked_any = False
    for hit in result.hits:
        attrs = None
        if graph is not None and hit.object_id in graph.nodes:
            attrs = graph.nodes[hit.object_id].attributes
        value = fn(hit.cls, attrs)
        if value is None:
            continue
        checked_any = True
        if value:
            return True, None
    if result.hits and not checked_any:
        return False, "unscorable"
    return False, None


# ---------------------------------------------------------------------------
# suite runner

@dataclass
class SuiteReport:
    scene_id: str
    routes: Dict[str, dict]
    records: List[dict]
    reference_label: str = "paper-reported"
    reference_rows: Dict[str, dict] = field(default_factory=lambda: dict(REFERENCE_ROWS))

    def to_json_dict(self) -> dict:
        return {"format": "suite-report", "version": 1,
                "scene_id": self.scene_id, "routes": self.routes,
                "queries": self.records,
                "reference": {"label": self.reference_label,
                              "rows": self.reference_rows}}

    def to_csv_rows(self) -> List[List[str]]:
        rows = [["route", "mode", "text", "scored", "hit_ids",
                 "precision", "recall", "success", "flags"]]
        for r in self.records:
            rows.append([
                r["route"], r["mode"], r["text"], str(r["scored"]),
                " ".join(str(i) for i in r["hit_ids"]),
                "" if r.get("precision") is None else f"{r['precision']:.4f}",
                "" if r.get("recall") is None else f"{r['recall']:.4f}",
                "" if r.get("success") is None else str(r["success"]),
                ";".join(r.get("flags", [])),
            ])
        return rows

    def to_table_str(self) -> str:
        header = f"{'route':<14}{'desc P':>8}{'desc R':>8}{'aff SR':>8}{'neg SR':>8}"
        lines = [header, "-" * len(header)]
        def fmt(metrics):
            return "".join(
                f"{metrics.get(key):>8.2f}" if metrics.get(key) is not None
                else f"{'-':>8}"
                for key in ("descriptive_precision", "descriptive_recall",
                            "affordance_success", "negation_success"))
        for route in sorted(self.routes):
            lines.append(f"{route:<14}" + fmt(self.routes[route]))
        for route in sorted(self.reference_rows):
            label = f"{route} ({self.reference_label})"
            lines.append(f"{label:<14}" + fmt(self.reference_rows[route]))
        return "\n".join(lines)


REFERENCE_ROWS = {
    "point_cloud": {"descriptive_precision": 0.88, "descriptive_recall": 0.91,
                    "affordance_success": 0.80, "negation_success": 0.71},
    "scene_graph": {"descriptive_precision": 0.74, "descriptive_recall": 0.72,
                    "affordance_success": 0.93, "negation_success": 0.90},
}


def run_suite(scene, specs: List[QuerySpec], routes: List[str]) -> SuiteReport:
    """Run every spec through every route; per-query errors are recorded as
    failures, never aborts."""
    records: List[dict] = []
    route_metrics: Dict[str, dict] = {}
    for route in routes:
        desc_p, desc_r = [], []
        aff, neg = [], []
        for spec in specs:
            record = {"route": route, "mode": spec.mode, "text": spec.text,
                      "scored": spec.scored, "hit_ids": [], "flags": [],
                      "precision": None, "recall": None, "success": None}
            try:
                result = route_query(
                    Query(spec.text, mode=spec.mode, route=route), scene)
                record["hit_ids"] = [h.object_id for h in result.hits]
                record["route_taken"] = result.route_taken
            except EngineError as e:
                record["flags"].append(f"error: {e}")
                result = None
            if spec.truth_ids is not None:
                retrieved = set(record["hit_ids"])
                p, r = precision_recall(retrieved, spec.truth_ids)
                if not retrieved:
                    record["flags"].append("empty retrieval")
                record["precision"], record["recall"] = p, r
                desc_p.append(p)
                desc_r.append(r)
            elif spec.predicate is not None:
                if result is None:
                    ok, flag = False, None
                else:
                    ok, flag = soft_success(result, spec.predicate, scene.graph)
                if flag:
                    record["flags"].append(flag)
                record["success"] = ok
                (aff if spec.mode == "affordance" else neg).append(ok)
            records.append(record)
        route_metrics[route] = {
            "descriptive_precision": sum(desc_p) / len(desc_p) if desc_p else None,
            "descriptive_recall": sum(desc_r) / len(desc_r) if desc_r else None,
            "affordance_success": sum(aff) / len(aff) if aff else None,
            "negation_success": sum(neg) / len(neg) if neg else None,
        }
    scene_id = getattr(scene, "scene_id", "scene")
    return SuiteReport(scene_id, route_metrics, records)
