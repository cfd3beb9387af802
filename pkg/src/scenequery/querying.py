"""Query routing across the point-cloud embedding index and the scene graph.

Descriptive queries go straight to image-side retrieval. Affordance and
negation queries take the two-step path: scene-graph retrieval first, then
the extracted entity terms drive point-cloud retrieval — embeddings alone
cannot exclude ("anything to sit on other than a chair" scores chairs
high), but the graph step plus term filtering can.
"""

import re
from dataclasses import dataclass, field
from typing import List, Optional

from .embeddings import build_node_document, query_index
from .errors import BadRequest, EmptyIndex, ProviderError
from .geometry import Aabb3

MODES = ("descriptive", "affordance", "negation", "auto")
ROUTES = ("point_cloud", "scene_graph", "two_step", "auto")

# cue words that flip everything after them into an exclusion list
EXCLUSION_CUES = re.compile(r"\b(other than|unlike|not|except)\b", re.IGNORECASE)


@dataclass
class Query:
    text: str
    mode: str = "auto"
    route: str = "auto"
    top_k: int = 5


@dataclass
class Hit:
    object_id: int
    cls: str
    score: float
    centroid: List[float]
    aabb: Aabb3

    def to_json_dict(self) -> dict:
        return {"object_id": self.object_id, "class": self.cls,
                "score": self.score, "centroid": list(self.centroid),
                "aabb": {"min": list(self.aabb.min), "max": list(self.aabb.max)}}


@dataclass
class QueryResult:
    hits: List[Hit]
    route_taken: str
    extracted_terms: Optional[List[str]] = None
    answer_text: Optional[str] = None
    answer_object_ids: Optional[List[int]] = None
    warnings: List[str] = field(default_factory=list)

    def to_json_dict(self) -> dict:
        out = {"hits": [h.to_json_dict() for h in self.hits],
               "route_taken": self.route_taken,
               "warnings": list(self.warnings)}
        if self.extracted_terms is not None:
            out["extracted_terms"] = list(self.extracted_terms)
        if self.answer_text is not None:
            out["answer_text"] = self.answer_text
        if self.answer_object_ids is not None:
            out["answer_object_ids"] = list(self.answer_object_ids)
        return out


def _validate(q: Query) -> None:
    if not q.text or not q.text.strip():
        raise BadRequest("query text is empty")
    if q.mode not in MODES:
        raise BadRequest(f"unknown mode {q.mode!r}")
    if q.route not in ROUTES:
        raise BadRequest(f"unknown route {q.route!r}")
    if q.top_k < 1:
        raise BadRequest("top_k must be at least 1")


def _enrich(scored, graph) -> List[Hit]:
    hits = []
    for oid, score in scored:
        node = graph.nodes[oid]
        hits.append(Hit(oid, node.cls, score,
                        [float(v) for v in node.centroid], node.aabb))
    return hits


def rag_context(nodes) -> str:
    """Render retrieved nodes into the context block for an answer provider."""
    lines = []
    for node in nodes:
        lines.append(f"[object {node.object_id}] {build_node_document(node)}")
    return "\n".join(lines)


def query_point_cloud(q: Query, scene) -> QueryResult:
    """Image-side retrieval, hits enriched with graph geometry."""
    _validate(q)
    cfg = scene.config
    scored = query_index(q.text, scene.index, "image", q.top_k,
                         cfg.image_threshold, cfg.score_band)
    return QueryResult(_enrich(scored, scene.graph), "point_cloud")


def query_scene_graph(q: Query, scene, answer_provider=None) -> QueryResult:
    """Doc-side retrieval, optionally followed by a RAG answer."""
    _validate(q)
    cfg = scene.config
    scored = query_index(q.text, scene.index, "doc", q.top_k,
                         cfg.doc_threshold, cfg.score_band)
    result = QueryResult(_enrich(scored, scene.graph), "scene_graph")
    if not result.hits:
        result.answer_text = "No relevant objects found."
        return result
    if answer_provider is not None:
        nodes = [scene.graph.nodes[h.object_id] for h in result.hits]
        try:
            text, cited = answer_provider.answer(
                q.text, rag_context(nodes),
                [h.object_id for h in result.hits], [h.cls for h in result.hits])
            result.answer_text = text
            result.answer_object_ids = [i for i in cited if i in scene.graph.nodes]
        except ProviderError as e:
            result.warnings.append(f"answer provider degraded: {e}")
    return result


def extract_target_terms(q: Query, sg_result: QueryResult,
                         term_provider=None) -> List[str]:
    """Entity class terms from the scene-graph hits, honoring negation.

    Deterministic fallback: hit class names minus any class name appearing
    after an exclusion cue in the query text (case-insensitive substring).
    """
    entities = []
    for h in sg_result.hits:
        if h.cls not in entities:
            entities.append(h.cls)
    if term_provider is not None:
        try:
            return [t for t in term_provider.extract(q.text, entities) if t]
        except ProviderError:
            pass
    cue = EXCLUSION_CUES.search(q.text)
    if cue is None:
        return entities
    excluded_zone = q.text[cue.end():].lower()
    return [cls for cls in entities if cls.lower() not in excluded_zone]


def two_step_query(q: Query, scene) -> QueryResult:
    """Scene-graph retrieval -> term extraction -> per-term point-cloud
    retrieval merged by max score per object."""
    _validate(q)
    step1 = query_scene_graph(q, scene)
    terms = extract_target_terms(q, step1, getattr(scene.providers, "term", None))
    if not terms:
        step1.route_taken = "two_step"
        step1.extracted_terms = []
        return step1
    cfg = scene.config
    merged = {}
    for term in terms:
        for oid, score in query_index(term, scene.index, "image", q.top_k,
                                      cfg.image_threshold, cfg.score_band):
            merged[oid] = max(score, merged.get(oid, -1.0))
    ranked = sorted(merged.items(), key=lambda kv: (-kv[1], kv[0]))[:q.top_k]
    result = QueryResult(_enrich(ranked, scene.graph), "two_step")
    result.extracted_terms = terms
    result.warnings = step1.warnings
    return result


def classify_mode(text: str) -> str:
    """Keyword-only auto classification: exclusion cue -> negation, else
    descriptive (affordance needs an LLM and an explicit mode)."""
    return "negation" if EXCLUSION_CUES.search(text) else "descriptive"


def route_query(q: Query, scene) -> QueryResult:
    """Dispatch a query: explicit route honored, otherwise mode-driven."""
    _validate(q)
    route = q.route
    if route == "auto":
        mode = q.mode if q.mode != "auto" else classify_mode(q.text)
        route = {"descriptive": "point_cloud", "affordance": "two_step",
                 "negation": "two_step"}[mode]
    if route == "point_cloud":
        return query_point_cloud(q, scene)
    if route == "scene_graph":
        return query_scene_graph(q, scene,
                                 getattr(scene.providers, "answer", None))
    return two_step_query(q, scene)
