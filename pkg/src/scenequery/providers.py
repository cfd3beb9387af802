"""Caption / embedding / relation / answer providers.

Every provider family has an HTTP client (for real model services) and a
deterministic fixture implementation used by tests and synthetic bundles.
Fixture embeddings map vocabulary terms to orthogonal basis directions, so
retrieval behavior is exactly plantable; fixture image embeddings key off
the dominant crop color (synthetic renders are flat-colored per object).

HTTP contracts (JSON over HTTP, configurable timeout/retries):
    POST {caption}/caption     {image: b64 PNG, hint, prompt} -> {caption}
    POST {caption}/synthesize  {captions: [str], hint, prompt}
                               -> {caption, attributes: {...}}
    POST {embed}/embed_text    {text} -> {vector: [float]}
    POST {embed}/embed_image   {image: b64 PNG} -> {vector: [float]}
    POST {llm}/relation        {src: {...}, dst: {...}, prompt} -> {relation}
    POST {llm}/answer          {query, context, prompt}
                               -> {answer, object_ids: [int]}
    POST {llm}/extract_terms   {query, entities: [str]} -> {terms: [str]}
"""

import base64
import hashlib
import io
import json
import math
import os
import time
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

from .errors import ProviderError

ENV_CAPTION_URL = "SCENEQUERY_CAPTION_URL"
ENV_EMBED_URL = "SCENEQUERY_EMBED_URL"
ENV_LLM_URL = "SCENEQUERY_LLM_URL"


def load_prompt(name: str) -> str:
    return (resources.files("scenequery.assets.prompts") / f"{name}.txt").read_text(
        encoding="utf-8")


def _normalize_words(text: str) -> str:
    import re
    return " ".join(re.sub(r"[^a-z0-9]+", " ", text.lower()).split())


def _png_b64(image: np.ndarray) -> str:
    from PIL import Image
    buf = io.BytesIO()
    Image.fromarray(np.asarray(image, dtype=np.uint8)).save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def _post_json(url: str, payload: dict, timeout: float, retries: int) -> dict:
    import requests
    last = None
    for attempt in range(retries + 1):
        try:
            resp = requests.post(url, json=payload, timeout=timeout)
            resp.raise_for_status()
            return resp.json()
        except Exception as e:  # connection errors, bad status, bad JSON
            last = e
            if attempt < retries:
                time.sleep(min(0.2 * 2 ** attempt, 2.0))
    raise ProviderError(f"POST {url} failed after {retries + 1} attempts: {last}")


# ---------------------------------------------------------------------------
# captions

class FixtureCaptionProvider:
    """Deterministic captions from a class -> {caption, attributes} mapping."""

    def __init__(self, mapping: Dict[str, dict], fail_hints=frozenset()):
        self.mapping = mapping
        self.fail_hints = set(fail_hints)

    @classmethod
    def from_file(cls, path) -> "FixtureCaptionProvider":
        with open(path, "r", encoding="utf-8") as f:
            return cls(json.load(f).get("captions", {}))

    def _entry(self, hint: str) -> dict:
        return self.mapping.get(hint.lower(),
                                {"caption": f"a {hint.lower()} in the room",
                                 "attributes": {"type": hint.lower()}})

    def per_view(self, image, hint: str) -> str:
        if hint in self.fail_hints:
            raise ProviderError(f"fixture failure for hint {hint!r}")
        return self._entry(hint)["caption"]

    def synthesize(self, captions: List[str], hint: str) -> Tuple[str, dict]:
        if hint in self.fail_hints:
            raise ProviderError(f"fixture failure for hint {hint!r}")
        entry = self._entry(hint)
        seen = sorted(set(captions))
        unified = entry["caption"] if len(seen) == 1 else "; ".join(seen)
        return unified, dict(entry.get("attributes", {"type": hint.lower()}))


class HttpCaptionProvider:
    def __init__(self, base_url: str, timeout: float = 10.0, retries: int = 2):
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout
        self.retries = retries
        self._per_view_prompt = load_prompt("per_view")
        self._synthesize_prompt = load_prompt("synthesize")

    def per_view(self, image, hint: str) -> str:
        payload = {"image": _png_b64(image), "hint": hint,
                   "prompt": self._per_view_prompt.format(hint=hint)}
        return _post_json(f"{self.base_url}/caption", payload,
                          self.timeout, self.retries)["caption"]

    def synthesize(self, captions: List[str], hint: str) -> Tuple[str, dict]:
        payload = {"captions": captions, "hint": hint,
                   "prompt": self._synthesize_prompt.format(hint=hint)}
        data = _post_json(f"{self.base_url}/synthesize", payload,
                          self.timeout, self.retries)
        return data["caption"], data.get("attributes", {})


# ---------------------------------------------------------------------------
# embeddings

class FixtureEmbeddingProvider:
    """Pseudo-embeddings over a keyword vocabulary.

    Each vocabulary term owns one basis dimension; a text embeds as the
    normalized sum of the dimensions of the terms it contains. Unmatched
    text falls back to a stable hash bucket so the vector is never zero.
    Image crops embed as their dominant-color class term.
    """

    HASH_BUCKETS = 16

    def __init__(self, terms: List[str],
                 color_classes: Optional[Dict[tuple, str]] = None):
        self.terms = sorted({_normalize_words(t) for t in terms
                             if _normalize_words(t)})
        if not self.terms:
            raise ValueError("fixture embedding vocabulary is empty")
        self.term_index = {t: i for i, t in enumerate(self.terms)}
        self.color_classes = dict(color_classes or {})
        self.dimension = len(self.terms) + self.HASH_BUCKETS

    @classmethod
    def from_file(cls, path) -> "FixtureEmbeddingProvider":
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
        colors = {tuple(int(c) for c in key.split(",")): cls_name
                  for key, cls_name in data.get("color_classes", {}).items()}
        return cls(data["vocab"], colors)

    def _hash_bucket(self, text: str) -> int:
        digest = hashlib.md5(text.encode("utf-8")).digest()
        return len(self.terms) + int.from_bytes(digest[:4], "little") % self.HASH_BUCKETS

    def embed_text(self, text: str) -> np.ndarray:
        norm = " " + _normalize_words(text) + " "
        vec = np.zeros(self.dimension, dtype=np.float64)
        for term, idx in self.term_index.items():
            if f" {term} " in norm:       # whole-word match only
                vec[idx] = 1.0
        if not vec.any():
            vec[self._hash_bucket(norm)] = 1.0
        return vec / np.linalg.norm(vec)

    def embed_image(self, image: np.ndarray) -> np.ndarray:
        pixels = np.asarray(image, dtype=np.int64).reshape(-1, 3)
        fg = pixels[pixels.sum(axis=1) >= 30]
        if len(fg) == 0:
            vec = np.zeros(self.dimension)
            vec[self._hash_bucket("background")] = 1.0
            return vec
        colors, counts = np.unique(fg, axis=0, return_counts=True)
        dominant = colors[np.argmax(counts)]
        if self.color_classes:
            table = np.array(list(self.color_classes.keys()), dtype=np.int64)
            nearest = np.argmin(np.sum((table - dominant) ** 2, axis=1))
            cls_name = self.color_classes[tuple(table[nearest].tolist())]
            return self.embed_text(cls_name)
        vec = np.zeros(self.dimension)
        vec[self._hash_bucket(",".join(map(str, dominant.tolist())))] = 1.0
        return vec


class HttpEmbeddingProvider:
    def __init__(self, base_url: str, timeout: float = 10.0, retries: int = 2):
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout
        self.retries = retries
        self._dimension = None

    @property
    def dimension(self) -> int:
        if self._dimension is None:
            self._dimension = len(self.embed_text("dimension probe"))
        return self._dimension

    def _vector(self, endpoint: str, payload: dict) -> np.ndarray:
        data = _post_json(f"{self.base_url}/{endpoint}", payload,
                          self.timeout, self.retries)
        vec = np.asarray(data["vector"], dtype=np.float64)
        norm = np.linalg.norm(vec)
        if norm == 0:
            raise ProviderError(f"{endpoint} returned a zero vector")
        return vec / norm

    def embed_text(self, text: str) -> np.ndarray:
        return self._vector("embed_text", {"text": text})

    def embed_image(self, image: np.ndarray) -> np.ndarray:
        return self._vector("embed_image", {"image": _png_b64(image)})


# ---------------------------------------------------------------------------
# relations

class GeometricRelationProvider:
    """Deterministic fallback relations from object AABBs.

    Operates on the info dicts handed to relation providers
    ({"object_id", "class", "centroid", "aabb": {"min", "max"}}).
    src "on top of" dst when src rests on dst (vertical contact within
    contact_tol, xy overlap); "next to" when the xy gap is at most
    next_to_gap with overlapping z ranges; otherwise "none".
    """

    def __init__(self, contact_tol: float = 0.05, next_to_gap: float = 0.5):
        self.contact_tol = contact_tol
        self.next_to_gap = next_to_gap

    def relation(self, src: dict, dst: dict) -> str:
        a_min, a_max = src["aabb"]["min"], src["aabb"]["max"]
        b_min, b_max = dst["aabb"]["min"], dst["aabb"]["max"]
        xy_overlap = (a_min[0] < b_max[0] and b_min[0] < a_max[0]
                      and a_min[1] < b_max[1] and b_min[1] < a_max[1])
        if xy_overlap and abs(a_min[2] - b_max[2]) <= self.contact_tol:
            return "on top of"
        z_overlap = a_min[2] <= b_max[2] and b_min[2] <= a_max[2]
        gx = max(0.0, max(a_min[0] - b_max[0], b_min[0] - a_max[0]))
        gy = max(0.0, max(a_min[1] - b_max[1], b_min[1] - a_max[1]))
        if z_overlap and not xy_overlap and math.hypot(gx, gy) <= self.next_to_gap:
            return "next to"
        return "none"


class HttpRelationProvider:
    def __init__(self, base_url: str, timeout: float = 10.0, retries: int = 2):
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout
        self.retries = retries
        self._prompt = load_prompt("relation")

    def relation(self, src: dict, dst: dict) -> str:
        payload = {"src": src, "dst": dst, "prompt": self._prompt}
        return _post_json(f"{self.base_url}/relation", payload,
                          self.timeout, self.retries).get("relation", "none")


# ---------------------------------------------------------------------------
# answers / term extraction

class FixtureAnswerProvider:
    """Deterministic templated answer citing every retrieved object."""

    def answer(self, query: str, context: str,
               object_ids: List[int], classes: List[str]) -> Tuple[str, List[int]]:
        if not object_ids:
            return "No relevant objects found.", []
        listing = ", ".join(f"{c} (object {i})" for i, c in zip(object_ids, classes))
        return f"Relevant objects: {listing}.", list(object_ids)


class HttpAnswerProvider:
    def __init__(self, base_url: str, timeout: float = 10.0, retries: int = 2):
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout
        self.retries = retries
        self._prompt = load_prompt("rag_answer")

    def answer(self, query: str, context: str,
               object_ids: List[int], classes: List[str]) -> Tuple[str, List[int]]:
        payload = {"query": query, "context": context, "prompt": self._prompt}
        data = _post_json(f"{self.base_url}/answer", payload,
                          self.timeout, self.retries)
        return data.get("answer", ""), [int(i) for i in data.get("object_ids", [])]


class HttpTermProvider:
    def __init__(self, base_url: str, timeout: float = 10.0, retries: int = 2):
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout
        self.retries = retries

    def extract(self, query: str, entities: List[str]) -> List[str]:
        payload = {"query": query, "entities": entities}
        data = _post_json(f"{self.base_url}/extract_terms", payload,
                          self.timeout, self.retries)
        return [str(t) for t in data.get("terms", [])]


# ---------------------------------------------------------------------------
# resolution

@dataclass
class Providers:
    caption: Optional[object] = None
    embedding: Optional[object] = None
    relation: Optional[object] = None     # None -> geometric fallback at build
    answer: Optional[object] = None
    term: Optional[object] = None


def resolve_providers(bundle_path, config) -> Providers:
    """Environment endpoints win; otherwise bundle fixture assets; else absent."""
    providers = Providers()
    timeout, retries = config.provider_timeout, config.provider_retries
    caption_url = os.environ.get(ENV_CAPTION_URL)
    embed_url = os.environ.get(ENV_EMBED_URL)
    llm_url = os.environ.get(ENV_LLM_URL)
    if caption_url:
        providers.caption = HttpCaptionProvider(caption_url, timeout, retries)
    if embed_url:
        providers.embedding = HttpEmbeddingProvider(embed_url, timeout, retries)
    if llm_url:
        providers.relation = HttpRelationProvider(llm_url, timeout, retries)
        providers.answer = HttpAnswerProvider(llm_url, timeout, retries)
        providers.term = HttpTermProvider(llm_url, timeout, retries)

    fixture_file = Path(bundle_path) / "providers.json"
    if fixture_file.exists():
        if providers.caption is None:
            providers.caption = FixtureCaptionProvider.from_file(fixture_file)
        if providers.embedding is None:
            providers.embedding = FixtureEmbeddingProvider.from_file(fixture_file)
        if providers.answer is None:
            providers.answer = FixtureAnswerProvider()
    return providers
