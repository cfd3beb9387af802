"""REST API over built scenes.

All JSON responses from scene-scoped endpoints carry scene_id + build_hash
so callers can validate caches; errors use one envelope
{"error": {"code", "message"}}. The graph endpoint returns the canonical
scene-graph document byte-for-byte (hashes ride in headers there, and for
the PGM grid image).
"""

import json
from typing import Dict, Optional

from fastapi import FastAPI, Request, Response
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .errors import (BadRequest, EmptyIndex, EngineError, GoalUnreachable,
                     GraphParseError, PathNotFound, StartBlocked)
from .geometry import Aabb3
from .graph import consolidate, deserialize, graph_to_json_dict, serialize
from .nav import plan_path
from .pipeline import SceneState
from .querying import Query, route_query

class NotFound(EngineError):
    pass


_STATUS = {BadRequest: 400, GraphParseError: 400, NotFound: 404,
           GoalUnreachable: 422, PathNotFound: 422, StartBlocked: 422,
           EmptyIndex: 503}


class QueryRequest(BaseModel):
    text: str
    mode: Optional[str] = None
    route: Optional[str] = None
    top_k: Optional[int] = None


class NavigateRequest(BaseModel):
    object_id: Optional[int] = None
    goal: Optional[list] = None     # [x, y]
    start: list                     # [x, y]
    smooth: bool = False


class ConsolidateRequest(BaseModel):
    observed_graph: dict
    move_threshold: Optional[float] = None
    match_radius: Optional[float] = None


def _error(status: int, code: str, message: str) -> JSONResponse:
    return JSONResponse(status_code=status,
                        content={"error": {"code": code, "message": message}})


def create_app(scenes: Dict[str, SceneState]) -> FastAPI:
    app = FastAPI(title="scenequery", version="0.1.0")
    # the web console is served from a different origin; no auth by design
    app.add_middleware(CORSMiddleware, allow_origins=["*"],
                       allow_methods=["*"], allow_headers=["*"],
                       expose_headers=["X-Scene-Id", "X-Build-Hash",
                                       "X-Grid-Meta"])

    @app.exception_handler(EngineError)
    async def engine_error_handler(request: Request, exc: EngineError):
        status = _STATUS.get(type(exc), 400)
        return _error(status, type(exc).__name__, str(exc))

    def get_scene(scene_id: str) -> SceneState:
        scene = scenes.get(scene_id)
        if scene is None:
            raise NotFound(f"unknown scene {scene_id!r}")
        return scene

    @app.get("/scenes")
    def list_scenes():
        return [{"scene_id": s.scene_id,
                 "status": {k: v for k, v in s.statuses.items()},
                 "object_count": s.object_count,
                 "build_hash": s.build_hash}
                for s in scenes.values()]

    @app.get("/scenes/{scene_id}/graph")
    def get_graph(scene_id: str):
        scene = get_scene(scene_id)
        return Response(content=serialize(scene.graph),
                        media_type="application/json",
                        headers={"X-Scene-Id": scene.scene_id,
                                 "X-Build-Hash": scene.build_hash})

    @app.get("/scenes/{scene_id}/objects/{object_id}")
    def get_object(scene_id: str, object_id: int):
        scene = get_scene(scene_id)
        node = scene.graph.nodes.get(object_id)
        if node is None:
            raise NotFound(f"unknown object {object_id} in scene {scene_id!r}")
        doc = graph_to_json_dict(scene.graph)["nodes"][str(object_id)]
        return {"scene_id": scene.scene_id, "build_hash": scene.build_hash,
                "object": doc}

    @app.post("/scenes/{scene_id}/query")
    def post_query(scene_id: str, req: QueryRequest):
        scene = get_scene(scene_id)
        if scene.index is None:
            raise EmptyIndex("scene has no embedding index "
                             "(embedding provider unavailable at build)")
        q = Query(req.text, mode=req.mode or "auto", route=req.route or "auto",
                  top_k=req.top_k or scene.config.top_k)
        result = route_query(q, scene)
        return {"scene_id": scene.scene_id, "build_hash": scene.build_hash,
                **result.to_json_dict()}

    @app.post("/scenes/{scene_id}/navigate")
    def post_navigate(scene_id: str, req: NavigateRequest):
        scene = get_scene(scene_id)
        goal_object_id = None
        if req.object_id is not None:
            node = scene.graph.nodes.get(req.object_id)
            if node is None:
                raise NotFound(f"unknown object {req.object_id}")
            goal_box = node.aabb
            goal_object_id = req.object_id
        elif req.goal is not None:
            x, y = float(req.goal[0]), float(req.goal[1])
            goal_box = Aabb3((x, y, 0.0), (x, y, 0.0))
        else:
            raise BadRequest("navigate needs object_id or goal [x, y]")
        path = plan_path(scene.grid, (float(req.start[0]), float(req.start[1])),
                         goal_box, goal_object_id, smooth=req.smooth)
        return {"scene_id": scene.scene_id, "build_hash": scene.build_hash,
                **path.to_json_dict()}

    @app.post("/scenes/{scene_id}/consolidate")
    def post_consolidate(scene_id: str, req: ConsolidateRequest):
        scene = get_scene(scene_id)
        observed = deserialize(req.observed_graph)
        updated, changes = consolidate(
            scene.graph, observed,
            req.move_threshold if req.move_threshold is not None
            else scene.config.move_threshold,
            req.match_radius if req.match_radius is not None
            else scene.config.match_radius)
        return {"scene_id": scene.scene_id, "build_hash": scene.build_hash,
                "changes": [c.to_json_dict() for c in changes],
                "updated_graph": graph_to_json_dict(updated)}

    @app.get("/scenes/{scene_id}/grid.pgm")
    def get_grid(scene_id: str):
        from .bundle import pgm_bytes
        scene = get_scene(scene_id)
        return Response(content=pgm_bytes(scene.grid.occupied),
                        media_type="image/x-portable-graymap",
                        headers={"X-Scene-Id": scene.scene_id,
                                 "X-Build-Hash": scene.build_hash,
                                 "X-Grid-Meta": json.dumps(
                                     scene.grid.to_json_dict())})

    return app


def serve(scenes: Dict[str, SceneState], host: str = "127.0.0.1",
          port: int = 8000) -> None:
    import uvicorn
    if not scenes:
        raise EngineError("no scenes to serve")
    uvicorn.run(create_app(scenes), host=host, port=port, log_level="warning")
