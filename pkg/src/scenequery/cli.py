"""Command-line interface.

    scenequery synth    --recipe recipe.json --seed 7 --out bundle-dir
    scenequery ingest   <bundle-dir>
    scenequery segment  <bundle-dir> --out labeling.json
    scenequery graph    <bundle-dir> --labeling labeling.json --out scene_graph.json
    scenequery index    <bundle-dir> --graph scene_graph.json --out index.qsre
    scenequery build    <bundle-dir> [--force]
    scenequery query    <bundle-dir> --text "..." [--mode M] [--route R] [--json]
    scenequery navigate <bundle-dir> --start X,Y (--object-id N | --goal X,Y)
    scenequery eval     <bundle-dir> --suite suite.json --routes a,b,c --out report.json
    scenequery serve    --scenes dir --port N

Report-style commands write figures next to their delimited outputs
(eval: report.csv + report.png; navigate: path.png).
"""

import argparse
import csv
import json
import sys
from pathlib import Path

from .bundle import load_bundle
from .canonical import canonical_write
from .config import EngineConfig
from .errors import EngineError
from .pipeline import build_scene, effective_config
from .providers import resolve_providers
from .querying import Query, route_query


def _config_overrides(args) -> dict:
    if getattr(args, "config", None):
        with open(args.config, "r", encoding="utf-8") as f:
            return json.load(f)
    return {}


def _build(args):
    bundle = load_bundle(args.bundle)
    config = effective_config(bundle, _config_overrides(args))
    providers = resolve_providers(bundle.path, config)
    return build_scene(bundle, config, providers,
                       force=getattr(args, "force", False))


def cmd_synth(args):
    from .synthetic import generate_bundle
    with open(args.recipe, "r", encoding="utf-8") as f:
        recipe = json.load(f)
    bundle, gt = generate_bundle(recipe, args.seed, args.out)
    print(f"wrote bundle {bundle.scene_id!r} -> {args.out} "
          f"({len(bundle.cloud())} points, {len(bundle.manifest['frames'])} frames, "
          f"{len(gt.class_of)} objects)")


def cmd_ingest(args):
    bundle = load_bundle(args.bundle)
    cloud = bundle.cloud()
    frames = bundle.frames()
    print(f"scene {bundle.scene_id!r}: {len(cloud)} points, "
          f"{len(frames)} frames, classes {sorted(bundle.class_names.values())}")
    derived = bundle.derived_dir
    for name in ("labeling.json", "captions.json", "scene_graph.json",
                 "index.qsre", "grid.pgm"):
        status = "present" if (derived / name).exists() else "absent"
        print(f"  derived/{name}: {status}")


def cmd_segment(args):
    from .labeling import segment_point_cloud
    bundle = load_bundle(args.bundle)
    config = effective_config(bundle, _config_overrides(args))
    labeling = segment_point_cloud(bundle.cloud(), bundle.frames(), config,
                                   bundle.class_names)
    canonical_write(args.out, labeling.to_json_dict())
    counts = labeling.to_json_dict()["provenance_counts"]
    print(f"wrote {args.out}: {len(labeling.instance_ids())} instances, "
          f"provenance {counts}")


def cmd_graph(args):
    from .labeling import InstanceLabeling
    from .pipeline import SceneState, _run_graph
    from .graph import serialize
    bundle = load_bundle(args.bundle)
    config = effective_config(bundle, _config_overrides(args))
    providers = resolve_providers(bundle.path, config)
    with open(args.labeling, "r", encoding="utf-8") as f:
        labeling = InstanceLabeling.from_json_dict(json.load(f))
    state = SceneState(bundle, config, providers, labeling=labeling)
    graph = _run_graph(state)
    Path(args.out).write_text(serialize(graph), encoding="utf-8")
    print(f"wrote {args.out}: {len(graph.nodes)} nodes, {len(graph.edges)} edges")


def cmd_index(args):
    from .embeddings import build_index
    from .graph import deserialize
    bundle = load_bundle(args.bundle)
    config = effective_config(bundle, _config_overrides(args))
    providers = resolve_providers(bundle.path, config)
    if providers.embedding is None:
        raise EngineError("no embedding provider (set SCENEQUERY_EMBED_URL "
                          "or ship providers.json in the bundle)")
    graph = deserialize(Path(args.graph).read_text(encoding="utf-8"))
    index, warnings = build_index(graph, bundle.cloud(), bundle.frames(),
                                  providers.embedding, config)
    index.save(args.out)
    for w in warnings:
        print(f"warning: {w}", file=sys.stderr)
    print(f"wrote {args.out}: {len(index.image_vectors)} image / "
          f"{len(index.doc_vectors)} doc vectors, dimension {index.dimension}")


def cmd_build(args):
    state = _build(args)
    for stage, status in state.statuses.items():
        print(f"  {stage}: {status}")
    for w in state.warnings:
        print(f"warning: {w}", file=sys.stderr)
    print(f"build hash {state.build_hash[:16]}… "
          f"({state.object_count} objects)")


def cmd_query(args):
    state = _build(args)
    q = Query(args.text, mode=args.mode, route=args.route, top_k=args.top_k)
    result = route_query(q, state)
    if args.json:
        print(json.dumps(result.to_json_dict(), indent=2, sort_keys=True))
        return
    print(f"route: {result.route_taken}")
    if result.extracted_terms is not None:
        print(f"terms: {result.extracted_terms}")
    for h in result.hits:
        c = h.centroid
        print(f"  #{h.object_id} {h.cls:<16} score {h.score:.3f} "
              f"centroid ({c[0]:.2f}, {c[1]:.2f}, {c[2]:.2f})")
    if result.answer_text:
        print(f"answer: {result.answer_text}")
    if not result.hits:
        print("  (no hits)")


def cmd_navigate(args):
    from .figures import render_nav_figure
    from .geometry import Aabb3
    from .nav import plan_path
    state = _build(args)
    start = tuple(float(v) for v in args.start.split(","))
    if args.object_id is not None:
        node = state.graph.nodes.get(args.object_id)
        if node is None:
            raise EngineError(f"unknown object {args.object_id}")
        goal_box, goal_id = node.aabb, args.object_id
    elif args.goal:
        x, y = (float(v) for v in args.goal.split(","))
        goal_box, goal_id = Aabb3((x, y, 0.0), (x, y, 0.0)), None
    else:
        raise EngineError("navigate needs --object-id or --goal")
    path = plan_path(state.grid, start, goal_box, goal_id, smooth=args.smooth)
    out = Path(args.out)
    canonical_write(out, path.to_json_dict())
    boxes = [(k, n.aabb, n.cls) for k, n in state.graph.nodes.items()]
    render_nav_figure(state.grid, out.with_suffix(".png"), path=path,
                      boxes=boxes, start=start,
                      hits=[goal_id] if goal_id is not None else None)
    print(f"wrote {out} and {out.with_suffix('.png')}: "
          f"{len(path.waypoints)} waypoints, length {path.length:.2f} m")


def cmd_eval(args):
    from .evaluation import load_suite, run_suite
    from .figures import render_report_figure
    state = _build(args)
    specs = load_suite(args.suite)
    routes = [r.strip() for r in args.routes.split(",") if r.strip()]
    report = run_suite(state, specs, routes)
    out = Path(args.out)
    canonical_write(out, report.to_json_dict())
    with open(out.with_suffix(".csv"), "w", encoding="utf-8", newline="") as f:
        csv.writer(f).writerows(report.to_csv_rows())
    render_report_figure(report, out.with_suffix(".png"))
    print(report.to_table_str())
    print(f"wrote {out}, {out.with_suffix('.csv')}, {out.with_suffix('.png')}")


def cmd_serve(args):
    from .service import serve
    scenes = {}
    root = Path(args.scenes)
    bundles = [root] if (root / "manifest.json").exists() else sorted(
        p.parent for p in root.glob("*/manifest.json"))
    for bdir in bundles:
        bundle = load_bundle(bdir)
        config = effective_config(bundle, _config_overrides(args))
        providers = resolve_providers(bundle.path, config)
        state = build_scene(bundle, config, providers)
        scenes[state.scene_id] = state
        print(f"built scene {state.scene_id!r} "
              f"({state.object_count} objects)")
    print(f"serving {len(scenes)} scene(s) on {args.host}:{args.port}")
    serve(scenes, args.host, args.port)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="scenequery",
        description="object-centric queryable 3D scene engine")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, **kwargs):
        p = sub.add_parser(name, **kwargs)
        p.set_defaults(fn=fn)
        p.add_argument("--config", help="JSON config override file")
        return p

    p = add("synth", cmd_synth, help="generate a synthetic bundle")
    p.add_argument("--recipe", required=True)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--out", required=True)

    p = add("ingest", cmd_ingest, help="validate a bundle and print a summary")
    p.add_argument("bundle")

    p = add("segment", cmd_segment, help="lift masks into a point labeling")
    p.add_argument("bundle")
    p.add_argument("--out", default="labeling.json")

    p = add("graph", cmd_graph, help="build the 3D scene graph")
    p.add_argument("bundle")
    p.add_argument("--labeling", required=True)
    p.add_argument("--out", default="scene_graph.json")

    p = add("index", cmd_index, help="build the embedding index")
    p.add_argument("bundle")
    p.add_argument("--graph", required=True)
    p.add_argument("--out", default="index.qsre")

    p = add("build", cmd_build, help="run the full pipeline into derived/")
    p.add_argument("bundle")
    p.add_argument("--force", action="store_true")

    p = add("query", cmd_query, help="query a built scene")
    p.add_argument("bundle")
    p.add_argument("--text", required=True)
    p.add_argument("--mode", default="auto",
                   choices=["descriptive", "affordance", "negation", "auto"])
    p.add_argument("--route", default="auto",
                   choices=["point_cloud", "scene_graph", "two_step", "auto"])
    p.add_argument("--top-k", type=int, default=5)
    p.add_argument("--json", action="store_true")

    p = add("navigate", cmd_navigate, help="plan a path to an object")
    p.add_argument("bundle")
    p.add_argument("--start", required=True, help="X,Y meters")
    p.add_argument("--object-id", type=int)
    p.add_argument("--goal", help="X,Y meters")
    p.add_argument("--smooth", action="store_true")
    p.add_argument("--out", default="path.json")

    p = add("eval", cmd_eval, help="run a query suite and write a report")
    p.add_argument("bundle")
    p.add_argument("--suite", required=True)
    p.add_argument("--routes", default="point_cloud,scene_graph,two_step")
    p.add_argument("--out", default="report.json")

    p = add("serve", cmd_serve, help="serve built scenes over HTTP")
    p.add_argument("--scenes", required=True,
                   help="bundle dir or dir of bundle dirs")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)

    args = parser.parse_args(argv)
    try:
        args.fn(args)
    except EngineError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
