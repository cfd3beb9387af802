// Console entry point: wires the query form, hit list, history and the
// canvas scene view to the REST service. All state lives client-side in
// one SessionState; the server's responses are rendered as-is.

import { ApiError, Client } from "./api";
import { parsePgm, Pgm } from "./pgm";
import {
  appendQuery,
  dismissBanner,
  initialState,
  lastResult,
  replayBody,
  selectObject,
  selectScene,
  SessionState,
  setBanner,
  setPath,
} from "./state";
import { GraphDocument, GridMeta, QueryRequest } from "./types";
import { layoutFor, renderScene, toCanvas } from "./view";

const baseUrl =
  new URLSearchParams(window.location.search).get("api") ??
  "http://127.0.0.1:8000";
const client = new Client(baseUrl);

let state: SessionState = initialState();
let graph: GraphDocument | null = null;
let gridMeta: GridMeta | null = null;
let gridPgm: Pgm | null = null;
let buildHash: string | null = null;
let start: [number, number] | null = null;

const $ = <T extends HTMLElement>(id: string): T => {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el as T;
};

const canvas = $<HTMLCanvasElement>("scene");
const sceneSelect = $<HTMLSelectElement>("scene-select");
const queryText = $<HTMLInputElement>("query-text");
const modeSelect = $<HTMLSelectElement>("mode-select");
const routeSelect = $<HTMLSelectElement>("route-select");
const inlineError = $<HTMLDivElement>("inline-error");
const banner = $<HTMLDivElement>("banner");
const hitList = $<HTMLUListElement>("hits");
const historyList = $<HTMLUListElement>("history");
const detail = $<HTMLPreElement>("detail");
const answer = $<HTMLDivElement>("answer");
const navigateBtn = $<HTMLButtonElement>("navigate-btn");

function redraw(): void {
  if (!gridMeta || !gridPgm || !graph) return;
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  const layout = layoutFor(gridMeta, canvas.width, canvas.height);
  const result = lastResult(state);
  renderScene(ctx, layout, {
    meta: gridMeta,
    pgm: gridPgm,
    nodes: Object.values(graph.nodes),
    hits: result ? result.hits : [],
    path: state.path,
  });
  if (start) {
    const [cx, cy] = toCanvas(layout, start[0], start[1]);
    ctx.fillStyle = "#703090";
    ctx.beginPath();
    ctx.arc(cx, cy, 4, 0, Math.PI * 2);
    ctx.fill();
    ctx.fillText("start", cx + 6, cy);
  }
}

function renderBanner(): void {
  banner.textContent = state.banner ?? "";
  banner.style.display = state.banner ? "block" : "none";
}

function renderHistory(): void {
  historyList.innerHTML = "";
  state.history.forEach((entry, i) => {
    const li = document.createElement("li");
    const replay = document.createElement("button");
    replay.textContent = "replay";
    replay.onclick = () => void runQuery(entry.request, i);
    li.textContent = `${entry.request.text} → ${entry.response.hits.length} hit(s) `;
    li.appendChild(replay);
    historyList.appendChild(li);
  });
}

function renderHits(): void {
  hitList.innerHTML = "";
  const result = lastResult(state);
  answer.textContent = result?.answer_text ?? "";
  if (!result) return;
  result.hits.forEach((hit, rank) => {
    const li = document.createElement("li");
    const c = hit.centroid;
    li.textContent = `${rank + 1}. ${hit.class} #${hit.object_id} ` +
      `score ${hit.score.toFixed(3)} at (${c[0].toFixed(2)}, ${c[1].toFixed(2)}, ${c[2].toFixed(2)})`;
    if (hit.object_id === state.selectedObjectId) li.classList.add("selected");
    li.onclick = () => void select(hit.object_id);
    hitList.appendChild(li);
  });
  navigateBtn.disabled = state.selectedObjectId === null || start === null;
}

async function refetchStatic(sceneId: string): Promise<void> {
  graph = await client.getGraph(sceneId);
  const grid = await client.getGrid(sceneId);
  gridMeta = grid.meta;
  gridPgm = parsePgm(grid.pgm);
}

function checkHash(hash: string, sceneId: string): void {
  if (buildHash && hash !== buildHash) {
    // the scene was rebuilt behind us; refetch the static layers
    void refetchStatic(sceneId).then(redraw);
  }
  buildHash = hash;
}

function showError(e: unknown): void {
  if (e instanceof ApiError && (e.status === 400 || e.status === 404)) {
    inlineError.textContent = `${e.code}: ${e.message}`;
    return;
  }
  state = setBanner(state, e instanceof Error ? e.message : String(e));
  renderBanner();
}

async function runQuery(request: QueryRequest, replayIndex?: number): Promise<void> {
  const sceneId = state.sceneId;
  if (!sceneId) return;
  inlineError.textContent = "";
  try {
    const { response, requestBody } = await client.query(sceneId, request);
    if (replayIndex !== undefined && replayBody(state, replayIndex) !== requestBody) {
      throw new Error("replay produced different request bytes");
    }
    state = appendQuery(state, {
      kind: "query",
      sceneId,
      request,
      requestBody,
      response,
    });
    state = { ...state, path: state.path }; // path overlay persists until replaced
    checkHash(response.build_hash, sceneId);
    renderHits();
    renderHistory();
    renderBanner();
    redraw();
  } catch (e) {
    showError(e);
  }
}

async function select(objectId: number): Promise<void> {
  state = selectObject(state, objectId);
  renderHits();
  redraw();
  const sceneId = state.sceneId;
  if (!sceneId) return;
  try {
    const obj = await client.getObject(sceneId, objectId);
    checkHash(obj.build_hash, sceneId);
    detail.textContent = JSON.stringify(obj.object, null, 2);
  } catch (e) {
    showError(e);
  }
}

async function navigateToSelected(): Promise<void> {
  const sceneId = state.sceneId;
  if (!sceneId || state.selectedObjectId === null || !start) return;
  try {
    const { response } = await client.navigate(sceneId, {
      object_id: state.selectedObjectId,
      start,
    });
    state = setPath(state, response);
    checkHash(response.build_hash, sceneId);
    renderBanner();
    redraw();
  } catch (e) {
    showError(e); // 422 PathNotFound -> banner, overlays unchanged
  }
}

canvas.addEventListener("click", (ev) => {
  if (!gridMeta) return;
  const layout = layoutFor(gridMeta, canvas.width, canvas.height);
  const rect = canvas.getBoundingClientRect();
  const px = ev.clientX - rect.left;
  const py = ev.clientY - rect.top;
  start = [
    layout.worldX0 + px / layout.scale,
    layout.worldY0 + (layout.canvasHeight - py) / layout.scale,
  ];
  renderHits();
  redraw();
});

$<HTMLFormElement>("query-form").addEventListener("submit", (ev) => {
  ev.preventDefault();
  void runQuery({
    text: queryText.value,
    mode: modeSelect.value,
    route: routeSelect.value,
    top_k: 5,
  });
});

navigateBtn.addEventListener("click", () => void navigateToSelected());
$<HTMLButtonElement>("banner-dismiss").addEventListener("click", () => {
  state = dismissBanner(state);
  renderBanner();
});

sceneSelect.addEventListener("change", () => {
  void (async () => {
    state = selectScene(state, sceneSelect.value);
    buildHash = null;
    start = null;
    try {
      await refetchStatic(sceneSelect.value);
      renderHits();
      renderHistory();
      redraw();
    } catch (e) {
      showError(e);
    }
  })();
});

void (async () => {
  try {
    const scenes = await client.listScenes();
    for (const scene of scenes) {
      const opt = document.createElement("option");
      opt.value = scene.scene_id;
      opt.textContent = `${scene.scene_id} (${scene.object_count} objects)`;
      sceneSelect.appendChild(opt);
    }
    if (scenes.length) {
      sceneSelect.value = scenes[0].scene_id;
      sceneSelect.dispatchEvent(new Event("change"));
    }
  } catch (e) {
    showError(e);
  }
})();
