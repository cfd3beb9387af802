// Client-side session state. The server is the single source of truth:
// nothing here re-ranks or recomputes scores — the state only remembers
// what the API returned, in the order it returned it.

import { NavigateResponse, QueryRequest, QueryResponse } from "./types";

export interface HistoryEntry {
  kind: "query";
  sceneId: string;
  request: QueryRequest;
  requestBody: string; // exact bytes sent; replays must reproduce these
  response: QueryResponse;
}

export interface SessionState {
  sceneId: string | null;
  history: HistoryEntry[];
  selectedObjectId: number | null;
  path: NavigateResponse | null;
  banner: string | null;
}

export function initialState(): SessionState {
  return {
    sceneId: null,
    history: [],
    selectedObjectId: null,
    path: null,
    banner: null,
  };
}

export function selectScene(state: SessionState, sceneId: string): SessionState {
  return { ...initialState(), sceneId };
}

/** History is append-only within a session. */
export function appendQuery(
  state: SessionState,
  entry: HistoryEntry,
): SessionState {
  return {
    ...state,
    history: [...state.history, entry],
    selectedObjectId: null,
    banner: null,
  };
}

export function lastResult(state: SessionState): QueryResponse | null {
  const entry = state.history[state.history.length - 1];
  return entry ? entry.response : null;
}

/** Only objects from the last result's hit set are selectable. */
export function selectObject(
  state: SessionState,
  objectId: number,
): SessionState {
  const result = lastResult(state);
  const valid = !!result && result.hits.some((h) => h.object_id === objectId);
  if (!valid) return state;
  return { ...state, selectedObjectId: objectId };
}

export function setPath(
  state: SessionState,
  path: NavigateResponse,
): SessionState {
  return { ...state, path, banner: null };
}

/** Errors surface as a dismissible banner and never clobber overlays. */
export function setBanner(state: SessionState, message: string): SessionState {
  return { ...state, banner: message };
}

export function dismissBanner(state: SessionState): SessionState {
  return { ...state, banner: null };
}

/** The request a replay of history entry `index` must issue, byte for byte. */
export function replayBody(state: SessionState, index: number): string {
  const entry = state.history[index];
  if (!entry) throw new Error(`no history entry ${index}`);
  return entry.requestBody;
}
