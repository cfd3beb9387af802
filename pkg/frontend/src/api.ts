// REST client. Request bodies are serialized through one canonical
// function with a fixed key order, so a replayed history entry produces
// the same bytes as the original submission.

import {
  ErrorEnvelope,
  GraphDocument,
  GridMeta,
  NavigateRequest,
  NavigateResponse,
  ObjectResponse,
  QueryRequest,
  QueryResponse,
  SceneEntry,
} from "./types";

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
  ) {
    super(message);
  }
}

export function serializeQueryRequest(req: QueryRequest): string {
  // fixed key order; never reorder — history replay compares bytes
  return JSON.stringify({
    text: req.text,
    mode: req.mode,
    route: req.route,
    top_k: req.top_k,
  });
}

export function serializeNavigateRequest(req: NavigateRequest): string {
  return JSON.stringify({
    object_id: req.object_id,
    start: req.start,
  });
}

async function failFrom(resp: Response): Promise<ApiError> {
  let code = `http_${resp.status}`;
  let message = resp.statusText;
  try {
    const body = (await resp.json()) as ErrorEnvelope;
    if (body && body.error) {
      code = body.error.code;
      message = body.error.message;
    }
  } catch {
    // non-JSON error body; keep the status text
  }
  return new ApiError(resp.status, code, message);
}

export class Client {
  constructor(
    public baseUrl: string,
    private fetchFn: typeof fetch = fetch,
  ) {}

  private async getJson<T>(path: string): Promise<T> {
    const resp = await this.fetchFn(`${this.baseUrl}${path}`);
    if (!resp.ok) throw await failFrom(resp);
    return (await resp.json()) as T;
  }

  private async postRaw<T>(path: string, body: string): Promise<T> {
    const resp = await this.fetchFn(`${this.baseUrl}${path}`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body,
    });
    if (!resp.ok) throw await failFrom(resp);
    return (await resp.json()) as T;
  }

  listScenes(): Promise<SceneEntry[]> {
    return this.getJson("/scenes");
  }

  getGraph(sceneId: string): Promise<GraphDocument> {
    return this.getJson(`/scenes/${sceneId}/graph`);
  }

  getObject(sceneId: string, objectId: number): Promise<ObjectResponse> {
    return this.getJson(`/scenes/${sceneId}/objects/${objectId}`);
  }

  /** POST a query; returns the response plus the exact bytes sent. */
  async query(
    sceneId: string,
    req: QueryRequest,
  ): Promise<{ response: QueryResponse; requestBody: string }> {
    const body = serializeQueryRequest(req);
    const response = await this.postRaw<QueryResponse>(
      `/scenes/${sceneId}/query`,
      body,
    );
    return { response, requestBody: body };
  }

  async navigate(
    sceneId: string,
    req: NavigateRequest,
  ): Promise<{ response: NavigateResponse; requestBody: string }> {
    const body = serializeNavigateRequest(req);
    const response = await this.postRaw<NavigateResponse>(
      `/scenes/${sceneId}/navigate`,
      body,
    );
    return { response, requestBody: body };
  }

  async getGrid(sceneId: string): Promise<{ meta: GridMeta; pgm: ArrayBuffer }> {
    const resp = await this.fetchFn(`${this.baseUrl}/scenes/${sceneId}/grid.pgm`);
    if (!resp.ok) throw await failFrom(resp);
    const metaHeader = resp.headers.get("X-Grid-Meta");
    if (!metaHeader) throw new ApiError(500, "missing_meta", "grid response lacks X-Grid-Meta");
    return { meta: JSON.parse(metaHeader) as GridMeta, pgm: await resp.arrayBuffer() };
  }
}
