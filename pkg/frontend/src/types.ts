// API wire types, mirroring docs/api_schema.json on the service side.

export interface Aabb {
  min: [number, number, number];
  max: [number, number, number];
}

export interface Hit {
  object_id: number;
  class: string;
  score: number;
  centroid: [number, number, number];
  aabb: Aabb;
}

export interface SceneEntry {
  scene_id: string;
  status: Record<string, string>;
  object_count: number;
  build_hash: string;
}

export interface QueryRequest {
  text: string;
  mode: string;
  route: string;
  top_k: number;
}

export interface QueryResponse {
  scene_id: string;
  build_hash: string;
  hits: Hit[];
  route_taken: string;
  extracted_terms?: string[];
  answer_text?: string;
  answer_object_ids?: number[];
  warnings: string[];
}

export interface NavigateRequest {
  object_id: number;
  start: [number, number];
}

export interface NavigateResponse {
  scene_id: string;
  build_hash: string;
  waypoints: [number, number][];
  length: number;
  goal_object_id: number | null;
}

export interface GraphNode {
  object_id: number;
  class: string;
  caption: string;
  attributes: Record<string, string> | null;
  centroid: [number, number, number];
  aabb: Aabb;
  point_indices: number[];
}

export interface GraphDocument {
  format: string;
  version: number;
  nodes: Record<string, GraphNode>;
  edges: { src: number; dst: number; relation: string; support: number }[];
}

export interface ObjectResponse {
  scene_id: string;
  build_hash: string;
  object: GraphNode;
}

export interface GridMeta {
  origin: [number, number];
  cell_size: number;
  width: number;
  height: number;
  inflation_radius: number;
}

export interface ErrorEnvelope {
  error: { code: string; message: string };
}
