/** Wire types matching the annotation service API. */

export interface Box {
  x: number;
  y: number;
  w: number;
  h: number;
}

export interface SessionInfo {
  id: string;
  image_ref: string;
  region: string;
  created_at: string;
  state: string;
}

export interface CandidateEntry {
  sign_id: string;
  prototype_image_ref: string;
  score?: number;
}

export interface CandidateResponse {
  candidates: CandidateEntry[];
  source: "kg-only" | "kg+vpe";
  kg_size: number;
  warning?: string;
}

export interface AnnotationRecord {
  session_id: string;
  image_ref: string;
  bbox: number[];
  sign_id: string;
  attributes_provided: string;
  missing_sign: boolean;
  enrichment: Record<string, unknown>;
  created_at: string;
}

export type Vocabularies = Record<string, string[]>;
