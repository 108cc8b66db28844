// JSON shapes of the wheelgen service API. Image fields hold store refs;
// the binary lives behind GET /images/{ref}.

export type Crop = [number, number, number, number]; // x, y, w, h

export interface InspirationJson {
  id: string;
  image: string; // image ref
  crop: Crop | null;
  weight: number;
  source: "user" | "exemplar-dataset";
}

export interface ConceptGroupJson {
  keyword: string;
  group_weight: number;
  inspirations: InspirationJson[];
}

export interface SymmetryJson {
  enabled: boolean;
  k: number;
  center: [number, number] | null;
  radius: number | null;
  final_replication: boolean;
}

export interface RequestJson {
  concepts: ConceptGroupJson[];
  symmetry: SymmetryJson;
  sketch: string | null;
  template: string | null;
  output_count: number;
  seed: number;
  backend_id: string;
  sketch_strength: number;
}

export interface FeedbackJson {
  added_inspirations?: [string, InspirationJson][];
  removed_inspiration_ids?: string[];
  weight_changes?: [string, number][];
  symmetry_change?: SymmetryJson | null;
  note?: string;
  seed?: number | null;
}

export interface JobJson {
  id: string;
  state: "queued" | "running" | "done" | "failed";
  record_id: string | null;
  error: string | null;
  outputs?: string[]; // /images/... urls once done
}

export interface RecordJson {
  id: string;
  request: RequestJson;
  outputs: string[];
  output_urls: string[];
  parent_id: string | null;
  feedback: FeedbackJson | null;
  created_at: number;
  resolved_conditioning: ResolvedConditioning | null;
}

export interface ResolvedConditioning {
  prompt: string;
  exemplars: ExemplarEntry[];
  context_weights: number[];
  has_global: boolean;
  seed: number;
  plan: { boundaries: number[]; mode: string };
  errors: { index: number; error: string }[];
}

export interface ExemplarEntry {
  keyword?: string;
  group_weight?: number;
  mode?: "user" | "exemplar" | "prompt-only";
  inspiration_ids?: string[];
  exemplar_ids?: string[];
  template?: unknown;
  warning?: string;
}

export interface LineageEntry {
  id: string;
  parent_id: string | null;
  seed: number;
  note: string | null;
  feedback: FeedbackJson | null;
  resolved_conditioning: ResolvedConditioning | null;
  outputs: string[];
}

// client-side workspace model, serialized into RequestJson at generate time

export interface WorkspaceImage {
  id: string;
  ref: string;
  weight: number;
  crop: Crop | null;
}

export interface WorkspaceGroup {
  keyword: string;
  groupWeight: number;
  images: WorkspaceImage[];
}

export type Stroke = [number, number][]; // normalized [0,1] coords

export interface Workspace {
  groups: WorkspaceGroup[];
  strokes: Stroke[];
  sketchStrength: number;
  symmetryEnabled: boolean;
  symmetryK: number;
  outputCount: number;
  seed: number;
  backendId: string;
}
