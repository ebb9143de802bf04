/** Document shapes returned by the annotation service. */

export interface VideoDoc {
  video_id: string;
  project_id: string;
  source_uri: string;
  checksum: string;
  duration_ms: number;
  fps: number;
  status:
    | "registered"
    | "excluded"
    | "roi_pending"
    | "roi_set"
    | "sampled"
    | "complete";
  exclusion_flags: string[];
  version: number;
}

export interface RoiDoc {
  video_id: string;
  t_start_ms: number;
  t_end_ms: number;
  t_evaluable_ms: number | null;
  version: number;
}

export interface PlanDoc {
  video_id: string;
  interval_ms: number;
  auto_timestamps: number[];
  manual_timestamps: number[];
  materialized: boolean;
}

export interface FrameInfo {
  frame_id: string;
  video_id: string;
  timestamp_ms: number;
  origin: "auto_negative" | "manual_keyframe";
  image: {
    width: number;
    height: number;
    source_timestamp_ms: number;
  } | null;
}

export interface AssessmentDoc {
  target_id: string;
  rater_id: string;
  c1: boolean;
  c2: boolean;
  c3: boolean;
  comment: string;
  checklist_version: string;
  cvs: boolean;
  version: number;
}

export interface ConsensusDoc {
  target_id: string;
  c1: boolean;
  c2: boolean;
  c3: boolean;
  cvs: boolean;
  n_raters: number;
  source: "voted" | "automatic";
}

/** Outbound polygon; the server echoes points back as float pairs. */
export interface ShapeIn {
  label: number | string;
  points: [number, number][];
  draw_order?: number;
  is_hole?: boolean;
}

export interface PolygonDoc {
  label: number;
  points: [number, number][];
  draw_order: number;
  is_hole: boolean;
}

export type SegStatus =
  | "draft"
  | "submitted"
  | "in_review"
  | "approved"
  | "changes_requested";

export interface SegmentationDoc {
  frame_id: string;
  video_id: string;
  author_id: string;
  polygons: PolygonDoc[];
  status: SegStatus;
  reviewer_id: string | null;
  review_comment: string;
  class_table_version: string;
  record_id: string;
  version: number;
}

export interface QueueItem {
  frame_id: string;
  timestamp_ms: number;
  position: number;
  total: number;
  n_assessments: number;
  segmentation_status: SegStatus | null;
  self_authored: boolean;
}

/** Batch items are anonymized by the server: opaque key, no author fields. */
export interface BatchAssessmentItem {
  item_key: string;
  item_type: "assessment";
  target_id: string;
  c1: boolean;
  c2: boolean;
  c3: boolean;
}

export interface BatchSegmentationItem {
  item_key: string;
  item_type: "segmentation";
  frame_id: string;
  shapes: PolygonDoc[];
}

export type BatchItem = BatchAssessmentItem | BatchSegmentationItem;

export interface BatchDoc {
  batch_id: string;
  seed: number;
  size: number;
  items: BatchItem[];
}

export interface PairAgreement {
  rater_a: string;
  rater_b: string;
  kappa: number | null;
  n_shared: number;
  status: "ok" | "undefined" | "missing";
}

export interface AgreementReport {
  scope: string;
  criterion: string;
  raters: string[];
  pairs: PairAgreement[];
  mean_kappa: number | null;
}

export interface ChecklistCriterion {
  key: "c1" | "c2" | "c3";
  title: string;
  definition: string;
  achieved: string;
  not_achieved: string;
}

export interface ChecklistDoc {
  version: string;
  criteria: ChecklistCriterion[];
}

export interface AnnotatorDoc {
  annotator_id: string;
  display_name: string;
  roles: string[];
}

export interface GateDoc {
  ready: boolean;
  blockers: { video_id: string; frame_id: string | null; reasons: string[] }[];
}

export interface ApiErrorBody {
  error: string;
  detail: string;
  blockers?: unknown[];
}
