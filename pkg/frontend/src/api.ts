/** Thin typed client over the service HTTP API.
 *
 * All traffic goes through one injectable fetch function so tests can swap
 * in a double and the app can add retry behavior in one place. A 409 from
 * stale state is surfaced as ApiError{status: 409}; callers reload and
 * retry, which is the whole concurrency story on the client side. */

import type {
  AgreementReport,
  AnnotatorDoc,
  ApiErrorBody,
  AssessmentDoc,
  BatchDoc,
  ChecklistDoc,
  ConsensusDoc,
  FrameInfo,
  GateDoc,
  PlanDoc,
  QueueItem,
  RoiDoc,
  SegmentationDoc,
  ShapeIn,
  VideoDoc,
} from "./types.js";

export type FetchLike = (
  url: string,
  init?: RequestInit,
) => Promise<Response>;

export interface Identity {
  /** Bearer token when the server runs with a token file. */
  token?: string;
  /** Plain annotator id for header identity on local single-user servers. */
  annotatorId?: string;
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly errorType: string,
    readonly detail: string,
    readonly blockers: unknown[] = [],
  ) {
    super(`${errorType}: ${detail}`);
    this.name = "ApiError";
  }
}

export class ApiClient {
  constructor(
    readonly baseUrl: string,
    private identity: Identity = {},
    private fetchFn: FetchLike = (url, init) => fetch(url, init),
  ) {}

  setIdentity(identity: Identity): void {
    this.identity = identity;
  }

  private headers(hasBody: boolean): Record<string, string> {
    const h: Record<string, string> = {};
    if (hasBody) h["Content-Type"] = "application/json";
    if (this.identity.token) {
      h["Authorization"] = `Bearer ${this.identity.token}`;
    } else if (this.identity.annotatorId) {
      h["X-Annotator-Id"] = this.identity.annotatorId;
    }
    return h;
  }

  private async request<T>(
    method: string,
    path: string,
    body?: unknown,
  ): Promise<T> {
    const init: RequestInit = { method, headers: this.headers(body !== undefined) };
    if (body !== undefined) init.body = JSON.stringify(body);
    const resp = await this.fetchFn(this.baseUrl + path, init);
    if (!resp.ok) {
      let parsed: Partial<ApiErrorBody> & { detail?: unknown } = {};
      try {
        parsed = await resp.json();
      } catch {
        // non-JSON error body; fall through with whatever we have
      }
      const detail =
        typeof parsed.detail === "string"
          ? parsed.detail
          : JSON.stringify(parsed.detail ?? "");
      throw new ApiError(
        resp.status,
        parsed.error ?? `HTTP ${resp.status}`,
        detail,
        parsed.blockers ?? [],
      );
    }
    return (await resp.json()) as T;
  }

  // videos

  registerVideo(body: {
    source_uri: string;
    duration_ms: number;
    fps: number;
    project_id?: string;
  }): Promise<VideoDoc> {
    return this.request("POST", "/videos", body);
  }

  listVideos(projectId?: string): Promise<VideoDoc[]> {
    const q = projectId ? `?project_id=${encodeURIComponent(projectId)}` : "";
    return this.request("GET", `/videos${q}`);
  }

  getVideo(videoId: string): Promise<VideoDoc> {
    return this.request("GET", `/videos/${videoId}`);
  }

  screenVideo(videoId: string, flags: string[]): Promise<VideoDoc> {
    return this.request("POST", `/videos/${videoId}/screening`, { flags });
  }

  // region of interest and sampling plan

  setRoi(
    videoId: string,
    roi: { t_start_ms: number; t_end_ms: number; t_evaluable_ms?: number | null },
  ): Promise<RoiDoc> {
    return this.request("PUT", `/videos/${videoId}/roi`, roi);
  }

  getRoi(videoId: string): Promise<RoiDoc> {
    return this.request("GET", `/videos/${videoId}/roi`);
  }

  sample(
    videoId: string,
    intervalMs: number,
    materialize = false,
  ): Promise<PlanDoc> {
    return this.request("POST", `/videos/${videoId}/sampling`, {
      interval_ms: intervalMs,
      materialize,
    });
  }

  getPlan(videoId: string): Promise<PlanDoc> {
    return this.request("GET", `/videos/${videoId}/plan`);
  }

  /** Time-addressed still from the source video; the server answers with the
   * nearest decodable frame and its anchor timestamp in a header. */
  streamUrl(videoId: string, tMs: number): string {
    return `${this.baseUrl}/videos/${videoId}/stream?t=${tMs}`;
  }

  frameImageUrl(frameId: string): string {
    return `${this.baseUrl}/frames/${frameId}/image`;
  }

  maskUrl(frameId: string): string {
    return `${this.baseUrl}/frames/${frameId}/mask`;
  }

  // frames and assessments

  getFrame(frameId: string): Promise<FrameInfo> {
    return this.request("GET", `/frames/${frameId}`);
  }

  assignRaters(frameId: string, raterIds: string[]): Promise<{ rater_ids: string[] }> {
    return this.request("POST", `/frames/${frameId}/cvs/assign`, {
      rater_ids: raterIds,
    });
  }

  submitAssessment(
    frameId: string,
    values: { c1: boolean; c2: boolean; c3: boolean; comment?: string },
  ): Promise<AssessmentDoc> {
    return this.request("POST", `/frames/${frameId}/cvs`, values);
  }

  listAssessments(
    frameId: string,
  ): Promise<{ target_id: string; assessments: AssessmentDoc[] }> {
    return this.request("GET", `/frames/${frameId}/cvs`);
  }

  getConsensus(frameId: string): Promise<ConsensusDoc> {
    return this.request("GET", `/frames/${frameId}/consensus`);
  }

  // segmentation

  submitSegmentation(
    frameId: string,
    shapes: ShapeIn[],
    draft = false,
  ): Promise<SegmentationDoc> {
    return this.request("POST", `/frames/${frameId}/segmentation`, {
      shapes,
      draft,
    });
  }

  getSegmentation(frameId: string): Promise<SegmentationDoc> {
    return this.request("GET", `/frames/${frameId}/segmentation`);
  }

  claimReview(recordId: string): Promise<SegmentationDoc> {
    return this.request("POST", `/segmentations/${recordId}/claim`);
  }

  reviewSegmentation(
    recordId: string,
    approve: boolean,
    comment = "",
  ): Promise<SegmentationDoc> {
    return this.request("POST", `/segmentations/${recordId}/review`, {
      approve,
      comment,
    });
  }

  // qa and review

  sequentialQueue(videoId: string): Promise<QueueItem[]> {
    return this.request("GET", `/videos/${videoId}/queue`);
  }

  kappaReport(scope: string, criterion: string): Promise<AgreementReport> {
    const q = `?scope=${encodeURIComponent(scope)}&criterion=${encodeURIComponent(criterion)}`;
    return this.request("GET", `/qa/kappa${q}`);
  }

  createBatch(size: number, seed: number, projectId?: string): Promise<BatchDoc> {
    return this.request("POST", "/qa/batches", {
      size,
      seed,
      project_id: projectId ?? null,
    });
  }

  getBatch(batchId: string): Promise<BatchDoc> {
    return this.request("GET", `/qa/batches/${batchId}`);
  }

  // misc

  checklist(): Promise<ChecklistDoc> {
    return this.request("GET", "/checklist");
  }

  registerAnnotator(body: {
    annotator_id: string;
    display_name?: string;
    roles: string[];
  }): Promise<AnnotatorDoc> {
    return this.request("POST", "/annotators", body);
  }

  listAnnotators(): Promise<AnnotatorDoc[]> {
    return this.request("GET", "/annotators");
  }

  gate(projectId: string): Promise<GateDoc> {
    return this.request("GET", `/projects/${projectId}/gate`);
  }
}
