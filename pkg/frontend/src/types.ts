/** Wire types mirrored from the gateway API. */

export type Priority = "stat" | "routine";
export type StudyStatus = "queued" | "processing" | "done" | "failed" | "shed";

export interface WorklistEntry {
  study_id: string;
  priority: Priority;
  status: StudyStatus;
  submitted_at: number | null;
  headline: { label: string; score: number } | null;
  flagged_for_review: boolean;
}

export interface Finding {
  label: string;
  score: number;
  kind?: "classification" | "detection";
  box?: [number, number, number, number];
}

export interface ResultMessage {
  resource_kind: string;
  study_id: string;
  model_id: string;
  model_version: number;
  task: string;
  created_at: string;
  findings: Finding[];
  flags: { early_exit: boolean; flagged_for_review: boolean };
  timings: Record<string, number>;
  mask?: { rle: string; shape: [number, number] };
  dice_vs_reference?: number;
}

export interface Thresholds {
  confidence: number;
  nms_iou: number;
  tau_exit: number;
  tau_conf: number;
  entropy_gate: number;
}

export interface LatencyBlock {
  count: number;
  mean: number;
  p50: number;
  p95: number;
  p99: number;
  fps: number;
}

export interface MetricsEvent {
  tick: number;
  time: number;
  pipeline: {
    submitted: number;
    completed: number;
    shed: number;
    early_exit_rate: number;
    end_to_end: LatencyBlock | null;
    end_to_end_stat: LatencyBlock | null;
    end_to_end_routine: LatencyBlock | null;
    [key: string]: unknown;
  };
  queues: Record<string, number>;
  worklist: Record<string, number>;
  thresholds: Thresholds;
}

export interface BoxDetection {
  box: [number, number, number, number];
  score: number;
  label: string;
}

/** Per-study view state; one serialized store drives all rendering. */
export interface ViewState {
  studyId: string | null;
  opacity: number;
  layers: { mask: boolean; saliency: boolean; boxes: boolean; uncertainty: boolean };
  confidence: number;
  nmsIou: number;
  compareMode: boolean;
  zoom: number;
  panX: number;
  panY: number;
}

export const defaultViewState: ViewState = {
  studyId: null,
  opacity: 0.45,
  layers: { mask: true, saliency: false, boxes: true, uncertainty: true },
  confidence: 0.5,
  nmsIou: 0.5,
  compareMode: false,
  zoom: 1,
  panX: 0,
  panY: 0,
};
