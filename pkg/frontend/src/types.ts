// Wire types of the annotation service API.

export type TaskKind = "validity" | "full";

export interface Task {
  task_id: string;
  clip_id: string;
  kind: TaskKind;
  media_url: string;
  lease_expires_at: number;
}

export interface AnnotationPayload {
  description: string;
  start_time: number;
  end_time: number;
  count: number;
}

export interface Submission {
  task_id: string;
  validity?: boolean | null;
  annotation?: AnnotationPayload | null;
}

export interface Ack {
  task_id: string;
  clip_id: string;
  clip_state: string;
}

export interface ServiceErrorBody {
  code: string;
  message: string;
  field?: string;
}

export class ApiError extends Error {
  readonly status: number;
  readonly code: string;
  readonly field?: string;

  constructor(status: number, body: ServiceErrorBody) {
    super(body.message);
    this.status = status;
    this.code = body.code;
    this.field = body.field;
  }
}
