import { Submission, TaskKind } from "./types.js";

export const CLIP_DURATION = 10.0;
export const MIN_COUNT = 2;

/** Round a playhead time to the 0.01 s capture resolution. */
export function captureTime(playhead: number): number {
  return Math.round(playhead * 100) / 100;
}

export interface FormSnapshot {
  description: string;
  startMark: number | null;
  endMark: number | null;
  count: number | null;
  validity: boolean | null;
}

/**
 * State behind the question form: validity toggle for yes/no tasks, and the
 * four answers (description, start, end, count) for full annotation tasks.
 *
 * Client-side checks mirror the service rules so the submit button can react
 * immediately, but the server stays authoritative.
 */
export class AnnotationForm {
  readonly kind: TaskKind;
  readonly clipDuration: number;

  description = "";
  startMark: number | null = null;
  endMark: number | null = null;
  count: number | null = null;
  validity: boolean | null = null;

  /** True when the latest mark action swapped start and end (visual cue). */
  marksSwapped = false;

  constructor(kind: TaskKind, clipDuration: number = CLIP_DURATION) {
    this.kind = kind;
    this.clipDuration = clipDuration;
  }

  private clamp(time: number): number {
    return Math.min(Math.max(captureTime(time), 0), this.clipDuration);
  }

  setStart(playhead: number): void {
    const value = this.clamp(playhead);
    this.marksSwapped = false;
    if (this.endMark !== null && value > this.endMark) {
      this.startMark = this.endMark;
      this.endMark = value;
      this.marksSwapped = true;
      return;
    }
    this.startMark = value;
  }

  setEnd(playhead: number): void {
    const value = this.clamp(playhead);
    this.marksSwapped = false;
    if (this.startMark !== null && value < this.startMark) {
      this.endMark = this.startMark;
      this.startMark = value;
      this.marksSwapped = true;
      return;
    }
    this.endMark = value;
  }

  setCount(value: number | null): void {
    this.count = value === null ? null : Math.round(value);
  }

  setDescription(text: string): void {
    this.description = text;
  }

  setValidity(value: boolean): void {
    this.validity = value;
  }

  /** Field-level problems in the order they should be shown. */
  validationErrors(): string[] {
    if (this.kind === "validity") {
      return this.validity === null ? ["answer yes or no"] : [];
    }
    const errors: string[] = [];
    if (this.description.trim() === "") errors.push("describe the repeating action");
    if (this.startMark === null) errors.push("set the start mark");
    if (this.endMark === null) errors.push("set the end mark");
    if (this.startMark !== null && this.endMark !== null && this.startMark >= this.endMark) {
      errors.push("start must be before end");
    }
    if (this.startMark !== null && this.startMark < 0) errors.push("start is before the clip");
    if (this.endMark !== null && this.endMark > this.clipDuration) {
      errors.push("end is beyond the clip");
    }
    if (this.count === null || this.count < MIN_COUNT) {
      errors.push(`count must be at least ${MIN_COUNT}`);
    }
    return errors;
  }

  canSubmit(): boolean {
    return this.validationErrors().length === 0;
  }

  buildSubmission(taskId: string): Submission {
    if (!this.canSubmit()) {
      throw new Error(`form not submittable: ${this.validationErrors().join("; ")}`);
    }
    if (this.kind === "validity") {
      return { task_id: taskId, validity: this.validity as boolean };
    }
    return {
      task_id: taskId,
      annotation: {
        description: this.description.trim(),
        start_time: this.startMark as number,
        end_time: this.endMark as number,
        count: this.count as number,
      },
    };
  }

  snapshot(): FormSnapshot {
    return {
      description: this.description,
      startMark: this.startMark,
      endMark: this.endMark,
      count: this.count,
      validity: this.validity,
    };
  }

  restore(snapshot: FormSnapshot): void {
    this.description = snapshot.description;
    this.startMark = snapshot.startMark;
    this.endMark = snapshot.endMark;
    this.count = snapshot.count;
    this.validity = snapshot.validity;
    this.marksSwapped = false;
  }
}
