import { ApiClient } from "./api.js";
import { AnnotationForm } from "./form.js";
import { DraftStore } from "./draft.js";
import { Ack, ApiError, Task, TaskKind } from "./types.js";

export interface ActiveTask {
  task: Task;
  form: AnnotationForm;
}

/**
 * One-rater task loop: lease a task, restore any draft, take a submission,
 * advance.  Lease expiry surfaces as a stale-lease error on submit; the loop
 * reacts by dropping the task and fetching a fresh one.
 */
export class Session {
  current: ActiveTask | null = null;

  constructor(
    private readonly api: ApiClient,
    private readonly drafts: DraftStore,
    private readonly kind: TaskKind,
    private readonly clipDuration: number = 10.0,
  ) {}

  /** Lease the next task; null when the pool is drained. */
  async next(): Promise<ActiveTask | null> {
    const task = await this.api.nextTask(this.kind);
    if (task === null) {
      this.current = null;
      return null;
    }
    const form = new AnnotationForm(task.kind, this.clipDuration);
    const draft = this.drafts.load(task.task_id);
    if (draft !== null) form.restore(draft);
    this.current = { task, form };
    return this.current;
  }

  /** Persist the current form as a draft (call on every edit). */
  saveDraft(): void {
    if (this.current !== null) {
      this.drafts.save(this.current.task.task_id, this.current.form.snapshot());
    }
  }

  /**
   * Submit the current form.  On success the draft is dropped and the task
   * cleared.  Validation problems from the server are re-thrown for inline
   * display; a stale lease clears the task so the loop can re-fetch.
   */
  async submit(): Promise<Ack> {
    if (this.current === null) throw new Error("no active task");
    const { task, form } = this.current;
    try {
      const ack = await this.api.submit(form.buildSubmission(task.task_id));
      this.drafts.clear(task.task_id);
      this.current = null;
      return ack;
    } catch (error) {
      if (error instanceof ApiError && error.code === "stale_lease") {
        this.drafts.clear(task.task_id);
        this.current = null;
      }
      throw error;
    }
  }
}
