import { FormSnapshot } from "./form.js";

export interface KeyValueStorage {
  getItem(key: string): string | null;
  setItem(key: string, value: string): void;
  removeItem(key: string): void;
}

/** Autosaved per-task drafts so a reload mid-task restores the marks. */
export class DraftStore {
  constructor(private readonly storage: KeyValueStorage) {}

  private key(taskId: string): string {
    return `draft:${taskId}`;
  }

  save(taskId: string, snapshot: FormSnapshot): void {
    this.storage.setItem(this.key(taskId), JSON.stringify(snapshot));
  }

  load(taskId: string): FormSnapshot | null {
    const raw = this.storage.getItem(this.key(taskId));
    if (raw === null) return null;
    try {
      return JSON.parse(raw) as FormSnapshot;
    } catch {
      return null;
    }
  }

  clear(taskId: string): void {
    this.storage.removeItem(this.key(taskId));
  }
}
