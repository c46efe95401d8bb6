import { Ack, ApiError, ServiceErrorBody, Submission, Task, TaskKind } from "./types.js";

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

/** Thin typed client over the annotation-service HTTP API. */
export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private readonly token: string,
    private readonly fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private headers(): Record<string, string> {
    return {
      Authorization: `Bearer ${this.token}`,
      "Content-Type": "application/json",
    };
  }

  /** Lease the next task of the given kind; null when the pool is empty. */
  async nextTask(kind: TaskKind): Promise<Task | null> {
    const response = await this.fetchFn(`${this.baseUrl}/tasks/next?kind=${kind}`, {
      headers: this.headers(),
    });
    if (response.status === 204) return null;
    if (!response.ok) throw await toApiError(response);
    return (await response.json()) as Task;
  }

  async submit(submission: Submission): Promise<Ack> {
    const response = await this.fetchFn(`${this.baseUrl}/submissions`, {
      method: "POST",
      headers: this.headers(),
      body: JSON.stringify(submission),
    });
    if (!response.ok) throw await toApiError(response);
    return (await response.json()) as Ack;
  }

  mediaUrl(task: Task): string {
    return `${this.baseUrl}${task.media_url}`;
  }
}

async function toApiError(response: Response): Promise<ApiError> {
  let body: ServiceErrorBody = { code: "unknown", message: `HTTP ${response.status}` };
  try {
    const parsed = await response.json();
    // service errors come flat; framework errors arrive under `detail`
    const candidate = parsed.detail ?? parsed;
    if (candidate && typeof candidate.code === "string") {
      body = candidate as ServiceErrorBody;
    } else if (Array.isArray(candidate)) {
      body = { code: "request_invalid", message: JSON.stringify(candidate) };
    }
  } catch {
    // non-JSON error body: keep the fallback
  }
  return new ApiError(response.status, body);
}
