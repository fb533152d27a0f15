// Typed client for the diagnosis session API. All model logic lives on the
// server; this file only moves JSON.

export type AnswerValue = "true" | "false" | "not_sure";

export type SessionStatus = "awaiting_answer" | "diagnosed" | "expired";

export interface HistoryEntry {
  symptom: string;
  answer: AnswerValue;
}

export interface KnownSymptom {
  symptom: string;
  present: boolean;
  source: "explicit" | "inquiry";
}

export interface Diagnosis {
  disease: string;
  probability: number;
  distribution: Record<string, number>;
}

export interface SessionView {
  id: string;
  status: SessionStatus;
  question: string | null;
  history: HistoryEntry[];
  known: KnownSymptom[];
  turns: number;
  stop_reason: string | null;
  diagnosis: Diagnosis | null;
}

export interface VocabPayload {
  symptoms: string[];
  diseases: string[];
}

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
    this.name = "ApiError";
  }
}

async function parse<T>(response: Response): Promise<T> {
  const body = await response.json().catch(() => ({}));
  if (!response.ok) {
    const message =
      typeof body === "object" && body !== null && "error" in body
        ? String((body as { error: unknown }).error)
        : response.statusText;
    throw new ApiError(response.status, message);
  }
  return body as T;
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchFn: typeof fetch = fetch,
  ) {}

  getVocab(): Promise<VocabPayload> {
    return this.request<VocabPayload>("GET", "/vocab");
  }

  createSession(explicit: Record<string, boolean>): Promise<SessionView> {
    return this.request<SessionView>("POST", "/sessions", { explicit });
  }

  getSession(id: string): Promise<SessionView> {
    return this.request<SessionView>("GET", `/sessions/${id}`);
  }

  answer(id: string, answer: AnswerValue): Promise<SessionView> {
    return this.request<SessionView>("POST", `/sessions/${id}/answer`, { answer });
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const response = await this.fetchFn(`${this.baseUrl}${path}`, {
      method,
      headers: body === undefined ? undefined : { "Content-Type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    return parse<T>(response);
  }
}
