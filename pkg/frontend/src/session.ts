// Client-side session state machine. Holds the start-screen selection and
// the latest server view; every transition is a server response, never a
// local computation.

import { ApiClient, ApiError, AnswerValue, SessionView, VocabPayload } from "./api.js";

export type Phase = "loading" | "start" | "session" | "unreachable";

export interface UiState {
  phase: Phase;
  catalog: VocabPayload | null;
  selection: Map<string, boolean>;
  view: SessionView | null;
  inFlight: boolean;
  formError: string | null;   // inline validation (e.g. server 400)
  bannerError: string | null; // retryable transport failure
}

export class SessionController {
  readonly state: UiState = {
    phase: "loading",
    catalog: null,
    selection: new Map(),
    view: null,
    inFlight: false,
    formError: null,
    bannerError: null,
  };

  constructor(
    private readonly api: ApiClient,
    private readonly onChange: (state: UiState) => void = () => {},
  ) {}

  private emit(): void {
    this.onChange(this.state);
  }

  async load(sessionId?: string): Promise<void> {
    try {
      this.state.catalog = await this.api.getVocab();
      if (sessionId) {
        this.state.view = await this.api.getSession(sessionId);
        this.state.phase = "session";
      } else {
        this.state.phase = "start";
      }
      this.state.bannerError = null;
    } catch (err) {
      if (err instanceof ApiError) {
        // stale permalink: fall back to the start screen
        this.state.phase = this.state.catalog ? "start" : "unreachable";
        this.state.formError = err.message;
      } else {
        this.state.phase = "unreachable";
        this.state.bannerError = "cannot reach the diagnosis service";
      }
    }
    this.emit();
  }

  // -- start screen -----------------------------------------------------

  toggleSymptom(name: string, present: boolean): void {
    const current = this.state.selection.get(name);
    if (current === present) {
      this.state.selection.delete(name);
    } else {
      this.state.selection.set(name, present);
    }
    this.emit();
  }

  canCreate(): boolean {
    return this.state.selection.size > 0 && !this.state.inFlight;
  }

  async start(): Promise<void> {
    if (!this.canCreate()) {
      return;
    }
    const explicit = Object.fromEntries(this.state.selection);
    await this.transition(() => this.api.createSession(explicit), "session");
  }

  // -- answer loop --------------------------------------------------------

  async answer(value: AnswerValue): Promise<void> {
    const view = this.state.view;
    if (!view || view.status !== "awaiting_answer" || this.state.inFlight) {
      return;
    }
    await this.transition(async () => {
      try {
        return await this.api.answer(view.id, value);
      } catch (err) {
        if (err instanceof ApiError && err.status === 409) {
          // stale double-submit: the server moved on without us
          return await this.api.getSession(view.id);
        }
        throw err;
      }
    }, "session");
  }

  async refresh(): Promise<void> {
    const view = this.state.view;
    if (!view) {
      return;
    }
    await this.transition(() => this.api.getSession(view.id), "session");
  }

  reset(): void {
    this.state.phase = "start";
    this.state.view = null;
    this.state.selection.clear();
    this.state.formError = null;
    this.emit();
  }

  private async transition(
    action: () => Promise<SessionView>,
    phase: Phase,
  ): Promise<void> {
    this.state.inFlight = true;
    this.state.formError = null;
    this.emit();
    try {
      this.state.view = await action();
      this.state.phase = phase;
      this.state.bannerError = null;
    } catch (err) {
      if (err instanceof ApiError) {
        this.state.formError = err.message;
      } else {
        this.state.bannerError = "request failed; check the service and retry";
      }
    } finally {
      this.state.inFlight = false;
      this.emit();
    }
  }
}
