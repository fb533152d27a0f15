// Browser entry point: wires the controller to the DOM via event
// delegation. The session id lives in the URL hash as a permalink.

import { ApiClient, AnswerValue } from "./api.js";
import { renderApp } from "./render.js";
import { SessionController } from "./session.js";

function apiBase(): string {
  const params = new URLSearchParams(window.location.search);
  const override = params.get("api");
  if (override) {
    return override.replace(/\/$/, "");
  }
  return `${window.location.protocol}//${window.location.hostname}:8100`;
}

function boot(): void {
  const root = document.getElementById("app");
  if (!root) {
    throw new Error("missing #app element");
  }
  const controller = new SessionController(new ApiClient(apiBase()), (state) => {
    root.innerHTML = renderApp(state);
    if (state.view) {
      window.location.hash = state.view.id;
    } else if (state.phase === "start") {
      history.replaceState(null, "", window.location.pathname + window.location.search);
    }
  });

  root.addEventListener("click", (event) => {
    const target = (event.target as HTMLElement).closest("[data-action]");
    if (!(target instanceof HTMLElement)) {
      return;
    }
    const action = target.dataset.action;
    const symptom = target.dataset.symptom ?? "";
    if (action === "select-yes") {
      controller.toggleSymptom(symptom, true);
    } else if (action === "select-no") {
      controller.toggleSymptom(symptom, false);
    } else if (action === "start") {
      void controller.start();
    } else if (action?.startsWith("answer-")) {
      void controller.answer(action.slice("answer-".length) as AnswerValue);
    } else if (action === "reset") {
      controller.reset();
    } else if (action === "retry") {
      void controller.load(window.location.hash.slice(1) || undefined);
    }
  });

  void controller.load(window.location.hash.slice(1) || undefined);
}

if (typeof document !== "undefined") {
  boot();
}
