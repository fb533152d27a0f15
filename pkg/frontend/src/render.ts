// Pure HTML renderers: UiState in, markup out. No fetches, no globals, so
// the node test runner can assert on them directly.

import { SessionView } from "./api.js";
import { UiState } from "./session.js";

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export const BANNER =
  "Auxiliary tool only: suggestions support, and never replace, professional medical judgment.";

export function renderApp(state: UiState): string {
  const banner = state.bannerError
    ? `<div class="banner error" data-role="network-error">${escapeHtml(state.bannerError)}
         <button data-action="retry">retry</button></div>`
    : "";
  const disclaimer = `<footer class="disclaimer">${BANNER}</footer>`;
  switch (state.phase) {
    case "loading":
      return `<p class="muted">loading symptom catalog…</p>${disclaimer}`;
    case "unreachable":
      return `${banner}<p class="muted">service unreachable</p>${disclaimer}`;
    case "start":
      return `${banner}${renderStart(state)}${disclaimer}`;
    case "session":
      return `${banner}${renderSession(state)}${disclaimer}`;
  }
}

export function renderStart(state: UiState): string {
  const catalog = state.catalog;
  if (!catalog) {
    return `<p class="muted">no catalog</p>`;
  }
  const rows = catalog.symptoms
    .map((name) => {
      const chosen = state.selection.get(name);
      return `<li>
        <span class="name">${escapeHtml(name)}</span>
        <button data-action="select-yes" data-symptom="${escapeHtml(name)}"
                class="${chosen === true ? "active" : ""}">have it</button>
        <button data-action="select-no" data-symptom="${escapeHtml(name)}"
                class="${chosen === false ? "active" : ""}">don't have it</button>
      </li>`;
    })
    .join("\n");
  const disabled = state.selection.size === 0 || state.inFlight;
  const hint =
    state.selection.size === 0
      ? `<p class="hint" data-role="empty-hint">select at least one symptom you can report</p>`
      : "";
  const formError = state.formError
    ? `<p class="error" data-role="form-error">${escapeHtml(state.formError)}</p>`
    : "";
  return `<section data-screen="start">
    <h1>What brings you in?</h1>
    <ul class="catalog">${rows}</ul>
    ${hint}${formError}
    <button data-action="start" ${disabled ? "disabled" : ""}>begin</button>
  </section>`;
}

export function renderSession(state: UiState): string {
  const view = state.view;
  if (!view) {
    return `<p class="muted">no session</p>`;
  }
  const parts = [renderKnown(view), renderHistory(view)];
  if (view.status === "awaiting_answer" && view.question) {
    parts.push(renderQuestion(view, state.inFlight));
  } else if (view.diagnosis) {
    parts.push(renderDiagnosis(view));
  } else if (view.status === "expired") {
    parts.push(`<p class="error">session expired</p>
      <button data-action="reset">start over</button>`);
  }
  const formError = state.formError
    ? `<p class="error" data-role="form-error">${escapeHtml(state.formError)}</p>`
    : "";
  return `<section data-screen="session" data-session="${escapeHtml(view.id)}">
    ${parts.join("\n")}${formError}
  </section>`;
}

export function renderQuestion(view: SessionView, inFlight: boolean): string {
  const q = escapeHtml(view.question ?? "");
  const dis = inFlight ? "disabled" : "";
  return `<div class="question" data-role="question" data-symptom="${q}">
    <h2>Do you have: <em>${q}</em>?</h2>
    <button data-action="answer-true" ${dis}>Yes</button>
    <button data-action="answer-false" ${dis}>No</button>
    <button data-action="answer-not_sure" ${dis}>Not sure</button>
    <p class="muted">turn ${view.turns + 1}</p>
  </div>`;
}

export function renderKnown(view: SessionView): string {
  const rows = view.known
    .map(
      (k) => `<li data-source="${k.source}" data-present="${k.present}">
        ${escapeHtml(k.symptom)}: ${k.present ? "present" : "absent"}
        <span class="muted">(${k.source})</span></li>`,
    )
    .join("\n");
  return `<div class="known" data-role="known"><h3>Known symptoms</h3><ul>${rows}</ul></div>`;
}

export function renderHistory(view: SessionView): string {
  const rows = view.history
    .map(
      (h, i) => `<li data-step="${i + 1}">${escapeHtml(h.symptom)} →
        <strong>${h.answer.replace("_", " ")}</strong></li>`,
    )
    .join("\n");
  return `<div class="history" data-role="history"><h3>Inquiries</h3><ol>${rows}</ol></div>`;
}

export function renderDiagnosis(view: SessionView): string {
  const diagnosis = view.diagnosis;
  if (!diagnosis) {
    return "";
  }
  const entries = Object.entries(diagnosis.distribution).sort((a, b) => b[1] - a[1]);
  const bars = entries
    .map(([disease, p]) => {
      const pct = (p * 100).toFixed(1);
      return `<li data-disease="${escapeHtml(disease)}" data-p="${p}">
        <span class="name">${escapeHtml(disease)}</span>
        <span class="bar" style="width:${pct}%"></span>
        <span class="pct">${pct}%</span>
      </li>`;
    })
    .join("\n");
  return `<div class="diagnosis" data-role="diagnosis" data-disease="${escapeHtml(diagnosis.disease)}">
    <h2>Likely diagnosis: <em>${escapeHtml(diagnosis.disease)}</em></h2>
    <p class="muted">stopped: ${escapeHtml(view.stop_reason ?? "?")}, after ${view.turns} turns</p>
    <ul class="bars">${bars}</ul>
    <button data-action="reset">start over</button>
  </div>`;
}
