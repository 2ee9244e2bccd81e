// Evaluation setup panel: uploads with inline validation, suite preview with
// expandable conversations, numbered prompts, model picker with the judge
// annotation, metric checklist, runs selector, and run controls.

import type { ModelListDoc } from "../types.js";
import type { ViewState } from "../state.js";
import { escapeHtml } from "./html.js";
import { METRIC_LABELS } from "./chips.js";

const METRIC_DEFINITIONS: Record<string, string> = {
  data_fidelity: "Does the result table match the expected rows, fields and aggregations?",
  field_similarity: "Do the bound fields match the intended fields, with credit for semantic matches?",
  chart_type_similarity: "Is the chosen mark among the recommended chart types for the fields?",
  axis_accuracy: "Do the axes use the intended fields, orientation, scale and baseline?",
  filter_accuracy: "Do applied filters match the expected set, with partial credit?",
  sort_accuracy: "Do the sort key and direction match?",
  encoding_accuracy: "Are the non-positional channels bound truthfully and clearly?",
  interactivity_accuracy: "Do tooltips and interactions cover the required information?",
  factual_grounding: "Does the explanation state the same facts as the chart?",
  assumptions_disclosure: "Does the response surface filters, time frames and assumptions?",
  insightfulness: "Does the response go beyond restating the request?",
  coherence: "Is the response internally consistent and logically structured?",
  followup_relevance: "Does the response stay grounded in earlier turns?",
  nlg_prf: "Traditional token-overlap precision, recall and F1.",
};

export function renderUploadStatus(state: ViewState): string {
  const errors = state.uploadErrors
    .map((e) => `<div class="upload-error">${escapeHtml(e)}</div>`)
    .join("");
  const warnings = state.uploadWarnings
    .map((w) => `<div class="upload-warning">${escapeHtml(w)}</div>`)
    .join("");
  const ok =
    state.datasourceId && state.suiteId
      ? `<div class="upload-ok">datasource ${escapeHtml(state.datasourceId)} + ` +
        `suite ${escapeHtml(state.suiteId)} loaded</div>`
      : "";
  return `<div class="upload-status">${errors}${warnings}${ok}</div>`;
}

/** Preview table: one row per conversation; '+' unfurls its turns. */
export function renderSuitePreview(state: ViewState): string {
  if (!state.suite.length) {
    return `<div class="suite-preview empty">upload a test case file to preview it</div>`;
  }
  const rows = state.suite
    .map((c) => {
      const expanded = state.expandedConversations.has(c.conversationId);
      const toggle =
        `<button class="expand" data-conversation="${escapeHtml(c.conversationId)}">` +
        `${expanded ? "−" : "+"}</button>`;
      const head =
        `<tr class="conversation-row"><td>${toggle} ${escapeHtml(c.conversationId)}</td>` +
        `<td>${c.turns.length} turn${c.turns.length === 1 ? "" : "s"}</td>` +
        `<td>${escapeHtml(c.turns[0]?.utterance ?? "")}</td></tr>`;
      if (!expanded) return head;
      const turnRows = c.turns
        .map((t, i) => {
          const labels = [
            t.labels?.chartType,
            ...(t.labels?.ambiguity ?? []),
            ...(t.labels?.contextHandling ?? []),
          ]
            .filter(Boolean)
            .map((l) => `<span class="label">${escapeHtml(l)}</span>`)
            .join(" ");
          return (
            `<tr class="turn-row" data-turn="${i + 1}"><td></td>` +
            `<td>turn ${i + 1}</td><td>${escapeHtml(t.utterance)} ${labels}</td></tr>`
          );
        })
        .join("");
      return head + turnRows;
    })
    .join("");
  return (
    `<table class="suite-preview"><thead><tr><th>test case</th><th></th>` +
    `<th>utterance</th></tr></thead><tbody>${rows}</tbody></table>`
  );
}

export function renderPromptEditor(prompts: string[]): string {
  const blocks = prompts
    .map(
      (p, i) =>
        `<div class="prompt"><div class="prompt-number">Prompt #${i + 1}</div>` +
        `<textarea data-prompt-index="${i + 1}">${escapeHtml(p)}</textarea></div>`,
    )
    .join("");
  return `<div class="prompts">${blocks}<button data-action="add-prompt">add prompt</button></div>`;
}

export function renderModelPicker(models: ModelListDoc, selected: string[]): string {
  const options = models.models
    .map((m) => {
      const checked = selected.includes(m.key) ? " checked" : "";
      return (
        `<label class="model"><input type="checkbox" value="${escapeHtml(m.key)}"${checked}/>` +
        `${escapeHtml(m.displayName)}</label>`
      );
    })
    .join("");
  const judgeOptions = models.models
    .map(
      (m) =>
        `<option value="${escapeHtml(m.key)}"${m.recommendedJudge ? " selected" : ""}>` +
        `${escapeHtml(m.displayName)}</option>`,
    )
    .join("");
  const warning = models.selfPreferenceWarning
    ? `<div class="judge-warning">every family is under evaluation; the judge may prefer its own family</div>`
    : "";
  return (
    `<div class="models">${options}</div>` +
    `<label class="judge">Judge: <select data-role="judge">${judgeOptions}</select></label>` +
    warning
  );
}

export function renderMetricChecklist(selected: string[]): string {
  const boxes = Object.keys(METRIC_DEFINITIONS)
    .map((id) => {
      const checked = selected.includes(id) ? " checked" : "";
      return (
        `<label class="metric" title="${escapeHtml(METRIC_DEFINITIONS[id])}">` +
        `<input type="checkbox" value="${escapeHtml(id)}"${checked}/>` +
        `${escapeHtml(METRIC_LABELS[id] ?? id)}</label>`
      );
    })
    .join("");
  return `<div class="metrics">${boxes}</div>`;
}

export function renderRunControls(state: ViewState, runs: number): string {
  const options = [1, 2, 3, 4, 5]
    .map((n) => `<option value="${n}"${n === runs ? " selected" : ""}>${n}</option>`)
    .join("");
  const evaluateDisabled = state.running || !state.datasourceId || !state.suiteId;
  return (
    `<div class="run-controls">` +
    `<label>Runs: <select data-role="runs">${options}</select></label>` +
    `<input data-role="selection" placeholder="test cases, e.g. 1-3,7 (blank = all)"/>` +
    `<button data-action="evaluate"${evaluateDisabled ? " disabled" : ""}>Evaluate</button>` +
    `<button data-action="stop"${state.running ? "" : " disabled"}>Stop</button>` +
    `</div>`
  );
}

export function renderSetupPanel(
  state: ViewState,
  models: ModelListDoc | null,
  prompts: string[],
  selectedModels: string[],
  selectedMetrics: string[],
  runs: number,
): string {
  return (
    `<section class="setup-panel">` +
    `<h2>Evaluation setup</h2>` +
    renderUploadStatus(state) +
    renderSuitePreview(state) +
    renderPromptEditor(prompts) +
    (models ? renderModelPicker(models, selectedModels) : "") +
    renderMetricChecklist(selectedMetrics) +
    renderRunControls(state, runs) +
    `</section>`
  );
}
