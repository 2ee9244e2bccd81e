// Overview panel: progress bar while running; after completion only, the
// recommendation card, overview metric cards, and metrics-by-label charts.

import type { ViewState } from "../state.js";
import { progressFraction } from "../state.js";
import { escapeHtml } from "./html.js";
import { colorBand } from "./chips.js";

function progressBar(state: ViewState): string {
  const fraction = progressFraction(state);
  const pct = Math.round(fraction * 100);
  return (
    `<div class="progress" data-fraction="${fraction.toFixed(3)}">` +
    `<div class="progress-fill" style="width:${pct}%"></div>` +
    `<span class="progress-label">${state.completed} / ${state.planned} cells</span></div>`
  );
}

function recommendationCard(state: ViewState): string {
  const rec = state.aggregate?.recommendation;
  if (!rec) return "";
  return (
    `<div class="recommendation-card" data-model="${escapeHtml(rec.model)}" ` +
    `data-prompt="${rec.promptIndex}">` +
    `<h3>Recommended: ${escapeHtml(rec.model)} · prompt ${rec.promptIndex}</h3>` +
    `<p>${escapeHtml(rec.rationale)}</p>` +
    `<button data-action="jump-to-table">view in results table</button></div>`
  );
}

function metricCards(state: ViewState): string {
  const pairs = state.aggregate?.pairs ?? [];
  const cards = pairs
    .map((p) => {
      const viz = p.overallViz;
      const nl = p.overallNl;
      const chip = (label: string, v: number | null) =>
        v === null
          ? `<span class="chip chip-na">${label}: n/a</span>`
          : `<span class="chip chip-${colorBand(v)}">${label}: ${v.toFixed(1)}</span>`;
      return (
        `<div class="metric-card" data-model="${escapeHtml(p.model)}" data-prompt="${p.promptIndex}">` +
        `<h4>${escapeHtml(p.model)} · prompt ${p.promptIndex}</h4>` +
        chip("Visualization", viz) +
        chip("Language", nl) +
        chip("Combined", p.combined) +
        `<details><summary>per-metric means</summary><ul>` +
        Object.entries(p.metricMeans)
          .map(
            ([mid, v]) =>
              `<li>${escapeHtml(mid)}: <span class="chip chip-${colorBand(v)}">${v.toFixed(1)}</span></li>`,
          )
          .join("") +
        `</ul></details></div>`
      );
    })
    .join("");
  return `<div class="metric-cards">${cards}</div>`;
}

function labelCharts(state: ViewState): string {
  const pairs = state.aggregate?.pairs ?? [];
  if (!pairs.length) return "";
  const dims = ["chartType", "ambiguity", "contextHandling", "turnIndex"];
  const sections = dims
    .map((dim) => {
      const labels = new Set<string>();
      for (const p of pairs) {
        for (const label of Object.keys(p.breakdowns[dim] ?? {})) labels.add(label);
      }
      if (!labels.size) return "";
      const bars = [...labels]
        .sort()
        .map((label) => {
          const vals = pairs
            .map((p) => p.breakdowns[dim]?.[label]?.overallViz)
            .filter((v): v is number => v !== null && v !== undefined);
          const mean = vals.length ? vals.reduce((a, b) => a + b, 0) / vals.length : 0;
          return (
            `<div class="label-bar" data-dimension="${escapeHtml(dim)}" ` +
            `data-label="${escapeHtml(label)}" role="button">` +
            `<span class="label-name">${escapeHtml(label)}</span>` +
            `<span class="label-fill chip-${colorBand(mean)}" style="width:${Math.round(mean)}%"></span>` +
            `<span class="label-value">${mean.toFixed(0)}</span></div>`
          );
        })
        .join("");
      return `<div class="label-chart"><h4>${escapeHtml(dim)}</h4>${bars}</div>`;
    })
    .join("");
  const active = state.labelFilter
    ? `<div class="label-filter-active">filtered to ${escapeHtml(state.labelFilter.dimension)} = ` +
      `${escapeHtml(state.labelFilter.label)} <button data-action="clear-filter">clear</button></div>`
    : "";
  return `<div class="metrics-by-label">${active}${sections}</div>`;
}

export function renderOverviewPanel(state: ViewState): string {
  const finished = !state.running && state.aggregate !== null;
  return (
    `<section class="overview-panel">` +
    `<h2>Overview</h2>` +
    progressBar(state) +
    // anchoring guard: nothing beyond progress appears mid-run
    (finished
      ? recommendationCard(state) + metricCards(state) + labelCharts(state)
      : `<div class="overview-pending">results appear when the run completes</div>`) +
    `</section>`
  );
}
