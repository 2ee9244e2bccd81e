// Streaming results table: one row per turn, one column group per
// model x prompt; each cell shows the rendered chart, the explanation, and
// the hierarchical metric chips.

import type { CellDoc } from "../types.js";
import type { ViewState } from "../state.js";
import { visibleCells } from "../state.js";
import { escapeHtml } from "./html.js";
import { renderChart } from "./chart.js";
import { renderChips } from "./chips.js";

function columnKey(cell: CellDoc): string {
  return `${cell.model} · prompt ${cell.promptIndex}`;
}

function rowKey(cell: CellDoc): string {
  return `${cell.conversationId}:${cell.turnIndex}`;
}

/** Latest run wins for display; earlier runs stay inspectable via the cell. */
function latestRunPerSlot(cells: CellDoc[]): Map<string, CellDoc> {
  const out = new Map<string, CellDoc>();
  for (const cell of cells) {
    const key = `${rowKey(cell)}|${columnKey(cell)}`;
    const existing = out.get(key);
    if (!existing || cell.runIndex >= existing.runIndex) out.set(key, cell);
  }
  return out;
}

function renderCell(cell: CellDoc, state: ViewState): string {
  const chart = renderChart(cell.vizSpec, state.datasource);
  const text = `<div class="cell-text">${escapeHtml(cell.nlText)}</div>`;
  const chips = renderChips(cell, state.expandedMetricPaths);
  const diffButton =
    `<button class="diff-button" data-diff-cell="${escapeHtml(rowKey(cell))}|` +
    `${escapeHtml(columnKey(cell))}">Examine Viz Grammar Differences</button>`;
  const status =
    cell.parseStatus === "ok"
      ? ""
      : `<div class="parse-status">spec ${escapeHtml(cell.parseStatus)}</div>`;
  return `<div class="result-cell">${chart}${text}${chips}${status}${diffButton}</div>`;
}

export function renderResultsTable(state: ViewState): string {
  const cells = visibleCells(state);
  if (!cells.length) {
    return `<section class="results-table empty">no results yet</section>`;
  }
  const slots = latestRunPerSlot(cells);
  const columns = [...new Set([...slots.values()].map(columnKey))].sort();
  const shown = columns.filter((c) => !state.hiddenColumns.has(c));
  const frozen = shown.filter((c) => state.frozenColumns.has(c));
  const ordered = [...frozen, ...shown.filter((c) => !state.frozenColumns.has(c))];
  const rows = [...new Set([...slots.values()].map(rowKey))].sort();

  const expectedByRow = new Map<string, CellDoc>();
  for (const cell of slots.values()) expectedByRow.set(rowKey(cell), cell);

  const header =
    `<tr><th>turn</th><th>expected</th>` +
    ordered
      .map(
        (c) =>
          `<th class="${state.frozenColumns.has(c) ? "frozen" : ""}">` +
          `${escapeHtml(c)} <button data-hide-column="${escapeHtml(c)}">hide</button>` +
          `<button data-freeze-column="${escapeHtml(c)}">freeze</button></th>`,
      )
      .join("") +
    `</tr>`;

  const body = rows
    .map((r) => {
      const [conversationId, turnIndex] = r.split(":");
      const sample = expectedByRow.get(r);
      const turn = state.suite
        .find((c) => c.conversationId === conversationId)
        ?.turns[Number(turnIndex) - 1];
      const expectedChart = renderChart(
        sample?.expectedSpec ?? turn?.expected[0]?.vizSpec ?? null,
        state.datasource,
      );
      const expectedText = turn?.expected[0]?.nlExplanation ?? "";
      const cellsHtml = ordered
        .map((c) => {
          const cell = slots.get(`${r}|${c}`);
          return `<td>${cell ? renderCell(cell, state) : '<div class="pending">…</div>'}</td>`;
        })
        .join("");
      return (
        `<tr><td class="turn-label">${escapeHtml(conversationId)} / turn ${escapeHtml(turnIndex)}` +
        `<div class="utterance">${escapeHtml(turn?.utterance ?? "")}</div></td>` +
        `<td class="expected">${expectedChart}<div class="cell-text">` +
        `${escapeHtml(expectedText)}</div></td>${cellsHtml}</tr>`
      );
    })
    .join("");

  return (
    `<section class="results-table"><table><thead>${header}</thead>` +
    `<tbody>${body}</tbody></table></section>`
  );
}

export function findCell(
  state: ViewState,
  reference: string,
): CellDoc | null {
  const slots = latestRunPerSlot(state.cells);
  return slots.get(reference) ?? null;
}
