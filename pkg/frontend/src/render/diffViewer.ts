// Side-by-side JSON spec diff viewer; entries from the scoring pipeline's
// structured diff are highlighted by dotted path.

import type { CellDoc, DiffEntryDoc, VizSpecDoc } from "../types.js";
import { escapeHtml } from "./html.js";

type PathKinds = Map<string, DiffEntryDoc["kind"]>;

function kindsByTopLevel(diff: DiffEntryDoc[]): PathKinds {
  const out: PathKinds = new Map();
  for (const entry of diff) out.set(entry.path, entry.kind);
  return out;
}

/** Does any diff entry sit at or under this dotted path? */
function kindFor(kinds: PathKinds, path: string): DiffEntryDoc["kind"] | null {
  for (const [p, kind] of kinds) {
    if (p === path || p.startsWith(path + ".")) return kind;
  }
  return null;
}

function renderSpecJson(
  spec: VizSpecDoc | null,
  kinds: PathKinds,
  side: "expected" | "actual",
): string {
  if (!spec) return `<pre class="spec-json missing">(no spec)</pre>`;
  const lines: string[] = ["{"];

  const push = (indent: number, text: string, path?: string) => {
    const kind = path ? kindFor(kinds, path) : null;
    const marker =
      kind && ((kind === "missing" && side === "expected") ||
               (kind === "extra" && side === "actual") ||
               kind === "changed")
        ? ` class="diff diff-${kind}" data-diff-path="${escapeHtml(path!)}"`
        : "";
    lines.push(`<span${marker}>${"  ".repeat(indent)}${escapeHtml(text)}</span>`);
  };

  push(1, `"mark": ${JSON.stringify(spec.mark)},`, "mark");
  push(1, `"encoding": {`);
  const enc = spec.encoding ?? {};
  for (const ch of Object.keys(enc)) {
    push(2, `"${ch}": ${JSON.stringify(enc[ch])},`, `encoding.${ch}`);
  }
  push(1, `},`);
  if (spec.tooltipFields?.length) {
    push(1, `"tooltipFields": ${JSON.stringify(spec.tooltipFields)},`, "tooltipFields");
  }
  if (spec.filters?.length) {
    push(1, `"filters": [`);
    for (const f of spec.filters) {
      push(2, `${JSON.stringify(f)},`, `filters.${f.field.toLowerCase()}.${f.op}`);
    }
    push(1, `],`);
  }
  if (spec.sort) {
    push(1, `"sort": ${JSON.stringify(spec.sort)},`, "sort");
  }
  if (spec.interactions?.length) {
    push(1, `"interactions": ${JSON.stringify(spec.interactions)},`, "interactions");
  }
  lines.push("}");
  return `<pre class="spec-json">${lines.join("\n")}</pre>`;
}

export function renderDiffViewer(cell: CellDoc | null): string {
  if (!cell) {
    return `<section class="diff-viewer empty">select a result cell to compare specs</section>`;
  }
  const kinds = kindsByTopLevel(cell.specDiff ?? []);
  if (!(cell.specDiff ?? []).length && cell.vizSpec) {
    return (
      `<section class="diff-viewer identical"><h3>Viz grammar differences</h3>` +
      `<div class="identical-note">specs identical</div>` +
      `<div class="side-by-side">` +
      renderSpecJson(cell.expectedSpec, kinds, "expected") +
      renderSpecJson(cell.vizSpec, kinds, "actual") +
      `</div></section>`
    );
  }
  const entries = (cell.specDiff ?? [])
    .map(
      (e) =>
        `<li class="diff-entry diff-${e.kind}" data-diff-path="${escapeHtml(e.path)}">` +
        `<code>${escapeHtml(e.path)}</code> ${e.kind}` +
        (e.expected !== undefined && e.expected !== null
          ? ` — expected ${escapeHtml(JSON.stringify(e.expected))}`
          : "") +
        (e.actual !== undefined && e.actual !== null
          ? ` — actual ${escapeHtml(JSON.stringify(e.actual))}`
          : "") +
        `</li>`,
    )
    .join("");
  return (
    `<section class="diff-viewer"><h3>Viz grammar differences</h3>` +
    `<ul class="diff-entries">${entries}</ul>` +
    `<div class="side-by-side">` +
    `<div class="pane"><h4>expected</h4>${renderSpecJson(cell.expectedSpec, kinds, "expected")}</div>` +
    `<div class="pane"><h4>actual</h4>${renderSpecJson(cell.vizSpec, kinds, "actual")}</div>` +
    `</div></section>`
  );
}
