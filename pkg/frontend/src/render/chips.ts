// Hierarchical metric chips with the three-band color scale.

import type { CellDoc, MetricScoreDoc } from "../types.js";
import { escapeHtml } from "./html.js";

// red = low, yellow = mid, blue = high
export function colorBand(value: number): "red" | "yellow" | "blue" {
  if (value < 50) return "red";
  if (value < 80) return "yellow";
  return "blue";
}

export interface MetricNode {
  id: string;
  label: string;
  children?: MetricNode[];
  metricIds?: string[];
}

// Visualization drills into Data / Semantics / Functionality / Design.
export const METRIC_TREE: MetricNode[] = [
  {
    id: "viz",
    label: "Visualization",
    children: [
      { id: "viz.data", label: "Data", metricIds: ["data_fidelity", "field_similarity"] },
      { id: "viz.semantics", label: "Semantics", metricIds: ["chart_type_similarity"] },
      {
        id: "viz.functionality",
        label: "Functionality",
        metricIds: ["axis_accuracy", "filter_accuracy", "sort_accuracy"],
      },
      {
        id: "viz.design",
        label: "Design",
        metricIds: ["encoding_accuracy", "interactivity_accuracy"],
      },
    ],
  },
  {
    id: "nl",
    label: "Language",
    children: [
      { id: "nl.grounding", label: "Grounding", metricIds: ["factual_grounding"] },
      {
        id: "nl.analysis",
        label: "Analytical thinking",
        metricIds: ["assumptions_disclosure", "insightfulness"],
      },
      {
        id: "nl.conversation",
        label: "Conversation",
        metricIds: ["coherence", "followup_relevance"],
      },
    ],
  },
  { id: "nlg", label: "Traditional NLG", metricIds: ["nlg_precision", "nlg_recall", "nlg_f1"] },
];

export const METRIC_LABELS: Record<string, string> = {
  data_fidelity: "Data Fidelity",
  field_similarity: "Field Similarity",
  chart_type_similarity: "Chart Type Similarity",
  axis_accuracy: "Axis Accuracy",
  filter_accuracy: "Filter Accuracy",
  sort_accuracy: "Sort Accuracy",
  encoding_accuracy: "Visual Encoding Accuracy",
  interactivity_accuracy: "Interactivity Accuracy",
  factual_grounding: "Factual Grounding",
  assumptions_disclosure: "Assumptions Disclosure",
  insightfulness: "Insightfulness",
  coherence: "Coherence",
  followup_relevance: "Follow-up Relevance",
  nlg_precision: "Precision",
  nlg_recall: "Recall",
  nlg_f1: "F1",
};

export function cellMetrics(cell: CellDoc): Map<string, MetricScoreDoc> {
  const out = new Map<string, MetricScoreDoc>();
  for (const s of [...cell.vizScores, ...cell.nlScores]) out.set(s.metricId, s);
  if (cell.nlgScores) {
    for (const k of ["precision", "recall", "f1"] as const) {
      out.set(`nlg_${k}`, {
        metricId: `nlg_${k}`,
        value: cell.nlgScores[k] * 100,
        explanation: `token-level ${k}`,
      });
    }
  }
  return out;
}

function nodeMetricIds(node: MetricNode): string[] {
  if (node.metricIds) return node.metricIds;
  return (node.children ?? []).flatMap(nodeMetricIds);
}

function nodeValue(node: MetricNode, metrics: Map<string, MetricScoreDoc>): number | null {
  const vals = nodeMetricIds(node)
    .map((id) => metrics.get(id)?.value)
    .filter((v): v is number => v !== undefined);
  if (!vals.length) return null;
  return vals.reduce((a, b) => a + b, 0) / vals.length;
}

/** Hover text: expected vs actual fragments and the judge's justification. */
export function hoverText(score: MetricScoreDoc): string {
  const label = METRIC_LABELS[score.metricId] ?? score.metricId;
  const parts: string[] = [];
  if (score.expectedFragment !== undefined || score.actualFragment !== undefined) {
    parts.push(
      `${label.split(" ")[0]}: Expected ${score.expectedFragment ?? "none"}, ` +
        `Model: ${score.actualFragment ?? "none"}`,
    );
  } else {
    parts.push(label);
  }
  if (score.explanation) parts.push(score.explanation);
  if (score.judgeRationale) parts.push(`Judge: ${score.judgeRationale}`);
  return parts.join(" | ");
}

function chip(
  label: string,
  value: number | null,
  opts: { title?: string; expandable?: boolean; expanded?: boolean; path?: string },
): string {
  if (value === null) {
    return `<span class="chip chip-na" title="not applicable">${escapeHtml(label)}: n/a</span>`;
  }
  const band = colorBand(value);
  const toggle = opts.expandable
    ? ` data-toggle-path="${escapeHtml(opts.path ?? "")}"`
    : "";
  const marker = opts.expandable ? (opts.expanded ? "▾ " : "▸ ") : "";
  return (
    `<span class="chip chip-${band}"${toggle}` +
    (opts.title ? ` title="${escapeHtml(opts.title)}"` : "") +
    `>${marker}${escapeHtml(label)}: ${Math.round(value)}</span>`
  );
}

/** Render the drill-down chip tree for one result cell. */
export function renderChips(cell: CellDoc, expandedPaths: Set<string>): string {
  const metrics = cellMetrics(cell);
  const parts: string[] = [];
  for (const top of METRIC_TREE) {
    const topValue = nodeValue(top, metrics);
    const expanded = expandedPaths.has(top.id);
    parts.push(
      chip(top.label, topValue, { expandable: true, expanded, path: top.id }),
    );
    if (!expanded || topValue === null) continue;
    for (const sub of top.children ?? []) {
      const subValue = nodeValue(sub, metrics);
      const subExpanded = expandedPaths.has(sub.id);
      parts.push(
        chip(sub.label, subValue, { expandable: true, expanded: subExpanded, path: sub.id }),
      );
      if (!subExpanded) continue;
      for (const mid of sub.metricIds ?? []) {
        const score = metrics.get(mid);
        if (!score) continue;
        parts.push(
          `<span class="chip chip-${colorBand(score.value)} chip-leaf" ` +
            `data-metric="${escapeHtml(mid)}" title="${escapeHtml(hoverText(score))}">` +
            `${escapeHtml(METRIC_LABELS[mid] ?? mid)}: ${Math.round(score.value)}</span>`,
        );
      }
    }
    if (!top.children && expanded) {
      for (const mid of top.metricIds ?? []) {
        const score = metrics.get(mid);
        if (!score) continue;
        parts.push(
          `<span class="chip chip-${colorBand(score.value)} chip-leaf" ` +
            `data-metric="${escapeHtml(mid)}" title="${escapeHtml(hoverText(score))}">` +
            `${escapeHtml(METRIC_LABELS[mid] ?? mid)}: ${Math.round(score.value)}</span>`,
        );
      }
    }
  }
  return `<div class="chips">${parts.join("")}</div>`;
}
