// Minimal client-side SVG renderer: charts come straight from the
// visualization-grammar spec plus the datasource columns; the server never
// rasterizes images.

import type { DatasourceDoc, VizSpecDoc } from "../types.js";
import { escapeHtml } from "./html.js";

const W = 260;
const H = 150;
const PAD = 28;

const PALETTE = ["#4c78a8", "#f58518", "#54a24b", "#e45756", "#72b7b2", "#b279a2"];

interface Row {
  label: string;
  value: number;
  group?: string;
}

function fieldColumn(ds: DatasourceDoc, name?: string): Array<string | number | boolean | null> | null {
  if (!name) return null;
  const target = name.toLowerCase();
  const field = ds.fields.find(
    (f) =>
      f.name.toLowerCase() === target ||
      (f.aliases ?? []).some((a) => a.toLowerCase() === target),
  );
  return field ? field.fieldValues : null;
}

function aggregateRows(spec: VizSpecDoc, ds: DatasourceDoc): Row[] {
  const enc = spec.encoding ?? {};
  const xCol = fieldColumn(ds, enc.x?.field);
  const yCol = fieldColumn(ds, enc.y?.field);
  const colorCol = fieldColumn(ds, enc.color?.field);
  const n = ds.fields[0]?.fieldValues.length ?? 0;
  const groups = new Map<string, { sum: number; count: number; group?: string }>();
  for (let i = 0; i < n; i++) {
    const label = String(xCol?.[i] ?? i);
    const raw = yCol?.[i];
    const value = typeof raw === "number" ? raw : Number(raw ?? 0) || 0;
    const g = groups.get(label) ?? { sum: 0, count: 0 };
    g.sum += value;
    g.count += 1;
    if (colorCol) g.group = String(colorCol[i]);
    groups.set(label, g);
  }
  const agg = enc.y?.aggregate ?? (enc.y?.field ? "sum" : "count");
  return [...groups.entries()].map(([label, g]) => ({
    label,
    value: agg === "count" ? g.count : agg === "mean" ? g.sum / g.count : g.sum,
    group: g.group,
  }));
}

function barChart(rows: Row[], horizontal: boolean): string {
  if (!rows.length) return "";
  const max = Math.max(...rows.map((r) => Math.abs(r.value)), 1);
  const band = (horizontal ? H - PAD : W - PAD) / rows.length;
  const bars = rows
    .map((r, i) => {
      const len = (Math.abs(r.value) / max) * (horizontal ? W - PAD - 4 : H - PAD - 4);
      const color = PALETTE[r.group ? i % PALETTE.length : 0];
      if (horizontal) {
        return `<rect x="${PAD}" y="${i * band + 2}" width="${len.toFixed(1)}" height="${(band - 4).toFixed(1)}" fill="${color}"><title>${escapeHtml(r.label)}: ${r.value}</title></rect>`;
      }
      return `<rect x="${(PAD + i * band + 2).toFixed(1)}" y="${(H - PAD - len).toFixed(1)}" width="${(band - 4).toFixed(1)}" height="${len.toFixed(1)}" fill="${color}"><title>${escapeHtml(r.label)}: ${r.value}</title></rect>`;
    })
    .join("");
  return bars;
}

function lineOrAreaChart(rows: Row[], area: boolean): string {
  if (!rows.length) return "";
  const max = Math.max(...rows.map((r) => r.value), 1);
  const step = (W - PAD - 4) / Math.max(rows.length - 1, 1);
  const points = rows.map((r, i) => {
    const x = PAD + i * step;
    const y = H - PAD - (r.value / max) * (H - PAD - 4);
    return `${x.toFixed(1)},${y.toFixed(1)}`;
  });
  if (area) {
    const closed = [`${PAD},${H - PAD}`, ...points, `${PAD + (rows.length - 1) * step},${H - PAD}`];
    return `<polygon points="${closed.join(" ")}" fill="${PALETTE[0]}" opacity="0.5"/>`;
  }
  return `<polyline points="${points.join(" ")}" fill="none" stroke="${PALETTE[0]}" stroke-width="2"/>`;
}

function pieChart(rows: Row[]): string {
  const total = rows.reduce((a, r) => a + Math.abs(r.value), 0) || 1;
  const cx = W / 2;
  const cy = H / 2;
  const radius = Math.min(W, H) / 2 - 8;
  let angle = -Math.PI / 2;
  return rows
    .map((r, i) => {
      const sweep = (Math.abs(r.value) / total) * 2 * Math.PI;
      const x1 = cx + radius * Math.cos(angle);
      const y1 = cy + radius * Math.sin(angle);
      angle += sweep;
      const x2 = cx + radius * Math.cos(angle);
      const y2 = cy + radius * Math.sin(angle);
      const large = sweep > Math.PI ? 1 : 0;
      return `<path d="M${cx},${cy} L${x1.toFixed(1)},${y1.toFixed(1)} A${radius},${radius} 0 ${large} 1 ${x2.toFixed(1)},${y2.toFixed(1)} Z" fill="${PALETTE[i % PALETTE.length]}"><title>${escapeHtml(r.label)}: ${r.value}</title></path>`;
    })
    .join("");
}

function scatterChart(spec: VizSpecDoc, ds: DatasourceDoc): string {
  const enc = spec.encoding ?? {};
  const xCol = fieldColumn(ds, enc.x?.field);
  const yCol = fieldColumn(ds, enc.y?.field);
  if (!xCol || !yCol) return "";
  const xs = xCol.map((v) => Number(v) || 0);
  const ys = yCol.map((v) => Number(v) || 0);
  const xMax = Math.max(...xs, 1);
  const yMax = Math.max(...ys, 1);
  return xs
    .map((x, i) => {
      const px = PAD + (x / xMax) * (W - PAD - 8);
      const py = H - PAD - (ys[i] / yMax) * (H - PAD - 8);
      return `<circle cx="${px.toFixed(1)}" cy="${py.toFixed(1)}" r="3" fill="${PALETTE[0]}" opacity="0.8"/>`;
    })
    .join("");
}

/** Render a small inline SVG chart from a spec and its datasource. */
export function renderChart(spec: VizSpecDoc | null, ds: DatasourceDoc | null): string {
  if (!spec) {
    return `<div class="chart chart-missing">no parseable spec</div>`;
  }
  if (!ds) {
    return `<div class="chart chart-missing">datasource unavailable</div>`;
  }
  const mark = spec.mark;
  let body = "";
  if (mark === "bar" || mark === "histogram") {
    const rows = aggregateRows(spec, ds);
    const horizontal =
      (spec.encoding?.y?.field !== undefined &&
        spec.encoding?.x?.aggregate !== undefined) ||
      false;
    body = barChart(rows, horizontal);
  } else if (mark === "line" || mark === "area") {
    body = lineOrAreaChart(aggregateRows(spec, ds), mark === "area");
  } else if (mark === "pie") {
    body = pieChart(aggregateRows(spec, ds));
  } else if (mark === "point") {
    body = scatterChart(spec, ds);
  } else {
    body = `<text x="${W / 2}" y="${H / 2}" text-anchor="middle" fill="#888">${escapeHtml(mark)}</text>`;
  }
  const axes = `<line x1="${PAD}" y1="${H - PAD}" x2="${W - 4}" y2="${H - PAD}" stroke="#999"/><line x1="${PAD}" y1="4" x2="${PAD}" y2="${H - PAD}" stroke="#999"/>`;
  return (
    `<svg class="chart" viewBox="0 0 ${W} ${H}" width="${W}" height="${H}" ` +
    `data-mark="${escapeHtml(mark)}">${mark === "pie" ? "" : axes}${body}</svg>`
  );
}
