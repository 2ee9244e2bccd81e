// Presentational view state. Never mutates server data.

import type {
  AggregateDoc,
  CellDoc,
  DatasourceDoc,
  StreamEvent,
  TestCaseDoc,
} from "./types.js";

export interface ViewState {
  datasource: DatasourceDoc | null;
  datasourceId: string | null;
  suite: TestCaseDoc[];
  suiteId: string | null;
  uploadErrors: string[];
  uploadWarnings: string[];
  expandedConversations: Set<string>;
  expandedMetricPaths: Set<string>;
  activeExperimentId: string | null;
  planned: number;
  completed: number;
  running: boolean;
  stopped: boolean;
  cells: CellDoc[];
  failures: Array<{ status: string; error: string }>;
  aggregate: AggregateDoc | null;
  partial: boolean;
  labelFilter: { dimension: string; label: string } | null;
  selectedDiffCell: CellDoc | null;
  hiddenColumns: Set<string>;
  frozenColumns: Set<string>;
}

export function initialState(): ViewState {
  return {
    datasource: null,
    datasourceId: null,
    suite: [],
    suiteId: null,
    uploadErrors: [],
    uploadWarnings: [],
    expandedConversations: new Set(),
    expandedMetricPaths: new Set(),
    activeExperimentId: null,
    planned: 0,
    completed: 0,
    running: false,
    stopped: false,
    cells: [],
    failures: [],
    aggregate: null,
    partial: false,
    labelFilter: null,
    selectedDiffCell: null,
    hiddenColumns: new Set(),
    frozenColumns: new Set(),
  };
}

/** Fold one stream event into the view state. */
export function applyEvent(state: ViewState, ev: StreamEvent): ViewState {
  switch (ev.type) {
    case "cell":
      state.cells = [...state.cells, ev.cell];
      return state;
    case "failure":
      state.failures = [...state.failures, { status: ev.status, error: ev.error }];
      return state;
    case "progress":
      state.completed = ev.completed;
      state.planned = ev.planned;
      return state;
    case "aggregate":
      // only terminal aggregates arrive on the stream; the recommendation is
      // present only when the run completed in full
      state.aggregate = ev.aggregate;
      state.partial = ev.partial;
      return state;
    case "end":
      state.running = false;
      state.partial = Boolean(ev.partial);
      return state;
  }
}

export function progressFraction(state: ViewState): number {
  return state.planned ? state.completed / state.planned : 0;
}

/** Cells surviving the active label filter (set by overview chart clicks). */
export function visibleCells(state: ViewState): CellDoc[] {
  const filter = state.labelFilter;
  if (!filter) return state.cells;
  const byId = new Map(state.suite.map((c) => [c.conversationId, c]));
  return state.cells.filter((cell) => {
    const turn = byId.get(cell.conversationId)?.turns[cell.turnIndex - 1];
    if (!turn) return false;
    const labels = turn.labels ?? {};
    switch (filter.dimension) {
      case "chartType":
        return (labels.chartType ?? "unlabeled") === filter.label;
      case "ambiguity":
        return (labels.ambiguity ?? []).includes(filter.label) ||
          (filter.label === "unlabeled" && !(labels.ambiguity ?? []).length);
      case "contextHandling":
        return (labels.contextHandling ?? []).includes(filter.label) ||
          (filter.label === "unlabeled" && !(labels.contextHandling ?? []).length);
      case "turnIndex":
        return String(cell.turnIndex) === filter.label;
      default:
        return true;
    }
  });
}
