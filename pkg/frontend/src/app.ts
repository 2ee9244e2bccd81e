// Application controller: wires the API client, the event stream, the view
// state and the renderers. All server access goes through ApiClient; the
// browser bootstrap at the bottom is a thin layer over the pure parts.

import { ApiClient, ApiError, streamEvents, type StreamOpener } from "./api.js";
import {
  applyEvent,
  initialState,
  type ViewState,
} from "./state.js";
import type {
  DatasourceDoc,
  ExperimentConfigDoc,
  ModelListDoc,
  TestCaseDoc,
} from "./types.js";
import { renderSetupPanel } from "./render/setupPanel.js";
import { renderResultsTable, findCell } from "./render/resultsTable.js";
import { renderDiffViewer } from "./render/diffViewer.js";
import { renderOverviewPanel } from "./render/overviewPanel.js";

export interface AppConfig {
  models: string[];
  prompts: string[];
  metrics: string[];
  judgeModel?: string;
  runs: number;
  testCaseSelection: string;
  replayDir?: string;
}

export class App {
  state: ViewState = initialState();
  modelList: ModelListDoc | null = null;
  config: AppConfig = {
    models: [],
    prompts: [],
    metrics: [],
    runs: 3,
    testCaseSelection: "",
  };
  /** Resolves when the active experiment's event stream ends. */
  streamDone: Promise<void> = Promise.resolve();

  constructor(
    readonly api: ApiClient,
    readonly openStream: StreamOpener,
    readonly onRender: (html: string) => void = () => {},
  ) {}

  render(): void {
    this.onRender(this.html());
  }

  html(): string {
    return (
      `<main class="app">` +
      renderOverviewPanel(this.state) +
      renderResultsTable(this.state) +
      renderDiffViewer(this.state.selectedDiffCell) +
      renderSetupPanel(
        this.state,
        this.modelList,
        this.config.prompts,
        this.config.models,
        this.config.metrics,
        this.config.runs,
      ) +
      `</main>`
    );
  }

  async loadModels(): Promise<void> {
    this.modelList = await this.api.listModels(this.config.models);
    this.render();
  }

  async uploadDatasource(doc: DatasourceDoc): Promise<void> {
    try {
      const res = await this.api.uploadDatasource(doc);
      this.state.datasource = doc;
      this.state.datasourceId = res.id;
      this.state.uploadErrors = [];
    } catch (err) {
      if (err instanceof ApiError) {
        // the server's message is rendered inline, verbatim
        this.state.uploadErrors = [err.message];
      } else {
        throw err;
      }
    }
    this.render();
  }

  async uploadSuite(testCases: TestCaseDoc[]): Promise<void> {
    if (!this.state.datasourceId) {
      this.state.uploadErrors = ["upload a datasource before the test cases"];
      this.render();
      return;
    }
    try {
      const res = await this.api.uploadTestCases(this.state.datasourceId, testCases);
      this.state.suite = testCases;
      this.state.suiteId = res.id;
      this.state.uploadWarnings = res.warnings;
      this.state.uploadErrors = [];
    } catch (err) {
      if (err instanceof ApiError) {
        this.state.uploadErrors = [err.message];
      } else {
        throw err;
      }
    }
    this.render();
  }

  async evaluate(): Promise<void> {
    if (!this.state.datasourceId || !this.state.suiteId) {
      this.state.uploadErrors = ["upload a datasource and test cases first"];
      this.render();
      return;
    }
    const config: ExperimentConfigDoc = {
      datasourceId: this.state.datasourceId,
      suiteId: this.state.suiteId,
      models: this.config.models,
      systemPrompts: this.config.prompts,
      metricSelection: this.config.metrics,
      judgeModel: this.config.judgeModel,
      testCaseSelection: this.config.testCaseSelection,
      runs: this.config.runs,
      replayDir: this.config.replayDir,
    };
    let created: { experimentId: string; planned: number };
    try {
      created = await this.api.createExperiment(config);
    } catch (err) {
      if (err instanceof ApiError) {
        this.state.uploadErrors = [err.message];
        this.render();
        return;
      }
      throw err;
    }
    this.state.activeExperimentId = created.experimentId;
    this.state.planned = created.planned;
    this.state.completed = 0;
    this.state.cells = [];
    this.state.failures = [];
    this.state.aggregate = null;
    this.state.partial = false;
    this.state.running = true;
    this.state.stopped = false;
    this.render();
    this.streamDone = this.consumeStream(created.experimentId);
  }

  async consumeStream(experimentId: string): Promise<void> {
    for await (const ev of streamEvents(this.api.baseUrl, experimentId, this.openStream)) {
      applyEvent(this.state, ev);
      this.render();
      if (ev.type === "end") break;
    }
    this.state.running = false;
    this.render();
  }

  async stop(): Promise<void> {
    if (!this.state.activeExperimentId) return;
    await this.api.stopExperiment(this.state.activeExperimentId);
    this.state.stopped = true;
    this.render();
  }

  // -- view interactions ----------------------------------------------------

  toggleConversation(conversationId: string): void {
    const set = this.state.expandedConversations;
    set.has(conversationId) ? set.delete(conversationId) : set.add(conversationId);
    this.render();
  }

  toggleMetricPath(path: string): void {
    const set = this.state.expandedMetricPaths;
    set.has(path) ? set.delete(path) : set.add(path);
    this.render();
  }

  selectDiffCell(reference: string): void {
    this.state.selectedDiffCell = findCell(this.state, reference);
    this.render();
  }

  setLabelFilter(dimension: string, label: string): void {
    this.state.labelFilter = { dimension, label };
    this.render();
  }

  clearLabelFilter(): void {
    this.state.labelFilter = null;
    this.render();
  }

  hideColumn(column: string): void {
    this.state.hiddenColumns.add(column);
    this.render();
  }

  freezeColumn(column: string): void {
    const set = this.state.frozenColumns;
    set.has(column) ? set.delete(column) : set.add(column);
    this.render();
  }
}

// ---------------------------------------------------------------------------
// Browser bootstrap
// ---------------------------------------------------------------------------

/** Open a fetch-based SSE stream as an async string iterable (browser). */
export function fetchStreamOpener(): StreamOpener {
  return async function* (url: string) {
    const resp = await fetch(url);
    const reader = resp.body!.getReader();
    const decoder = new TextDecoder();
    for (;;) {
      const { done, value } = await reader.read();
      if (done) break;
      yield decoder.decode(value, { stream: true });
    }
  };
}

export function mount(root: HTMLElement, baseUrl = ""): App {
  const api = new ApiClient(baseUrl, (url, init) =>
    fetch(url, init as RequestInit).then((r) => ({
      status: r.status,
      json: () => r.json(),
      text: () => r.text(),
    })),
  );
  const app = new App(api, fetchStreamOpener(), (html) => {
    root.innerHTML = html;
  });

  root.addEventListener("click", (ev) => {
    const el = ev.target as HTMLElement;
    const conversation = el.getAttribute("data-conversation");
    if (conversation) return app.toggleConversation(conversation);
    const togglePath = el.getAttribute("data-toggle-path");
    if (togglePath) return app.toggleMetricPath(togglePath);
    const diffCell = el.getAttribute("data-diff-cell");
    if (diffCell) return app.selectDiffCell(diffCell);
    const hide = el.getAttribute("data-hide-column");
    if (hide) return app.hideColumn(hide);
    const freeze = el.getAttribute("data-freeze-column");
    if (freeze) return app.freezeColumn(freeze);
    const bar = el.closest("[data-dimension]") as HTMLElement | null;
    if (bar) {
      return app.setLabelFilter(
        bar.getAttribute("data-dimension")!,
        bar.getAttribute("data-label")!,
      );
    }
    const action = el.getAttribute("data-action");
    if (action === "evaluate") void app.evaluate();
    if (action === "stop") void app.stop();
    if (action === "clear-filter") app.clearLabelFilter();
  });

  app.render();
  void app.loadModels().catch(() => {});
  return app;
}
