// In-memory stand-in for the benchmark HTTP API. Implements only the
// documented endpoints and records every request path, so tests can assert
// the UI never calls anything undocumented.

import type { FetchLike } from "../src/api.js";
import type {
  AggregateDoc,
  DatasourceDoc,
  StreamEvent,
  TestCaseDoc,
} from "../src/types.js";

const DATA_TYPES = ["nominal", "ordinal", "quantitative", "temporal"];

interface MockExperiment {
  id: string;
  state: "created" | "running" | "stopped" | "complete" | "failed";
  planned: number;
  completed: number;
  events: StreamEvent[];
  results: unknown;
}

export class MockServer {
  requests: Array<{ method: string; path: string }> = [];
  datasources = new Map<string, DatasourceDoc>();
  suites = new Map<string, { datasourceId: string; testCases: TestCaseDoc[] }>();
  experiments = new Map<string, MockExperiment>();
  scriptedEvents: StreamEvent[] = [];
  planned = 0;
  private nextId = 1;

  // live feed machinery: tests push events; streams drain them
  private feed: StreamEvent[] = [];
  private waiters: Array<() => void> = [];

  pushEvent(ev: StreamEvent): void {
    this.feed.push(ev);
    const exp = [...this.experiments.values()].at(-1);
    if (exp) {
      exp.events.push(ev);
      if (ev.type === "progress") exp.completed = ev.completed;
      if (ev.type === "end") exp.state = "complete";
    }
    for (const w of this.waiters.splice(0)) w();
  }

  fetch: FetchLike = async (url, init) => {
    const method = init?.method ?? "GET";
    const path = url.replace(/^https?:\/\/[^/]+/, "");
    this.requests.push({ method, path });
    const body = init?.body ? JSON.parse(init.body) : undefined;
    const respond = (status: number, payload: unknown) => ({
      status,
      json: async () => payload,
      text: async () => JSON.stringify(payload),
    });

    if (method === "POST" && path === "/api/datasources") {
      const doc = body as DatasourceDoc;
      if (!doc.fields?.length) {
        return respond(400, { error: "datasource must declare at least one field" });
      }
      for (const f of doc.fields) {
        if (f.dataType && !DATA_TYPES.includes(f.dataType)) {
          return respond(400, {
            error:
              `field '${f.name}': dataType '${f.dataType}' is not one of ` +
              DATA_TYPES.join(", "),
          });
        }
      }
      const id = doc.id ?? `ds${this.nextId++}`;
      this.datasources.set(id, doc);
      return respond(201, { id, title: doc.title, fields: doc.fields.length });
    }

    if (method === "POST" && path === "/api/testcases") {
      const { datasourceId, testCases } = body as {
        datasourceId: string;
        testCases: TestCaseDoc[];
      };
      if (!this.datasources.has(datasourceId)) {
        return respond(400, {
          detail: `datasourceId must reference an uploaded datasource, got '${datasourceId}'`,
        });
      }
      const ds = this.datasources.get(datasourceId)!;
      const known = new Set(ds.fields.map((f) => f.name.toLowerCase()));
      const warnings: string[] = [];
      for (const c of testCases) {
        c.turns.forEach((t, i) => {
          for (const exp of t.expected) {
            for (const b of Object.values(exp.vizSpec.encoding ?? {})) {
              if (b.field && !known.has(b.field.toLowerCase())) {
                warnings.push(
                  `unresolved field: ${b.field} (test case '${c.conversationId}' turn ${i + 1})`,
                );
              }
            }
          }
        });
      }
      const id = `s${this.nextId++}`;
      this.suites.set(id, { datasourceId, testCases });
      return respond(201, {
        id,
        conversations: testCases.length,
        turns: testCases.reduce((a, c) => a + c.turns.length, 0),
        warnings,
      });
    }

    if (method === "GET" && path.startsWith("/api/models")) {
      return respond(200, {
        models: [
          { key: "alpha/alpha-1", displayName: "Alpha One", family: "alphafam", recommendedJudge: false },
          { key: "beta/beta-1", displayName: "Beta One", family: "betafam", recommendedJudge: false },
          {
            key: "gamma/gamma-judge",
            displayName: "Gamma Judge (recommended)",
            family: "gammafam",
            recommendedJudge: true,
          },
        ],
        selfPreferenceWarning: false,
      });
    }

    if (method === "POST" && path === "/api/experiments") {
      const runs = (body as { runs: number }).runs;
      if (runs < 1 || runs > 5) {
        return respond(400, { detail: `runs must be between 1 and 5, got ${runs}` });
      }
      const id = `exp${this.nextId++}`;
      this.experiments.set(id, {
        id,
        state: "running",
        planned: this.planned,
        completed: 0,
        events: [],
        results: null,
      });
      this.feed = [...this.scriptedEvents];
      const exp = this.experiments.get(id)!;
      exp.events.push(...this.scriptedEvents);
      if (this.scriptedEvents.some((e) => e.type === "end")) exp.state = "complete";
      return respond(201, { experimentId: id, planned: this.planned });
    }

    const expMatch = path.match(/^\/api\/experiments\/([^/]+)(\/.*)?$/);
    if (expMatch) {
      const exp = this.experiments.get(expMatch[1]);
      if (!exp) return respond(404, { detail: `unknown experiment: ${expMatch[1]}` });
      const rest = expMatch[2] ?? "";
      if (method === "POST" && rest === "/stop") {
        if (exp.state !== "running") {
          return respond(409, { detail: `experiment is ${exp.state}, not running` });
        }
        exp.state = "stopped";
        return respond(200, { experimentId: exp.id, stopping: true });
      }
      if (method === "GET" && rest.startsWith("/export")) {
        return respond(200, exp.results ?? { cells: [] });
      }
      if (method === "GET" && rest === "") {
        const doc: Record<string, unknown> = {
          experimentId: exp.id,
          state: exp.state,
          planned: exp.planned,
          completed: exp.completed,
          progress: exp.planned ? exp.completed / exp.planned : 0,
        };
        const terminal = exp.state !== "running" && exp.state !== "created";
        if (terminal) {
          const agg = [...exp.events].reverse().find((e) => e.type === "aggregate");
          if (agg && agg.type === "aggregate") {
            doc.aggregate = agg.aggregate;
            doc.partial = agg.partial;
          }
        }
        return respond(200, doc);
      }
    }

    return respond(404, { detail: `mock server: unknown endpoint ${method} ${path}` });
  };

  /** SSE stream: replays history as chunked event-stream text. */
  streamOpener() {
    const server = this;
    return async function* (url: string): AsyncGenerator<string> {
      server.requests.push({ method: "GET", path: url.replace(/^https?:\/\/[^/]+/, "") });
      let i = 0;
      for (;;) {
        while (i < server.feed.length) {
          const ev = server.feed[i++];
          // split mid-event to exercise chunk-boundary handling
          const text = `event: ${ev.type}\ndata: ${JSON.stringify(ev)}\n\n`;
          const cut = Math.min(8, text.length);
          yield text.slice(0, cut);
          yield text.slice(cut);
          if (ev.type === "end") return;
        }
        await new Promise<void>((resolve) => server.waiters.push(resolve));
      }
    };
  }
}

export function makeAggregate(partial = false): AggregateDoc {
  const doc: AggregateDoc = {
    pairs: [
      {
        model: "alpha/alpha-1",
        promptIndex: 1,
        metricMeans: { sort_accuracy: 50.0, data_fidelity: 100.0 },
        overallViz: 90.0,
        overallNl: 70.0,
        combined: 80.0,
        cells: 3,
        breakdowns: {
          chartType: { bar: { cells: 2, overallViz: 88, overallNl: 70 } },
          ambiguity: { pragmatic: { cells: 1, overallViz: 78, overallNl: 70 } },
          contextHandling: { unlabeled: { cells: 3, overallViz: 90, overallNl: 70 } },
          turnIndex: {
            "1": { cells: 2, overallViz: 95, overallNl: 72 },
            "2": { cells: 1, overallViz: 78, overallNl: 68 },
          },
        },
      },
    ],
    partial,
    completedCells: 3,
  };
  if (!partial) {
    doc.recommendation = {
      model: "alpha/alpha-1",
      promptIndex: 1,
      rationale: "best combined score 80.0",
    };
  }
  return doc;
}
