// Mocked-server tests that exercise every screen offline: setup panel,
// results table with chip drill-down, diff viewer, and overview panel.

import { describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { App } from "../src/app.js";
import { MockServer, makeAggregate } from "./mockServer.js";
import type { CellDoc, DatasourceDoc, StreamEvent, TestCaseDoc } from "../src/types.js";

import datasourceJson from "./fixtures/datasource.json";
import suiteJson from "./fixtures/suite.json";
import resultsJson from "./fixtures/results.json";

const datasource = datasourceJson as unknown as DatasourceDoc;
const suite = suiteJson as unknown as TestCaseDoc[];
const cells = (resultsJson as { cells: CellDoc[] }).cells;

function makeApp(server: MockServer): App {
  const api = new ApiClient("http://mock", server.fetch);
  return new App(api, server.streamOpener());
}

function cellEvents(partial = false): StreamEvent[] {
  const evs: StreamEvent[] = [];
  cells.forEach((cell, i) => {
    evs.push({ type: "cell", cell });
    evs.push({
      type: "progress",
      completed: i + 1,
      planned: cells.length,
      fraction: (i + 1) / cells.length,
    });
  });
  evs.push({ type: "aggregate", aggregate: makeAggregate(partial), partial });
  evs.push({ type: "end", partial });
  return evs;
}

async function uploadedApp(server: MockServer): Promise<App> {
  const app = makeApp(server);
  await app.uploadDatasource(datasource);
  await app.uploadSuite(suite);
  app.config = {
    models: ["alpha/alpha-1"],
    prompts: ["p {datasource} {utterance} {output-schema}"],
    metrics: ["sort_accuracy"],
    runs: 3,
    testCaseSelection: "1,3",
  };
  return app;
}

describe("setup panel", () => {
  it("surfaces server validation errors verbatim", async () => {
    const server = new MockServer();
    const app = makeApp(server);
    await app.uploadDatasource({
      title: "bad",
      fields: [{ name: "A", dataType: "odd", fieldValues: [1] }],
    });
    const html = app.html();
    expect(html).toContain(
      "field &#39;A&#39;: dataType &#39;odd&#39; is not one of nominal, ordinal, quantitative, temporal",
    );
    expect(app.state.datasourceId).toBeNull();
  });

  it("previews the suite and unfurls turns on expand", async () => {
    const server = new MockServer();
    const app = await uploadedApp(server);
    let html = app.html();
    expect(html).toContain("suite-preview");
    expect(html).not.toContain("turn-row");
    app.toggleConversation("1");
    html = app.html();
    expect(html).toContain("turn-row");
    expect(html).toContain("Sort by Quantity");
  });

  it("marks the recommended judge in the model picker", async () => {
    const server = new MockServer();
    const app = await uploadedApp(server);
    await app.loadModels();
    expect(app.html()).toContain("Gamma Judge (recommended)");
  });

  it("reports unresolved-field warnings from the suite upload", async () => {
    const server = new MockServer();
    const app = makeApp(server);
    await app.uploadDatasource(datasource);
    const badSuite: TestCaseDoc[] = [
      {
        conversationId: "w",
        turns: [
          {
            utterance: "u",
            expected: [
              {
                vizSpec: { mark: "bar", encoding: { x: { field: "Ghost" } } },
                nlExplanation: "x",
              },
            ],
          },
        ],
      },
    ];
    await app.uploadSuite(badSuite);
    expect(app.html()).toContain("unresolved field: Ghost");
  });

  it("only issues documented api calls", async () => {
    const server = new MockServer();
    server.planned = cells.length;
    server.scriptedEvents = cellEvents();
    const app = await uploadedApp(server);
    await app.loadModels();
    await app.evaluate();
    const allowed = [
      /^\/api\/datasources$/,
      /^\/api\/testcases$/,
      /^\/api\/models/,
      /^\/api\/experiments$/,
      /^\/api\/experiments\/[^/]+$/,
      /^\/api\/experiments\/[^/]+\/events$/,
      /^\/api\/experiments\/[^/]+\/stop$/,
      /^\/api\/experiments\/[^/]+\/export/,
    ];
    for (const req of server.requests) {
      expect(
        allowed.some((re) => re.test(req.path)),
        `undocumented call: ${req.method} ${req.path}`,
      ).toBe(true);
    }
  });
});

describe("streaming results", () => {
  it("populates the table and withholds the recommendation until the terminal event", async () => {
    const server = new MockServer();
    server.planned = cells.length;
    const sawRecommendation: boolean[] = [];
    const api = new ApiClient("http://mock", server.fetch);
    const app = new App(api, server.streamOpener(), (html) => {
      sawRecommendation.push(html.includes("recommendation-card"));
    });
    await app.uploadDatasource(datasource);
    await app.uploadSuite(suite);
    app.config = {
      models: ["alpha/alpha-1"],
      prompts: ["p {datasource} {utterance} {output-schema}"],
      metrics: ["sort_accuracy"],
      runs: 3,
      testCaseSelection: "1,3",
    };
    server.scriptedEvents = [];
    await app.evaluate(); // stream starts; no events fed yet
    for (const ev of cellEvents()) server.pushEvent(ev);
    await app.streamDone;

    // the recommendation never appeared before the terminal aggregate+end
    const firstWithCard = sawRecommendation.indexOf(true);
    expect(app.state.aggregate?.recommendation).toBeDefined();
    expect(firstWithCard).toBeGreaterThan(0);
    expect(sawRecommendation.slice(0, firstWithCard).every((x) => !x)).toBe(true);
    expect(app.html()).toContain("recommendation-card");
    expect(app.state.cells.length).toBe(cells.length);
  });

  it("renders one row per turn with chart, text and chips", async () => {
    const server = new MockServer();
    server.planned = cells.length;
    server.scriptedEvents = cellEvents();
    const app = await uploadedApp(server);
    await app.evaluate();
    await app.streamDone;
    const html = app.html();
    expect(html).toContain("1 / turn 1");
    expect(html).toContain("1 / turn 2");
    expect(html).toContain("3 / turn 1");
    expect(html).toContain("<svg"); // charts rendered from specs
    expect(html).toContain("chips");
    expect(html).toContain("Examine Viz Grammar Differences");
  });

  it("sort chip hover shows expected vs actual for the swapped-sort fixture", async () => {
    const server = new MockServer();
    server.planned = cells.length;
    server.scriptedEvents = cellEvents();
    const app = await uploadedApp(server);
    await app.evaluate();
    await app.streamDone;
    app.toggleMetricPath("viz");
    app.toggleMetricPath("viz.functionality");
    const html = app.html();
    expect(html).toContain("Sort: Expected descending, Model: none");
  });

  it("chips expand Visualization into Data, Semantics, Functionality, Design", async () => {
    const server = new MockServer();
    server.planned = cells.length;
    server.scriptedEvents = cellEvents();
    const app = await uploadedApp(server);
    await app.evaluate();
    await app.streamDone;
    let html = app.html();
    expect(html).not.toContain(">▸ Data:");
    app.toggleMetricPath("viz");
    html = app.html();
    for (const sub of ["Data", "Semantics", "Functionality", "Design"]) {
      expect(html).toContain(`${sub}:`);
    }
  });

  it("color bands follow red < 50 <= yellow < 80 <= blue", async () => {
    const { colorBand } = await import("../src/render/chips.js");
    expect(colorBand(0)).toBe("red");
    expect(colorBand(49.9)).toBe("red");
    expect(colorBand(50)).toBe("yellow");
    expect(colorBand(79.9)).toBe("yellow");
    expect(colorBand(80)).toBe("blue");
    expect(colorBand(100)).toBe("blue");
  });
});

describe("diff viewer", () => {
  it("highlights the extra color channel path", async () => {
    const server = new MockServer();
    server.planned = cells.length;
    server.scriptedEvents = cellEvents();
    const app = await uploadedApp(server);
    await app.evaluate();
    await app.streamDone;
    app.selectDiffCell("3:1|alpha/alpha-1 · prompt 1");
    const html = app.html();
    expect(html).toContain("diff-viewer");
    expect(html).toMatch(/diff-entry diff-extra[^>]*data-diff-path="encoding\.color"/);
    expect(html).toMatch(/<span class="diff diff-extra" data-diff-path="encoding\.color"/);
  });

  it("shows the identical state for an exact match", async () => {
    const server = new MockServer();
    server.planned = cells.length;
    server.scriptedEvents = cellEvents();
    const app = await uploadedApp(server);
    await app.evaluate();
    await app.streamDone;
    app.selectDiffCell("1:1|alpha/alpha-1 · prompt 1"); // turn 1 matched exactly
    expect(app.html()).toContain("specs identical");
  });
});

describe("overview panel", () => {
  it("shows only the progress bar mid-run", async () => {
    const server = new MockServer();
    server.planned = cells.length;
    const app = await uploadedApp(server);
    server.scriptedEvents = [];
    await app.evaluate();
    server.pushEvent({ type: "cell", cell: cells[0] });
    server.pushEvent({ type: "progress", completed: 1, planned: 3, fraction: 1 / 3 });
    // let the stream consume the queued events
    await new Promise((r) => setTimeout(r, 10));
    const html = app.html();
    expect(html).toContain('data-fraction="0.333"');
    expect(html).not.toContain("recommendation-card");
    expect(html).not.toContain("metrics-by-label");
    for (const ev of cellEvents().slice(2)) server.pushEvent(ev);
    await app.streamDone;
  });

  it("renders recommendation, metric cards and label charts when complete", async () => {
    const server = new MockServer();
    server.planned = cells.length;
    server.scriptedEvents = cellEvents();
    const app = await uploadedApp(server);
    await app.evaluate();
    await app.streamDone;
    const html = app.html();
    expect(html).toContain("recommendation-card");
    expect(html).toContain("metric-cards");
    expect(html).toContain("metrics-by-label");
    for (const dim of ["chartType", "ambiguity", "contextHandling", "turnIndex"]) {
      expect(html).toContain(dim);
    }
  });

  it("omits the recommendation card on partial (stopped) runs", async () => {
    const server = new MockServer();
    server.planned = cells.length;
    server.scriptedEvents = cellEvents(true);
    const app = await uploadedApp(server);
    await app.evaluate();
    await app.streamDone;
    const html = app.html();
    expect(html).toContain("metrics-by-label");
    expect(html).not.toContain("recommendation-card");
  });

  it("label chart click filters the results table", async () => {
    const server = new MockServer();
    server.planned = cells.length;
    server.scriptedEvents = cellEvents();
    const app = await uploadedApp(server);
    await app.evaluate();
    await app.streamDone;
    app.setLabelFilter("turnIndex", "2");
    let html = app.html();
    expect(html).toContain("1 / turn 2");
    expect(html).not.toContain("1 / turn 1");
    expect(html).toContain("filtered to turnIndex = 2");
    app.clearLabelFilter();
    html = app.html();
    expect(html).toContain("1 / turn 1");
  });

  it("stop flows through the documented endpoint and flags partial", async () => {
    const server = new MockServer();
    server.planned = cells.length;
    const app = await uploadedApp(server);
    server.scriptedEvents = [];
    await app.evaluate();
    await app.stop();
    expect(server.requests.some((r) => r.path.endsWith("/stop"))).toBe(true);
    for (const ev of cellEvents(true)) server.pushEvent(ev);
    await app.streamDone;
    expect(app.state.partial).toBe(true);
    expect(app.html()).not.toContain("recommendation-card");
  });
});
