// Typed client over the documented benchmark API. Every request the UI makes
// goes through this module, so tests can assert nothing undocumented is hit.

import type {
  DatasourceDoc,
  ExperimentConfigDoc,
  ExperimentStateDoc,
  ModelListDoc,
  StreamEvent,
  TestCaseDoc,
} from "./types.js";

export type FetchLike = (
  url: string,
  init?: { method?: string; headers?: Record<string, string>; body?: string },
) => Promise<{
  status: number;
  json(): Promise<unknown>;
  text(): Promise<string>;
}>;

export class ApiError extends Error {
  constructor(
    message: string,
    readonly status: number,
  ) {
    super(message);
  }
}

async function errorMessage(resp: {
  json(): Promise<unknown>;
  text(): Promise<string>;
}): Promise<string> {
  try {
    const body = (await resp.json()) as Record<string, unknown>;
    // the server reports validation problems under `error` or `detail`;
    // surface them verbatim
    return String(body.error ?? body.detail ?? JSON.stringify(body));
  } catch {
    return await resp.text();
  }
}

export class ApiClient {
  constructor(
    readonly baseUrl: string,
    private readonly fetchFn: FetchLike,
  ) {}

  private async request<T>(
    method: string,
    path: string,
    body?: unknown,
  ): Promise<T> {
    const resp = await this.fetchFn(this.baseUrl + path, {
      method,
      headers: body !== undefined ? { "content-type": "application/json" } : undefined,
      body: body !== undefined ? JSON.stringify(body) : undefined,
    });
    if (resp.status >= 400) {
      throw new ApiError(await errorMessage(resp), resp.status);
    }
    return (await resp.json()) as T;
  }

  uploadDatasource(doc: DatasourceDoc): Promise<{ id: string; title: string; fields: number }> {
    return this.request("POST", "/api/datasources", doc);
  }

  uploadTestCases(
    datasourceId: string,
    testCases: TestCaseDoc[],
    id?: string,
  ): Promise<{ id: string; conversations: number; turns: number; warnings: string[] }> {
    return this.request("POST", "/api/testcases", { datasourceId, testCases, id });
  }

  listModels(candidates: string[]): Promise<ModelListDoc> {
    const qs = candidates.length
      ? `?candidates=${encodeURIComponent(candidates.join(","))}`
      : "";
    return this.request("GET", `/api/models${qs}`);
  }

  createExperiment(config: ExperimentConfigDoc): Promise<{ experimentId: string; planned: number }> {
    return this.request("POST", "/api/experiments", config);
  }

  getExperiment(id: string): Promise<ExperimentStateDoc> {
    return this.request("GET", `/api/experiments/${id}`);
  }

  stopExperiment(id: string): Promise<{ experimentId: string; stopping: boolean }> {
    return this.request("POST", `/api/experiments/${id}/stop`);
  }

  exportUrl(id: string, format: "json" | "csv"): string {
    return `${this.baseUrl}/api/experiments/${id}/export?format=${format}`;
  }
}

// ---------------------------------------------------------------------------
// Server-sent events
// ---------------------------------------------------------------------------

/** Parse an SSE text stream into events; tolerates chunk boundaries anywhere. */
export async function* parseSse(
  chunks: AsyncIterable<string>,
): AsyncGenerator<StreamEvent> {
  let buffer = "";
  for await (const chunk of chunks) {
    buffer += chunk;
    let sep: number;
    while ((sep = buffer.indexOf("\n\n")) !== -1) {
      const block = buffer.slice(0, sep);
      buffer = buffer.slice(sep + 2);
      const dataLines = block
        .split("\n")
        .filter((l) => l.startsWith("data: "))
        .map((l) => l.slice(6));
      if (dataLines.length) {
        yield JSON.parse(dataLines.join("\n")) as StreamEvent;
      }
    }
  }
}

export type StreamOpener = (url: string) => AsyncIterable<string>;

/** Subscribe to an experiment's event stream (history replays first). */
export async function* streamEvents(
  baseUrl: string,
  experimentId: string,
  open: StreamOpener,
): AsyncGenerator<StreamEvent> {
  const url = `${baseUrl}/api/experiments/${experimentId}/events`;
  yield* parseSse(open(url));
}
