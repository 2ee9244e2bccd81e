// Payload shapes of the benchmark HTTP API consumed by this UI.

export interface DataFieldDoc {
  name: string;
  aliases?: string[];
  dataType?: string;
  fieldValues: Array<string | number | boolean | null>;
}

export interface DatasourceDoc {
  id?: string;
  title: string;
  fields: DataFieldDoc[];
}

export interface EncodingBindingDoc {
  field?: string;
  aggregate?: string;
  scaleType?: string;
  zeroBaseline?: boolean;
}

export interface VizSpecDoc {
  mark: string;
  encoding?: Record<string, EncodingBindingDoc>;
  tooltipFields?: Array<{ field: string; aggregate?: string }>;
  filters?: Array<{ field: string; op: string; values: unknown[] }>;
  sort?: { field: string; direction?: string };
  interactions?: string[];
}

export interface ExpectedResponseDoc {
  vizSpec: VizSpecDoc;
  nlExplanation: string;
}

export interface TurnDoc {
  utterance: string;
  variations?: string[];
  labels?: {
    chartType?: string;
    ambiguity?: string[];
    contextHandling?: string[];
    inferencing?: string[];
  };
  expected: ExpectedResponseDoc[];
}

export interface TestCaseDoc {
  conversationId: string;
  datasourceRef?: string;
  turns: TurnDoc[];
}

export interface MetricScoreDoc {
  metricId: string;
  value: number;
  explanation: string;
  rawJudgeScore?: number;
  expectedFragment?: string;
  actualFragment?: string;
  judgeRationale?: string;
}

export interface DiffEntryDoc {
  path: string;
  kind: "missing" | "extra" | "changed";
  expected?: unknown;
  actual?: unknown;
}

export interface CellDoc {
  model: string;
  promptIndex: number;
  conversationId: string;
  turnIndex: number;
  runIndex: number;
  parseStatus: string;
  nlText: string;
  rawOutput: string;
  latencyMs: number;
  vizSpec: VizSpecDoc | null;
  expectedSpec: VizSpecDoc | null;
  specDiff: DiffEntryDoc[];
  vizScores: MetricScoreDoc[];
  nlScores: MetricScoreDoc[];
  nlgScores: { precision: number; recall: number; f1: number } | null;
  overallViz: number | null;
  overallNl: number | null;
  notes: string[];
}

export interface LabelBucketDoc {
  cells: number;
  overallViz: number | null;
  overallNl: number | null;
}

export interface PairAggregateDoc {
  model: string;
  promptIndex: number;
  metricMeans: Record<string, number>;
  overallViz: number | null;
  overallNl: number | null;
  combined: number | null;
  cells: number;
  breakdowns: Record<string, Record<string, LabelBucketDoc>>;
}

export interface AggregateDoc {
  pairs: PairAggregateDoc[];
  partial: boolean;
  completedCells: number;
  recommendation?: { model: string; promptIndex: number; rationale: string };
}

export type StreamEvent =
  | { type: "cell"; cell: CellDoc; restored?: boolean }
  | { type: "failure"; job: Record<string, unknown> | null; status: string; error: string }
  | { type: "progress"; completed: number; planned: number; fraction: number }
  | { type: "aggregate"; aggregate: AggregateDoc; partial: boolean }
  | { type: "end"; experimentId?: string; partial?: boolean };

export interface ModelListDoc {
  models: Array<{
    key: string;
    displayName: string;
    family: string;
    recommendedJudge: boolean;
  }>;
  selfPreferenceWarning: boolean;
}

export interface ExperimentStateDoc {
  experimentId: string;
  state: "created" | "running" | "stopped" | "complete" | "failed";
  progress: number;
  planned: number;
  completed: number;
  aggregate?: AggregateDoc;
  partial?: boolean;
  error?: string;
}

export interface ExperimentConfigDoc {
  datasourceId: string;
  suiteId: string;
  models: string[];
  systemPrompts: string[];
  metricSelection: string[];
  judgeModel?: string;
  testCaseSelection?: string;
  runs: number;
  replayDir?: string;
}
