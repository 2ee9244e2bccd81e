"""Experiment planning, concurrent execution, streaming, aggregation,
persistence, and the model-prompt recommendation.

Jobs form a model x prompt x test-case-turn x run grid. Turns of one
conversation execute in order for a given (model, prompt, run) so each request
carries the model's own earlier answers; independent conversation units drain
through a worker pool under the gateway's admission control.
"""

from __future__ import annotations

import json
import queue
import statistics
import threading
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Iterator, Mapping, Sequence

from .core import (
    Datasource,
    ExperimentConfig,
    MetricScore,
    ModelResponse,
    SchemaError,
    TestCase,
    select_test_cases,
    vizspec_to_dict,
)
from .specs import diff_specs
from .gateway import Gateway, GenerationRequest, JudgeViaGateway, ModelRef, render_prompt
from .nlmetrics import (
    JUDGE_METRIC_IDS,
    JudgeContext,
    JudgeFailure,
    JudgeRubric,
    MetricUnavailable,
    judge_metric,
    load_rubric,
    nlg_prf,
    overall_nl_score,
    scale_judge_score,
    score_factual_grounding,
)
from .vizmetrics import (
    VIZ_METRIC_IDS,
    overall_viz_score,
    score_viz_against_candidates,
)

ALL_METRIC_IDS = VIZ_METRIC_IDS + ("factual_grounding",) + JUDGE_METRIC_IDS + ("nlg_prf",)

OUTPUT_SCHEMA = json.dumps(
    {
        "mark": "bar|line|area|point|pie|histogram|boxplot|table|heatmap",
        "encoding": {
            "<channel: x|y|color|shape|opacity|size|text>": {
                "field": "<datasource field>",
                "aggregate": "sum|mean|count|min|max|median|none",
                "scaleType": "linear|log|sqrt|ordinal|time",
                "zeroBaseline": True,
            }
        },
        "tooltipFields": [{"field": "<field>", "aggregate": "<aggregate>"}],
        "filters": [{"field": "<field>", "op": "eq|neq|in|range|top-n|not-null", "values": []}],
        "sort": {"field": "<field>", "direction": "asc|desc"},
        "interactions": ["selection", "zoom", "pan", "drilldown"],
    },
    indent=2,
)


@dataclass(frozen=True)
class JobKey:
    model: str
    prompt_index: int
    conversation_id: str
    turn_index: int
    run_index: int

    def to_dict(self) -> dict[str, Any]:
        return {
            "model": self.model,
            "promptIndex": self.prompt_index,
            "conversationId": self.conversation_id,
            "turnIndex": self.turn_index,
            "runIndex": self.run_index,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "JobKey":
        return cls(
            model=d["model"],
            prompt_index=d["promptIndex"],
            conversation_id=d["conversationId"],
            turn_index=d["turnIndex"],
            run_index=d["runIndex"],
        )


@dataclass
class EvalJob:
    key: JobKey
    status: str = "pending"  # pending|running|done|failed|cancelled


@dataclass(frozen=True)
class CellResult:
    key: JobKey
    parse_status: str
    nl_text: str
    raw_output: str
    latency_ms: float
    viz_spec: dict[str, Any] | None
    viz_scores: tuple[MetricScore, ...]
    nl_scores: tuple[MetricScore, ...]
    nlg_scores: Mapping[str, float] | None
    overall_viz: float | None
    overall_nl: float | None
    notes: tuple[str, ...] = ()
    expected_spec: dict[str, Any] | None = None
    spec_diff: tuple[Mapping[str, Any], ...] = ()

    def to_dict(self) -> dict[str, Any]:
        return {
            **self.key.to_dict(),
            "parseStatus": self.parse_status,
            "nlText": self.nl_text,
            "rawOutput": self.raw_output,
            "latencyMs": self.latency_ms,
            "vizSpec": self.viz_spec,
            "expectedSpec": self.expected_spec,
            "specDiff": [dict(e) for e in self.spec_diff],
            "vizScores": [s.to_dict() for s in self.viz_scores],
            "nlScores": [s.to_dict() for s in self.nl_scores],
            "nlgScores": dict(self.nlg_scores) if self.nlg_scores else None,
            "overallViz": self.overall_viz,
            "overallNl": self.overall_nl,
            "notes": list(self.notes),
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "CellResult":
        return cls(
            key=JobKey.from_dict(d),
            parse_status=d["parseStatus"],
            nl_text=d["nlText"],
            raw_output=d["rawOutput"],
            latency_ms=d["latencyMs"],
            viz_spec=d.get("vizSpec"),
            expected_spec=d.get("expectedSpec"),
            spec_diff=tuple(d.get("specDiff", ())),
            viz_scores=tuple(MetricScore.from_dict(s) for s in d["vizScores"]),
            nl_scores=tuple(MetricScore.from_dict(s) for s in d["nlScores"]),
            nlg_scores=d.get("nlgScores"),
            overall_viz=d.get("overallViz"),
            overall_nl=d.get("overallNl"),
            notes=tuple(d.get("notes", ())),
        )


def plan_experiment(config: ExperimentConfig, suite: Sequence[TestCase]) -> list[EvalJob]:
    """Deterministically ordered job list covering the full grid."""
    cases = select_test_cases(list(suite), config.test_case_selection)
    if not cases:
        raise SchemaError("experiment plan selects no test cases")
    jobs: list[EvalJob] = []
    for model in config.models:
        for p_idx in range(1, len(config.system_prompts) + 1):
            for run in range(1, config.runs + 1):
                for case in cases:
                    for t_idx in range(1, len(case.turns) + 1):
                        jobs.append(
                            EvalJob(
                                key=JobKey(
                                    model=model,
                                    prompt_index=p_idx,
                                    conversation_id=case.conversation_id,
                                    turn_index=t_idx,
                                    run_index=run,
                                )
                            )
                        )
    return jobs


def datasource_summary(ds: Datasource) -> str:
    lines = [f"title: {ds.title}"]
    for f in ds.fields:
        alias = f" (aliases: {', '.join(f.aliases)})" if f.aliases else ""
        sample = ", ".join(str(v) for v in f.field_values[:3])
        lines.append(f"- {f.name} [{f.data_type}]{alias} e.g. {sample}")
    return "\n".join(lines)


def _stable_seed(*parts: Any) -> int:
    import hashlib

    blob = "|".join(str(p) for p in parts)
    return int.from_bytes(hashlib.sha256(blob.encode()).digest()[:4], "big")


@dataclass
class RunnerConfig:
    strict_parse_failures: bool = False  # score viz metrics 0 instead of unavailable
    max_workers: int = 4


class ExperimentRunner:
    """Drives one experiment and streams events.

    Event shapes (all dicts):
      {"type": "cell", "cell": {...}}                completed job
      {"type": "failure", "job": {...}, "status": "failed"|"cancelled", "error": str}
      {"type": "progress", "completed": int, "planned": int, "fraction": float}
      {"type": "aggregate", "aggregate": {...}, "partial": bool}
      {"type": "end"}
    """

    def __init__(
        self,
        config: ExperimentConfig,
        suite: Sequence[TestCase],
        datasource: Datasource,
        gateway: Gateway,
        judge_model: ModelRef | None = None,
        rubrics: Mapping[str, JudgeRubric] | None = None,
        experiment_id: str | None = None,
        checkpoint_path: str | Path | None = None,
        runner_config: RunnerConfig | None = None,
    ):
        self.config = config
        self.cases = select_test_cases(list(suite), config.test_case_selection)
        self.case_by_id = {c.conversation_id: c for c in self.cases}
        self.datasource = datasource
        self.gateway = gateway
        self.judge_model = judge_model
        self.experiment_id = experiment_id or uuid.uuid4().hex[:12]
        self.checkpoint_path = Path(checkpoint_path) if checkpoint_path else None
        self.rc = runner_config or RunnerConfig()
        unknown = self.config.metric_selection - set(ALL_METRIC_IDS)
        if unknown:
            raise SchemaError(
                "unknown metric ids: " + ", ".join(sorted(unknown))
            )
        selected_judges = [
            m for m in JUDGE_METRIC_IDS if m in self.config.metric_selection
        ]
        if selected_judges and judge_model is None:
            raise SchemaError(
                "judge metrics selected but no judge model configured: "
                + ", ".join(selected_judges)
            )
        self.rubrics = dict(rubrics or {})
        for m in selected_judges:
            self.rubrics.setdefault(m, load_rubric(m))
        self._restored: dict[JobKey, CellResult] = {}
        if self.checkpoint_path and self.checkpoint_path.exists():
            for line in self.checkpoint_path.read_text().splitlines():
                if not line.strip():
                    continue
                cell = CellResult.from_dict(json.loads(line))
                self._restored[cell.key] = cell

    # -- single turn ------------------------------------------------------

    def _render_system_prompt(self, template: str, utterance: str, prior: list[tuple[str, str]]) -> str:
        prior_text = "\n".join(
            f"User: {u}\nAssistant: {r}" for u, r in prior
        )
        return render_prompt(
            template,
            {
                "datasource": datasource_summary(self.datasource),
                "utterance": utterance,
                "output-schema": OUTPUT_SCHEMA,
                "prior-turns": prior_text,
            },
        )

    def _score_cell(self, key: JobKey, response: ModelResponse, prior: list[tuple[str, str]]) -> CellResult:
        case = self.case_by_id[key.conversation_id]
        turn = case.turns[key.turn_index - 1]
        selection = self.config.metric_selection
        notes: list[str] = []

        viz_scores: list[MetricScore] = []
        viz_selected = [m for m in VIZ_METRIC_IDS if m in selection]
        if viz_selected:
            if response.viz_spec is not None:
                viz_scores = score_viz_against_candidates(
                    [e.viz_spec for e in turn.expected],
                    response.viz_spec,
                    self.datasource,
                    viz_selected,
                )
            elif self.rc.strict_parse_failures:
                viz_scores = [
                    MetricScore(metric_id=m, value=0.0, explanation="no parseable spec (strict mode)")
                    for m in viz_selected
                ]
                notes.append("parse failure scored as 0 (strict mode)")
            else:
                notes.append("viz metrics unavailable: no parseable spec")

        nl_scores: list[MetricScore] = []
        if "factual_grounding" in selection:
            try:
                candidates = [
                    score_factual_grounding(e.nl_explanation, response.nl_text)
                    for e in turn.expected
                    if response.nl_text.strip()
                ]
                if candidates:
                    nl_scores.append(max(candidates, key=lambda s: s.value))
                else:
                    notes.append("factual grounding unavailable: empty response text")
            except MetricUnavailable as exc:
                notes.append(f"factual grounding unavailable: {exc}")

        judge_selected = [m for m in JUDGE_METRIC_IDS if m in selection]
        if judge_selected and self.judge_model is not None:
            judge = JudgeViaGateway(self.gateway, self.judge_model)
            context_pairs = tuple(prior) + ((turn.utterance, ""),)
            for metric_id in judge_selected:
                if metric_id == "followup_relevance" and key.turn_index < 2:
                    continue  # not applicable on turn 1
                best = None
                try:
                    for exp in turn.expected:
                        ctx = JudgeContext(
                            datasource_summary=datasource_summary(self.datasource),
                            conversation=context_pairs,
                            expected_response=exp.nl_explanation,
                            actual_response=response.nl_text,
                        )
                        verdict = judge_metric(
                            self.rubrics[metric_id],
                            ctx,
                            judge,
                            seed=_stable_seed(metric_id, key.model, key.prompt_index,
                                              key.conversation_id, key.turn_index,
                                              key.run_index),
                        )
                        if best is None or verdict.score > best.score:
                            best = verdict
                except JudgeFailure as exc:
                    notes.append(f"{metric_id} unavailable: {exc}")
                    continue
                if best is not None:
                    nl_scores.append(
                        MetricScore(
                            metric_id=metric_id,
                            value=scale_judge_score(best.score),
                            raw_judge_score=best.score,
                            explanation=f"judge score {best.score}/5",
                            judge_rationale=best.rationale,
                        )
                    )

        nlg = None
        if "nlg_prf" in selection and response.nl_text.strip():
            nlg = max(
                (nlg_prf(e.nl_explanation, response.nl_text) for e in turn.expected),
                key=lambda d: d["f1"],
            )

        overall_viz = overall_viz_score(viz_scores) if viz_scores else None
        overall_nl = overall_nl_score(nl_scores)
        reference = turn.expected[0].viz_spec
        spec_diff: tuple[Mapping[str, Any], ...] = ()
        if response.viz_spec is not None:
            spec_diff = tuple(diff_specs(reference, response.viz_spec).to_json())
        return CellResult(
            key=key,
            parse_status=response.parse_status,
            nl_text=response.nl_text,
            raw_output=response.raw_output,
            latency_ms=response.latency_ms,
            viz_spec=vizspec_to_dict(response.viz_spec) if response.viz_spec else None,
            expected_spec=vizspec_to_dict(reference),
            spec_diff=spec_diff,
            viz_scores=tuple(viz_scores),
            nl_scores=tuple(nl_scores),
            nlg_scores=nlg,
            overall_viz=overall_viz,
            overall_nl=overall_nl,
            notes=tuple(notes),
        )

    # -- conversation unit --------------------------------------------------

    def _run_unit(
        self,
        model: ModelRef,
        prompt_index: int,
        run_index: int,
        case: TestCase,
        stop: threading.Event,
        emit: Any,
    ) -> None:
        template = self.config.system_prompts[prompt_index - 1]
        prior: list[tuple[str, str]] = []
        raw_prior: list[tuple[str, str]] = []
        for t_idx, turn in enumerate(case.turns, start=1):
            key = JobKey(
                model=model.key,
                prompt_index=prompt_index,
                conversation_id=case.conversation_id,
                turn_index=t_idx,
                run_index=run_index,
            )
            if stop.is_set():
                emit({"type": "failure", "job": key.to_dict(), "status": "cancelled",
                      "error": "stopped before start"})
                continue
            restored = self._restored.get(key)
            if restored is not None:
                prior.append((turn.utterance, restored.nl_text))
                raw_prior.append((turn.utterance, restored.raw_output))
                emit({"type": "cell", "cell": restored.to_dict(), "restored": True})
                continue
            system_prompt = self._render_system_prompt(template, turn.utterance, prior)
            messages: list[tuple[str, str]] = []
            for utt, raw in raw_prior:
                messages.append(("user", utt))
                messages.append(("assistant", raw))
            messages.append(("user", turn.utterance))
            req = GenerationRequest(
                system_prompt=system_prompt,
                messages=tuple(messages),
                output_schema=OUTPUT_SCHEMA,
            )
            try:
                response = self.gateway.generate(model, req)
                cell = self._score_cell(key, response, prior)
            except Exception as exc:
                emit({"type": "failure", "job": key.to_dict(), "status": "failed",
                      "error": str(exc)})
                # later turns lack their context; mark them failed too
                for rest_idx in range(t_idx + 1, len(case.turns) + 1):
                    rest = replace(key, turn_index=rest_idx)
                    emit({"type": "failure", "job": rest.to_dict(), "status": "failed",
                          "error": f"earlier turn {t_idx} failed"})
                return
            prior.append((turn.utterance, response.nl_text))
            raw_prior.append((turn.utterance, response.raw_output))
            emit({"type": "cell", "cell": cell.to_dict()})

    # -- full run -------------------------------------------------------------

    def run(self, stop: threading.Event | None = None) -> Iterator[dict[str, Any]]:
        """Yields events as jobs complete; the terminal aggregate is flagged
        partial when the run was stopped or cells failed."""
        stop = stop or threading.Event()
        jobs = plan_experiment(self.config, self.cases)
        planned = len(jobs)
        units: list[tuple[ModelRef, int, int, TestCase]] = []
        for model_name in self.config.models:
            model = self.gateway.registry.find(model_name)
            for p_idx in range(1, len(self.config.system_prompts) + 1):
                for run_idx in range(1, self.config.runs + 1):
                    for case in self.cases:
                        units.append((model, p_idx, run_idx, case))

        events: queue.Queue[dict[str, Any] | None] = queue.Queue()

        def emit(ev: dict[str, Any]) -> None:
            events.put(ev)

        def worker(unit: tuple[ModelRef, int, int, TestCase]) -> None:
            model, p_idx, run_idx, case = unit
            self._run_unit(model, p_idx, run_idx, case, stop, emit)

        def drive() -> None:
            with ThreadPoolExecutor(max_workers=self.rc.max_workers) as pool:
                futures = [pool.submit(worker, u) for u in units]
                for f in futures:
                    f.result()
            events.put(None)

        driver = threading.Thread(target=drive, daemon=True)
        driver.start()

        cells: list[CellResult] = []
        completed = 0
        cancelled_or_failed = 0
        checkpoint_f = None
        if self.checkpoint_path:
            self.checkpoint_path.parent.mkdir(parents=True, exist_ok=True)
            checkpoint_f = self.checkpoint_path.open("a")
        try:
            while True:
                ev = events.get()
                if ev is None:
                    break
                if ev["type"] == "cell":
                    cell = CellResult.from_dict(ev["cell"])
                    cells.append(cell)
                    completed += 1
                    if checkpoint_f and not ev.get("restored"):
                        checkpoint_f.write(json.dumps(ev["cell"]) + "\n")
                        checkpoint_f.flush()
                elif ev["type"] == "failure":
                    completed += 1
                    cancelled_or_failed += 1
                yield ev
                yield {
                    "type": "progress",
                    "completed": completed,
                    "planned": planned,
                    "fraction": completed / planned if planned else 1.0,
                }
        finally:
            if checkpoint_f:
                checkpoint_f.close()
        partial = stop.is_set() or cancelled_or_failed > 0
        if cells:
            agg = aggregate(cells, self.cases, self.config, partial=partial)
            yield {
                "type": "aggregate",
                "aggregate": agg,
                "partial": partial,
                "experimentId": self.experiment_id,
            }
        yield {"type": "end", "experimentId": self.experiment_id, "partial": partial}

    def collect(self, stop: threading.Event | None = None) -> dict[str, Any]:
        """Run to completion and assemble the results document."""
        cells: list[dict[str, Any]] = []
        agg: dict[str, Any] | None = None
        partial = False
        failures: list[dict[str, Any]] = []
        for ev in self.run(stop=stop):
            if ev["type"] == "cell":
                cells.append(ev["cell"])
            elif ev["type"] == "failure":
                failures.append(ev)
            elif ev["type"] == "aggregate":
                agg = ev["aggregate"]
                partial = ev["partial"]
            elif ev["type"] == "end":
                partial = ev["partial"]
        return {
            "experimentId": self.experiment_id,
            "config": {
                "models": list(self.config.models),
                "systemPrompts": list(self.config.system_prompts),
                "metricSelection": sorted(self.config.metric_selection),
                "judgeModel": self.judge_model.key if self.judge_model else None,
                "testCaseSelection": self.config.test_case_selection,
                "runs": self.config.runs,
            },
            "cells": cells,
            "failures": [
                {"job": f["job"], "status": f["status"], "error": f["error"]}
                for f in failures
            ],
            "aggregate": agg,
            "partial": partial,
        }


# ---------------------------------------------------------------------------
# Aggregation and recommendation
# ---------------------------------------------------------------------------

def _mean(vals: Sequence[float]) -> float | None:
    return statistics.fmean(vals) if vals else None


def _cell_group_metric(cells: Sequence[CellResult], metric_id: str) -> float | None:
    """Replication averaging for one (conversation, turn) group: judge metrics
    average the raw 1-5 score across runs before the x20 scaling."""
    raws: list[float] = []
    values: list[float] = []
    for c in cells:
        for s in list(c.viz_scores) + list(c.nl_scores):
            if s.metric_id == metric_id:
                if s.raw_judge_score is not None:
                    raws.append(s.raw_judge_score)
                else:
                    values.append(s.value)
    if raws:
        return scale_judge_score(statistics.fmean(raws))
    return _mean(values)


def aggregate(
    cells: Sequence[CellResult],
    suite: Sequence[TestCase],
    config: ExperimentConfig,
    partial: bool = False,
) -> dict[str, Any]:
    """Per model x prompt metric means (runs averaged first), label
    breakdowns, and the recommendation (withheld on partial runs)."""
    if not cells:
        raise ValueError("cannot aggregate zero completed cells")
    case_by_id = {c.conversation_id: c for c in suite}
    pairs = sorted(
        {(c.key.model, c.key.prompt_index) for c in cells},
        key=lambda p: (_model_order(config, p[0]), p[1]),
    )
    per_pair: list[dict[str, Any]] = []
    for model, p_idx in pairs:
        pair_cells = [
            c for c in cells if c.key.model == model and c.key.prompt_index == p_idx
        ]
        groups: dict[tuple[str, int], list[CellResult]] = {}
        for c in pair_cells:
            groups.setdefault((c.key.conversation_id, c.key.turn_index), []).append(c)

        metric_means: dict[str, float] = {}
        all_ids = {
            s.metric_id for c in pair_cells for s in list(c.viz_scores) + list(c.nl_scores)
        }
        for mid in sorted(all_ids):
            group_vals = [
                v
                for g in groups.values()
                if (v := _cell_group_metric(g, mid)) is not None
            ]
            if group_vals:
                metric_means[mid] = statistics.fmean(group_vals)

        def group_overall(g: list[CellResult], attr: str) -> float | None:
            vals = [getattr(c, attr) for c in g if getattr(c, attr) is not None]
            return _mean(vals)

        viz_means = [
            v for g in groups.values() if (v := group_overall(g, "overall_viz")) is not None
        ]
        nl_means = [
            v for g in groups.values() if (v := group_overall(g, "overall_nl")) is not None
        ]
        overall_viz = _mean(viz_means)
        overall_nl = _mean(nl_means)
        combined_parts = [v for v in (overall_viz, overall_nl) if v is not None]
        combined = _mean(combined_parts)

        breakdowns: dict[str, dict[str, dict[str, Any]]] = {
            "chartType": {}, "ambiguity": {}, "contextHandling": {}, "turnIndex": {},
        }

        def bucket(dim: str, label: str, g: list[CellResult]) -> None:
            b = breakdowns[dim].setdefault(
                label, {"cells": 0, "_viz": [], "_nl": []}
            )
            b["cells"] += len(g)
            v = group_overall(g, "overall_viz")
            n = group_overall(g, "overall_nl")
            if v is not None:
                b["_viz"].append(v)
            if n is not None:
                b["_nl"].append(n)

        for (cid, t_idx), g in groups.items():
            case = case_by_id.get(cid)
            if case is None:
                continue
            labels = case.turns[t_idx - 1].labels
            bucket("chartType", labels.chart_type or "unlabeled", g)
            for a in sorted(labels.ambiguity) or ["unlabeled"]:
                bucket("ambiguity", a, g)
            for ch in sorted(labels.context_handling) or ["unlabeled"]:
                bucket("contextHandling", ch, g)
            bucket("turnIndex", str(t_idx), g)
        for dim in breakdowns:
            for label, b in breakdowns[dim].items():
                b["overallViz"] = _mean(b.pop("_viz"))
                b["overallNl"] = _mean(b.pop("_nl"))

        per_pair.append(
            {
                "model": model,
                "promptIndex": p_idx,
                "metricMeans": metric_means,
                "overallViz": overall_viz,
                "overallNl": overall_nl,
                "combined": combined,
                "cells": len(pair_cells),
                "breakdowns": breakdowns,
            }
        )

    report: dict[str, Any] = {
        "pairs": per_pair,
        "partial": partial,
        "completedCells": len(cells),
    }
    if not partial:
        report["recommendation"] = recommend_best(report, config)
    return report


def _model_order(config: ExperimentConfig, model: str) -> int:
    try:
        return config.models.index(model)
    except ValueError:
        return len(config.models)


def recommend_best(report: Mapping[str, Any], config: ExperimentConfig) -> dict[str, Any]:
    """Argmax of the combined score (mean of overall viz and NL means); ties
    break on the higher viz mean, then configured model order."""
    pairs = report["pairs"]
    if not pairs:
        raise ValueError("no aggregated pairs to recommend from")

    def sort_key(p: Mapping[str, Any]) -> tuple:
        return (
            -(p["combined"] if p["combined"] is not None else -1.0),
            -(p["overallViz"] if p["overallViz"] is not None else -1.0),
            _model_order(config, p["model"]),
            p["promptIndex"],
        )

    ranked = sorted(pairs, key=sort_key)
    best = ranked[0]
    rationale_bits = [
        f"best combined score {best['combined']:.1f}"
        if best["combined"] is not None
        else "best available score"
    ]
    if len(ranked) > 1:
        runner = ranked[1]
        if best["combined"] is not None and runner["combined"] is not None and \
                abs(best["combined"] - runner["combined"]) < 1e-9:
            rationale_bits.append(
                f"tie with {runner['model']} prompt {runner['promptIndex']} broken by "
                "higher visualization mean"
                if (best["overallViz"] or 0) > (runner["overallViz"] or 0)
                else f"tie with {runner['model']} prompt {runner['promptIndex']} broken by configured order"
            )
        else:
            gaps = []
            for mid in set(best["metricMeans"]) & set(runner["metricMeans"]):
                gaps.append((best["metricMeans"][mid] - runner["metricMeans"][mid], mid))
            gaps.sort(reverse=True)
            for gap, mid in gaps[:2]:
                rationale_bits.append(
                    f"+{gap:.1f} on {mid} vs {runner['model']} prompt {runner['promptIndex']}"
                )
    return {
        "model": best["model"],
        "promptIndex": best["promptIndex"],
        "rationale": "; ".join(rationale_bits),
    }


# ---------------------------------------------------------------------------
# Persistence and export
# ---------------------------------------------------------------------------

def results_to_json(results: Mapping[str, Any]) -> str:
    return json.dumps(results, indent=2, sort_keys=True)


def results_from_json(text: str) -> dict[str, Any]:
    return json.loads(text)


def export_csv(results: Mapping[str, Any]) -> str:
    """One row per cell x metric (overall and NLG rows included)."""
    import csv
    import io

    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(
        [
            "experimentId", "model", "promptIndex", "conversationId",
            "turnIndex", "runIndex", "metricId", "value",
        ]
    )
    if results.get("partial"):
        pass  # the partial marker lives in the JSON document; CSV carries rows only
    eid = results["experimentId"]
    for cell in results["cells"]:
        base = [
            eid, cell["model"], cell["promptIndex"], cell["conversationId"],
            cell["turnIndex"], cell["runIndex"],
        ]
        for s in cell["vizScores"] + cell["nlScores"]:
            writer.writerow(base + [s["metricId"], s["value"]])
        if cell.get("nlgScores"):
            for k in ("precision", "recall", "f1"):
                writer.writerow(base + [f"nlg_{k}", cell["nlgScores"][k]])
        if cell.get("overallViz") is not None:
            writer.writerow(base + ["overall_viz", cell["overallViz"]])
        if cell.get("overallNl") is not None:
            writer.writerow(base + ["overall_nl", cell["overallNl"]])
    return buf.getvalue()


def csv_row_count(results: Mapping[str, Any]) -> int:
    """Expected number of data rows in the CSV export."""
    n = 0
    for cell in results["cells"]:
        n += len(cell["vizScores"]) + len(cell["nlScores"])
        if cell.get("nlgScores"):
            n += 3
        if cell.get("overallViz") is not None:
            n += 1
        if cell.get("overallNl") is not None:
            n += 1
    return n


def write_atomic(path: str | Path, text: str) -> None:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    tmp = p.with_suffix(p.suffix + ".tmp")
    tmp.write_text(text)
    tmp.replace(p)
