"""HTTP service for experiment lifecycle, streaming results, and suite and
datasource management.

Persistence is a single on-disk directory of append-only JSON lines per
experiment; no external database. The event log is single-writer,
multi-reader, so reconnecting clients replay the full history in order.
"""

from __future__ import annotations

import json
import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterator

from fastapi import Depends, FastAPI, HTTPException, Request
from fastapi.responses import JSONResponse, PlainTextResponse, StreamingResponse

from .core import (
    ExperimentConfig,
    SchemaError,
    datasource_from_dict,
    datasource_to_dict,
    load_test_suite,
    testcase_to_dict,
)
from .gateway import (
    Gateway,
    ModelRegistry,
    ReplayStore,
    recommend_judge,
)
from .orchestrator import ExperimentRunner, RunnerConfig, export_csv, write_atomic

# state transitions move only forward
_TRANSITIONS = {
    "created": {"running"},
    "running": {"stopped", "complete", "failed"},
    "stopped": set(),
    "complete": set(),
    "failed": set(),
}


@dataclass
class ExperimentState:
    experiment_id: str
    state: str = "created"
    created_at: float = field(default_factory=time.time)
    planned: int = 0
    completed: int = 0
    events: list[dict[str, Any]] = field(default_factory=list)
    cond: threading.Condition = field(default_factory=threading.Condition)
    stop_event: threading.Event = field(default_factory=threading.Event)
    results: dict[str, Any] | None = None
    error: str | None = None

    def transition(self, new_state: str) -> None:
        with self.cond:
            if new_state not in _TRANSITIONS[self.state]:
                raise ValueError(
                    f"illegal state transition {self.state} -> {new_state}"
                )
            self.state = new_state
            self.cond.notify_all()

    def append_event(self, ev: dict[str, Any]) -> None:
        with self.cond:
            self.events.append(ev)
            if ev["type"] == "progress":
                self.completed = ev["completed"]
                self.planned = ev["planned"]
            self.cond.notify_all()

    @property
    def progress(self) -> float:
        if self.planned == 0:
            return 0.0
        return self.completed / self.planned

    def finished(self) -> bool:
        return self.state in ("stopped", "complete", "failed")


class ServerContext:
    def __init__(
        self,
        data_dir: str | Path,
        registry: ModelRegistry | None = None,
        auth_token: str | None = None,
    ):
        self.data_dir = Path(data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)
        self.registry = registry or ModelRegistry.default()
        self.auth_token = auth_token
        self.datasources: dict[str, dict[str, Any]] = {}
        self.suites: dict[str, dict[str, Any]] = {}
        self.experiments: dict[str, ExperimentState] = {}
        self.lock = threading.Lock()
        self._load_persisted()

    def _load_persisted(self) -> None:
        for p in (self.data_dir / "datasources").glob("*.json") if (
            self.data_dir / "datasources"
        ).exists() else []:
            self.datasources[p.stem] = json.loads(p.read_text())
        for p in (self.data_dir / "suites").glob("*.json") if (
            self.data_dir / "suites"
        ).exists() else []:
            self.suites[p.stem] = json.loads(p.read_text())

    def persist(self, kind: str, obj_id: str, payload: dict[str, Any]) -> None:
        d = self.data_dir / kind
        d.mkdir(parents=True, exist_ok=True)
        write_atomic(d / f"{obj_id}.json", json.dumps(payload, indent=2))


def create_app(
    data_dir: str | Path,
    registry: ModelRegistry | None = None,
    auth_token: str | None = None,
) -> FastAPI:
    ctx = ServerContext(data_dir, registry=registry, auth_token=auth_token)
    app = FastAPI(title="cvabench")
    app.state.ctx = ctx

    def check_auth(request: Request) -> None:
        if ctx.auth_token and request.headers.get("x-auth-token") != ctx.auth_token:
            raise HTTPException(status_code=401, detail="missing or bad auth token")

    @app.exception_handler(SchemaError)
    async def schema_error_handler(_req: Request, exc: SchemaError) -> JSONResponse:
        return JSONResponse(status_code=400, content={"error": str(exc)})

    @app.post("/api/datasources", status_code=201)
    async def upload_datasource(payload: dict, _: None = Depends(check_auth)) -> dict:
        ds = datasource_from_dict(payload)  # raises SchemaError with field detail
        ds_id = payload.get("id") or uuid.uuid4().hex[:8]
        doc = datasource_to_dict(ds)
        ctx.datasources[ds_id] = doc
        ctx.persist("datasources", ds_id, doc)
        return {"id": ds_id, "title": ds.title, "fields": len(ds.fields)}

    @app.get("/api/datasources/{ds_id}")
    async def get_datasource(ds_id: str, _: None = Depends(check_auth)) -> dict:
        if ds_id not in ctx.datasources:
            raise HTTPException(status_code=404, detail=f"unknown datasource: {ds_id}")
        return ctx.datasources[ds_id]

    @app.post("/api/testcases", status_code=201)
    async def upload_testcases(payload: dict, _: None = Depends(check_auth)) -> dict:
        ds_id = payload.get("datasourceId")
        if not ds_id or ds_id not in ctx.datasources:
            raise HTTPException(
                status_code=400,
                detail=f"datasourceId must reference an uploaded datasource, got {ds_id!r}",
            )
        ds = datasource_from_dict(ctx.datasources[ds_id])
        # reuse the file loader by round-tripping through a temp file
        import tempfile

        with tempfile.NamedTemporaryFile("w", suffix=".json", delete=False) as f:
            json.dump(payload.get("testCases", []), f)
            tmp = f.name
        try:
            cases, warnings = load_test_suite(tmp, ds)
        finally:
            Path(tmp).unlink(missing_ok=True)
        suite_id = payload.get("id") or uuid.uuid4().hex[:8]
        doc = {
            "datasourceId": ds_id,
            "testCases": [testcase_to_dict(c) for c in cases],
        }
        ctx.suites[suite_id] = doc
        ctx.persist("suites", suite_id, doc)
        return {
            "id": suite_id,
            "conversations": len(cases),
            "turns": sum(len(c.turns) for c in cases),
            "warnings": warnings,
        }

    @app.get("/api/models")
    async def list_models(candidates: str = "", _: None = Depends(check_auth)) -> dict:
        cand_refs = [
            ctx.registry.find(c.strip())
            for c in candidates.split(",")
            if c.strip()
        ]
        rec = recommend_judge(cand_refs, ctx.registry)
        return {
            "models": [
                {
                    "key": m.key,
                    "displayName": m.display_name
                    + (" (recommended)" if m.key == rec.model.key else ""),
                    "family": m.family,
                    "recommendedJudge": m.key == rec.model.key,
                }
                for m in ctx.registry.models
            ],
            "selfPreferenceWarning": rec.self_preference_warning,
        }

    @app.post("/api/experiments", status_code=201)
    async def create_experiment(payload: dict, _: None = Depends(check_auth)) -> dict:
        ds_id = payload.get("datasourceId")
        suite_id = payload.get("suiteId")
        if not ds_id or ds_id not in ctx.datasources:
            raise HTTPException(status_code=400, detail=f"unknown datasourceId: {ds_id!r}")
        if not suite_id or suite_id not in ctx.suites:
            raise HTTPException(status_code=400, detail=f"unknown suiteId: {suite_id!r}")
        try:
            config = ExperimentConfig(
                models=tuple(payload.get("models", ())),
                system_prompts=tuple(payload.get("systemPrompts", ())),
                metric_selection=frozenset(payload.get("metricSelection", ())),
                judge_model=payload.get("judgeModel"),
                test_case_selection=payload.get("testCaseSelection", ""),
                runs=int(payload.get("runs", 3)),
            )
            for m in config.models:
                ctx.registry.find(m)
        except SchemaError as exc:
            raise HTTPException(status_code=400, detail=str(exc))

        ds = datasource_from_dict(ctx.datasources[ds_id])
        import tempfile

        with tempfile.NamedTemporaryFile("w", suffix=".json", delete=False) as f:
            json.dump(ctx.suites[suite_id]["testCases"], f)
            tmp = f.name
        try:
            suite, _warnings = load_test_suite(tmp, ds)
        finally:
            Path(tmp).unlink(missing_ok=True)

        replay_dir = payload.get("replayDir")
        mode = payload.get("gatewayMode", "replay" if replay_dir else "live")
        store = ReplayStore(replay_dir) if replay_dir else None
        try:
            gateway = Gateway(registry=ctx.registry, mode=mode, replay_store=store)
            judge_model = (
                ctx.registry.find(config.judge_model) if config.judge_model else None
            )
            runner = ExperimentRunner(
                config=config,
                suite=suite,
                datasource=ds,
                gateway=gateway,
                judge_model=judge_model,
                runner_config=RunnerConfig(
                    strict_parse_failures=bool(payload.get("strict", False))
                ),
            )
        except (SchemaError, ValueError) as exc:
            raise HTTPException(status_code=400, detail=str(exc))

        exp = ExperimentState(experiment_id=runner.experiment_id)
        from .orchestrator import plan_experiment

        exp.planned = len(plan_experiment(config, suite))
        ctx.experiments[exp.experiment_id] = exp

        log_path = ctx.data_dir / "experiments" / f"{exp.experiment_id}.events.jsonl"
        log_path.parent.mkdir(parents=True, exist_ok=True)

        def drive() -> None:
            exp.transition("running")
            failed = False
            try:
                with log_path.open("a") as log:
                    for ev in runner.run(stop=exp.stop_event):
                        log.write(json.dumps(ev) + "\n")
                        log.flush()
                        exp.append_event(ev)
                        if ev["type"] == "end":
                            exp.results = runner_results(ev)
            except Exception as exc:  # surface crash in state + log
                failed = True
                exp.error = str(exc)
                exp.append_event({"type": "failure", "job": None, "status": "failed",
                                  "error": str(exc)})
            finally:
                if failed:
                    exp.transition("failed")
                elif exp.stop_event.is_set():
                    exp.transition("stopped")
                else:
                    exp.transition("complete")

        def runner_results(_end_ev: dict[str, Any]) -> dict[str, Any]:
            cells = [e["cell"] for e in exp.events if e["type"] == "cell"]
            agg_evs = [e for e in exp.events if e["type"] == "aggregate"]
            return {
                "experimentId": exp.experiment_id,
                "config": {
                    "models": list(config.models),
                    "systemPrompts": list(config.system_prompts),
                    "metricSelection": sorted(config.metric_selection),
                    "judgeModel": config.judge_model,
                    "testCaseSelection": config.test_case_selection,
                    "runs": config.runs,
                },
                "cells": cells,
                "failures": [
                    {"job": e["job"], "status": e["status"], "error": e["error"]}
                    for e in exp.events
                    if e["type"] == "failure"
                ],
                "aggregate": agg_evs[-1]["aggregate"] if agg_evs else None,
                "partial": agg_evs[-1]["partial"] if agg_evs else True,
            }

        threading.Thread(target=drive, daemon=True).start()
        return {"experimentId": exp.experiment_id, "planned": exp.planned}

    def _get_exp(experiment_id: str) -> ExperimentState:
        exp = ctx.experiments.get(experiment_id)
        if exp is None:
            raise HTTPException(
                status_code=404, detail=f"unknown experiment: {experiment_id}"
            )
        return exp

    @app.get("/api/experiments/{experiment_id}")
    async def get_experiment(experiment_id: str, _: None = Depends(check_auth)) -> dict:
        exp = _get_exp(experiment_id)
        out: dict[str, Any] = {
            "experimentId": exp.experiment_id,
            "state": exp.state,
            "createdAt": exp.created_at,
            "progress": exp.progress,
            "planned": exp.planned,
            "completed": exp.completed,
        }
        if exp.error:
            out["error"] = exp.error
        # aggregate withheld until the experiment reaches a terminal state;
        # the recommendation only ever appears on complete (non-partial) runs
        if exp.finished() and exp.results is not None:
            out["aggregate"] = exp.results.get("aggregate")
            out["partial"] = exp.results.get("partial")
        return out

    @app.post("/api/experiments/{experiment_id}/stop")
    async def stop_experiment(experiment_id: str, _: None = Depends(check_auth)) -> dict:
        exp = _get_exp(experiment_id)
        if exp.state != "running":
            raise HTTPException(
                status_code=409,
                detail=f"experiment is {exp.state}, not running",
            )
        exp.stop_event.set()
        return {"experimentId": experiment_id, "stopping": True}

    @app.get("/api/experiments/{experiment_id}/events")
    async def stream_events(experiment_id: str, _: None = Depends(check_auth)) -> StreamingResponse:
        exp = _get_exp(experiment_id)

        def gen() -> Iterator[str]:
            idx = 0
            while True:
                with exp.cond:
                    while idx >= len(exp.events) and not exp.finished():
                        exp.cond.wait(timeout=0.5)
                    batch = exp.events[idx:]
                    idx = len(exp.events)
                    done = exp.finished() and idx >= len(exp.events)
                for ev in batch:
                    yield f"event: {ev['type']}\ndata: {json.dumps(ev)}\n\n"
                if done:
                    return

        return StreamingResponse(gen(), media_type="text/event-stream")

    @app.get("/api/experiments/{experiment_id}/export")
    async def export(experiment_id: str, format: str = "json", _: None = Depends(check_auth)):
        exp = _get_exp(experiment_id)
        if exp.results is None:
            raise HTTPException(
                status_code=409, detail="experiment has not produced results yet"
            )
        if format == "json":
            return JSONResponse(content=exp.results)
        if format == "csv":
            return PlainTextResponse(
                content=export_csv(exp.results), media_type="text/csv"
            )
        raise HTTPException(status_code=400, detail=f"unknown export format: {format}")

    return app


def serve(
    data_dir: str = "./cvabench-data",
    host: str = "127.0.0.1",
    port: int = 8040,
    registry_path: str | None = None,
    auth_token: str | None = None,
) -> None:
    import uvicorn

    registry = ModelRegistry.from_file(registry_path) if registry_path else None
    app = create_app(data_dir, registry=registry, auth_token=auth_token)
    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    serve()
