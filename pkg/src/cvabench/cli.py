"""Headless command-line interface: validate, run, report, stats.

Exit codes: 0 success, 1 validation error, 2 runtime failure, 130 cancelled.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import signal
import statistics
import sys
import threading
from collections import defaultdict
from pathlib import Path
from typing import Any, Sequence

from .core import (
    ExperimentConfig,
    SchemaError,
    load_datasource,
    load_test_suite,
)
from .gateway import ConfigurationError, Gateway, ModelRegistry, ReplayStore
from .orchestrator import (
    ExperimentRunner,
    RunnerConfig,
    export_csv,
    results_from_json,
    results_to_json,
    write_atomic,
)
from .statsval import RatingSeries, preference_scores, spearman_rho, weighted_kappa

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_RUNTIME = 2
EXIT_CANCELLED = 130


def _split_list(values: Sequence[str] | None) -> list[str]:
    """Comma lists and repeated flags are equivalent."""
    out: list[str] = []
    for v in values or []:
        out.extend(x.strip() for x in v.split(",") if x.strip())
    return out


def cmd_validate(args: argparse.Namespace) -> int:
    try:
        ds = load_datasource(args.datasource)
    except SchemaError as exc:
        print(f"ERROR {args.datasource}: {exc}")
        return EXIT_VALIDATION
    try:
        cases, warnings = load_test_suite(args.suite, ds)
    except SchemaError as exc:
        print(f"ERROR {args.suite}: {exc}")
        return EXIT_VALIDATION
    for w in warnings:
        print(f"WARNING {args.suite}: {w}")
    n_turns = sum(len(c.turns) for c in cases)
    print(f"OK: {len(cases)} conversations, {n_turns} turns")
    return EXIT_OK


def _load_prompts(tokens: list[str]) -> list[str]:
    prompts = []
    for tok in tokens:
        p = Path(tok)
        if p.exists():
            prompts.append(p.read_text())
        else:
            raise SchemaError(f"prompt template file not found: {tok}")
    return prompts


def cmd_run(args: argparse.Namespace) -> int:
    try:
        ds = load_datasource(args.datasource)
        suite, warnings = load_test_suite(args.testcases, ds)
        for w in warnings:
            print(f"WARNING: {w}", file=sys.stderr)
        registry = (
            ModelRegistry.from_file(args.registry)
            if args.registry
            else ModelRegistry.default()
        )
        models = _split_list(args.models)
        prompts = _load_prompts(_split_list(args.prompts))
        metrics = _split_list(args.metrics)
        config = ExperimentConfig(
            models=tuple(models),
            system_prompts=tuple(prompts),
            metric_selection=frozenset(metrics),
            judge_model=args.judge,
            test_case_selection=args.select or "",
            runs=args.runs,
        )
        store = ReplayStore(args.replay) if args.replay else None
        mode = "replay" if args.replay and not args.record else (
            "record" if args.record else "live"
        )
        if mode == "record" and not args.replay:
            raise SchemaError("--record requires --replay DIR to store fixtures")
        gateway = Gateway(registry=registry, mode=mode, replay_store=store)
        judge_model = registry.find(args.judge) if args.judge else None
        runner = ExperimentRunner(
            config=config,
            suite=suite,
            datasource=ds,
            gateway=gateway,
            judge_model=judge_model,
            checkpoint_path=args.checkpoint,
            runner_config=RunnerConfig(strict_parse_failures=args.strict),
        )
    except (SchemaError, ConfigurationError, FileNotFoundError) as exc:
        print(f"ERROR: {exc}", file=sys.stderr)
        return EXIT_VALIDATION

    stop = threading.Event()
    interrupted = {"flag": False}

    def on_sigint(signum: int, frame: Any) -> None:
        interrupted["flag"] = True
        stop.set()
        print("stop requested; finishing in-flight cells...", file=sys.stderr)

    previous = signal.signal(signal.SIGINT, on_sigint)
    try:
        cells: list[dict[str, Any]] = []
        failures: list[dict[str, Any]] = []
        aggregate = None
        partial = False
        for ev in runner.run(stop=stop):
            if ev["type"] == "cell":
                c = ev["cell"]
                cells.append(c)
                ov = c.get("overallViz")
                on = c.get("overallNl")
                print(
                    f"cell model={c['model']} prompt={c['promptIndex']} "
                    f"conversation={c['conversationId']} turn={c['turnIndex']} "
                    f"run={c['runIndex']} overallViz="
                    f"{'-' if ov is None else f'{ov:.1f}'} overallNl="
                    f"{'-' if on is None else f'{on:.1f}'}"
                )
            elif ev["type"] == "failure":
                failures.append(ev)
                print(
                    f"failure job={ev['job']} status={ev['status']} error={ev['error']}",
                    file=sys.stderr,
                )
            elif ev["type"] == "aggregate":
                aggregate = ev["aggregate"]
                partial = ev["partial"]
            elif ev["type"] == "end":
                partial = ev["partial"]
        results = {
            "experimentId": runner.experiment_id,
            "config": {
                "models": list(config.models),
                "systemPrompts": list(config.system_prompts),
                "metricSelection": sorted(config.metric_selection),
                "judgeModel": judge_model.key if judge_model else None,
                "testCaseSelection": config.test_case_selection,
                "runs": config.runs,
            },
            "cells": cells,
            "failures": [
                {"job": f["job"], "status": f["status"], "error": f["error"]}
                for f in failures
            ],
            "aggregate": aggregate,
            "partial": partial,
        }
        if args.out:
            write_atomic(args.out, results_to_json(results))
            print(f"results written to {args.out}")
        if interrupted["flag"]:
            return EXIT_CANCELLED
        if failures:
            return EXIT_RUNTIME
        return EXIT_OK
    except ConfigurationError as exc:
        print(f"ERROR: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except Exception as exc:
        print(f"RUNTIME ERROR: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    finally:
        signal.signal(signal.SIGINT, previous)


def _format_table(headers: list[str], rows: list[list[Any]]) -> str:
    cells = [headers] + [[str(c) for c in row] for row in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(headers))]
    lines = []
    for r_idx, row in enumerate(cells):
        lines.append("  ".join(c.ljust(widths[i]) for i, c in enumerate(row)))
        if r_idx == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines)


def cmd_report(args: argparse.Namespace) -> int:
    try:
        results = results_from_json(Path(args.results).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        print(f"ERROR: cannot read results: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    if results.get("partial"):
        print("PARTIAL RUN")
    aggregate = results.get("aggregate")
    if args.format == "csv":
        out = export_csv(results)
        print(out, end="")
        return EXIT_OK
    if aggregate is None:
        print("no aggregate available (empty or failed run)")
        return EXIT_OK
    if args.format == "json":
        print(json.dumps(aggregate, indent=2, sort_keys=True))
        return EXIT_OK
    pairs = aggregate["pairs"]
    if args.by in ("model", "prompt"):
        rows = [
            [
                p["model"],
                p["promptIndex"],
                _fmt(p["overallViz"]),
                _fmt(p["overallNl"]),
                _fmt(p["combined"]),
                p["cells"],
            ]
            for p in sorted(
                pairs,
                key=(lambda p: (p["model"], p["promptIndex"]))
                if args.by == "model"
                else (lambda p: (p["promptIndex"], p["model"])),
            )
        ]
        print(
            _format_table(
                ["model", "prompt", "overallViz", "overallNl", "combined", "cells"],
                rows,
            )
        )
    else:  # by label
        for dim in ("chartType", "ambiguity", "contextHandling", "turnIndex"):
            print(f"\n== {dim} ==")
            rows = []
            for p in pairs:
                for label, b in sorted(p["breakdowns"][dim].items()):
                    rows.append(
                        [
                            p["model"],
                            p["promptIndex"],
                            label,
                            _fmt(b["overallViz"]),
                            _fmt(b["overallNl"]),
                            b["cells"],
                        ]
                    )
            print(
                _format_table(
                    ["model", "prompt", "label", "overallViz", "overallNl", "cells"],
                    rows,
                )
            )
    rec = aggregate.get("recommendation")
    if rec:
        print(
            f"\nrecommendation: {rec['model']} prompt {rec['promptIndex']} "
            f"({rec['rationale']})"
        )
    return EXIT_OK


def _fmt(v: float | None) -> str:
    return "-" if v is None else f"{v:.1f}"


def _load_ratings(path: str) -> dict[str, dict[str, dict[str, float]]]:
    """metricId -> raterId -> {itemId: value}"""
    out: dict[str, dict[str, dict[str, float]]] = defaultdict(lambda: defaultdict(dict))
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        required = {"itemId", "raterId", "metricId", "value"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise SchemaError(
                f"ratings CSV must have columns {sorted(required)}, got "
                f"{reader.fieldnames}"
            )
        for row in reader:
            out[row["metricId"]][row["raterId"]][row["itemId"]] = float(row["value"])
    return out


def cmd_stats(args: argparse.Namespace) -> int:
    try:
        if args.preferences:
            rankings: dict[str, dict[str, float]] = defaultdict(dict)
            models: list[str] = []
            with open(args.ratings, newline="") as f:
                reader = csv.DictReader(f)
                required = {"participantId", "model", "rank"}
                if reader.fieldnames is None or not required.issubset(reader.fieldnames):
                    raise SchemaError(
                        f"preferences CSV must have columns {sorted(required)}"
                    )
                for row in reader:
                    rankings[row["participantId"]][row["model"]] = float(row["rank"])
                    if row["model"] not in models:
                        models.append(row["model"])
            scores, notes = preference_scores(list(rankings.values()), models)
            rows = [[m, f"{scores[m]:.3f}"] for m in models if m in scores]
            print(_format_table(["model", "preference"], rows))
            for note in notes:
                print(f"note: {note}")
            return EXIT_OK

        ratings = _load_ratings(args.ratings)
        scale = None
        if args.scale:
            scale = [float(x) for x in args.scale.split(",")]
        rows = []
        for metric_id in sorted(ratings):
            raters = sorted(ratings[metric_id])
            if len(raters) < 2:
                rows.append([metric_id, "undefined: needs two raters"])
                continue
            r1, r2 = raters[0], raters[1]
            shared = sorted(set(ratings[metric_id][r1]) & set(ratings[metric_id][r2]))
            a = RatingSeries(tuple(shared), tuple(ratings[metric_id][r1][i] for i in shared))
            b = RatingSeries(tuple(shared), tuple(ratings[metric_id][r2][i] for i in shared))
            if args.kappa:
                v = weighted_kappa(a, b, scale)
                rows.append([metric_id, "undefined: no variance" if v is None else f"{v:.4f}"])
            else:
                v = spearman_rho(a, b)
                rows.append([metric_id, "undefined: no variance" if v is None else f"{v:.4f}"])
        stat_name = "kappa" if args.kappa else "spearman"
        print(_format_table(["metric", stat_name], rows))
        return EXIT_OK
    except (SchemaError, ValueError, OSError) as exc:
        print(f"ERROR: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cvabench",
        description="Benchmark LLM model-prompt configurations for "
        "conversational visual analytics.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_val = sub.add_parser("validate", help="validate a datasource + test suite pair")
    p_val.add_argument("--datasource", required=True)
    p_val.add_argument("--suite", "--testcases", dest="suite", required=True)
    p_val.set_defaults(func=cmd_validate)

    p_run = sub.add_parser("run", help="run an evaluation experiment")
    p_run.add_argument("--testcases", required=True)
    p_run.add_argument("--datasource", required=True)
    p_run.add_argument("--models", action="append", required=True)
    p_run.add_argument("--prompts", action="append", required=True,
                       help="prompt template file(s)")
    p_run.add_argument("--metrics", action="append", required=True)
    p_run.add_argument("--runs", type=int, default=3)
    p_run.add_argument("--judge", default=None)
    p_run.add_argument("--select", default="")
    p_run.add_argument("--out", default=None)
    p_run.add_argument("--replay", default=None, help="replay fixtures directory")
    p_run.add_argument("--record", action="store_true",
                       help="record live responses into the replay directory")
    p_run.add_argument("--registry", default=None)
    p_run.add_argument("--checkpoint", default=None)
    p_run.add_argument("--strict", action="store_true",
                       help="score parse failures as 0 on viz metrics")
    p_run.set_defaults(func=cmd_run)

    p_rep = sub.add_parser("report", help="render a results file")
    p_rep.add_argument("results")
    p_rep.add_argument("--by", choices=["label", "model", "prompt"], default="model")
    p_rep.add_argument("--format", choices=["table", "json", "csv"], default="table")
    p_rep.set_defaults(func=cmd_report)

    p_st = sub.add_parser("stats", help="validation statistics over a ratings CSV")
    p_st.add_argument("ratings")
    group = p_st.add_mutually_exclusive_group(required=True)
    group.add_argument("--kappa", action="store_true")
    group.add_argument("--spearman", action="store_true")
    group.add_argument("--preferences", action="store_true")
    p_st.add_argument("--scale", default=None, help="ordered ordinal scale, e.g. 1,2,3,4,5")
    p_st.set_defaults(func=cmd_stats)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
