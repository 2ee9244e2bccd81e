import json
import os
import signal
from pathlib import Path

import pytest

from cvabench.cli import main

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"

RUN_ARGS = [
    "run",
    "--datasource", str(FIXTURES / "superstore.json"),
    "--testcases", str(FIXTURES / "sample_suite.yaml"),
    "--models", "alpha/alpha-1,beta/beta-1",
    "--prompts", str(FIXTURES / "prompts/prompt1.txt"),
    "--prompts", str(FIXTURES / "prompts/prompt2.txt"),
    "--metrics",
    "data_fidelity,field_similarity,chart_type_similarity,axis_accuracy,"
    "filter_accuracy,sort_accuracy,encoding_accuracy,factual_grounding,"
    "assumptions_disclosure,insightfulness,coherence,followup_relevance,nlg_prf",
    "--judge", "gamma/gamma-judge",
    "--registry", str(FIXTURES / "registry.json"),
    "--replay", str(FIXTURES / "replay"),
]


class TestValidate:
    def test_ok_output(self, capsys):
        code = main([
            "validate",
            "--datasource", str(FIXTURES / "superstore.json"),
            "--suite", str(FIXTURES / "sample_suite.yaml"),
        ])
        out = capsys.readouterr().out
        assert code == 0
        assert "OK: 4 conversations, 5 turns" in out

    def test_bad_datatype_exits_1(self, tmp_path, capsys):
        ds = tmp_path / "ds.json"
        ds.write_text(json.dumps({
            "title": "t",
            "fields": [{"name": "A", "dataType": "odd", "fieldValues": [1]}],
        }))
        code = main(["validate", "--datasource", str(ds),
                     "--suite", str(FIXTURES / "sample_suite.yaml")])
        out = capsys.readouterr().out
        assert code == 1
        assert "dataType 'odd'" in out

    def test_unresolved_field_warns_but_passes(self, tmp_path, capsys):
        suite = tmp_path / "suite.json"
        suite.write_text(json.dumps([{
            "conversationId": "1",
            "turns": [{
                "utterance": "u",
                "expected": [{
                    "vizSpec": {"mark": "bar",
                                "encoding": {"x": {"field": "Nonexistent"}}},
                    "nlExplanation": "x",
                }],
            }],
        }]))
        code = main(["validate", "--datasource", str(FIXTURES / "superstore.json"),
                     "--suite", str(suite)])
        out = capsys.readouterr().out
        assert code == 0
        assert "WARNING" in out and "unresolved field: Nonexistent" in out


class TestRunOffline:
    def test_full_replay_run(self, tmp_path, capsys):
        out_file = tmp_path / "results.json"
        code = main(RUN_ARGS + ["--out", str(out_file)])
        captured = capsys.readouterr().out
        assert code == 0
        results = json.loads(out_file.read_text())
        assert len(results["cells"]) == 60  # 2 models x 2 prompts x 5 turns x 3 runs
        assert results["partial"] is False
        # one progress line per completed cell
        cell_lines = [l for l in captured.splitlines() if l.startswith("cell ")]
        assert len(cell_lines) == 60
        rec = results["aggregate"]["recommendation"]
        assert rec["model"] == "alpha/alpha-1"

    def test_default_runs_is_three(self, tmp_path):
        out_file = tmp_path / "results.json"
        main(RUN_ARGS + ["--out", str(out_file), "--select", "3"])
        results = json.loads(out_file.read_text())
        assert results["config"]["runs"] == 3
        assert len(results["cells"]) == 2 * 2 * 1 * 3

    def test_missing_prompt_file_exits_1(self, tmp_path):
        args = list(RUN_ARGS)
        i = args.index("--prompts")
        args[i + 1] = str(tmp_path / "missing.txt")
        assert main(args) == 1

    def test_sigint_flushes_partial_and_exits_130(self, tmp_path, capsys):
        out_file = tmp_path / "results.json"

        import cvabench.cli as cli_mod

        real_runner = cli_mod.ExperimentRunner

        class InterruptingRunner(real_runner):
            def run(self, stop=None):
                fired = False
                for ev in super().run(stop=stop):
                    yield ev
                    if not fired and ev["type"] == "cell":
                        fired = True
                        os.kill(os.getpid(), signal.SIGINT)

        cli_mod.ExperimentRunner = InterruptingRunner
        try:
            code = main(RUN_ARGS + ["--out", str(out_file)])
        finally:
            cli_mod.ExperimentRunner = real_runner
        assert code == 130
        results = json.loads(out_file.read_text())
        assert results["partial"] is True
        assert results["aggregate"] is None or "recommendation" not in results["aggregate"]


class TestReport:
    @pytest.fixture()
    def results_file(self, tmp_path):
        out_file = tmp_path / "results.json"
        assert main(RUN_ARGS + ["--out", str(out_file)]) == 0
        return out_file

    def test_by_label_sections(self, results_file, capsys):
        capsys.readouterr()
        assert main(["report", str(results_file), "--by", "label"]) == 0
        out = capsys.readouterr().out
        for section in ("== chartType ==", "== ambiguity ==",
                        "== contextHandling ==", "== turnIndex =="):
            assert section in out

    def test_csv_row_count_matches_export_contract(self, results_file, capsys):
        capsys.readouterr()
        from cvabench.orchestrator import csv_row_count

        assert main(["report", str(results_file), "--format", "csv"]) == 0
        out = capsys.readouterr().out
        results = json.loads(results_file.read_text())
        data_rows = [l for l in out.strip().splitlines()[1:] if l]
        assert len(data_rows) == csv_row_count(results)

    def test_partial_header(self, results_file, capsys, tmp_path):
        doc = json.loads(results_file.read_text())
        doc["partial"] = True
        p = tmp_path / "partial.json"
        p.write_text(json.dumps(doc))
        capsys.readouterr()
        main(["report", str(p)])
        assert capsys.readouterr().out.startswith("PARTIAL RUN")


class TestStats:
    def test_kappa_identical_raters(self, tmp_path, capsys):
        p = tmp_path / "ratings.csv"
        rows = ["itemId,raterId,metricId,value"]
        for i in range(6):
            v = (i % 5) + 1
            rows.append(f"i{i},R1,m,{v}")
            rows.append(f"i{i},R2,m,{v}")
        p.write_text("\n".join(rows))
        assert main(["stats", str(p), "--kappa"]) == 0
        out = capsys.readouterr().out
        assert "1.0000" in out

    def test_fixture_matches_module_oracle(self, capsys):
        assert main(["stats", str(FIXTURES / "ratings.csv"), "--kappa"]) == 0
        out = capsys.readouterr().out
        assert "data_fidelity" in out and "0.8000" in out

    def test_constant_metric_undefined(self, capsys):
        assert main(["stats", str(FIXTURES / "ratings.csv"), "--kappa"]) == 0
        out = capsys.readouterr().out
        assert "undefined: no variance" in out

    def test_spearman(self, capsys):
        assert main(["stats", str(FIXTURES / "ratings.csv"), "--spearman"]) == 0
        out = capsys.readouterr().out
        assert "insightfulness" in out

    def test_preferences(self, capsys):
        assert main(["stats", str(FIXTURES / "preferences.csv"), "--preferences"]) == 0
        out = capsys.readouterr().out
        assert "alpha/alpha-1" in out and "0.500" in out

    def test_bad_csv_schema(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("a,b\n1,2")
        assert main(["stats", str(p), "--kappa"]) == 1
