import json

import pytest
import yaml

from cvabench.core import (
    ExperimentConfig,
    MetricScore,
    SchemaError,
    datasource_from_dict,
    datasource_to_dict,
    infer_data_type,
    load_datasource,
    load_test_suite,
    select_test_cases,
    vizspec_from_dict,
    vizspec_to_dict,
)

from cvabench.core import testcase_to_dict as case_to_dict
from pathlib import Path

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


def _write(tmp_path, name, obj):
    p = tmp_path / name
    if name.endswith(".json"):
        p.write_text(json.dumps(obj))
    else:
        p.write_text(yaml.safe_dump(obj))
    return p


def _minimal_ds(tmp_path, fmt="json"):
    return _write(
        tmp_path,
        f"ds.{fmt}",
        {
            "title": "t",
            "fields": [
                {"name": "Region", "dataType": "nominal", "fieldValues": ["a", "b"]},
                {"name": "Quantity", "dataType": "quantitative", "fieldValues": [1, 2]},
            ],
        },
    )


class TestLoadDatasource:
    def test_superstore_pair(self, tmp_path):
        ds = load_datasource(_minimal_ds(tmp_path))
        assert len(ds.fields) == 2
        assert ds.field("region").data_type == "nominal"
        assert ds.field("Quantity").data_type == "quantitative"

    def test_empty_fields_is_an_error(self, tmp_path):
        p = _write(tmp_path, "ds.json", {"title": "t", "fields": []})
        with pytest.raises(SchemaError, match="at least one field"):
            load_datasource(p)

    def test_unequal_columns_names_the_short_one(self, tmp_path):
        p = _write(
            tmp_path,
            "ds.json",
            {
                "title": "t",
                "fields": [
                    {"name": "A", "fieldValues": list(range(10))},
                    {"name": "B", "fieldValues": list(range(9))},
                ],
            },
        )
        with pytest.raises(SchemaError, match="'B' has 9 values"):
            load_datasource(p)

    def test_bad_data_type_named(self, tmp_path):
        p = _write(
            tmp_path,
            "ds.json",
            {"title": "t", "fields": [{"name": "A", "dataType": "weird",
                                       "fieldValues": [1]}]},
        )
        with pytest.raises(SchemaError, match="dataType 'weird'"):
            load_datasource(p)

    def test_duplicate_names_case_insensitive(self, tmp_path):
        p = _write(
            tmp_path,
            "ds.json",
            {"title": "t", "fields": [
                {"name": "Region", "fieldValues": [1]},
                {"name": "region", "fieldValues": [2]},
            ]},
        )
        with pytest.raises(SchemaError, match="duplicate field name"):
            load_datasource(p)

    def test_quantitative_values_must_parse(self, tmp_path):
        p = _write(
            tmp_path,
            "ds.json",
            {"title": "t", "fields": [{"name": "A", "dataType": "quantitative",
                                       "fieldValues": ["x"]}]},
        )
        with pytest.raises(SchemaError, match="does not parse as a number"):
            load_datasource(p)

    def test_yaml_detection(self, tmp_path):
        ds = load_datasource(_minimal_ds(tmp_path, fmt="yaml"))
        assert ds.title == "t"


class TestTypeInference:
    def test_numeric_is_quantitative(self):
        assert infer_data_type([1, 2.5, "3"]) == "quantitative"

    def test_iso_dates_are_temporal(self):
        assert infer_data_type(["2023-01-01", "2024-02", "2022"]) == "temporal"

    def test_anything_else_is_nominal(self):
        assert infer_data_type(["Jan 3rd 2024", "x"]) == "nominal"
        assert infer_data_type(["2023-13-01"]) == "nominal"


def _suite_doc():
    return [
        {
            "conversationId": "1",
            "datasourceRef": "t",
            "turns": [
                {
                    "utterance": "quantity by region",
                    "labels": {"chartType": "bar"},
                    "expected": [
                        {
                            "vizSpec": {
                                "mark": "bar",
                                "encoding": {
                                    "x": {"field": "Region"},
                                    "y": {"field": "Quantity", "aggregate": "sum"},
                                },
                            },
                            "nlExplanation": "Total quantity per region.",
                        }
                    ],
                },
                {
                    "utterance": "sort it",
                    "expected": [
                        {
                            "vizSpec": {
                                "mark": "bar",
                                "encoding": {
                                    "x": {"field": "Region"},
                                    "y": {"field": "Quantity", "aggregate": "sum"},
                                },
                                "sort": {"field": "Quantity", "direction": "desc"},
                            },
                            "nlExplanation": "Sorted by quantity.",
                        }
                    ],
                },
            ],
        }
    ]


class TestLoadSuite:
    def test_one_conversation_two_turns(self, tmp_path):
        ds = load_datasource(_minimal_ds(tmp_path))
        suite_p = _write(tmp_path, "suite.yaml", _suite_doc())
        cases, warnings = load_test_suite(suite_p, ds)
        assert len(cases) == 1
        assert len(cases[0].turns) == 2
        assert warnings == []

    def test_duplicate_conversation_id(self, tmp_path):
        ds = load_datasource(_minimal_ds(tmp_path))
        doc = _suite_doc() + _suite_doc()
        suite_p = _write(tmp_path, "suite.yaml", doc)
        with pytest.raises(SchemaError, match="duplicate conversationId: 1"):
            load_test_suite(suite_p, ds)

    def test_unresolved_field_is_a_warning(self, tmp_path):
        ds = load_datasource(_minimal_ds(tmp_path))
        doc = _suite_doc()
        doc[0]["turns"][0]["expected"][0]["vizSpec"]["encoding"]["y"]["field"] = "Profit"
        suite_p = _write(tmp_path, "suite.yaml", doc)
        cases, warnings = load_test_suite(suite_p, ds)
        assert len(cases) == 1
        assert any(w.startswith("unresolved field: Profit") for w in warnings)

    def test_missing_expected_is_hard_error(self, tmp_path):
        ds = load_datasource(_minimal_ds(tmp_path))
        doc = _suite_doc()
        doc[0]["turns"][0]["expected"] = []
        suite_p = _write(tmp_path, "suite.yaml", doc)
        with pytest.raises(SchemaError, match="expected"):
            load_test_suite(suite_p, ds)

    def test_noncontiguous_turn_indices(self, tmp_path):
        ds = load_datasource(_minimal_ds(tmp_path))
        doc = _suite_doc()
        doc[0]["turns"][0]["turn"] = 1
        doc[0]["turns"][1]["turn"] = 3
        suite_p = _write(tmp_path, "suite.yaml", doc)
        with pytest.raises(SchemaError, match="contiguous"):
            load_test_suite(suite_p, ds)

    def test_bad_label_vocabulary(self, tmp_path):
        ds = load_datasource(_minimal_ds(tmp_path))
        doc = _suite_doc()
        doc[0]["turns"][0]["labels"] = {"ambiguity": ["fuzzy"]}
        suite_p = _write(tmp_path, "suite.yaml", doc)
        with pytest.raises(SchemaError, match="ambiguity label 'fuzzy'"):
            load_test_suite(suite_p, ds)

    def test_round_trip(self, tmp_path):
        ds = load_datasource(_minimal_ds(tmp_path))
        suite_p = _write(tmp_path, "suite.yaml", _suite_doc())
        cases, _ = load_test_suite(suite_p, ds)
        dumped = [case_to_dict(c) for c in cases]
        suite_p2 = _write(tmp_path, "suite2.json", dumped)
        cases2, _ = load_test_suite(suite_p2, ds)
        assert cases == cases2

    def test_datasource_round_trip(self, tmp_path):
        ds = load_datasource(_minimal_ds(tmp_path))
        again = datasource_from_dict(datasource_to_dict(ds))
        assert again == ds

    def test_shipped_fixture_pair_loads_clean(self):
        ds = load_datasource(FIXTURES / "superstore.json")
        cases, warnings = load_test_suite(FIXTURES / "sample_suite.yaml", ds)
        assert [c.conversation_id for c in cases] == ["1", "2", "3", "4"]
        assert warnings == []


class TestSelectTestCases:
    def _cases(self, tmp_path):
        ds = load_datasource(_minimal_ds(tmp_path))
        docs = []
        for i in range(1, 11):
            d = _suite_doc()[0].copy()
            d["conversationId"] = str(i)
            docs.append(d)
        suite_p = _write(tmp_path, "suite.yaml", docs)
        cases, _ = load_test_suite(suite_p, ds)
        return cases

    def test_ranges_and_ids(self, tmp_path):
        cases = self._cases(tmp_path)
        got = select_test_cases(cases, "1-3,7")
        assert [c.conversation_id for c in got] == ["1", "2", "3", "7"]

    def test_blank_selects_all(self, tmp_path):
        cases = self._cases(tmp_path)
        assert select_test_cases(cases, "") == cases
        assert select_test_cases(cases, "  ") == cases

    def test_unknown_id_listed(self, tmp_path):
        cases = self._cases(tmp_path)
        with pytest.raises(SchemaError, match="unknown test case id: 99"):
            select_test_cases(cases, "99")


class TestVizSpecModel:
    def test_count_without_field_allowed(self):
        spec = vizspec_from_dict(
            {"mark": "bar", "encoding": {"y": {"aggregate": "count"}}}
        )
        assert spec.encoding["y"].field is None

    def test_field_required_otherwise(self):
        with pytest.raises(SchemaError, match="aggregate=count"):
            vizspec_from_dict({"mark": "bar", "encoding": {"y": {"aggregate": "sum"}}})

    def test_range_needs_two_bounds(self):
        with pytest.raises(SchemaError, match="exactly two"):
            vizspec_from_dict(
                {"mark": "bar",
                 "filters": [{"field": "Year", "op": "range", "values": [1]}]}
            )

    def test_top_n_needs_positive_count_and_measure(self):
        with pytest.raises(SchemaError, match="positive integer"):
            vizspec_from_dict(
                {"mark": "bar",
                 "filters": [{"field": "A", "op": "top-n", "values": [0, "Sales"]}]}
            )

    def test_spec_round_trip(self):
        doc = {
            "mark": "bar",
            "encoding": {"x": {"field": "Region"},
                         "y": {"field": "Quantity", "aggregate": "sum"}},
            "filters": [{"field": "Year", "op": "eq", "values": [2023]}],
            "sort": {"field": "Quantity", "direction": "desc"},
            "interactions": ["selection"],
            "tooltipFields": [{"field": "Region"}],
        }
        spec = vizspec_from_dict(doc)
        assert vizspec_from_dict(vizspec_to_dict(spec)) == spec


class TestMetricScoreModel:
    def test_bounds_enforced(self):
        with pytest.raises(SchemaError):
            MetricScore(metric_id="m", value=101, explanation="")
        with pytest.raises(SchemaError):
            MetricScore(metric_id="m", value=50, raw_judge_score=0.5, explanation="")

    def test_round_trip(self):
        s = MetricScore(metric_id="sort_accuracy", value=60.0, explanation="x",
                        expected_fragment="descending", actual_fragment="none")
        assert MetricScore.from_dict(s.to_dict()) == s


class TestExperimentConfig:
    def _prompt(self):
        return "ds {datasource} utt {utterance} schema {output-schema}"

    def test_runs_bounds(self):
        for bad in (0, 6):
            with pytest.raises(SchemaError, match="runs must be between 1 and 5"):
                ExperimentConfig(models=("m",), system_prompts=(self._prompt(),),
                                 metric_selection=frozenset(), runs=bad)

    def test_missing_placeholder_named(self):
        with pytest.raises(SchemaError, match="missing required placeholder: output-schema"):
            ExperimentConfig(models=("m",),
                             system_prompts=("{datasource} {utterance}",),
                             metric_selection=frozenset())

    def test_default_runs_is_three(self):
        cfg = ExperimentConfig(models=("m",), system_prompts=(self._prompt(),),
                               metric_selection=frozenset())
        assert cfg.runs == 3
