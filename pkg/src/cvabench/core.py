"""Core domain model: datasources, test suites, specs, scores, experiment config.

All types are immutable after validation and safe to share across workers.
File formats are JSON or YAML; detection is by extension with content
sniffing as a fallback.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping

import yaml

DATA_TYPES = ("nominal", "ordinal", "quantitative", "temporal")

MARKS = (
    "bar", "line", "area", "point", "pie", "histogram", "boxplot",
    "table", "heatmap",
)

CHANNELS = ("x", "y", "color", "shape", "opacity", "size", "text")

AGGREGATES = ("sum", "mean", "count", "min", "max", "median", "none")

SCALE_TYPES = ("linear", "log", "sqrt", "ordinal", "time")

FILTER_OPS = ("eq", "neq", "in", "range", "top-n", "not-null")

INTERACTIONS = ("selection", "zoom", "pan", "drilldown")

AMBIGUITY_LABELS = ("syntactic", "semantic", "pragmatic")

CONTEXT_HANDLING_LABELS = (
    "slot-filling", "reference-resolution", "filter-carryover", "none",
)

# ISO-8601 date/datetime plus YYYY-MM and YYYY; anything else is nominal.
_TEMPORAL_PATTERNS = (
    re.compile(r"^\d{4}$"),
    re.compile(r"^\d{4}-(0[1-9]|1[0-2])$"),
    re.compile(r"^\d{4}-(0[1-9]|1[0-2])-(0[1-9]|[12]\d|3[01])$"),
    re.compile(
        r"^\d{4}-(0[1-9]|1[0-2])-(0[1-9]|[12]\d|3[01])"
        r"[T ]\d{2}:\d{2}(:\d{2}(\.\d+)?)?(Z|[+-]\d{2}:?\d{2})?$"
    ),
)


class SchemaError(ValueError):
    """A file failed validation; message names the offending field and rule."""


def is_temporal_value(value: Any) -> bool:
    if not isinstance(value, str):
        return False
    return any(p.match(value.strip()) for p in _TEMPORAL_PATTERNS)


def is_numeric_value(value: Any) -> bool:
    if isinstance(value, bool):
        return False
    if isinstance(value, (int, float)):
        return True
    if isinstance(value, str):
        try:
            float(value)
        except ValueError:
            return False
        return True
    return False


def infer_data_type(values: Iterable[Any]) -> str:
    vals = [v for v in values if v is not None]
    if vals and all(is_numeric_value(v) for v in vals):
        return "quantitative"
    if vals and all(is_temporal_value(v) for v in vals):
        return "temporal"
    return "nominal"


@dataclass(frozen=True)
class DataField:
    name: str
    data_type: str
    field_values: tuple[Any, ...]
    aliases: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.data_type not in DATA_TYPES:
            raise SchemaError(
                f"field '{self.name}': dataType '{self.data_type}' is not one of "
                f"{', '.join(DATA_TYPES)}"
            )
        if self.data_type == "quantitative":
            for v in self.field_values:
                if v is not None and not is_numeric_value(v):
                    raise SchemaError(
                        f"field '{self.name}': quantitative value {v!r} does not "
                        "parse as a number"
                    )
        if self.data_type == "temporal":
            for v in self.field_values:
                if v is not None and not is_temporal_value(v):
                    raise SchemaError(
                        f"field '{self.name}': temporal value {v!r} does not match "
                        "the accepted date formats (ISO-8601, YYYY-MM, YYYY)"
                    )


@dataclass(frozen=True)
class Datasource:
    title: str
    fields: tuple[DataField, ...]

    def __post_init__(self) -> None:
        if not self.fields:
            raise SchemaError("datasource must declare at least one field")
        seen: dict[str, str] = {}
        for f in self.fields:
            key = f.name.casefold()
            if key in seen:
                raise SchemaError(
                    f"duplicate field name '{f.name}' (conflicts with "
                    f"'{seen[key]}'; names are unique case-insensitively)"
                )
            seen[key] = f.name
        lengths = {f.name: len(f.field_values) for f in self.fields}
        longest = max(lengths.values())
        if longest < 1:
            raise SchemaError("datasource fields must carry at least one value")
        for name, n in lengths.items():
            if n != longest:
                raise SchemaError(
                    f"field '{name}' has {n} values but other columns have "
                    f"{longest}; all fieldValues columns must have equal length"
                )

    def field(self, name: str) -> DataField | None:
        """Case-insensitive lookup by name, then by alias."""
        key = name.casefold()
        for f in self.fields:
            if f.name.casefold() == key:
                return f
        for f in self.fields:
            if any(a.casefold() == key for a in f.aliases):
                return f
        return None

    def data_type_of(self, name: str) -> str | None:
        f = self.field(name)
        return f.data_type if f else None

    @property
    def row_count(self) -> int:
        return len(self.fields[0].field_values)


@dataclass(frozen=True)
class EncodingBinding:
    field: str | None = None
    aggregate: str | None = None
    scale_type: str | None = None
    zero_baseline: bool | None = None

    def __post_init__(self) -> None:
        if self.aggregate is not None and self.aggregate not in AGGREGATES:
            raise SchemaError(
                f"encoding aggregate '{self.aggregate}' is not one of "
                f"{', '.join(AGGREGATES)}"
            )
        if self.scale_type is not None and self.scale_type not in SCALE_TYPES:
            raise SchemaError(
                f"encoding scaleType '{self.scale_type}' is not one of "
                f"{', '.join(SCALE_TYPES)}"
            )
        if self.field is None and self.aggregate != "count":
            raise SchemaError(
                "encoding binding without a field requires aggregate=count"
            )


@dataclass(frozen=True)
class TooltipField:
    field: str
    aggregate: str | None = None

    def __post_init__(self) -> None:
        if self.aggregate is not None and self.aggregate not in AGGREGATES:
            raise SchemaError(
                f"tooltip aggregate '{self.aggregate}' is not one of "
                f"{', '.join(AGGREGATES)}"
            )


@dataclass(frozen=True)
class FilterClause:
    field: str
    op: str
    values: tuple[Any, ...] = ()

    def __post_init__(self) -> None:
        if self.op not in FILTER_OPS:
            raise SchemaError(
                f"filter op '{self.op}' is not one of {', '.join(FILTER_OPS)}"
            )
        if self.op == "range":
            if len(self.values) != 2:
                raise SchemaError(
                    f"filter on '{self.field}': range requires exactly two "
                    f"bounds, got {len(self.values)}"
                )
        if self.op == "top-n":
            if not self.values or not isinstance(self.values[0], int) or self.values[0] <= 0:
                raise SchemaError(
                    f"filter on '{self.field}': top-n requires a positive integer"
                )
            if len(self.values) < 2 or not isinstance(self.values[1], str):
                raise SchemaError(
                    f"filter on '{self.field}': top-n requires a measure field"
                )


@dataclass(frozen=True)
class SortClause:
    field: str
    direction: str | None = None

    def __post_init__(self) -> None:
        if self.direction is not None and self.direction not in ("asc", "desc"):
            raise SchemaError(
                f"sort direction '{self.direction}' must be 'asc' or 'desc'"
            )


@dataclass(frozen=True)
class VizSpec:
    mark: str
    encoding: Mapping[str, EncodingBinding] = field(default_factory=dict)
    tooltip_fields: tuple[TooltipField, ...] = ()
    filters: tuple[FilterClause, ...] = ()
    sort: SortClause | None = None
    interactions: frozenset[str] = frozenset()

    def __post_init__(self) -> None:
        object.__setattr__(self, "encoding", dict(self.encoding))
        object.__setattr__(self, "interactions", frozenset(self.interactions))
        for ch in self.encoding:
            if ch not in CHANNELS:
                raise SchemaError(
                    f"encoding channel '{ch}' is not one of {', '.join(CHANNELS)}"
                )
        for i in self.interactions:
            if i not in INTERACTIONS:
                raise SchemaError(
                    f"interaction '{i}' is not one of {', '.join(INTERACTIONS)}"
                )

    @property
    def normalized_mark(self) -> str:
        return normalize_mark(self.mark)

    def binding(self, channel: str) -> EncodingBinding | None:
        return self.encoding.get(channel)

    def field_refs(self) -> list[str]:
        """Every field reference in the spec, in a deterministic order."""
        refs: list[str] = []
        for ch in CHANNELS:
            b = self.encoding.get(ch)
            if b is not None and b.field:
                refs.append(b.field)
        refs.extend(t.field for t in self.tooltip_fields)
        refs.extend(f.field for f in self.filters)
        if self.sort is not None:
            refs.append(self.sort.field)
        return refs

    def unresolved_fields(self, ds: Datasource) -> list[str]:
        """Field references that do not resolve against the datasource.

        Never silently dropped: callers surface these as warnings.
        """
        out: list[str] = []
        for ref in self.field_refs():
            if ds.field(ref) is None and ref not in out:
                out.append(ref)
        return out


_MARK_SYNONYMS = {
    "scatter": "point", "scatterplot": "point", "circle": "point",
    "column": "bar", "barchart": "bar", "linechart": "line",
    "box": "boxplot", "box-plot": "boxplot", "donut": "pie",
}


def normalize_mark(mark: str) -> str:
    m = mark.strip().lower()
    m = _MARK_SYNONYMS.get(m, m)
    return m if m in MARKS else f"other({m})"


@dataclass(frozen=True)
class TurnLabels:
    chart_type: str = ""
    ambiguity: frozenset[str] = frozenset()
    context_handling: frozenset[str] = frozenset()
    inferencing: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "ambiguity", frozenset(self.ambiguity))
        object.__setattr__(self, "context_handling", frozenset(self.context_handling))
        for a in self.ambiguity:
            if a not in AMBIGUITY_LABELS:
                raise SchemaError(
                    f"ambiguity label '{a}' is not one of "
                    f"{', '.join(AMBIGUITY_LABELS)}"
                )
        for c in self.context_handling:
            if c not in CONTEXT_HANDLING_LABELS:
                raise SchemaError(
                    f"contextHandling label '{c}' is not one of "
                    f"{', '.join(CONTEXT_HANDLING_LABELS)}"
                )


@dataclass(frozen=True)
class ExpectedResponse:
    viz_spec: VizSpec
    nl_explanation: str

    def __post_init__(self) -> None:
        if not self.nl_explanation.strip():
            raise SchemaError("expected response nlExplanation must be non-empty")


@dataclass(frozen=True)
class ConversationTurn:
    utterance: str
    expected: tuple[ExpectedResponse, ...]
    variations: tuple[str, ...] = ()
    labels: TurnLabels = TurnLabels()

    def __post_init__(self) -> None:
        if not self.expected:
            raise SchemaError(
                f"turn '{self.utterance}': at least one expected response is required"
            )


@dataclass(frozen=True)
class TestCase:
    conversation_id: str
    datasource_ref: str
    turns: tuple[ConversationTurn, ...]

    def __post_init__(self) -> None:
        if not self.turns:
            raise SchemaError(
                f"test case '{self.conversation_id}' must declare at least one turn"
            )


@dataclass(frozen=True)
class ModelResponse:
    nl_text: str
    raw_output: str
    latency_ms: float
    parse_status: str
    viz_spec: VizSpec | None = None
    token_usage: Mapping[str, int] | None = None

    def __post_init__(self) -> None:
        if self.latency_ms < 0:
            raise SchemaError("latencyMs must be non-negative")
        if self.parse_status not in ("ok", "repaired", "failed"):
            raise SchemaError(
                f"parseStatus '{self.parse_status}' must be ok, repaired or failed"
            )
        if self.parse_status == "ok" and self.viz_spec is None:
            raise SchemaError("parseStatus=ok requires a parsed vizSpec")


@dataclass(frozen=True)
class MetricScore:
    metric_id: str
    value: float
    explanation: str
    raw_judge_score: float | None = None
    expected_fragment: str | None = None
    actual_fragment: str | None = None
    judge_rationale: str | None = None

    def __post_init__(self) -> None:
        if not (0.0 <= self.value <= 100.0):
            raise SchemaError(
                f"metric '{self.metric_id}': value {self.value} outside [0, 100]"
            )
        if self.raw_judge_score is not None and not (1.0 <= self.raw_judge_score <= 5.0):
            raise SchemaError(
                f"metric '{self.metric_id}': rawJudgeScore {self.raw_judge_score} "
                "outside [1, 5]"
            )

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "metricId": self.metric_id,
            "value": self.value,
            "explanation": self.explanation,
        }
        if self.raw_judge_score is not None:
            out["rawJudgeScore"] = self.raw_judge_score
        if self.expected_fragment is not None:
            out["expectedFragment"] = self.expected_fragment
        if self.actual_fragment is not None:
            out["actualFragment"] = self.actual_fragment
        if self.judge_rationale is not None:
            out["judgeRationale"] = self.judge_rationale
        return out

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "MetricScore":
        return cls(
            metric_id=d["metricId"],
            value=d["value"],
            explanation=d.get("explanation", ""),
            raw_judge_score=d.get("rawJudgeScore"),
            expected_fragment=d.get("expectedFragment"),
            actual_fragment=d.get("actualFragment"),
            judge_rationale=d.get("judgeRationale"),
        )


REQUIRED_PROMPT_PLACEHOLDERS = ("datasource", "utterance", "output-schema")


@dataclass(frozen=True)
class ExperimentConfig:
    models: tuple[str, ...]
    system_prompts: tuple[str, ...]
    metric_selection: frozenset[str]
    judge_model: str | None = None
    test_case_selection: str = ""
    runs: int = 3

    def __post_init__(self) -> None:
        object.__setattr__(self, "metric_selection", frozenset(self.metric_selection))
        if not self.models:
            raise SchemaError("experiment config must select at least one model")
        if not self.system_prompts:
            raise SchemaError("experiment config must define at least one system prompt")
        if not (1 <= self.runs <= 5):
            raise SchemaError(f"runs must be between 1 and 5, got {self.runs}")
        for i, tpl in enumerate(self.system_prompts, start=1):
            for ph in REQUIRED_PROMPT_PLACEHOLDERS:
                if "{" + ph + "}" not in tpl:
                    raise SchemaError(
                        f"prompt #{i} missing required placeholder: {ph}"
                    )


# ---------------------------------------------------------------------------
# Wire formats
# ---------------------------------------------------------------------------

def _read_structured(path: str | Path) -> Any:
    p = Path(path)
    if not p.exists():
        raise SchemaError(f"file not found: {p}")
    text = p.read_text()
    suffix = p.suffix.lower()
    if suffix == ".json":
        return json.loads(text)
    if suffix in (".yaml", ".yml"):
        return yaml.safe_load(text)
    # content sniffing fallback
    stripped = text.lstrip()
    if stripped.startswith(("{", "[")):
        try:
            return json.loads(text)
        except json.JSONDecodeError:
            pass
    return yaml.safe_load(text)


def datafield_from_dict(d: Mapping[str, Any]) -> DataField:
    if "name" not in d or not str(d["name"]).strip():
        raise SchemaError("datasource field is missing required 'name'")
    values = d.get("fieldValues")
    if not isinstance(values, list) or not values:
        raise SchemaError(
            f"field '{d['name']}': fieldValues must be a non-empty list"
        )
    dtype = d.get("dataType") or infer_data_type(values)
    return DataField(
        name=str(d["name"]),
        aliases=tuple(str(a) for a in d.get("aliases", [])),
        data_type=dtype,
        field_values=tuple(values),
    )


def datasource_from_dict(d: Mapping[str, Any]) -> Datasource:
    if not isinstance(d, Mapping):
        raise SchemaError("datasource file must contain an object")
    fields_raw = d.get("fields")
    if fields_raw is None:
        raise SchemaError("datasource is missing required 'fields'")
    if not isinstance(fields_raw, list) or not fields_raw:
        raise SchemaError("datasource must declare at least one field")
    return Datasource(
        title=str(d.get("title", "")),
        fields=tuple(datafield_from_dict(f) for f in fields_raw),
    )


def datasource_to_dict(ds: Datasource) -> dict[str, Any]:
    return {
        "title": ds.title,
        "fields": [
            {
                "name": f.name,
                "aliases": list(f.aliases),
                "dataType": f.data_type,
                "fieldValues": list(f.field_values),
            }
            for f in ds.fields
        ],
    }


def load_datasource(path: str | Path) -> Datasource:
    """Load and validate a datasource file (JSON or YAML)."""
    return datasource_from_dict(_read_structured(path))


def vizspec_from_dict(d: Mapping[str, Any]) -> VizSpec:
    if not isinstance(d, Mapping):
        raise SchemaError("vizSpec must be an object")
    if "mark" not in d:
        raise SchemaError("vizSpec is missing required 'mark'")
    encoding: dict[str, EncodingBinding] = {}
    for ch, b in (d.get("encoding") or {}).items():
        if isinstance(b, str):
            encoding[ch] = EncodingBinding(field=b)
        else:
            encoding[ch] = EncodingBinding(
                field=b.get("field"),
                aggregate=b.get("aggregate"),
                scale_type=b.get("scaleType"),
                zero_baseline=b.get("zeroBaseline"),
            )
    filters = tuple(
        FilterClause(
            field=f["field"], op=f["op"], values=tuple(f.get("values", ()))
        )
        for f in d.get("filters", [])
    )
    tooltips = tuple(
        TooltipField(field=t["field"], aggregate=t.get("aggregate"))
        if isinstance(t, Mapping)
        else TooltipField(field=t)
        for t in d.get("tooltipFields", [])
    )
    sort_raw = d.get("sort")
    sort = (
        SortClause(field=sort_raw["field"], direction=sort_raw.get("direction"))
        if sort_raw
        else None
    )
    return VizSpec(
        mark=str(d["mark"]),
        encoding=encoding,
        tooltip_fields=tooltips,
        filters=filters,
        sort=sort,
        interactions=frozenset(d.get("interactions", ())),
    )


def vizspec_to_dict(spec: VizSpec) -> dict[str, Any]:
    enc: dict[str, Any] = {}
    for ch in CHANNELS:
        b = spec.encoding.get(ch)
        if b is None:
            continue
        entry: dict[str, Any] = {}
        if b.field is not None:
            entry["field"] = b.field
        if b.aggregate is not None:
            entry["aggregate"] = b.aggregate
        if b.scale_type is not None:
            entry["scaleType"] = b.scale_type
        if b.zero_baseline is not None:
            entry["zeroBaseline"] = b.zero_baseline
        enc[ch] = entry
    out: dict[str, Any] = {"mark": spec.mark}
    if enc:
        out["encoding"] = enc
    if spec.tooltip_fields:
        out["tooltipFields"] = [
            {"field": t.field, **({"aggregate": t.aggregate} if t.aggregate else {})}
            for t in spec.tooltip_fields
        ]
    if spec.filters:
        out["filters"] = [
            {"field": f.field, "op": f.op, "values": list(f.values)}
            for f in spec.filters
        ]
    if spec.sort is not None:
        out["sort"] = {
            "field": spec.sort.field,
            **({"direction": spec.sort.direction} if spec.sort.direction else {}),
        }
    if spec.interactions:
        out["interactions"] = sorted(spec.interactions)
    return out


def _turn_from_dict(d: Mapping[str, Any], conversation_id: str, index: int) -> ConversationTurn:
    if "utterance" not in d:
        raise SchemaError(
            f"test case '{conversation_id}' turn {index}: missing 'utterance'"
        )
    expected_raw = d.get("expected")
    if not expected_raw:
        raise SchemaError(
            f"test case '{conversation_id}' turn {index}: at least one expected "
            "response is required"
        )
    labels_raw = d.get("labels") or {}
    labels = TurnLabels(
        chart_type=str(labels_raw.get("chartType", "")),
        ambiguity=frozenset(labels_raw.get("ambiguity", ())),
        context_handling=frozenset(labels_raw.get("contextHandling", ())),
        inferencing=tuple(str(t) for t in labels_raw.get("inferencing", ())),
    )
    expected = tuple(
        ExpectedResponse(
            viz_spec=vizspec_from_dict(e["vizSpec"]),
            nl_explanation=str(e.get("nlExplanation", "")),
        )
        for e in expected_raw
    )
    return ConversationTurn(
        utterance=str(d["utterance"]),
        variations=tuple(str(v) for v in d.get("variations", ())),
        labels=labels,
        expected=expected,
    )


def testcase_to_dict(case: TestCase) -> dict[str, Any]:
    return {
        "conversationId": case.conversation_id,
        "datasourceRef": case.datasource_ref,
        "turns": [
            {
                "utterance": t.utterance,
                "variations": list(t.variations),
                "labels": {
                    "chartType": t.labels.chart_type,
                    "ambiguity": sorted(t.labels.ambiguity),
                    "contextHandling": sorted(t.labels.context_handling),
                    "inferencing": list(t.labels.inferencing),
                },
                "expected": [
                    {
                        "vizSpec": vizspec_to_dict(e.viz_spec),
                        "nlExplanation": e.nl_explanation,
                    }
                    for e in t.expected
                ],
            }
            for t in case.turns
        ],
    }


def load_test_suite(
    path: str | Path, ds: Datasource
) -> tuple[list[TestCase], list[str]]:
    """Load a test suite and resolve every expected-spec field reference.

    Returns (cases, warnings). Unknown field references produce warnings;
    structural problems raise SchemaError.
    """
    raw = _read_structured(path)
    if isinstance(raw, Mapping) and "testCases" in raw:
        raw = raw["testCases"]
    if not isinstance(raw, list):
        raise SchemaError("test suite file must contain a list of test cases")
    cases: list[TestCase] = []
    warnings: list[str] = []
    seen_ids: set[str] = set()
    for i, entry in enumerate(raw, start=1):
        cid = str(entry.get("conversationId", "")).strip()
        if not cid:
            raise SchemaError(f"test case #{i}: missing 'conversationId'")
        if cid in seen_ids:
            raise SchemaError(f"duplicate conversationId: {cid}")
        seen_ids.add(cid)
        turns_raw = entry.get("turns")
        if not turns_raw:
            raise SchemaError(f"test case '{cid}' must declare at least one turn")
        declared = [t.get("turn") for t in turns_raw]
        if any(d is not None for d in declared):
            if declared != list(range(1, len(turns_raw) + 1)):
                raise SchemaError(
                    f"test case '{cid}': turn indices must be contiguous from 1, "
                    f"got {declared}"
                )
        turns = tuple(
            _turn_from_dict(t, cid, idx)
            for idx, t in enumerate(turns_raw, start=1)
        )
        case = TestCase(
            conversation_id=cid,
            datasource_ref=str(entry.get("datasourceRef", ds.title)),
            turns=turns,
        )
        for idx, turn in enumerate(case.turns, start=1):
            for exp in turn.expected:
                for ref in exp.viz_spec.unresolved_fields(ds):
                    warnings.append(
                        f"unresolved field: {ref} "
                        f"(test case '{cid}' turn {idx})"
                    )
        cases.append(case)
    return cases, warnings


def _selection_tokens(selection: str) -> list[str]:
    return [tok.strip() for tok in selection.split(",") if tok.strip()]


def select_test_cases(suite: list[TestCase], selection: str) -> list[TestCase]:
    """Order-preserving subset by id or contiguous id range; blank selects all."""
    if not selection or not selection.strip():
        return list(suite)
    by_id = {c.conversation_id: c for c in suite}
    wanted: list[str] = []
    unknown: list[str] = []
    for tok in _selection_tokens(selection):
        if "-" in tok and not tok in by_id:
            lo_s, _, hi_s = tok.partition("-")
            try:
                lo, hi = int(lo_s), int(hi_s)
            except ValueError:
                unknown.append(tok)
                continue
            matched = False
            for c in suite:
                try:
                    n = int(c.conversation_id)
                except ValueError:
                    continue
                if lo <= n <= hi:
                    wanted.append(c.conversation_id)
                    matched = True
            if not matched:
                unknown.append(tok)
        elif tok in by_id:
            wanted.append(tok)
        else:
            unknown.append(tok)
    if unknown:
        raise SchemaError(
            "unknown test case id: " + ", ".join(unknown)
        )
    keep = set(wanted)
    return [c for c in suite if c.conversation_id in keep]
