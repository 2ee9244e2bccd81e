"""Graded visualization-quality metrics.

Eight rule-based metrics over expected/actual spec pairs plus the overall
visualization score. All scores are in [0, 100]; data fidelity and chart-type
similarity are discrete ({0, 70, 100} and {0, 50, 100}).
"""

from __future__ import annotations

import statistics
from dataclasses import dataclass
from typing import Any, Iterable, Sequence

from .core import (
    DataField,
    Datasource,
    EncodingBinding,
    MetricScore,
    VizSpec,
)
from .specs import (
    axes_swapped,
    field_similarity,
    normalize_filters,
    normalize_scalar,
    values_equivalent,
)

VIZ_METRIC_IDS = (
    "data_fidelity",
    "field_similarity",
    "chart_type_similarity",
    "axis_accuracy",
    "filter_accuracy",
    "sort_accuracy",
    "encoding_accuracy",
    "interactivity_accuracy",
)

# Filter field-match threshold on blended similarity.
TAU_F = 0.5

_MINOR_AGGREGATES = frozenset({"sum", "mean", "count", "median"})

_AGGREGATING = frozenset({"sum", "mean", "count", "min", "max", "median"})


# ---------------------------------------------------------------------------
# Result-table descriptors and data fidelity
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ResultTableDescriptor:
    """Row identity, field set, and aggregation of a spec's result table."""

    row_keys: frozenset
    fields: frozenset[str]
    aggregations: frozenset[tuple[str, str]]


def _resolve(meta: Datasource, name: str) -> str:
    f = meta.field(name)
    return f.name if f else name


def _apply_filters(meta: Datasource, spec: VizSpec) -> list[int]:
    clauses, _ = normalize_filters(spec)
    rows = list(range(meta.row_count))
    topn: list[tuple[int, str]] = []
    for cl in clauses:
        f = meta.field(cl.field)
        if f is None:
            continue
        if cl.op == "top-n":
            topn.append((int(cl.values[0]), str(cl.values[1])))
            continue
        col = f.field_values
        vals = {repr(normalize_scalar(v)) for v in cl.values}
        if cl.op in ("eq", "in"):
            rows = [i for i in rows if repr(normalize_scalar(col[i])) in vals]
        elif cl.op == "neq":
            rows = [i for i in rows if repr(normalize_scalar(col[i])) not in vals]
        elif cl.op == "range":
            lo, hi = cl.values
            kept = []
            for i in rows:
                try:
                    v = float(col[i])
                    if float(lo) <= v <= float(hi):
                        kept.append(i)
                except (TypeError, ValueError):
                    continue
            rows = kept
        elif cl.op == "not-null":
            rows = [i for i in rows if col[i] is not None]
    return rows


def derive_table_descriptor(spec: VizSpec, meta: Datasource) -> ResultTableDescriptor:
    """Execute the spec's query shape against the datasource columns."""
    rows = _apply_filters(meta, spec)
    dims: list[str] = []
    aggs: list[tuple[str, str]] = []
    fields: set[str] = set()
    for ch in ("x", "y", "color", "shape", "opacity", "size", "text"):
        b = spec.encoding.get(ch)
        if b is None:
            continue
        agg = b.aggregate if b.aggregate not in (None, "none") else None
        fname = _resolve(meta, b.field) if b.field else None
        if fname:
            fields.add(fname.casefold())
        if agg in _AGGREGATING:
            aggs.append((fname.casefold() if fname else "*", agg))
        elif fname:
            f = meta.field(fname)
            if f is not None and f.data_type in ("nominal", "ordinal", "temporal"):
                if fname.casefold() not in dims:
                    dims.append(fname.casefold())
    if aggs and dims:
        keymap: dict[tuple, None] = {}
        for i in rows:
            key = tuple(
                meta.field(d).field_values[i] for d in dims  # type: ignore[union-attr]
            )
            keymap[key] = None
        row_keys = frozenset(keymap)
    elif aggs:
        row_keys = frozenset({()})
    else:
        row_keys = frozenset(("row", i) for i in rows)
    return ResultTableDescriptor(
        row_keys=row_keys,
        fields=frozenset(fields),
        aggregations=frozenset(aggs),
    )


def score_data_fidelity(
    expected: ResultTableDescriptor, actual: ResultTableDescriptor
) -> MetricScore:
    """100 for identical result tables, 70 for a minor aggregation difference
    over the same rows and fields, 0 otherwise."""
    if expected == actual:
        return MetricScore(
            metric_id="data_fidelity",
            value=100.0,
            explanation="result tables are identical (rows, fields, aggregations)",
        )
    same_rows = expected.row_keys == actual.row_keys
    same_fields = expected.fields == actual.fields
    e_aggs = dict(expected.aggregations)
    a_aggs = dict(actual.aggregations)
    minor = (
        same_rows
        and same_fields
        and e_aggs.keys() == a_aggs.keys()
        and all(a in _MINOR_AGGREGATES for a in e_aggs.values())
        and all(a in _MINOR_AGGREGATES for a in a_aggs.values())
    )
    if minor:
        changed = {
            k: (e_aggs[k], a_aggs[k]) for k in e_aggs if e_aggs[k] != a_aggs[k]
        }
        detail = ", ".join(f"{k}: {e} vs {a}" for k, (e, a) in changed.items())
        return MetricScore(
            metric_id="data_fidelity",
            value=70.0,
            explanation=f"same rows and fields with a minor aggregation difference ({detail})",
            expected_fragment=_aggs_fragment(e_aggs),
            actual_fragment=_aggs_fragment(a_aggs),
        )
    reasons = []
    if not same_rows:
        reasons.append(f"row identity differs ({len(expected.row_keys)} vs {len(actual.row_keys)})")
    if not same_fields:
        reasons.append("field sets differ")
    if same_rows and same_fields:
        reasons.append("aggregation structure differs")
    return MetricScore(
        metric_id="data_fidelity",
        value=0.0,
        explanation="; ".join(reasons),
        expected_fragment=_aggs_fragment(e_aggs),
        actual_fragment=_aggs_fragment(a_aggs),
    )


def _aggs_fragment(aggs: dict[str, str]) -> str:
    if not aggs:
        return "raw rows"
    return ", ".join(f"{a}({f})" for f, a in sorted(aggs.items()))


# ---------------------------------------------------------------------------
# Show Me chart recommendation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ChartRecommendation:
    ranked_marks: tuple[str, ...]

    @property
    def top(self) -> str | None:
        return self.ranked_marks[0] if self.ranked_marks else None


_RULE_TABLE: dict[tuple[str, ...], tuple[str, ...]] = {
    ("quantitative", "temporal"): ("line", "area", "bar", "point"),
    ("nominal", "quantitative"): ("bar", "pie", "point", "table"),
    ("quantitative", "quantitative"): ("point", "line"),
    ("quantitative",): ("histogram", "boxplot"),
    ("nominal",): ("bar", "table"),
    ("nominal", "nominal", "quantitative"): ("heatmap", "bar"),
}


def _signature(types: Iterable[str]) -> tuple[str, ...]:
    # ordinal behaves like nominal for mark selection
    return tuple(sorted("nominal" if t == "ordinal" else t for t in types))


def recommend_for_types(types: Iterable[str]) -> ChartRecommendation:
    return ChartRecommendation(
        ranked_marks=_RULE_TABLE.get(_signature(types), ())
    )


def show_me_recommend(
    fields: Iterable[DataField], meta: Datasource
) -> ChartRecommendation:
    """Ranked mark types for a field set; empty for unsupported signatures."""
    return recommend_for_types(f.data_type for f in fields)


def _axis_signature_types(spec: VizSpec, meta: Datasource) -> list[str]:
    types: list[str] = []
    for ch in ("x", "y"):
        b = spec.encoding.get(ch)
        if b is None:
            continue
        if b.aggregate == "count":
            # a count of anything is a measure
            types.append("quantitative")
            continue
        if b.field:
            t = meta.data_type_of(b.field)
            if t is not None:
                types.append(t)
    return types


def score_chart_similarity(
    expected: VizSpec, actual: VizSpec, meta: Datasource
) -> MetricScore:
    """100 if the actual mark is the top recommendation for the expected
    fields, 50 for any other recommended mark, 0 otherwise."""
    rec = recommend_for_types(_axis_signature_types(expected, meta))
    mark = actual.normalized_mark
    if not rec.ranked_marks:
        value, why = 0.0, "no recommendation for the expected field signature"
    elif mark == rec.ranked_marks[0]:
        value, why = 100.0, f"'{mark}' is the top recommended mark"
    elif mark in rec.ranked_marks:
        value, why = 50.0, f"'{mark}' is recommended but not the top choice"
    else:
        value, why = 0.0, f"'{mark}' is not among the recommended marks"
    return MetricScore(
        metric_id="chart_type_similarity",
        value=value,
        explanation=f"{why} (recommended: {', '.join(rec.ranked_marks) or 'none'})",
        expected_fragment=rec.ranked_marks[0] if rec.ranked_marks else "none",
        actual_fragment=mark,
    )


# ---------------------------------------------------------------------------
# Field similarity and axis accuracy
# ---------------------------------------------------------------------------

def _axis_fields(spec: VizSpec) -> tuple[str | None, str | None]:
    bx, by = spec.encoding.get("x"), spec.encoding.get("y")
    return (bx.field if bx else None, by.field if by else None)


def _types_match(meta: Datasource, a: str | None, b: str | None) -> bool:
    if not a or not b:
        return False
    ta, tb = meta.data_type_of(a), meta.data_type_of(b)
    return ta is not None and ta == tb


def _orientation_scores(
    expected: VizSpec, actual: VizSpec, meta: Datasource
) -> tuple[dict[str, Any], dict[str, Any]]:
    e_x, e_y = _axis_fields(expected)
    a_x, a_y = _axis_fields(actual)
    direct = {
        "s_x": field_similarity(e_x, a_x, meta),
        "s_y": field_similarity(e_y, a_y, meta),
        "t_x": _types_match(meta, e_x, a_x),
        "t_y": _types_match(meta, e_y, a_y),
        "pairs": ((e_x, a_x), (e_y, a_y)),
    }
    cross = {
        "s_x": field_similarity(e_x, a_y, meta),
        "s_y": field_similarity(e_y, a_x, meta),
        "t_x": _types_match(meta, e_x, a_y),
        "t_y": _types_match(meta, e_y, a_x),
        "pairs": ((e_x, a_y), (e_y, a_x)),
    }
    return direct, cross


def score_field_similarity(
    expected: VizSpec, actual: VizSpec, meta: Datasource
) -> MetricScore:
    """Semantic axis-field match with a single 10-point bonus when both axis
    data types match; the better axis orientation is scored, so swapped axes
    are judged by this metric on the fields alone."""
    e_x, e_y = _axis_fields(expected)
    axes = [ch for ch, f in (("x", e_x), ("y", e_y)) if f is not None]
    direct, cross = _orientation_scores(expected, actual, meta)

    def total(o: dict[str, Any]) -> float:
        return sum(o[f"s_{ch}"] for ch in axes)

    pick = max((direct, cross), key=total)
    s = total(pick) / len(axes) if axes else 0.0
    aligned = [
        (pick[f"s_{ch}"], pick[f"t_{ch}"], pick["pairs"][0 if ch == "x" else 1])
        for ch in axes
    ]
    all_actual_present = all(pair[1] for _, _, pair in aligned)
    bonus = 10.0 if aligned and all(t for _, t, _ in aligned) and all_actual_present else 0.0
    value = min(100.0, 100.0 * s + bonus)
    frag_e = f"x: {e_x or 'none'}, y: {e_y or 'none'}"
    a_x, a_y = _axis_fields(actual)
    frag_a = f"x: {a_x or 'none'}, y: {a_y or 'none'}"
    return MetricScore(
        metric_id="field_similarity",
        value=value,
        explanation=(
            f"axis-field similarity {s:.2f}"
            + (" + type bonus" if bonus else "")
            + (" (axes aligned crosswise)" if pick is cross and pick != direct else "")
        ),
        expected_fragment=frag_e,
        actual_fragment=frag_a,
    )


def _wrong_scale_or_baseline(
    expected: VizSpec, actual: VizSpec, aligned: Sequence[tuple[str, str]]
) -> bool:
    for e_ch, a_ch in aligned:
        eb, ab = expected.encoding.get(e_ch), actual.encoding.get(a_ch)
        if eb is None or ab is None:
            continue
        if eb.scale_type != ab.scale_type:
            return True
        if eb.zero_baseline is True and ab.zero_baseline is False:
            return True
    return False


def score_axis_accuracy(
    expected: VizSpec, actual: VizSpec, meta: Datasource
) -> MetricScore:
    """Per-axis similarity (0.9 weight) plus type agreement (0.1), halved when
    the axes are swapped and scaled by 0.7 on a wrong scale or baseline."""
    swapped = axes_swapped(expected, actual, meta)
    direct, cross = _orientation_scores(expected, actual, meta)
    orient = cross if swapped else direct
    e_x, e_y = _axis_fields(expected)
    per_axis: list[float] = []
    if e_x is not None:
        per_axis.append(0.9 * orient["s_x"] + 0.1 * (1.0 if orient["t_x"] else 0.0))
    if e_y is not None:
        per_axis.append(0.9 * orient["s_y"] + 0.1 * (1.0 if orient["t_y"] else 0.0))
    if not per_axis:
        per_axis = [0.0]
    score = 100.0 * (sum(per_axis) / len(per_axis))
    notes = []
    if swapped:
        score *= 0.5
        notes.append("axes swapped")
    aligned = (("x", "y"), ("y", "x")) if swapped else (("x", "x"), ("y", "y"))
    if _wrong_scale_or_baseline(expected, actual, aligned):
        score *= 0.7
        notes.append("wrong scale or baseline")
    a_x, a_y = _axis_fields(actual)
    return MetricScore(
        metric_id="axis_accuracy",
        value=min(100.0, score),
        explanation=(
            "axis field and type agreement"
            + (f" ({'; '.join(notes)})" if notes else "")
        ),
        expected_fragment=f"x: {e_x or 'none'}, y: {e_y or 'none'}",
        actual_fragment=f"x: {a_x or 'none'}, y: {a_y or 'none'}",
    )


# ---------------------------------------------------------------------------
# Filter accuracy
# ---------------------------------------------------------------------------

def _op_match(e_op: str, a_op: str) -> float:
    if e_op == a_op:
        return 1.0
    if {e_op, a_op} == {"eq", "in"}:
        return 0.5
    return 0.0


def _types_known_unequal(meta: Datasource, a: str, b: str) -> bool:
    ta, tb = meta.data_type_of(a), meta.data_type_of(b)
    return ta is not None and tb is not None and ta != tb


def greedy_filter_matches(
    e_clauses: Sequence[Any], a_clauses: Sequence[Any], meta: Datasource
) -> list[tuple[int, int, float]]:
    """Greedy one-to-one clause matching: (expected idx, actual idx, credit).

    A match requires blended field similarity >= TAU_F, equivalent values and
    no known type conflict; credit is (fieldSim + opMatch) / 2.
    """
    used_a: set[int] = set()
    out: list[tuple[int, int, float]] = []
    for e_idx, e in enumerate(e_clauses):
        best, best_idx = 0.0, None
        for idx, a in enumerate(a_clauses):
            if idx in used_a:
                continue
            sf = field_similarity(e.field, a.field, meta)
            if sf < TAU_F or not values_equivalent(e, a):
                continue
            if _types_known_unequal(meta, e.field, a.field):
                continue
            sim = (sf + _op_match(e.op, a.op)) / 2.0
            if sim > best:
                best, best_idx = sim, idx
        if best_idx is not None:
            used_a.add(best_idx)
            out.append((e_idx, best_idx, best))
    return out


def score_filter_accuracy(
    expected: VizSpec, actual: VizSpec, meta: Datasource
) -> MetricScore:
    """Greedy best matching of normalized filter clauses over a soft union.

    The 10-point type bonus applies only when every expected clause matched
    with equal known types, which keeps clause removal monotone.
    """
    e_clauses, _ = normalize_filters(expected)
    a_clauses, _ = normalize_filters(actual)
    if not e_clauses and not a_clauses:
        return MetricScore(
            metric_id="filter_accuracy",
            value=100.0,
            explanation="no filters expected and none applied",
        )
    matches = greedy_filter_matches(e_clauses, a_clauses, meta)
    matched = sum(credit for _, _, credit in matches)
    pairs = [(e_clauses[i], a_clauses[j]) for i, j, _ in matches]
    match_count = len(pairs)
    union = len(e_clauses) + len(a_clauses) - match_count
    base = min(100.0, 100.0 * matched / union)
    types_agree = (
        match_count == len(e_clauses)
        and match_count >= 1
        and all(
            meta.data_type_of(e.field) is not None
            and meta.data_type_of(e.field) == meta.data_type_of(a.field)
            for e, a in pairs
        )
    )
    bonus = 10.0 if types_agree else 0.0
    def _frag(clauses: Sequence[Any]) -> str:
        if not clauses:
            return "none"
        return "; ".join(f"{c.field} {c.op} {list(c.values)}" for c in clauses)

    return MetricScore(
        metric_id="filter_accuracy",
        value=min(100.0, base + bonus),
        explanation=(
            f"{match_count} of {len(e_clauses)} expected filters matched over a "
            f"soft union of {union}"
            + (" + type bonus" if bonus else "")
        ),
        expected_fragment=_frag(e_clauses),
        actual_fragment=_frag(a_clauses),
    )


# ---------------------------------------------------------------------------
# Sort accuracy
# ---------------------------------------------------------------------------

def score_sort_accuracy(
    expected: VizSpec, actual: VizSpec, meta: Datasource
) -> MetricScore:
    """Graded sort-key similarity times a direction factor plus a type bonus."""
    e, a = expected.sort, actual.sort
    if e is None and a is None:
        return MetricScore(
            metric_id="sort_accuracy",
            value=100.0,
            explanation="no sort expected and none applied",
            expected_fragment="none",
            actual_fragment="none",
        )
    if (e is None) != (a is None):
        missing_side = "model produced none" if a is None else "none was expected"
        present = e or a
        return MetricScore(
            metric_id="sort_accuracy",
            value=0.0,
            explanation=(
                f"sort on '{present.field}' "
                f"{'expected' if a is None else 'added'}; {missing_side}"
            ),
            expected_fragment=_sort_fragment(e),
            actual_fragment=_sort_fragment(a),
        )
    assert e is not None and a is not None
    s_f = field_similarity(e.field, a.field, meta)
    if e.direction == a.direction:
        d = 1.0
    elif e.direction is not None and a.direction is None:
        d = 0.0
    else:
        d = 0.5
    bonus = (
        10.0
        if meta.data_type_of(e.field) is not None
        and meta.data_type_of(e.field) == meta.data_type_of(a.field)
        else 0.0
    )
    value = min(100.0, 100.0 * s_f * d + bonus)
    return MetricScore(
        metric_id="sort_accuracy",
        value=value,
        explanation=(
            f"sort key similarity {s_f:.2f}, direction factor {d}"
            + (" + type bonus" if bonus else "")
        ),
        expected_fragment=_sort_fragment(e),
        actual_fragment=_sort_fragment(a),
    )


def _sort_fragment(s: Any) -> str:
    if s is None:
        return "none"
    if s.direction == "desc":
        return "descending"
    if s.direction == "asc":
        return "ascending"
    return "unspecified direction"


# ---------------------------------------------------------------------------
# Visual encoding accuracy
# ---------------------------------------------------------------------------

NON_POSITIONAL_CHANNELS = ("color", "shape", "opacity", "text", "size")


@dataclass(frozen=True)
class ChannelScoreBreakdown:
    channel: str
    presence: float
    sem: float
    type_ok: float
    practice: float

    @property
    def s_c(self) -> float:
        return (
            0.3 * self.presence
            + 0.4 * self.sem
            + 0.1 * self.type_ok
            + 0.2 * self.practice
        )


def _distinct_count(meta: Datasource, field_name: str | None) -> int | None:
    if not field_name:
        return None
    f = meta.field(field_name)
    if f is None:
        return None
    return len({repr(v) for v in f.field_values})


def best_practice_score(
    channel: str,
    expected_binding: EncodingBinding | None,
    actual_binding: EncodingBinding,
    meta: Datasource,
) -> float:
    """Design best-practice adherence for one bound channel, in [0, 1]."""
    if expected_binding is not None and expected_binding == actual_binding:
        # the model did exactly what the expected spec asked for
        return 1.0
    ftype = meta.data_type_of(actual_binding.field) if actual_binding.field else (
        "quantitative" if actual_binding.aggregate == "count" else None
    )
    scale = actual_binding.scale_type
    distinct = _distinct_count(meta, actual_binding.field)
    if ftype is None:
        return 0.5
    if channel == "color":
        if ftype in ("nominal",):
            if scale not in (None, "ordinal"):
                return 0.0  # categorical field needs a categorical palette
            return 1.0 if (distinct is None or distinct <= 12) else 0.5
        if ftype == "ordinal":
            return 1.0 if scale in (None, "ordinal") else 0.5
        if ftype == "quantitative":
            # quantitative color wants a gradient, not a categorical palette
            return 1.0 if scale in (None, "linear", "log", "sqrt") else 0.0
        return 1.0 if scale in (None, "time", "linear") else 0.5
    if channel == "size":
        if ftype == "quantitative":
            return 1.0
        if ftype == "ordinal":
            return 0.7
        if ftype == "nominal":
            return 0.5 if (distinct is not None and distinct <= 6) else 0.0
        return 0.5
    if channel == "shape":
        if ftype in ("nominal", "ordinal"):
            return 1.0 if (distinct is not None and distinct <= 6) else 0.0
        return 0.0
    if channel == "opacity":
        if ftype == "quantitative":
            return 1.0
        if ftype == "ordinal":
            return 0.7
        if ftype == "nominal":
            return 0.3
        return 0.5
    # text labels are broadly acceptable
    return 1.0


def score_encoding_accuracy(
    expected: VizSpec, actual: VizSpec, meta: Datasource
) -> tuple[MetricScore, list[ChannelScoreBreakdown]]:
    """Weighted per-channel grading over the five non-positional channels,
    averaged. Channels absent on both sides score 100."""
    breakdowns: list[ChannelScoreBreakdown] = []
    for ch in NON_POSITIONAL_CHANNELS:
        eb, ab = expected.encoding.get(ch), actual.encoding.get(ch)
        if eb is None and ab is None:
            breakdowns.append(
                ChannelScoreBreakdown(
                    channel=ch, presence=100.0, sem=100.0, type_ok=100.0, practice=100.0
                )
            )
            continue
        if eb is not None and ab is not None:
            presence = 100.0
            sem = 100.0 * field_similarity(eb.field, ab.field, meta)
            type_ok = 100.0 if _types_match(meta, eb.field, ab.field) else 0.0
        elif ab is not None:
            presence, sem, type_ok = 50.0, 0.0, 0.0
        else:
            presence, sem, type_ok = 0.0, 0.0, 0.0
        practice = (
            100.0 * best_practice_score(ch, eb, ab, meta) if ab is not None else 0.0
        )
        breakdowns.append(
            ChannelScoreBreakdown(
                channel=ch, presence=presence, sem=sem, type_ok=type_ok, practice=practice
            )
        )
    value = statistics.fmean(b.s_c for b in breakdowns)
    worst = min(breakdowns, key=lambda b: b.s_c)
    frag_e = _channels_fragment(expected)
    frag_a = _channels_fragment(actual)
    return (
        MetricScore(
            metric_id="encoding_accuracy",
            value=value,
            explanation=(
                f"mean over {len(breakdowns)} channels; weakest: "
                f"{worst.channel} ({worst.s_c:.0f})"
            ),
            expected_fragment=frag_e,
            actual_fragment=frag_a,
        ),
        breakdowns,
    )


def _channels_fragment(spec: VizSpec) -> str:
    bound = [
        f"{ch}: {spec.encoding[ch].field or spec.encoding[ch].aggregate}"
        for ch in NON_POSITIONAL_CHANNELS
        if ch in spec.encoding
    ]
    return "; ".join(bound) if bound else "none"


# ---------------------------------------------------------------------------
# Interactivity accuracy
# ---------------------------------------------------------------------------

_ALTERNATE_INTERACTIONS = {
    frozenset({"zoom", "pan"}): 0.5,
    frozenset({"selection", "drilldown"}): 0.5,
}


def soft_jaccard(expected: frozenset[str], actual: frozenset[str]) -> float:
    """Jaccard with partial credit for related (not identical) interactions."""
    if not expected and not actual:
        return 1.0
    exact = expected & actual
    credit = float(len(exact))
    pairs = 0
    e_rest = list(expected - exact)
    a_rest = set(actual - exact)
    for e in e_rest:
        for a in list(a_rest):
            alt = _ALTERNATE_INTERACTIONS.get(frozenset({e, a}))
            if alt:
                credit += alt
                a_rest.discard(a)
                pairs += 1
                break
    union = len(expected) + len(actual) - len(exact) - pairs
    return credit / union if union else 1.0


def _required_tooltip_fields(expected: VizSpec, meta: Datasource) -> dict[str, str | None]:
    """Fields bound to x, y, color, size plus filtered fields and aggregated
    measures; value is the expected aggregation (None for raw)."""
    required: dict[str, str | None] = {}

    def add(field_name: str | None, agg: str | None) -> None:
        if not field_name:
            return
        key = _resolve(meta, field_name).casefold()
        agg_n = agg if agg not in (None, "none") else None
        if key not in required or required[key] is None:
            required[key] = agg_n

    for ch in ("x", "y", "color", "size"):
        b = expected.encoding.get(ch)
        if b is not None:
            add(b.field, b.aggregate)
    for f in expected.filters:
        add(f.field, None)
    for ch, b in expected.encoding.items():
        if b.aggregate in _AGGREGATING:
            add(b.field, b.aggregate)
    for t in expected.tooltip_fields:
        add(t.field, t.aggregate)
    return required


def score_interactivity_accuracy(
    expected: VizSpec, actual: VizSpec, meta: Datasource
) -> MetricScore:
    """Tooltip coverage/correctness plus interaction match, consistency and
    usability, weighted 0.6 / 0.2 / 0.1 / 0.1."""
    required = _required_tooltip_fields(expected, meta)
    actual_tips = list(actual.tooltip_fields)
    matched: dict[str, int] = {}
    used: set[int] = set()
    for req in required:
        best, best_idx = 0.0, None
        for idx, tip in enumerate(actual_tips):
            if idx in used:
                continue
            sf = field_similarity(req, tip.field, meta)
            if sf >= TAU_F and sf > best:
                best, best_idx = sf, idx
        if best_idx is not None:
            matched[req] = best_idx
            used.add(best_idx)

    if not required and not actual_tips:
        tooltip_score = 100.0
    else:
        coverage = 100.0 * len(matched) / max(1, len(required))
        if matched:
            agg_ok = []
            for req, idx in matched.items():
                tip = actual_tips[idx]
                tip_agg = tip.aggregate if tip.aggregate not in (None, "none") else None
                agg_ok.append(1.0 if tip_agg == required[req] else 0.0)
            correctness = 100.0 * statistics.fmean(agg_ok)
        else:
            correctness = 100.0 if not required else 0.0
        unmatched = [t for i, t in enumerate(actual_tips) if i not in used]
        expected_refs = {r.casefold() for r in expected.field_refs()}
        if not actual_tips:
            extras = 0.0 if required else 100.0
        elif not unmatched:
            extras = 100.0
        else:
            relevant = sum(
                1
                for t in unmatched
                if _resolve(meta, t.field).casefold() in expected_refs
                or meta.field(t.field) is not None
            )
            extras = 100.0 * relevant / len(unmatched)
        seen: set[str] = set()
        dupes = 0
        noise = 0
        for t in actual_tips:
            key = (_resolve(meta, t.field).casefold(), t.aggregate)
            if key in seen:
                dupes += 1
            seen.add(key)
            if meta.field(t.field) is None:
                noise += 1
        redundancy = 100.0 * (dupes + noise) / max(1, len(actual_tips))
        tooltip_score = max(
            0.0,
            min(
                100.0,
                0.6 * coverage + 0.3 * correctness + 0.1 * extras - 0.1 * redundancy,
            ),
        )

    inter_match = 100.0 * soft_jaccard(expected.interactions, actual.interactions)

    actual_is_inert = not actual_tips and not actual.interactions
    expects_affordances = bool(required) or bool(expected.interactions)
    if actual_is_inert and expects_affordances:
        consistency = 0.0
        usability = 0.0
    else:
        consistent = all(meta.field(t.field) is not None for t in actual_tips)
        consistency = 100.0 if consistent else 0.0
        if actual_tips:
            formatting_ok = 1.0 if consistent else 0.0
            units_shown = 1.0
            for t in actual_tips:
                f = meta.field(t.field)
                if f is not None and f.data_type == "quantitative":
                    tip_agg = t.aggregate if t.aggregate not in (None, "none") else None
                    if tip_agg is None and required.get(f.name.casefold()) is not None:
                        units_shown = 0.0
            brevity_ok = 1.0 if len(actual_tips) <= 6 and len(
                {(t.field.casefold(), t.aggregate) for t in actual_tips}
            ) == len(actual_tips) else 0.0
            usability = 100.0 * statistics.fmean(
                (formatting_ok, units_shown, brevity_ok)
            )
        else:
            usability = 100.0

    value = (
        0.6 * tooltip_score + 0.2 * inter_match + 0.1 * consistency + 0.1 * usability
    )
    return MetricScore(
        metric_id="interactivity_accuracy",
        value=min(100.0, max(0.0, value)),
        explanation=(
            f"tooltips {tooltip_score:.0f}, interactions {inter_match:.0f}, "
            f"consistency {consistency:.0f}, usability {usability:.0f}"
        ),
        expected_fragment=f"tooltips: {sorted(required) or 'none'}",
        actual_fragment=f"tooltips: {[t.field for t in actual_tips] or 'none'}",
    )


# ---------------------------------------------------------------------------
# Overall score and multi-candidate evaluation
# ---------------------------------------------------------------------------

def overall_viz_score(scores: Sequence[MetricScore]) -> float:
    """Unweighted mean of the selected visualization metrics."""
    if not scores:
        raise ValueError("overall visualization score requires at least one metric")
    return statistics.fmean(s.value for s in scores)


def score_viz_pair(
    expected: VizSpec,
    actual: VizSpec,
    meta: Datasource,
    selection: Iterable[str] | None = None,
) -> list[MetricScore]:
    wanted = set(selection) if selection is not None else set(VIZ_METRIC_IDS)
    out: list[MetricScore] = []
    if "data_fidelity" in wanted:
        out.append(
            score_data_fidelity(
                derive_table_descriptor(expected, meta),
                derive_table_descriptor(actual, meta),
            )
        )
    if "field_similarity" in wanted:
        out.append(score_field_similarity(expected, actual, meta))
    if "chart_type_similarity" in wanted:
        out.append(score_chart_similarity(expected, actual, meta))
    if "axis_accuracy" in wanted:
        out.append(score_axis_accuracy(expected, actual, meta))
    if "filter_accuracy" in wanted:
        out.append(score_filter_accuracy(expected, actual, meta))
    if "sort_accuracy" in wanted:
        out.append(score_sort_accuracy(expected, actual, meta))
    if "encoding_accuracy" in wanted:
        out.append(score_encoding_accuracy(expected, actual, meta)[0])
    if "interactivity_accuracy" in wanted:
        out.append(score_interactivity_accuracy(expected, actual, meta))
    return out


def score_viz_against_candidates(
    candidates: Sequence[VizSpec],
    actual: VizSpec,
    meta: Datasource,
    selection: Iterable[str] | None = None,
) -> list[MetricScore]:
    """Per metric, the maximum over the expected candidates, so adding an
    acceptable answer never lowers a score."""
    if not candidates:
        raise ValueError("at least one expected candidate is required")
    per_candidate = [
        score_viz_pair(c, actual, meta, selection) for c in candidates
    ]
    out: list[MetricScore] = []
    for i in range(len(per_candidate[0])):
        out.append(max((scores[i] for scores in per_candidate), key=lambda s: s.value))
    return out
