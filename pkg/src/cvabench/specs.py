"""Spec engine: canonical field names, semantic similarity, filter
normalization, axis-swap detection, and structured spec diffs.

Everything here is a pure function; results depend only on the inputs.
"""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass
from typing import Any

from .core import (
    CHANNELS,
    Datasource,
    FilterClause,
    VizSpec,
    is_numeric_value,
    is_temporal_value,
)
from .porter import stem

_TOKEN_SPLIT = re.compile(r"[^0-9a-zA-Z]+")
_CAMEL_1 = re.compile(r"([a-z0-9])([A-Z])")
_CAMEL_2 = re.compile(r"([A-Z]+)([A-Z][a-z])")

# Axis-swap detection: both cross similarities must clear this bound and
# dominate their direct counterparts.
SWAP_THRESHOLD = 0.8


def tokenize(name: str) -> list[str]:
    """Lowercased word tokens; splits whitespace, punctuation and camelCase."""
    expanded = _CAMEL_2.sub(r"\1 \2", _CAMEL_1.sub(r"\1 \2", name))
    return [t for t in _TOKEN_SPLIT.split(expanded.lower()) if t]


def _token_trigrams(token: str) -> set[str]:
    padded = f" {token} "
    return {padded[i : i + 3] for i in range(len(padded) - 2)}


@dataclass(frozen=True)
class CanonicalName:
    source_field: str
    stemmed_tokens: tuple[str, ...]
    trigram_set: frozenset[str]

    @property
    def token_counts(self) -> Counter:
        return Counter(self.stemmed_tokens)


def canon(field_name: str, meta: Datasource | None = None) -> CanonicalName:
    """Canonical representation of a field name plus its datasource aliases.

    Unknown fields canonicalize from the raw name alone.
    """
    names = [field_name]
    if meta is not None:
        f = meta.field(field_name)
        if f is not None:
            names = [f.name, *f.aliases]
    tokens: list[str] = []
    for n in names:
        tokens.extend(stem(t) for t in tokenize(n))
    trigrams: set[str] = set()
    for t in tokens:
        trigrams |= _token_trigrams(t)
    return CanonicalName(
        source_field=field_name,
        stemmed_tokens=tuple(sorted(tokens)),
        trigram_set=frozenset(trigrams),
    )


def _counter_cosine(a: Counter, b: Counter) -> float:
    if not a or not b:
        return 0.0
    if a == b:
        return 1.0
    dot = sum(a[k] * b[k] for k in a.keys() & b.keys())
    na = math.sqrt(sum(v * v for v in a.values()))
    nb = math.sqrt(sum(v * v for v in b.values()))
    return dot / (na * nb)


def token_cosine(a: CanonicalName, b: CanonicalName) -> float:
    """Plain bag-of-stems cosine (the coarse part of the blend)."""
    return _counter_cosine(a.token_counts, b.token_counts)


def trigram_cosine(a: CanonicalName, b: CanonicalName) -> float:
    if not a.trigram_set or not b.trigram_set:
        return 0.0
    inter = len(a.trigram_set & b.trigram_set)
    return inter / math.sqrt(len(a.trigram_set) * len(b.trigram_set))


def cos_sim_stems(a: CanonicalName, b: CanonicalName) -> float:
    """Graded name similarity in [0, 1].

    Blends bag-of-stems cosine with character-trigram cosine, then applies a
    square-root decompression: raw lexical cosines of short names cluster near
    0.5 for half-overlapping names, which under-grades pairs that human raters
    treat as near-equivalent. The transform preserves 0 (disjoint), 1
    (identical) and monotonicity.
    """
    if not a.stemmed_tokens or not b.stemmed_tokens:
        return 0.0
    blend = 0.5 * token_cosine(a, b) + 0.5 * trigram_cosine(a, b)
    return math.sqrt(blend)


def field_similarity(
    expected_field: str | None, actual_field: str | None, meta: Datasource | None
) -> float:
    if not expected_field or not actual_field:
        return 0.0
    return cos_sim_stems(canon(expected_field, meta), canon(actual_field, meta))


# ---------------------------------------------------------------------------
# Filter normalization
# ---------------------------------------------------------------------------

_OP_CANONICAL = {"in": "eq"}  # single-value `in` collapses to eq


def normalize_scalar(v: Any) -> Any:
    if isinstance(v, bool):
        return v
    if isinstance(v, str):
        s = v.strip()
        if is_numeric_value(s):
            f = float(s)
            return int(f) if f.is_integer() else f
        if is_temporal_value(s):
            return s
        return s.casefold()
    if isinstance(v, float) and v.is_integer():
        return int(v)
    return v


def normalize_filters(spec: VizSpec) -> tuple[list[FilterClause], list[str]]:
    """Canonical filter clauses: case-folded values, collapsed equivalent ops,
    reordered range bounds, deterministic ordering.

    Returns (clauses, problems); malformed clauses are excluded and reported,
    never silently dropped.
    """
    out: list[FilterClause] = []
    problems: list[str] = []
    for clause in spec.filters:
        try:
            values = tuple(normalize_scalar(v) for v in clause.values)
            op = clause.op
            if op == "in" and len(values) == 1:
                op = "eq"
            if op == "range":
                lo, hi = values
                try:
                    if hi < lo:
                        values = (hi, lo)
                except TypeError:
                    problems.append(
                        f"filter on '{clause.field}': range bounds "
                        f"{clause.values!r} are not comparable"
                    )
                    continue
            if op in ("eq", "neq", "in"):
                values = tuple(sorted(values, key=repr))
            out.append(FilterClause(field=clause.field, op=op, values=values))
        except Exception as exc:  # malformed clause: flag, exclude, report
            problems.append(f"filter on '{clause.field}': {exc}")
    out.sort(key=lambda c: (c.field.casefold(), c.op, repr(c.values)))
    return out, problems


def values_equivalent(e: FilterClause, a: FilterClause) -> bool:
    """True iff canonical value sets match under case folding, numeric
    equality and date normalization. Fields are compared separately."""
    ev = {repr(normalize_scalar(v)) for v in e.values}
    av = {repr(normalize_scalar(v)) for v in a.values}
    return ev == av


# ---------------------------------------------------------------------------
# Axis-swap detection
# ---------------------------------------------------------------------------

def _axis_field(spec: VizSpec, channel: str) -> str | None:
    b = spec.encoding.get(channel)
    return b.field if b is not None else None


def axes_swapped(expected: VizSpec, actual: VizSpec, meta: Datasource | None = None) -> bool:
    """True iff the expected x/y fields appear on the opposite axes of the
    actual spec: both cross similarities clear the swap threshold and each
    strictly dominates its direct counterpart."""
    e_x, e_y = _axis_field(expected, "x"), _axis_field(expected, "y")
    a_x, a_y = _axis_field(actual, "x"), _axis_field(actual, "y")
    if not any((e_x, e_y)) or not any((a_x, a_y)):
        return False
    cross_x = field_similarity(e_x, a_y, meta)
    cross_y = field_similarity(e_y, a_x, meta)
    direct_x = field_similarity(e_x, a_x, meta)
    direct_y = field_similarity(e_y, a_y, meta)
    return (
        cross_x >= SWAP_THRESHOLD
        and cross_y >= SWAP_THRESHOLD
        and cross_x > direct_x
        and cross_y > direct_y
    )


# ---------------------------------------------------------------------------
# Structured diff
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DiffEntry:
    path: str
    kind: str  # missing | extra | changed
    expected: Any = None
    actual: Any = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "path": self.path,
            "kind": self.kind,
            "expected": self.expected,
            "actual": self.actual,
        }


@dataclass(frozen=True)
class SpecDiff:
    entries: tuple[DiffEntry, ...]

    def __bool__(self) -> bool:
        return bool(self.entries)

    def paths(self) -> list[str]:
        return [e.path for e in self.entries]

    def to_json(self) -> list[dict[str, Any]]:
        return [e.to_dict() for e in self.entries]


def _diff_value(entries: list[DiffEntry], path: str, exp: Any, act: Any) -> None:
    if exp == act:
        return
    if exp is None or exp == [] or exp == ():
        entries.append(DiffEntry(path=path, kind="extra", actual=act))
    elif act is None or act == [] or act == ():
        entries.append(DiffEntry(path=path, kind="missing", expected=exp))
    else:
        entries.append(DiffEntry(path=path, kind="changed", expected=exp, actual=act))


def diff_specs(expected: VizSpec, actual: VizSpec) -> SpecDiff:
    """Structured diff over dotted spec paths, in deterministic order.

    Covers mark, every channel, tooltipFields, filters, sort, interactions.
    """
    entries: list[DiffEntry] = []
    _diff_value(entries, "mark", expected.normalized_mark, actual.normalized_mark)
    for ch in CHANNELS:
        eb, ab = expected.encoding.get(ch), actual.encoding.get(ch)
        if eb is None and ab is None:
            continue
        if eb is None:
            entries.append(
                DiffEntry(path=f"encoding.{ch}", kind="extra", actual=_binding_repr(ab))
            )
            continue
        if ab is None:
            entries.append(
                DiffEntry(path=f"encoding.{ch}", kind="missing", expected=_binding_repr(eb))
            )
            continue
        _diff_value(entries, f"encoding.{ch}.field", eb.field, ab.field)
        _diff_value(entries, f"encoding.{ch}.aggregate", eb.aggregate, ab.aggregate)
        _diff_value(entries, f"encoding.{ch}.scaleType", eb.scale_type, ab.scale_type)
        _diff_value(
            entries, f"encoding.{ch}.zeroBaseline", eb.zero_baseline, ab.zero_baseline
        )
    e_tips = [(t.field, t.aggregate) for t in expected.tooltip_fields]
    a_tips = [(t.field, t.aggregate) for t in actual.tooltip_fields]
    _diff_value(entries, "tooltipFields", e_tips or None, a_tips or None)
    e_filters, _ = normalize_filters(expected)
    a_filters, _ = normalize_filters(actual)
    e_by_key = {(f.field.casefold(), f.op): f for f in e_filters}
    a_by_key = {(f.field.casefold(), f.op): f for f in a_filters}
    for key in sorted(e_by_key.keys() | a_by_key.keys()):
        ef, af = e_by_key.get(key), a_by_key.get(key)
        path = f"filters.{key[0]}.{key[1]}"
        if ef is None:
            entries.append(DiffEntry(path=path, kind="extra", actual=list(af.values)))
        elif af is None:
            entries.append(DiffEntry(path=path, kind="missing", expected=list(ef.values)))
        elif ef.values != af.values:
            entries.append(
                DiffEntry(
                    path=path, kind="changed",
                    expected=list(ef.values), actual=list(af.values),
                )
            )
    e_sort = (
        {"field": expected.sort.field, "direction": expected.sort.direction}
        if expected.sort
        else None
    )
    a_sort = (
        {"field": actual.sort.field, "direction": actual.sort.direction}
        if actual.sort
        else None
    )
    _diff_value(entries, "sort", e_sort, a_sort)
    _diff_value(
        entries,
        "interactions",
        sorted(expected.interactions) or None,
        sorted(actual.interactions) or None,
    )
    return SpecDiff(entries=tuple(entries))


def _binding_repr(b: Any) -> dict[str, Any]:
    out: dict[str, Any] = {}
    if b.field is not None:
        out["field"] = b.field
    if b.aggregate is not None:
        out["aggregate"] = b.aggregate
    if b.scale_type is not None:
        out["scaleType"] = b.scale_type
    if b.zero_baseline is not None:
        out["zeroBaseline"] = b.zero_baseline
    return out
