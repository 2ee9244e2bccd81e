from __future__ import annotations

import random
from pathlib import Path

import pytest

from cvabench.core import (
    DataField,
    Datasource,
    EncodingBinding,
    FilterClause,
    SortClause,
    TooltipField,
    VizSpec,
)

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


@pytest.fixture(scope="session")
def superstore() -> Datasource:
    return Datasource(
        title="Superstore",
        fields=(
            DataField("Region", "nominal",
                      ("Central", "East", "South", "West", "Central", "East",
                       "South", "West", "Central", "East")),
            DataField("Category", "nominal",
                      ("Furniture", "Office Supplies", "Technology", "Furniture",
                       "Office Supplies", "Technology", "Furniture",
                       "Office Supplies", "Technology", "Furniture")),
            DataField("State", "nominal", tuple("ABCDEFGHIJ")),
            DataField("Quantity", "quantitative", (5, 3, 8, 2, 7, 4, 6, 1, 9, 2)),
            DataField("Sales", "quantitative",
                      (100.5, 200.0, 50.25, 300.1, 120.0, 80.75, 95.5, 210.3,
                       60.0, 150.2)),
            DataField("Sales Amount", "quantitative", (1, 2, 3, 4, 5, 6, 7, 8, 9, 10)),
            DataField("Profit", "quantitative",
                      (10.1, 20.2, 5.5, 30.3, 12.4, 8.8, 9.9, 21.1, 6.6, 15.5)),
            DataField("Year", "quantitative",
                      (2020, 2021, 2022, 2023, 2020, 2021, 2022, 2023, 2020, 2021)),
            DataField("Order Date", "temporal",
                      ("2023-01-04", "2023-02-11", "2023-03-08", "2023-04-19",
                       "2023-05-23", "2023-06-30", "2023-07-14", "2023-08-02",
                       "2023-09-27", "2023-10-05")),
            DataField("Ship Date", "temporal",
                      ("2023-01-08", "2023-02-15", "2023-03-12", "2023-04-23",
                       "2023-05-27", "2023-07-04", "2023-07-18", "2023-08-06",
                       "2023-10-01", "2023-10-09")),
        ),
    )


# deterministic spec fuzzing used by the property suite
_MARKS = ("bar", "line", "area", "point", "pie", "histogram", "table", "heatmap")
_AXIS_FIELDS = ("Region", "Category", "State", "Quantity", "Sales", "Profit",
                "Order Date", "Ship Date")
_AGGS = (None, "sum", "mean", "count", "median")
# pairwise lexically dissimilar, so one expected clause never matches two
_FILTER_FIELDS = ("Region", "Category", "State", "Quantity")
_FILTER_VALUES = {
    "Region": ("West", "East"),
    "Category": ("Furniture", "Technology"),
    "State": ("A", "B"),
    "Quantity": (5, 9),
}


def gen_spec(rng: random.Random, with_both_axes: bool = False) -> VizSpec:
    encoding: dict[str, EncodingBinding] = {}
    encoding["x"] = EncodingBinding(rng.choice(_AXIS_FIELDS), aggregate=rng.choice(_AGGS))
    if with_both_axes or rng.random() < 0.9:
        encoding["y"] = EncodingBinding(rng.choice(_AXIS_FIELDS), aggregate=rng.choice(_AGGS))
    for ch in ("color", "size", "opacity", "text", "shape"):
        if rng.random() < 0.25:
            encoding[ch] = EncodingBinding(rng.choice(_AXIS_FIELDS))
    filters = []
    for f in rng.sample(_FILTER_FIELDS, k=rng.randint(0, 3)):
        filters.append(FilterClause(f, "eq", (rng.choice(_FILTER_VALUES[f]),)))
    sort = None
    if rng.random() < 0.4:
        sort = SortClause(rng.choice(_AXIS_FIELDS), rng.choice((None, "asc", "desc")))
    tooltips = tuple(
        TooltipField(rng.choice(_AXIS_FIELDS), aggregate=rng.choice((None, "sum")))
        for _ in range(rng.randint(0, 3))
    )
    interactions = frozenset(
        i for i in ("selection", "zoom", "pan", "drilldown") if rng.random() < 0.2
    )
    return VizSpec(
        mark=rng.choice(_MARKS),
        encoding=encoding,
        filters=tuple(filters),
        sort=sort,
        tooltip_fields=tooltips,
        interactions=interactions,
    )
