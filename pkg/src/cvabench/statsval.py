"""Validation statistics: linear-weighted Cohen's kappa, Spearman's rho with
tie handling, and rank-normalized preference scores.

Functions return None where the statistic is undefined (no variance); callers
render that as an explicit "undefined: no variance" row rather than a number.
"""

from __future__ import annotations

import statistics
from dataclasses import dataclass
from typing import Any, Mapping, Sequence


@dataclass(frozen=True)
class RatingSeries:
    item_ids: tuple[str, ...]
    values: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.item_ids) != len(self.values):
            raise ValueError("itemIds and values must have equal length")

    def aligned_with(self, other: "RatingSeries") -> tuple[list[float], list[float]]:
        if set(self.item_ids) != set(other.item_ids):
            raise ValueError("rating series cover different items")
        by_id = dict(zip(other.item_ids, other.values))
        return list(self.values), [by_id[i] for i in self.item_ids]


def weighted_kappa(
    a: RatingSeries,
    b: RatingSeries,
    categories: Sequence[Any] | None = None,
) -> float | None:
    """Linear-weighted Cohen's kappa over an ordered ordinal scale.

    Disagreement weights are |i - j| / (k - 1); expected disagreement comes
    from the product of the marginals. Returns None when expected
    disagreement is zero (both raters constant on the same category).
    """
    va, vb = a.aligned_with(b)
    if categories is None:
        categories = sorted(set(va) | set(vb))
    cats = list(categories)
    k = len(cats)
    if k < 2:
        return None
    index = {c: i for i, c in enumerate(cats)}
    try:
        ia = [index[v] for v in va]
        ib = [index[v] for v in vb]
    except KeyError as exc:
        raise ValueError(f"rating {exc.args[0]!r} outside the declared scale") from exc
    n = len(ia)
    observed = [[0.0] * k for _ in range(k)]
    for i, j in zip(ia, ib):
        observed[i][j] += 1.0
    row = [sum(observed[i]) for i in range(k)]
    col = [sum(observed[i][j] for i in range(k)) for j in range(k)]
    d_obs = 0.0
    d_exp = 0.0
    for i in range(k):
        for j in range(k):
            w = abs(i - j) / (k - 1)
            d_obs += w * observed[i][j]
            d_exp += w * row[i] * col[j] / n
    if d_exp == 0.0:
        return None
    return 1.0 - d_obs / d_exp


def average_ranks(values: Sequence[float]) -> list[float]:
    """Ranks starting at 1 with ties sharing the average of their positions."""
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        avg = (i + j) / 2.0 + 1.0
        for p in range(i, j + 1):
            ranks[order[p]] = avg
        i = j + 1
    return ranks


def _pearson(x: Sequence[float], y: Sequence[float]) -> float | None:
    n = len(x)
    mx, my = statistics.fmean(x), statistics.fmean(y)
    sxx = sum((v - mx) ** 2 for v in x)
    syy = sum((v - my) ** 2 for v in y)
    if sxx == 0.0 or syy == 0.0:
        return None
    sxy = sum((a - mx) * (b - my) for a, b in zip(x, y))
    return sxy / (sxx * syy) ** 0.5


def spearman_rho(x: RatingSeries, y: RatingSeries) -> float | None:
    """Rank-transform Pearson correlation (exact under ties)."""
    vx, vy = x.aligned_with(y)
    if len(vx) < 2:
        raise ValueError("correlation requires at least 2 items")
    return _pearson(average_ranks(vx), average_ranks(vy))


def preference_scores(
    rankings: Sequence[Mapping[str, float]],
    models: Sequence[str],
) -> tuple[dict[str, float], list[str]]:
    """Per-model human preference scores in [0, 1].

    Each participant's ranks (1 = best, ties allowed) are converted to
    averaged fractional ranks, min-max normalized within the participant
    (best -> 1, worst -> 0), then averaged per model across the participants
    who ranked it. Models ranked by nobody are excluded with a note.
    """
    per_model: dict[str, list[float]] = {m: [] for m in models}
    for idx, ranking in enumerate(rankings, start=1):
        items = [(m, r) for m, r in ranking.items() if m in per_model]
        if len(items) < 2:
            raise ValueError(
                f"participant #{idx} ranked {len(items)} models; at least 2 required"
            )
        names = [m for m, _ in items]
        ranks = average_ranks([r for _, r in items])
        n = len(names)
        for m, r in zip(names, ranks):
            per_model[m].append((n - r) / (n - 1))
    notes: list[str] = []
    scores: dict[str, float] = {}
    for m in models:
        if per_model[m]:
            scores[m] = statistics.fmean(per_model[m])
        else:
            notes.append(f"model '{m}' was ranked by no participant; excluded")
    return scores, notes
