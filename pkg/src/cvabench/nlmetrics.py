"""Natural-language response metrics.

Factual grounding is computed programmatically with a pluggable embedder (the
default is offline and deterministic); assumptions disclosure, insightfulness,
coherence and follow-up relevance are rubric-driven judge metrics; token-level
precision/recall/F1 round out the traditional scores.
"""

from __future__ import annotations

import json
import math
import random
import re
import statistics
from collections import Counter
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Callable, Mapping, Protocol, Sequence

from .core import MetricScore, SchemaError
from .porter import stem

JUDGE_METRIC_IDS = (
    "assumptions_disclosure",
    "insightfulness",
    "coherence",
    "followup_relevance",
)

NL_METRIC_IDS = ("factual_grounding",) + JUDGE_METRIC_IDS


class MetricUnavailable(Exception):
    """The metric could not be computed for this cell (distinct from 0)."""


# ---------------------------------------------------------------------------
# Text normalization
# ---------------------------------------------------------------------------

_WORD = re.compile(r"[a-zA-Z][a-zA-Z0-9]*|\d+(?:\.\d+)?|%")

_NUMBER_WORDS = {
    "zero": "0", "one": "1", "two": "2", "three": "3", "four": "4",
    "five": "5", "six": "6", "seven": "7", "eight": "8", "nine": "9",
    "ten": "10", "eleven": "11", "twelve": "12", "twenty": "20",
    "thirty": "30", "forty": "40", "fifty": "50", "hundred": "100",
}

_UP_WORDS = {
    "up", "rose", "rise", "rises", "rising", "climb", "climbs", "climbed",
    "climbing", "grew", "grow", "grows", "growing", "increase", "increases",
    "increased", "increasing", "gain", "gained", "gains", "higher", "jump",
    "jumped", "surge", "surged",
}

_DOWN_WORDS = {
    "down", "fell", "fall", "falls", "falling", "drop", "drops", "dropped",
    "dropping", "decline", "declines", "declined", "declining", "decrease",
    "decreases", "decreased", "decreasing", "lower", "shrank", "shrink",
    "dip", "dipped", "sank", "sink",
}

_MEASURE_STEMS = {
    "sale", "revenu", "profit", "cost", "quantiti", "discount", "margin",
    "incom", "expens", "earn", "loss", "price", "budget", "spend",
}


def _normalize_word(w: str) -> str:
    if w == "%":
        return "percent"
    if w in _NUMBER_WORDS:
        return _NUMBER_WORDS[w]
    if w in _UP_WORDS:
        return "up"
    if w in _DOWN_WORDS:
        return "down"
    return w


def grounding_tokens(text: str) -> list[str]:
    """Stemmed tokens with numerals, percent signs and direction verbs
    collapsed to canonical forms, so paraphrases compare equal."""
    out = []
    for w in _WORD.findall(text.lower()):
        w = _normalize_word(w)
        out.append(stem(w) if w.isalpha() else w)
    return out


def plain_tokens(text: str) -> list[str]:
    """Lowercased, stemmed tokens with no further normalization (for P/R/F1)."""
    return [stem(w) if w.isalpha() else w for w in _WORD.findall(text.lower())]


# ---------------------------------------------------------------------------
# Offline embedder and contradiction fallback
# ---------------------------------------------------------------------------

class Embedder(Protocol):
    def embed_many(self, texts: Sequence[str]) -> list[dict[str, float]]: ...


class OfflineEmbedder:
    """Deterministic stemmed TF-IDF bag-of-words embedder.

    IDF is fitted on the texts being compared (smooth IDF), so the embedder
    needs no corpus and no network. When two texts share no tokens at all,
    callers fall back to character trigrams via :func:`trigram_similarity`.
    """

    def embed_many(self, texts: Sequence[str]) -> list[dict[str, float]]:
        bags = [Counter(grounding_tokens(t)) for t in texts]
        n = len(bags)
        df = Counter()
        for bag in bags:
            df.update(set(bag))
        out = []
        for bag in bags:
            vec = {
                tok: count * (math.log((1 + n) / (1 + df[tok])) + 1.0)
                for tok, count in bag.items()
            }
            out.append(vec)
        return out


def cosine(a: Mapping[str, float], b: Mapping[str, float]) -> float:
    if not a or not b:
        return 0.0
    if a == b:
        return 1.0
    dot = sum(a[k] * b[k] for k in a.keys() & b.keys())
    na = math.sqrt(sum(v * v for v in a.values()))
    nb = math.sqrt(sum(v * v for v in b.values()))
    return dot / (na * nb)


def trigram_similarity(a: str, b: str) -> float:
    def grams(t: str) -> set[str]:
        s = f"  {t.lower()}  "
        return {s[i : i + 3] for i in range(len(s) - 2)}

    ga, gb = grams(a), grams(b)
    if not ga or not gb:
        return 0.0
    return len(ga & gb) / math.sqrt(len(ga) * len(gb))


def _measures(text: str) -> set[str]:
    return {t for t in grounding_tokens(text) if t in _MEASURE_STEMS}


def _directions(text: str) -> set[str]:
    return {t for t in grounding_tokens(text) if t in ("up", "down")}


def offline_contradiction(expected: str, actual: str) -> bool:
    """Deterministic fallback: different canonical measures, or opposing
    directions reported for a shared measure."""
    em, am = _measures(expected), _measures(actual)
    if em and am and not (em & am):
        return True
    if em & am:
        ed, ad = _directions(expected), _directions(actual)
        if ed and ad and not (ed & ad):
            return True
    return False


ContradictionChecker = Callable[[str, str], bool]


def score_factual_grounding(
    expected_text: str,
    actual_text: str,
    embedder: Embedder | None = None,
    contradiction_checker: ContradictionChecker | None = None,
) -> MetricScore:
    """100 x embedding cosine, zeroed on a detected contradiction."""
    if not expected_text.strip() or not actual_text.strip():
        raise MetricUnavailable("factual grounding requires non-empty texts")
    checker = contradiction_checker or offline_contradiction
    if checker(expected_text, actual_text):
        return MetricScore(
            metric_id="factual_grounding",
            value=0.0,
            explanation="contradiction detected between expected and actual text",
            expected_fragment=expected_text,
            actual_fragment=actual_text,
        )
    embedder = embedder or OfflineEmbedder()
    try:
        e_vec, a_vec = embedder.embed_many([expected_text, actual_text])
        sim = cosine(e_vec, a_vec)
    except Exception as exc:
        raise MetricUnavailable(f"embedder failure: {exc}") from exc
    if sim == 0.0:
        sim = trigram_similarity(expected_text, actual_text)
    value = max(0.0, min(100.0, 100.0 * sim))
    return MetricScore(
        metric_id="factual_grounding",
        value=value,
        explanation=f"semantic similarity {sim:.2f} between explanation texts",
        expected_fragment=expected_text,
        actual_fragment=actual_text,
    )


# ---------------------------------------------------------------------------
# Judge rubrics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FewShotExample:
    context: str
    response: str
    score: float
    rationale: str


@dataclass(frozen=True)
class JudgeRubric:
    metric_id: str
    instructions: str
    few_shot_examples: tuple[FewShotExample, ...]
    scale: tuple[int, int] = (1, 5)

    def __post_init__(self) -> None:
        if self.metric_id not in JUDGE_METRIC_IDS:
            raise SchemaError(
                f"unknown judge metric '{self.metric_id}'; expected one of "
                f"{', '.join(JUDGE_METRIC_IDS)}"
            )
        if len(self.few_shot_examples) < 2:
            raise SchemaError(
                f"rubric '{self.metric_id}' needs at least 2 few-shot examples"
            )


@dataclass(frozen=True)
class JudgeVerdict:
    score: float
    rationale: str
    raw_judge_output: str

    def __post_init__(self) -> None:
        if not (1.0 <= self.score <= 5.0):
            raise SchemaError(f"judge score {self.score} outside [1, 5]")
        if not self.rationale.strip():
            raise SchemaError("judge rationale must be non-empty")


def load_rubric(metric_id: str, path: str | Path | None = None) -> JudgeRubric:
    """Load a rubric fixture; the shipped files can be overridden by path."""
    if path is not None:
        raw = json.loads(Path(path).read_text())
    else:
        ref = resources.files("cvabench").joinpath(f"rubrics/{metric_id}.json")
        raw = json.loads(ref.read_text())
    return JudgeRubric(
        metric_id=raw["metricId"],
        instructions=raw["instructions"],
        few_shot_examples=tuple(
            FewShotExample(
                context=e.get("context", ""),
                response=e["response"],
                score=e["score"],
                rationale=e["rationale"],
            )
            for e in raw["fewShotExamples"]
        ),
        scale=tuple(raw.get("scale", (1, 5))),  # type: ignore[arg-type]
    )


@dataclass(frozen=True)
class JudgeContext:
    datasource_summary: str
    conversation: tuple[tuple[str, str], ...] = ()  # (utterance, response) pairs
    expected_response: str = ""
    actual_response: str = ""


class JudgeClient(Protocol):
    def complete(self, prompt: str) -> str: ...


def _truncate_tokens(text: str, limit: int) -> str:
    toks = text.split()
    if len(toks) <= limit:
        return text
    return " ".join(toks[:limit]) + " ..."


def equalize_lengths(expected: str, actual: str) -> tuple[str, str]:
    """Truncate both responses to the shorter's token count plus 20% to blunt
    verbosity bias."""
    n = min(len(expected.split()), len(actual.split()))
    limit = max(1, int(n * 1.2))
    return _truncate_tokens(expected, limit), _truncate_tokens(actual, limit)


REFERENCE_MARKER = "[REFERENCE RESPONSE]"
CANDIDATE_MARKER = "[CANDIDATE RESPONSE]"


def _sanitize_block(text: str) -> str:
    # embedded responses must not be able to forge the structural markers
    return text.replace(REFERENCE_MARKER, "[reference response]").replace(
        CANDIDATE_MARKER, "[candidate response]"
    )


def build_judge_prompt(
    rubric: JudgeRubric, context: JudgeContext, rng: random.Random
) -> str:
    """Single-candidate rubric prompt with randomized example and block order."""
    expected, actual = equalize_lengths(
        context.expected_response, context.actual_response
    )
    expected, actual = _sanitize_block(expected), _sanitize_block(actual)
    examples = list(rubric.few_shot_examples)
    rng.shuffle(examples)
    lines = [
        f"You are grading one candidate response for: {rubric.metric_id}.",
        rubric.instructions,
        "Ignore stylistic flourish, tone and verbosity; judge substance only.",
        f"Score on an integer scale from {rubric.scale[0]} (worst) to "
        f"{rubric.scale[1]} (best).",
        "",
        "Scored examples:",
    ]
    for ex in examples:
        if ex.context:
            lines.append(f"- Context: {ex.context}")
        lines.append(f"- Response: {ex.response}")
        lines.append(f"  Score: {ex.score} ({ex.rationale})")
    lines += ["", f"Datasource: {context.datasource_summary}"]
    if context.conversation:
        lines.append("Conversation so far:")
        for utt, resp in context.conversation:
            lines.append(f"  User: {utt}")
            if resp:
                lines.append(f"  Assistant: {resp}")
    blocks = [
        f"{REFERENCE_MARKER}\n{expected}",
        f"{CANDIDATE_MARKER}\n{actual}",
    ]
    rng.shuffle(blocks)
    lines += ["", *blocks]
    lines += [
        "",
        "Rate only the candidate response against the reference.",
        'Respond with JSON: {"score": <int>, "rationale": "<one sentence>"}',
    ]
    return "\n".join(lines)


_JSON_OBJECT = re.compile(r"\{.*?\}", re.DOTALL)


def parse_judge_output(raw: str) -> JudgeVerdict:
    for m in _JSON_OBJECT.finditer(raw):
        try:
            obj = json.loads(m.group(0))
        except json.JSONDecodeError:
            continue
        if "score" in obj:
            return JudgeVerdict(
                score=float(obj["score"]),
                rationale=str(obj.get("rationale", "")) or "no rationale given",
                raw_judge_output=raw,
            )
    raise ValueError(f"judge output is not parseable: {raw[:200]!r}")


class JudgeFailure(Exception):
    """The judge produced unusable output after exhausting retries."""


def judge_metric(
    rubric: JudgeRubric,
    context: JudgeContext,
    judge: JudgeClient,
    seed: int = 0,
    retries: int = 3,
) -> JudgeVerdict:
    """Per-output rubric scoring; never compares two candidates in one call."""
    rng = random.Random(seed)
    last_error: Exception | None = None
    for _ in range(retries):
        prompt = build_judge_prompt(rubric, context, rng)
        raw = judge.complete(prompt)
        try:
            return parse_judge_output(raw)
        except (ValueError, SchemaError) as exc:
            last_error = exc
    raise JudgeFailure(
        f"judge for '{rubric.metric_id}' failed after {retries} attempts: {last_error}"
    )


def followup_relevance(
    rubric: JudgeRubric,
    turn_index: int,
    context: JudgeContext,
    judge: JudgeClient,
    seed: int = 0,
    retries: int = 3,
) -> JudgeVerdict | None:
    """Judge grounding in prior turns; not applicable on turn 1 (returns None)."""
    if turn_index < 2:
        return None
    return judge_metric(rubric, context, judge, seed=seed, retries=retries)


def scale_judge_score(raw: float) -> float:
    """Map the 1-5 judge scale onto [0, 100]."""
    if not (1.0 <= raw <= 5.0):
        raise ValueError(f"judge score {raw} outside [1, 5]")
    return raw * 20.0


# ---------------------------------------------------------------------------
# Traditional NLG scores
# ---------------------------------------------------------------------------

def nlg_prf(reference: str, candidate: str) -> dict[str, float]:
    """Token-level overlap precision/recall/F1 after lowercasing and stemming."""
    ref = Counter(plain_tokens(reference))
    cand = Counter(plain_tokens(candidate))
    if not ref and not cand:
        return {"precision": 1.0, "recall": 1.0, "f1": 1.0}
    if not ref or not cand:
        return {"precision": 0.0, "recall": 0.0, "f1": 0.0}
    overlap = sum((ref & cand).values())
    p = overlap / sum(cand.values())
    r = overlap / sum(ref.values())
    f1 = 2 * p * r / (p + r) if p + r else 0.0
    return {"precision": p, "recall": r, "f1": f1}


def overall_nl_score(scores: Sequence[MetricScore]) -> float | None:
    """Unweighted mean over the applicable NL metrics; None when none apply."""
    if not scores:
        return None
    return statistics.fmean(s.value for s in scores)
