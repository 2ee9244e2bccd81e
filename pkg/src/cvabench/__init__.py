"""Benchmarking toolkit for conversational visual analytics: graded
visualization and language metrics, multi-model experiment orchestration,
and validation statistics."""

__version__ = "0.1.0"

from .core import (
    Datasource,
    DataField,
    ExperimentConfig,
    MetricScore,
    ModelResponse,
    SchemaError,
    TestCase,
    VizSpec,
    load_datasource,
    load_test_suite,
    select_test_cases,
)
from .specs import SpecDiff, axes_swapped, canon, cos_sim_stems, diff_specs
from .vizmetrics import overall_viz_score, score_viz_pair, show_me_recommend
from .nlmetrics import nlg_prf, overall_nl_score, scale_judge_score, score_factual_grounding
from .statsval import RatingSeries, preference_scores, spearman_rho, weighted_kappa

__all__ = [
    "Datasource",
    "DataField",
    "ExperimentConfig",
    "MetricScore",
    "ModelResponse",
    "SchemaError",
    "TestCase",
    "VizSpec",
    "SpecDiff",
    "RatingSeries",
    "axes_swapped",
    "canon",
    "cos_sim_stems",
    "diff_specs",
    "load_datasource",
    "load_test_suite",
    "nlg_prf",
    "overall_nl_score",
    "overall_viz_score",
    "preference_scores",
    "scale_judge_score",
    "score_factual_grounding",
    "score_viz_pair",
    "select_test_cases",
    "show_me_recommend",
    "spearman_rho",
    "weighted_kappa",
]
