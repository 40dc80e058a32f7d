"""Bayesian discrete-hazard models of Test batting, fitted by nested sampling."""

__version__ = "0.1.0"

from .model import (BattingParams, InningsCounts, InningsRecord, effective_average, hazard,
                    log_likelihood, score_pmf, survival)
from .nested import NSConfig, NSRun, NestedSamplingError
from .player import (PlayerPosterior, analyze_player, bayes_factor_vs_constant, compare_players,
                     predictive_effective_average, summarize)
from .priors import InternalParams, LogNormalByMedian, prior_log_density, prior_sample, to_natural
from .summary import SummaryRow

__all__ = [
    "BattingParams", "InningsCounts", "InningsRecord", "InternalParams", "LogNormalByMedian",
    "NSConfig", "NSRun", "NestedSamplingError", "PlayerPosterior", "SummaryRow",
    "analyze_player", "bayes_factor_vs_constant", "compare_players", "effective_average", "hazard",
    "log_likelihood", "predictive_effective_average", "prior_log_density", "prior_sample",
    "score_pmf", "summarize", "survival", "to_natural",
]
