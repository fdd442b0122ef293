"""Observational learning in two-project all-or-nothing crowdfunding.

Exact path enumeration for small backer populations, Monte Carlo simulation
for large ones, OL-versus-NL impact metrics and creators' quality equilibria.
"""

from .core import (
    SIGNAL_PAIRS,
    STATES,
    Decision,
    DegenerateHistoryError,
    ExpertnessError,
    ExpertnessMatrix,
    HistoryLikelihoods,
)
from .equilibrium import ExpertnessScheme, SchemeKind, equilibrium_map, equilibrium_state, high_quality_fraction
from .exact import EnumerationSizeError, LearningMode, OutcomePMF, outcome_distribution
from .metrics import FundingConfig, MetricKind, impact_report
from .montecarlo import SimConfig, SimEstimates, estimate_metrics, figure9_experiment

__version__ = "0.1.0"

__all__ = [
    "SIGNAL_PAIRS",
    "STATES",
    "Decision",
    "DegenerateHistoryError",
    "EnumerationSizeError",
    "ExpertnessError",
    "ExpertnessMatrix",
    "ExpertnessScheme",
    "FundingConfig",
    "HistoryLikelihoods",
    "LearningMode",
    "MetricKind",
    "OutcomePMF",
    "SchemeKind",
    "SimConfig",
    "SimEstimates",
    "equilibrium_map",
    "equilibrium_state",
    "estimate_metrics",
    "figure9_experiment",
    "high_quality_fraction",
    "impact_report",
    "outcome_distribution",
]
