"""Performance measures over pledge-count pmfs and the OL-vs-NL impact analysis."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .core import STATES, ExpertnessMatrix, QualityState, state_index
from .exact import LearningMode, OutcomePMF, expected_counts, outcome_arrays

# deltas within this distance of zero count as "no harm"; they are round-off
HARM_TOL = 1e-12


class MetricKind(str, Enum):
    CONTENTEDNESS = "content"
    SUCCESS1 = "success1"
    SUCCESS2 = "success2"
    PROFIT = "profit"
    EFFECTIVENESS = "effect"

    @classmethod
    def parse(cls, value) -> "MetricKind":
        if isinstance(value, cls):
            return value
        value = str(value).lower()
        aliases = {"contentedness": "content", "effectiveness": "effect", "success": "success1"}
        return cls(aliases.get(value, value))


@dataclass(frozen=True)
class FundingConfig:
    target_count: int
    service_fee_rate: float = 1.0
    n_backers: int = 2

    def __post_init__(self):
        if not 1 <= self.target_count <= self.n_backers:
            raise ValueError(f"target count must lie in [1, {self.n_backers}], got {self.target_count}")
        if not 0.0 <= self.service_fee_rate <= 1.0:
            raise ValueError("service fee rate must lie in [0, 1]")

    @classmethod
    def tight(cls, gamma: float = 1.0) -> "FundingConfig":
        return cls(2, gamma, 2)

    @classmethod
    def relaxed(cls, gamma: float = 1.0) -> "FundingConfig":
        return cls(1, gamma, 2)


# sign of each project's funds in the effectiveness measure, per quality state
_QUALITY_SIGN = np.array([[1, 1], [1, -1], [-1, 1], [-1, -1]], dtype=float)


def _success_from_mass(mass: np.ndarray, target: int) -> tuple[np.ndarray, np.ndarray]:
    marg1 = mass.sum(axis=-1)
    marg2 = mass.sum(axis=-2)
    return marg1[..., target:].sum(axis=-1), marg2[..., target:].sum(axis=-1)


def metrics_from_moments(e1, e2, f1, f2, n_backers: int, gamma: float) -> dict[MetricKind, np.ndarray]:
    """All five measures for the four quality states from pledge moments.

    Every input has shape ``(..., 4)`` with the quality-state axis last.  Profit
    and effectiveness use the product of expected pledges and success
    probability, not the expectation of the product.
    """
    e1, e2, f1, f2 = (np.asarray(a, dtype=float) for a in (e1, e2, f1, f2))
    content = np.stack(
        [e1[..., 0] + e2[..., 0], e1[..., 1], e2[..., 2], n_backers - e1[..., 3] - e2[..., 3]],
        axis=-1,
    )
    funds1, funds2 = e1 * f1, e2 * f2
    return {
        MetricKind.CONTENTEDNESS: content,
        MetricKind.SUCCESS1: f1,
        MetricKind.SUCCESS2: f2,
        MetricKind.PROFIT: gamma * (funds1 + funds2),
        MetricKind.EFFECTIVENESS: funds1 * _QUALITY_SIGN[:, 0] + funds2 * _QUALITY_SIGN[:, 1],
    }


def metric_arrays(masses, cfg: FundingConfig) -> dict[MetricKind, np.ndarray]:
    """Measures from pmf arrays of shape ``(..., 4 states, N+1, N+1)``."""
    masses = np.asarray(masses)
    e1, e2 = expected_counts(masses)
    f1, f2 = _success_from_mass(masses, cfg.target_count)
    return metrics_from_moments(e1, e2, f1, f2, masses.shape[-1] - 1, cfg.service_fee_rate)


def contentedness(pmf: OutcomePMF, state: QualityState) -> float:
    """Expected number of backers without regret."""
    e1, e2 = expected_counts(pmf.mass)
    v = tuple(state)
    if v == (1, 1):
        return float(e1 + e2)
    if v == (1, 0):
        return float(e1)
    if v == (0, 1):
        return float(e2)
    state_index(v)
    return float(pmf.n_backers - e1 - e2)


def success_probability(pmf: OutcomePMF, project: int, cfg: FundingConfig) -> float:
    """``P(n_project >= target)``."""
    if project not in (1, 2):
        raise ValueError("project must be 1 or 2")
    f1, f2 = _success_from_mass(pmf.mass, cfg.target_count)
    return float(f1 if project == 1 else f2)


def platform_profit(pmf: OutcomePMF, cfg: FundingConfig) -> float:
    e1, e2 = expected_counts(pmf.mass)
    f1, f2 = _success_from_mass(pmf.mass, cfg.target_count)
    return float(cfg.service_fee_rate * (e1 * f1 + e2 * f2))


def platform_effectiveness(pmf: OutcomePMF, state: QualityState, cfg: FundingConfig) -> float:
    sign = _QUALITY_SIGN[state_index(state)]
    e1, e2 = expected_counts(pmf.mass)
    f1, f2 = _success_from_mass(pmf.mass, cfg.target_count)
    return float(sign[0] * e1 * f1 + sign[1] * e2 * f2)


def evaluate_metric(metric, pmf: OutcomePMF, state: QualityState, cfg: FundingConfig) -> float:
    metric = MetricKind.parse(metric)
    if metric is MetricKind.CONTENTEDNESS:
        return contentedness(pmf, state)
    if metric is MetricKind.SUCCESS1:
        return success_probability(pmf, 1, cfg)
    if metric is MetricKind.SUCCESS2:
        return success_probability(pmf, 2, cfg)
    if metric is MetricKind.PROFIT:
        return platform_profit(pmf, cfg)
    return platform_effectiveness(pmf, state, cfg)


def impact_delta(metric, state: QualityState, em: ExpertnessMatrix, cfg: FundingConfig) -> float:
    """Metric under observational learning minus metric under no learning."""
    metric = MetricKind.parse(metric)
    v = state_index(state)
    ol = metric_arrays(outcome_arrays(em.rows, LearningMode.OL), cfg)[metric][v]
    nl = metric_arrays(outcome_arrays(em.rows, LearningMode.NL), cfg)[metric][v]
    return float(ol - nl)


def grid_points(step: float) -> np.ndarray:
    """Cell centres ``0.5 + (k + 1/2) * step`` covering the open interval (0.5, 1)."""
    if not 0 < step <= 0.5:
        raise ValueError("grid step must lie in (0, 0.5]")
    count = int(math.ceil(0.5 / step - 1e-9))
    return 0.5 + (np.arange(count) + 0.5) * step


def backer_grid_rows(step: float) -> tuple[np.ndarray, np.ndarray]:
    """Two-backer expertness matrices ``((p1, p1), (p2, p2))`` on the cell-centred grid.

    Returns the grid levels and rows of shape ``(G, G, 2, 2)`` indexed ``[i1, i2]``.
    """
    levels = grid_points(step)
    p1, p2 = np.meshgrid(levels, levels, indexing="ij")
    rows = np.stack([np.stack([p1, p1], -1), np.stack([p2, p2], -1)], axis=-2)
    return levels, rows


def delta_surfaces(cfg: FundingConfig, grid_step: float) -> tuple[np.ndarray, dict[MetricKind, np.ndarray]]:
    """OL-minus-NL deltas on the grid, each of shape ``(G, G, 4 states)``."""
    if cfg.n_backers != 2:
        raise ValueError("impact surfaces are defined for the two-backer system")
    levels, rows = backer_grid_rows(grid_step)
    ol = metric_arrays(outcome_arrays(rows, LearningMode.OL), cfg)
    nl = metric_arrays(outcome_arrays(rows, LearningMode.NL), cfg)
    return levels, {m: ol[m] - nl[m] for m in MetricKind}


@dataclass(frozen=True)
class ImpactCell:
    """Impact summary of one (metric, quality state) pair.

    ``max_improvement`` is ``None`` when no grid point has a non-negative delta
    and ``max_harm`` is ``None`` when no grid point has a negative one.
    """

    max_improvement: float | None
    max_harm: float | None
    average_impact: float
    improvement_fraction: float
    n_improve: int
    n_harm: int


@dataclass
class ImpactReport:
    cfg: FundingConfig
    grid_step: float
    cells: dict[tuple[MetricKind, QualityState], ImpactCell] = field(default_factory=dict)

    def __getitem__(self, key) -> ImpactCell:
        metric, state = key
        return self.cells[(MetricKind.parse(metric), tuple(state))]

    def rows(self):
        for (metric, state), cell in self.cells.items():
            yield metric, state, cell


def summarize_delta(delta: np.ndarray) -> ImpactCell:
    """Extremes, improvement share and uniform average of a delta surface.

    The average is the midpoint rule for ``2**N`` times the integral over
    ``(0.5, 1)**N``, i.e. the plain mean of equally weighted cell centres.
    """
    delta = np.asarray(delta, dtype=float)
    harm = delta < -HARM_TOL
    n_harm = int(harm.sum())
    n_improve = int(delta.size - n_harm)
    return ImpactCell(
        max_improvement=float(delta[~harm].max()) if n_improve else None,
        max_harm=float(delta[harm].min()) if n_harm else None,
        average_impact=float(delta.mean()),
        improvement_fraction=n_improve / delta.size,
        n_improve=n_improve,
        n_harm=n_harm,
    )


def impact_report(cfg: FundingConfig, grid_step: float = 0.005) -> ImpactReport:
    if not 0 < grid_step <= 0.05:
        raise ValueError("grid step must lie in (0, 0.05]")
    _, surfaces = delta_surfaces(cfg, grid_step)
    report = ImpactReport(cfg, grid_step)
    for metric in MetricKind:
        for v, state in enumerate(STATES):
            report.cells[(metric, state)] = summarize_delta(surfaces[metric][..., v])
    return report
