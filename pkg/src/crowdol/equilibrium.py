"""Creators' quality choice before launch, with success probability as profitability.

A high-quality project pays an extra development cost ``c``; both creators
know the backers' expertness.  The equilibrium quality state is chosen by the
case analysis in :func:`equilibrium_codes`, whose strict and weak inequalities
decide ties with no tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .core import STATES, ExpertnessMatrix, QualityState, check_expertness, state_index
from .exact import LearningMode, outcome_arrays
from .metrics import FundingConfig, MetricKind, grid_points, metric_arrays

DEFAULT_EQ_STEP = 0.01
COST_GRID = tuple(round(0.1 * k, 1) for k in range(11))

_I11, _I10, _I01, _I00 = (STATES.index(s) for s in ((1, 1), (1, 0), (0, 1), (0, 0)))


class SchemeKind(str, Enum):
    BACKER = "backer"
    PROJECT = "project"


@dataclass(frozen=True)
class ExpertnessScheme:
    """Two-backer expertness built from two levels.

    ``BACKER``: rows ``((p1, p1), (p2, p2))``, levels belong to the early and late backer.
    ``PROJECT``: rows ``((p1, p2), (p1, p2))``, levels belong to project 1 and project 2.
    """

    kind: SchemeKind
    p1: float
    p2: float

    def __post_init__(self):
        object.__setattr__(self, "kind", SchemeKind(self.kind))
        check_expertness([self.p1, self.p2])

    @classmethod
    def backer(cls, p1: float, p2: float) -> "ExpertnessScheme":
        return cls(SchemeKind.BACKER, p1, p2)

    @classmethod
    def project(cls, p1: float, p2: float) -> "ExpertnessScheme":
        return cls(SchemeKind.PROJECT, p1, p2)

    def matrix(self) -> ExpertnessMatrix:
        return ExpertnessMatrix(scheme_rows(self.kind, np.asarray(self.p1), np.asarray(self.p2)))


def scheme_rows(kind, p1, p2) -> np.ndarray:
    """Expertness rows of shape ``(..., 2, 2)`` for broadcastable level arrays."""
    p1, p2 = np.broadcast_arrays(np.asarray(p1, float), np.asarray(p2, float))
    if SchemeKind(kind) is SchemeKind.BACKER:
        return np.stack([np.stack([p1, p1], -1), np.stack([p2, p2], -1)], axis=-2)
    row = np.stack([p1, p2], -1)
    return np.stack([row, row], axis=-2)


def success_table(rows, cfg: FundingConfig, mode) -> tuple[np.ndarray, np.ndarray]:
    """Success probabilities of both projects in all four states, each ``(..., 4)``."""
    m = metric_arrays(outcome_arrays(rows, mode), cfg)
    return m[MetricKind.SUCCESS1], m[MetricKind.SUCCESS2]


def net_profitability(project: int, state: QualityState, em: ExpertnessMatrix, cfg: FundingConfig, mode, c: float) -> float:
    if project not in (1, 2):
        raise ValueError("project must be 1 or 2")
    if not 0.0 <= c <= 1.0:
        raise ValueError("development cost must lie in [0, 1]")
    s1, s2 = success_table(em.rows, cfg, mode)
    v = state_index(state)
    success = (s1 if project == 1 else s2)[v]
    return float(success - (c if state[project - 1] == 1 else 0.0))


def equilibrium_codes(s1: np.ndarray, s2: np.ndarray, c: float, symmetric=False) -> np.ndarray:
    """Index into ``STATES`` of the equilibrium quality state, elementwise.

    Cases are tried in the order (1,1), (1,0), (0,1) and fall back to (0,0).
    Where ``symmetric`` is true (a bool or a mask broadcasting against the
    grid) only the symmetric profiles (1,1) and (0,0) are considered.  That is
    how payoff-symmetric conditions are read: both creators face identical
    success tables, and a one-high-one-low outcome would have to single one of
    them out.
    """
    high_high = (s1[..., _I11] - c > s1[..., _I01]) & (s2[..., _I11] - c > s2[..., _I10])
    high_low = (s1[..., _I10] - c > s1[..., _I00]) & (s2[..., _I10] >= s2[..., _I11] - c)
    low_high = (s1[..., _I01] >= s1[..., _I11] - c) & (s2[..., _I01] - c > s2[..., _I00])
    literal = np.select([high_high, high_low, low_high], [_I11, _I10, _I01], default=_I00)
    return np.where(symmetric, np.where(high_high, _I11, _I00), literal)


def _symmetric_mask(kind, p1, p2, literal: bool):
    """Payoff-symmetric conditions: the whole backer scheme, the diagonal of the project scheme."""
    if literal:
        return False
    if SchemeKind(kind) is SchemeKind.BACKER:
        return True
    return np.asarray(p1) == np.asarray(p2)


def equilibrium_state(scheme: ExpertnessScheme, cfg: FundingConfig, mode, c: float, literal: bool = False) -> QualityState:
    """Equilibrium quality state for one expertness scheme.

    ``literal=True`` applies all four cases at payoff-symmetric conditions as
    well, which can return (1,0) where both one-high-one-low profiles are
    mutual best responses.
    """
    if not 0.0 <= c <= 1.0:
        raise ValueError("development cost must lie in [0, 1]")
    s1, s2 = success_table(scheme.matrix().rows, cfg, mode)
    sym = _symmetric_mask(scheme.kind, scheme.p1, scheme.p2, literal)
    return STATES[int(equilibrium_codes(s1, s2, c, sym))]


@dataclass
class EquilibriumMap:
    kind: SchemeKind
    levels: np.ndarray
    codes: np.ndarray  # (G, G) indices into STATES, [i1, i2] for levels (p1, p2)

    def state_at(self, i1: int, i2: int) -> QualityState:
        return STATES[int(self.codes[i1, i2])]

    def fraction(self, state: QualityState) -> float:
        return float(np.mean(self.codes == state_index(state)))


def _grid_successes(kind, cfg: FundingConfig, mode, grid_step: float):
    levels = grid_points(grid_step)
    p1, p2 = np.meshgrid(levels, levels, indexing="ij")
    s1, s2 = success_table(scheme_rows(kind, p1, p2), cfg, mode)
    return levels, p1, p2, s1, s2


def equilibrium_map(
    kind, cfg: FundingConfig, mode, c: float, grid_step: float = DEFAULT_EQ_STEP, literal: bool = False
) -> EquilibriumMap:
    if not 0.0 <= c <= 1.0:
        raise ValueError("development cost must lie in [0, 1]")
    levels, p1, p2, s1, s2 = _grid_successes(kind, cfg, mode, grid_step)
    sym = _symmetric_mask(kind, p1, p2, literal)
    return EquilibriumMap(SchemeKind(kind), levels, equilibrium_codes(s1, s2, c, sym))


def high_quality_fraction(cfg: FundingConfig, mode, c: float, grid_step: float = DEFAULT_EQ_STEP) -> float:
    """Share of backer-asymmetric expertness conditions whose equilibrium is (1,1)."""
    return equilibrium_map(SchemeKind.BACKER, cfg, mode, c, grid_step).fraction((1, 1))


def high_quality_fractions(cfg: FundingConfig, costs=COST_GRID, grid_step: float = DEFAULT_EQ_STEP) -> list[tuple[float, float, float]]:
    """``(c, OL fraction, NL fraction)`` for each development cost."""
    grids = {mode: _grid_successes(SchemeKind.BACKER, cfg, mode, grid_step) for mode in LearningMode}
    out = []
    for c in costs:
        frac = {}
        for mode, (_, _, _, s1, s2) in grids.items():
            frac[mode] = float(np.mean(equilibrium_codes(s1, s2, c, symmetric=True) == _I11))
        out.append((float(c), frac[LearningMode.OL], frac[LearningMode.NL]))
    return out
