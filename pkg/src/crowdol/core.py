"""Probabilistic primitives of the two-project observational-learning model.

Quality states, signal pairs and decisions are indexed in a fixed order that
every array in the package follows:

* quality states ``(1,1), (1,0), (0,1), (0,0)``  -> axis of length 4
* signal pairs ``HH, HL, LH, LL``                  -> axis of length 4
* decisions ``none, project 1, project 2``        -> axis of length 3

All array functions broadcast over leading batch axes, so an expertness row may
be a pair of floats or an array of shape ``(..., 2)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum
from typing import Sequence, Tuple

import numpy as np

QualityState = Tuple[int, int]
SignalPair = Tuple[str, str]

STATES: tuple[QualityState, ...] = ((1, 1), (1, 0), (0, 1), (0, 0))
SIGNAL_PAIRS: tuple[SignalPair, ...] = (("H", "H"), ("H", "L"), ("L", "H"), ("L", "L"))

_STATE_BITS = np.array(STATES, dtype=bool)
_SIGNAL_BITS = np.array([[s == "H" for s in pair] for pair in SIGNAL_PAIRS], dtype=bool)
# _MATCH[s, v, i]: signal pair s agrees with state v on project i
_MATCH = _SIGNAL_BITS[:, None, :] == _STATE_BITS[None, :, :]


class Decision(IntEnum):
    NONE = 0
    PROJECT1 = 1
    PROJECT2 = 2


class ExpertnessError(ValueError):
    """An expertness level lies outside [0.5, 1]."""


class DegenerateHistoryError(ValueError):
    """A posterior was requested for an information set of probability zero."""


def state_index(state: Sequence[int]) -> int:
    key = (int(state[0]), int(state[1]))
    if key not in STATES:
        raise ValueError(f"invalid quality state {state!r}")
    return STATES.index(key)


def signal_index(signals: Sequence[str]) -> int:
    key = (str(signals[0]).upper(), str(signals[1]).upper())
    if key not in SIGNAL_PAIRS:
        raise ValueError(f"invalid signal pair {signals!r}")
    return SIGNAL_PAIRS.index(key)


def swap_state(state: Sequence[int]) -> QualityState:
    return (int(state[1]), int(state[0]))


def check_expertness(values) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.size and (np.isnan(arr).any() or arr.min() < 0.5 or arr.max() > 1.0):
        raise ExpertnessError("expertness levels must lie in [0.5, 1]")
    return arr


@dataclass(frozen=True, eq=False)
class ExpertnessMatrix:
    """Per-backer, per-project signal accuracies, shape ``(N, 2)``.

    Row ``j`` holds backer ``j``'s accuracy for project 1 and project 2.
    """

    rows: np.ndarray

    def __post_init__(self):
        arr = check_expertness(self.rows)
        if arr.ndim != 2 or arr.shape[1] != 2 or arr.shape[0] < 1:
            raise ExpertnessError(f"expected an (N, 2) matrix, got shape {arr.shape}")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "rows", arr)

    @classmethod
    def backer_asymmetric(cls, levels: Sequence[float]) -> "ExpertnessMatrix":
        """Each backer has the same accuracy for both projects."""
        levels = np.asarray(levels, dtype=float)
        return cls(np.column_stack([levels, levels]))

    @classmethod
    def project_asymmetric(cls, p_project1: float, p_project2: float, n_backers: int = 2) -> "ExpertnessMatrix":
        """Every backer has accuracy ``p_project1`` for project 1 and ``p_project2`` for project 2."""
        return cls(np.tile([p_project1, p_project2], (n_backers, 1)))

    @classmethod
    def half_half(cls, p_first: float, p_second: float, n_backers: int) -> "ExpertnessMatrix":
        """First half of the backers at ``p_first``, second half at ``p_second``."""
        if n_backers % 2:
            raise ValueError("half/half expertness requires an even number of backers")
        half = n_backers // 2
        return cls.backer_asymmetric([p_first] * half + [p_second] * half)

    @property
    def n_backers(self) -> int:
        return self.rows.shape[0]

    def swapped(self) -> "ExpertnessMatrix":
        """Exchange the roles of the two projects."""
        return ExpertnessMatrix(self.rows[:, ::-1])

    def __len__(self) -> int:
        return self.n_backers

    def __eq__(self, other) -> bool:
        return isinstance(other, ExpertnessMatrix) and np.array_equal(self.rows, other.rows)

    def __repr__(self) -> str:
        return f"ExpertnessMatrix({self.rows.tolist()!r})"


@dataclass(frozen=True, eq=False)
class HistoryLikelihoods:
    """Unnormalized ``P(x_1, ..., x_step | V)`` for the four quality states."""

    likelihood: np.ndarray
    step: int = 0

    @classmethod
    def empty(cls) -> "HistoryLikelihoods":
        return cls(np.ones(4), 0)

    def __post_init__(self):
        arr = np.asarray(self.likelihood, dtype=float)
        if arr.shape[-1] != 4:
            raise ValueError("history likelihoods need one entry per quality state")
        object.__setattr__(self, "likelihood", arr)


def signal_likelihood_matrix(row) -> np.ndarray:
    """``L[..., s, v] = P(signal pair s | state v)`` for an expertness row.

    ``row`` has shape ``(..., 2)``; the result has shape ``(..., 4, 4)``.
    """
    p = np.asarray(row, dtype=float)[..., None, None, :]
    per_project = np.where(_MATCH, p, 1.0 - p)
    return per_project[..., 0] * per_project[..., 1]


def signal_pair_likelihood(signals: SignalPair, state: QualityState, row) -> float:
    row = check_expertness(row)
    return float(signal_likelihood_matrix(row)[..., signal_index(signals), state_index(state)])


def prior_belief() -> np.ndarray:
    """Uniform belief over the four quality states (unbiased backers)."""
    return np.full(4, 0.25)


def _swap_sum(terms: np.ndarray, axis: int) -> np.ndarray:
    """Sum over a length-4 state or signal axis, pairing swap-fixed and swapped entries.

    The grouping ``(t0 + t3) + (t1 + t2)`` is invariant under exchanging the
    projects, which keeps project-swap symmetry exact in floating point.
    """
    t = np.moveaxis(terms, axis, 0)
    return (t[0] + t[3]) + (t[1] + t[2])


def _normalize(weights: np.ndarray) -> np.ndarray:
    total = _swap_sum(weights, -1)[..., None]
    # zero-mass rows only arise for information sets that cannot occur; their
    # value never reaches a probability because it is weighted by zero
    safe = np.where(total > 0, total, 1.0)
    return np.where(total > 0, weights / safe, 0.25)


def posterior(signals: SignalPair, hist: HistoryLikelihoods | None, row) -> np.ndarray:
    """Belief over quality states after private signals and observed history."""
    row = check_expertness(row)
    h = HistoryLikelihoods.empty().likelihood if hist is None else np.asarray(hist.likelihood, dtype=float)
    if np.any(h < 0) or not np.any(h > 0):
        raise DegenerateHistoryError("history likelihoods must be non-negative with a positive entry")
    weights = signal_likelihood_matrix(row)[signal_index(signals)] * h
    total = _swap_sum(weights, -1)
    if total <= 0:
        raise DegenerateHistoryError(f"signals {signals} are impossible given the observed history")
    return weights / total


def all_posteriors(hist_likelihood, row) -> np.ndarray:
    """Posterior for every signal pair at once, shape ``(..., 4 signals, 4 states)``."""
    L = signal_likelihood_matrix(row)
    return _normalize(L * np.asarray(hist_likelihood, dtype=float)[..., None, :])


def pledge_distribution(belief) -> np.ndarray:
    """Probabilistic pledging rule: mass on (1,1) is split evenly between the projects."""
    b = np.asarray(belief, dtype=float)
    both = 0.5 * b[..., 0]
    return np.stack([b[..., 3], b[..., 1] + both, b[..., 2] + both], axis=-1)


def decision_likelihoods(hist_likelihood, row) -> np.ndarray:
    """``P(x_j = x | history, V)`` as an array of shape ``(..., 4 states, 3 decisions)``.

    Marginalizes the acting backer's unobserved signals.
    """
    L = signal_likelihood_matrix(row)
    pledge = pledge_distribution(all_posteriors(hist_likelihood, row))
    return _swap_sum(L[..., :, :, None] * pledge[..., :, None, :], -3)


def decision_likelihood_given_state(hist: HistoryLikelihoods, state: QualityState, row) -> np.ndarray:
    row = check_expertness(row)
    return decision_likelihoods(hist.likelihood, row)[..., state_index(state), :]


def history_update(hist: HistoryLikelihoods, observed: int, row) -> HistoryLikelihoods:
    """Absorb one observed decision by the backer with expertness ``row``."""
    observed = Decision(observed)
    row = check_expertness(row)
    step = decision_likelihoods(hist.likelihood, row)[..., observed]
    return HistoryLikelihoods(hist.likelihood * step, hist.step + 1)


def nl_decision_table(row) -> np.ndarray:
    """Decision distribution for each signal pair with no learning, shape ``(..., 4, 3)``."""
    return pledge_distribution(all_posteriors(np.ones(4), row))


def nl_decision_distribution(signals: SignalPair, row) -> np.ndarray:
    row = check_expertness(row)
    return nl_decision_table(row)[..., signal_index(signals), :]


def nl_decision_likelihoods(row) -> np.ndarray:
    """``P(x = x | V)`` with no learning, shape ``(..., 4 states, 3 decisions)``."""
    return decision_likelihoods(np.ones(4), row)
