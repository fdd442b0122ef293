"""Exact outcome distributions by enumerating every decision path.

The enumeration expands all ``3**N`` decision paths one backer at a time.
Each prefix carries its history likelihoods ``P(x_1..x_j | V)`` for all four
quality states, which is also the probability of the prefix itself, so the
work per prefix is constant and nothing is recomputed.  Paths are kept in
lexicographic order; the paths landing in one pledge-count cell are summed in
sorted order, so results are reproducible bit for bit and exactly symmetric
under exchanging the two projects.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .core import (
    STATES,
    ExpertnessMatrix,
    QualityState,
    decision_likelihoods,
    nl_decision_likelihoods,
    state_index,
)

MAX_EXACT_BACKERS = 12


class LearningMode(str, Enum):
    OL = "ol"
    NL = "nl"

    @classmethod
    def parse(cls, value) -> "LearningMode":
        if isinstance(value, cls):
            return value
        return cls(str(value).lower())


class EnumerationSizeError(ValueError):
    """Too many backers for exhaustive enumeration; use Monte Carlo instead."""


@dataclass(frozen=True, eq=False)
class OutcomePMF:
    """Joint pmf of pledge counts; ``mass[n1, n2] = P(n_1 = n1, n_2 = n2)``."""

    mass: np.ndarray
    n_backers: int

    def __getitem__(self, key) -> float:
        n1, n2 = key
        if n1 < 0 or n2 < 0 or n1 > self.n_backers or n2 > self.n_backers:
            return 0.0
        return float(self.mass[n1, n2])

    def as_dict(self, min_mass: float = 0.0) -> dict[tuple[int, int], float]:
        out = {}
        for n1 in range(self.n_backers + 1):
            for n2 in range(self.n_backers + 1 - n1):
                m = float(self.mass[n1, n2])
                if m > min_mass:
                    out[(n1, n2)] = m
        return out

    def total(self) -> float:
        return float(self.mass.sum())

    def swapped(self) -> "OutcomePMF":
        return OutcomePMF(self.mass.T.copy(), self.n_backers)


def _check_size(n_backers: int) -> None:
    if n_backers > MAX_EXACT_BACKERS:
        raise EnumerationSizeError(
            f"exact enumeration supports at most {MAX_EXACT_BACKERS} backers, got {n_backers}"
        )


def path_probability(path: Sequence[int], state: QualityState, em: ExpertnessMatrix, mode) -> float:
    """Probability of one full decision path given the true quality state."""
    mode = LearningMode.parse(mode)
    if len(path) != em.n_backers:
        raise ValueError(f"path has {len(path)} decisions but there are {em.n_backers} backers")
    v = state_index(state)
    hist = np.ones(4)
    for row, x in zip(em.rows, path):
        if mode is LearningMode.OL:
            step = decision_likelihoods(hist, row)
        else:
            step = nl_decision_likelihoods(row)
        hist = hist * step[:, int(x)]
    return float(hist[v])


def enumerate_paths(rows, mode) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Probabilities of all decision paths for a batch of expertness matrices.

    Parameters
    ----------
    rows
        Array of shape ``(..., N, 2)``.
    mode
        ``LearningMode.OL`` or ``LearningMode.NL``.

    Returns
    -------
    probs
        Shape ``(..., 3**N, 4)``: path probability under each quality state,
        paths in lexicographic order of ``(x_1, ..., x_N)``.
    n1, n2
        Pledge counts of each path, shape ``(3**N,)``.
    """
    mode = LearningMode.parse(mode)
    rows = np.asarray(rows, dtype=float)
    n = rows.shape[-2]
    _check_size(n)
    batch = rows.shape[:-2]
    hist = np.ones(batch + (1, 4))
    n1 = np.zeros(1, dtype=np.int64)
    n2 = np.zeros(1, dtype=np.int64)
    for j in range(n):
        row = rows[..., j, :]
        if mode is LearningMode.OL:
            step = decision_likelihoods(hist, row[..., None, :])
        else:
            step = np.broadcast_to(nl_decision_likelihoods(row)[..., None, :, :], hist.shape + (3,))
        # (..., P, 4, 3) -> (..., P, 3, 4) -> (..., 3P, 4), prefix-major order
        hist = (hist[..., :, :, None] * step).swapaxes(-1, -2).reshape(batch + (-1, 4))
        n1 = (n1[:, None] + np.array([0, 1, 0])).reshape(-1)
        n2 = (n2[:, None] + np.array([0, 0, 1])).reshape(-1)
    return hist, n1, n2


def outcome_arrays(rows, mode) -> np.ndarray:
    """Joint pledge-count pmfs, shape ``(..., 4 states, N+1, N+1)``."""
    probs, n1, n2 = enumerate_paths(rows, mode)
    n = np.asarray(rows).shape[-2]
    cell = n1 * (n + 1) + n2
    order = np.argsort(cell, kind="stable")
    cells, starts = np.unique(cell[order], return_index=True)
    probs = probs[..., order, :]
    flat = np.zeros(probs.shape[:-2] + ((n + 1) ** 2, 4))
    for c, lo, hi in zip(cells, starts, list(starts[1:]) + [len(order)]):
        # summing sorted terms makes the result independent of path order
        flat[..., c, :] = np.sort(probs[..., lo:hi, :], axis=-2).sum(axis=-2)
    return np.moveaxis(flat, -1, -2).reshape(probs.shape[:-2] + (4, n + 1, n + 1))


def outcome_distribution(state: QualityState, em: ExpertnessMatrix, mode) -> OutcomePMF:
    _check_size(em.n_backers)
    mass = outcome_arrays(em.rows, mode)[state_index(state)]
    return OutcomePMF(mass, em.n_backers)


def all_outcome_distributions(em: ExpertnessMatrix, mode) -> dict[QualityState, OutcomePMF]:
    _check_size(em.n_backers)
    masses = outcome_arrays(em.rows, mode)
    return {s: OutcomePMF(masses[i], em.n_backers) for i, s in enumerate(STATES)}


def expected_counts(mass) -> tuple[np.ndarray, np.ndarray]:
    """``E[n_1], E[n_2]`` from pmf arrays of shape ``(..., N+1, N+1)``."""
    mass = np.asarray(mass)
    k = np.arange(mass.shape[-1])
    return mass.sum(axis=-1) @ k, mass.sum(axis=-2) @ k


def expected_pledges(pmf: OutcomePMF) -> tuple[float, float]:
    e1, e2 = expected_counts(pmf.mass)
    return float(e1), float(e2)
