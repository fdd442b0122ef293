"""Closed-form two-backer expressions used to cross-check the recursion.

Everything here is written out by hand from the algebraic forms of the
two-backer system and deliberately avoids the recursion in :mod:`crowdol.core`,
so agreement between the two is meaningful.

Notation: the leader has accuracies ``a`` (project 1) and ``b`` (project 2);
the follower has ``u`` and ``w``.  With ``q`` a leader accuracy::

    A(q) = q**2 + (1 - q)**2      probability two draws agree
    B(q) = 2 q (1 - q)            probability two draws disagree
    C(q) = 1/2 + q - q**2
    D(q) = 1 - q + q**2
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .core import SIGNAL_PAIRS, STATES, ExpertnessMatrix, HistoryLikelihoods
from .core import decision_likelihoods, posterior, pledge_distribution
from .exact import LearningMode, enumerate_paths, outcome_arrays, path_probability

ORACLE_TOL = 1e-10
EQUIV_TOL = 1e-12
DEFAULT_LEVELS = (0.55, 0.65, 0.75, 0.85, 0.95)


def _A(q):
    return q**2 + (1 - q) ** 2


def _B(q):
    return 2 * q * (1 - q)


def _C(q):
    return 0.5 + q - q**2


def _D(q):
    return 1 - q + q**2


def first_backer_signal_decisions(a, b) -> dict[tuple[str, str], tuple[float, float, float]]:
    """Leader's ``(P(x=0), P(x=1), P(x=2))`` for each signal pair."""
    return {
        ("H", "H"): ((1 - a) * (1 - b), a * (1 - b / 2), b * (1 - a / 2)),
        ("H", "L"): (b * (1 - a), a * (1 + b) / 2, (1 - b) * (1 - a / 2)),
        ("L", "H"): (a * (1 - b), (1 - a) * (1 - b / 2), b * (1 + a) / 2),
        ("L", "L"): (a * b, (1 - a) * (1 + b) / 2, (1 - b) * (1 + a) / 2),
    }


def first_backer_likelihoods(a, b) -> dict[tuple[int, tuple[int, int]], float]:
    """``P(x_1 = x | V)`` keyed by ``(x, V)``."""
    A1, B1, C1, D1 = _A(a), _B(a), _C(a), _D(a)
    A2, B2, C2, D2 = _A(b), _B(b), _C(b), _D(b)
    return {
        (1, (1, 1)): A1 * C2,
        (1, (1, 0)): A1 * D2,
        (1, (0, 1)): B1 * C2,
        (1, (0, 0)): B1 * D2,
        (2, (1, 1)): A2 * C1,
        (2, (1, 0)): B2 * C1,
        (2, (0, 1)): A2 * D1,
        (2, (0, 0)): B2 * D1,
        (0, (1, 1)): B1 * B2,
        (0, (1, 0)): B1 * A2,
        (0, (0, 1)): B2 * A1,
        (0, (0, 0)): A1 * A2,
    }


def second_backer_posteriors(a, b, u, w) -> dict[tuple[tuple[str, str], int], dict[tuple[int, int], float]]:
    """Follower's posterior for all twelve (signal pair, leader decision) scenarios."""
    A1, B1, C1, D1 = _A(a), _B(a), _C(a), _D(a)
    A2, B2, C2, D2 = _A(b), _B(b), _C(b), _D(b)
    table = {
        (("H", "H"), 1): (
            (u * w * A1 * C2, u * (1 - w) * A1 * D2, (1 - u) * w * B1 * C2, (1 - u) * (1 - w) * B1 * D2),
            (u + B1 * (1 - 2 * u)) * (1 - w / 2 + B2 * (w - 0.5)),
        ),
        (("H", "H"), 2): (
            (u * w * A2 * C1, u * (1 - w) * B2 * C1, (1 - u) * w * A2 * D1, (1 - u) * (1 - w) * B2 * D1),
            (w + B2 * (1 - 2 * w)) * (1 - u / 2 + B1 * (u - 0.5)),
        ),
        (("H", "H"), 0): (
            (u * w * B1 * B2, u * (1 - w) * B1 * A2, (1 - u) * w * B2 * A1, (1 - u) * (1 - w) * A1 * A2),
            (1 - w + B2 * (2 * w - 1)) * (1 - u + B1 * (2 * u - 1)),
        ),
        (("H", "L"), 1): (
            (u * (1 - w) * A1 * C2, u * w * A1 * D2, (1 - u) * (1 - w) * B1 * C2, (1 - u) * w * B1 * D2),
            (u + B1 * (1 - 2 * u)) * ((1 + w) / 2 + B2 * (0.5 - w)),
        ),
        (("H", "L"), 2): (
            (u * (1 - w) * A2 * C1, u * w * B2 * C1, (1 - u) * (1 - w) * A2 * D1, (1 - u) * w * B2 * D1),
            (1 - u / 2 + B1 * (u - 0.5)) * (1 - w + B2 * (2 * w - 1)),
        ),
        (("H", "L"), 0): (
            (u * (1 - w) * B1 * B2, u * w * B1 * A2, (1 - u) * (1 - w) * B2 * A1, (1 - u) * w * A1 * A2),
            (1 - u + B1 * (2 * u - 1)) * (w + B2 * (1 - 2 * w)),
        ),
        (("L", "H"), 1): (
            ((1 - u) * w * A1 * C2, (1 - u) * (1 - w) * A1 * D2, u * w * B1 * C2, u * (1 - w) * B1 * D2),
            (1 - u + B1 * (2 * u - 1)) * (1 - w / 2 + B2 * (w - 0.5)),
        ),
        (("L", "H"), 2): (
            ((1 - u) * w * A2 * C1, (1 - u) * (1 - w) * B2 * C1, u * w * A2 * D1, u * (1 - w) * B2 * D1),
            ((1 + u) / 2 + B1 * (0.5 - u)) * (w + B2 * (1 - 2 * w)),
        ),
        (("L", "H"), 0): (
            ((1 - u) * w * B1 * B2, (1 - u) * (1 - w) * B1 * A2, u * w * B2 * A1, u * (1 - w) * A1 * A2),
            (u + B1 * (1 - 2 * u)) * (1 - w + B2 * (2 * w - 1)),
        ),
        (("L", "L"), 1): (
            ((1 - u) * (1 - w) * A1 * C2, (1 - u) * w * A1 * D2, u * (1 - w) * B1 * C2, u * w * B1 * D2),
            (1 - u + B1 * (2 * u - 1)) * ((1 + w) / 2 + B2 * (0.5 - w)),
        ),
        (("L", "L"), 2): (
            ((1 - u) * (1 - w) * A2 * C1, (1 - u) * w * B2 * C1, u * (1 - w) * A2 * D1, u * w * B2 * D1),
            ((1 + u) / 2 + B1 * (0.5 - u)) * (1 - w + B2 * (2 * w - 1)),
        ),
        (("L", "L"), 0): (
            ((1 - u) * (1 - w) * B1 * B2, (1 - u) * w * B1 * A2, u * (1 - w) * B2 * A1, u * w * A1 * A2),
            (u + B1 * (1 - 2 * u)) * (w + B2 * (1 - 2 * w)),
        ),
    }
    return {key: dict(zip(STATES, (n / den for n in nums))) for key, (nums, den) in table.items()}


def _signal_prob(signals, state, p1, p2) -> float:
    f1 = p1 if (signals[0] == "H") == (state[0] == 1) else 1 - p1
    f2 = p2 if (signals[1] == "H") == (state[1] == 1) else 1 - p2
    return f1 * f2


def joint_path_probabilities(a, b, u, w) -> dict[tuple[int, int, tuple[int, int]], float]:
    """``P(x_1, x_2 | V)`` for all nine paths and four states, from the closed forms."""
    first = first_backer_likelihoods(a, b)
    post = second_backer_posteriors(a, b, u, w)
    out = {}
    for x1 in (0, 1, 2):
        for state in STATES:
            follow = np.zeros(3)
            for signals in SIGNAL_PAIRS:
                belief = post[(signals, x1)]
                pledge = (
                    belief[(0, 0)],
                    belief[(1, 0)] + 0.5 * belief[(1, 1)],
                    belief[(0, 1)] + 0.5 * belief[(1, 1)],
                )
                follow += np.array(pledge) * _signal_prob(signals, state, u, w)
            for x2 in (0, 1, 2):
                out[(x1, x2, state)] = first[(x1, state)] * follow[x2]
    return out


@dataclass
class CheckResult:
    name: str
    max_deviation: float
    tolerance: float
    detail: str = ""

    @property
    def passed(self) -> bool:
        return bool(self.max_deviation <= self.tolerance)


@dataclass
class OracleReport:
    checks: list[CheckResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def max_deviation(self) -> float:
        return max((c.max_deviation for c in self.checks), default=0.0)


def default_oracle_grid(levels=DEFAULT_LEVELS) -> list[ExpertnessMatrix]:
    return [ExpertnessMatrix(np.array([[a, b], [u, w]])) for a, b, u, w in itertools.product(levels, repeat=4)]


def supplement_oracle_check(grid=None) -> OracleReport:
    """Compare the recursion against the closed forms on a list of 2-backer matrices."""
    grid = default_oracle_grid() if grid is None else list(grid)
    dev_nl = dev_first = dev_post = dev_path = 0.0
    for em in grid:
        if em.n_backers != 2:
            raise ValueError("the closed forms describe the two-backer system")
        (a, b), (u, w) = em.rows
        empty = HistoryLikelihoods.empty()

        table = first_backer_signal_decisions(a, b)
        for signals, expected in table.items():
            got = pledge_distribution(posterior(signals, empty, (a, b)))
            dev_nl = max(dev_nl, float(np.max(np.abs(got - np.array(expected)))))

        first = first_backer_likelihoods(a, b)
        rec = decision_likelihoods(empty.likelihood, (a, b))
        for (x, state), value in first.items():
            dev_first = max(dev_first, abs(rec[STATES.index(state), x] - value))

        closed = second_backer_posteriors(a, b, u, w)
        for (signals, x1), belief in closed.items():
            hist = HistoryLikelihoods(rec[:, x1], 1)
            got = posterior(signals, hist, (u, w))
            want = np.array([belief[s] for s in STATES])
            dev_post = max(dev_post, float(np.max(np.abs(got - want))))

        paths = joint_path_probabilities(a, b, u, w)
        for (x1, x2, state), value in paths.items():
            got = path_probability((x1, x2), state, em, LearningMode.OL)
            dev_path = max(dev_path, abs(got - value))

    n = len(grid)
    return OracleReport(
        [
            CheckResult("leader decisions per signal pair", dev_nl, ORACLE_TOL, f"{n} matrices"),
            CheckResult("leader decision likelihoods", dev_first, ORACLE_TOL, f"{n} matrices"),
            CheckResult("follower posteriors (12 scenarios)", dev_post, ORACLE_TOL, f"{n} matrices"),
            CheckResult("two-backer path probabilities", dev_path, ORACLE_TOL, f"{n} matrices"),
        ]
    )


def _random_matrices(rng: np.random.Generator, n_backers: int, count: int) -> list[ExpertnessMatrix]:
    return [ExpertnessMatrix(rng.uniform(0.5, 1.0, size=(n_backers, 2))) for _ in range(count)]


def normalization_check(max_backers: int = 4, seed: int = 0) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for n in range(1, max_backers + 1):
        for em in _random_matrices(rng, n, 5):
            for mode in LearningMode:
                probs, _, _ = enumerate_paths(em.rows, mode)
                worst = max(worst, float(np.max(np.abs(probs.sum(axis=0) - 1.0))))
    return CheckResult("path probabilities sum to one", worst, ORACLE_TOL, f"N = 1..{max_backers}")


def swap_symmetry_check(max_backers: int = 4, seed: int = 1) -> CheckResult:
    """Swapping projects maps ``mass[a, b]`` under ``V`` to ``mass[b, a]`` under the swapped ``V``."""
    rng = np.random.default_rng(seed)
    swap = [STATES.index((v2, v1)) for v1, v2 in STATES]
    worst = 0.0
    for n in range(1, max_backers + 1):
        for em in _random_matrices(rng, n, 3):
            for mode in LearningMode:
                m = outcome_arrays(em.rows, mode)
                ms = outcome_arrays(em.swapped().rows, mode)
                worst = max(worst, float(np.max(np.abs(ms[swap] - m.swapaxes(-1, -2)))))
    return CheckResult("project-swap symmetry", worst, 0.0, f"N = 1..{max_backers}")


def extreme_equivalence_check(max_backers: int = 4, seed: int = 2) -> CheckResult:
    """OL and NL coincide when all backers are uninformed or all are fully informed."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for n in range(1, max_backers + 1):
        for level in (0.5, 1.0):
            em = ExpertnessMatrix(np.full((n, 2), level))
            diff = outcome_arrays(em.rows, LearningMode.OL) - outcome_arrays(em.rows, LearningMode.NL)
            worst = max(worst, float(np.max(np.abs(diff))))
        # uninformed predecessors teach nothing, whatever the last backer knows
        rows = np.full((n, 2), 0.5)
        rows[-1] = rng.uniform(0.5, 1.0, size=2)
        diff = outcome_arrays(rows, LearningMode.OL) - outcome_arrays(rows, LearningMode.NL)
        worst = max(worst, float(np.max(np.abs(diff))))
    return CheckResult("OL = NL at expertness 0.5 and 1.0", worst, EQUIV_TOL, f"N = 1..{max_backers}")


def validation_suite() -> OracleReport:
    report = supplement_oracle_check()
    report.checks.append(normalization_check())
    report.checks.append(swap_symmetry_check())
    report.checks.append(extreme_equivalence_check())
    return report
