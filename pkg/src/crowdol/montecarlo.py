"""Monte Carlo simulation of the pledging process for large backer populations.

Replications are simulated in fixed-size blocks, vectorized across the block.
Each block draws from its own Philox stream derived from
``(seed, stream_key, state, block index, purpose)``, so results depend only on
the configuration and never on how blocks are scheduled across workers.

Under common random numbers the OL and NL runs of a configuration share the
signal stream (replication ``k`` sees the same private signals in both
regimes) while decisions come from a separate stream per regime.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .core import (
    Decision,
    ExpertnessMatrix,
    HistoryLikelihoods,
    QualityState,
    all_posteriors,
    history_update,
    nl_decision_distribution,
    nl_decision_table,
    pledge_distribution,
    posterior,
    signal_likelihood_matrix,
    state_index,
)
from .exact import LearningMode
from .metrics import MetricKind, metrics_from_moments

DEFAULT_REPLICATIONS = 50_000
BLOCK_SIZE = 10_000
FIGURE9_LEVELS = (0.55, 0.65, 0.75, 0.85, 0.95)
FIGURE9_STATES: tuple[QualityState, ...] = ((1, 1), (1, 0), (0, 0))

_SIGNAL_PURPOSE = 0
_DECISION_PURPOSE = {LearningMode.OL: 1, LearningMode.NL: 2}


@dataclass(frozen=True)
class SimConfig:
    n_backers: int
    target_count: int
    state: QualityState
    em: ExpertnessMatrix
    mode: LearningMode = LearningMode.OL
    replications: int = DEFAULT_REPLICATIONS
    seed: int = 0
    service_fee_rate: float = 1.0
    common_random_numbers: bool = True
    stream_key: tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "mode", LearningMode.parse(self.mode))
        object.__setattr__(self, "state", tuple(int(v) for v in self.state))
        state_index(self.state)
        if self.replications < 1:
            raise ValueError("at least one replication is required")
        if not 1 <= self.target_count <= self.n_backers:
            raise ValueError(f"target count must lie in [1, {self.n_backers}]")
        if self.em.n_backers != self.n_backers:
            raise ValueError(f"expertness matrix has {self.em.n_backers} rows, expected {self.n_backers}")
        if not 0.0 <= self.service_fee_rate <= 1.0:
            raise ValueError("service fee rate must lie in [0, 1]")


def block_rng(cfg: SimConfig, block: int, purpose: int) -> np.random.Generator:
    """Counter-based generator for one block of replications and one purpose."""
    if purpose == _SIGNAL_PURPOSE and not cfg.common_random_numbers:
        purpose = 10 + _DECISION_PURPOSE[cfg.mode]
    key = (*cfg.stream_key, state_index(cfg.state), block, purpose)
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(cfg.seed, spawn_key=key)))


def _draw_signals(rng: np.random.Generator, row: np.ndarray, state: QualityState, size: int) -> np.ndarray:
    """Signal-pair indices (HH=0, HL=1, LH=2, LL=3) for ``size`` backers with one row."""
    correct = rng.random((size, 2)) < row
    high = correct == np.array(state, dtype=bool)
    return 2 * (~high[:, 0]) + (~high[:, 1])


def _draw_decisions(rng: np.random.Generator, probs: np.ndarray) -> np.ndarray:
    u = rng.random(probs.shape[0])
    return (u >= probs[:, 0]).astype(np.int64) + (u >= probs[:, 0] + probs[:, 1])


def simulate_block(cfg: SimConfig, block: int, size: int, renormalize: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """Final pledge counts of ``size`` replications drawn from block ``block``'s streams."""
    sig_rng = block_rng(cfg, block, _SIGNAL_PURPOSE)
    dec_rng = block_rng(cfg, block, _DECISION_PURPOSE[cfg.mode])
    n1 = np.zeros(size, dtype=np.int64)
    n2 = np.zeros(size, dtype=np.int64)
    hist = np.ones((size, 4))
    idx = np.arange(size)
    for row in cfg.em.rows:
        s = _draw_signals(sig_rng, row, cfg.state, size)
        if cfg.mode is LearningMode.OL:
            pledge_all = pledge_distribution(all_posteriors(hist, row))  # (size, 4 signals, 3)
            x = _draw_decisions(dec_rng, pledge_all[idx, s])
            # P(x | history, V) for the realized x, summed over the unseen signals
            hist = hist * (pledge_all[idx, :, x][:, :, None] * signal_likelihood_matrix(row)).sum(axis=1)
            if renormalize:
                hist /= hist.sum(axis=1, keepdims=True)
        else:
            x = _draw_decisions(dec_rng, nl_decision_table(row)[s])
        n1 += x == Decision.PROJECT1
        n2 += x == Decision.PROJECT2
    return n1, n2


def _blocks(replications: int) -> list[tuple[int, int]]:
    full, rest = divmod(replications, BLOCK_SIZE)
    sizes = [BLOCK_SIZE] * full + ([rest] if rest else [])
    return list(enumerate(sizes))


def simulate_counts(cfg: SimConfig, workers: int = 1, renormalize: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """Pledge counts of all replications, concatenated in block order."""
    blocks = _blocks(cfg.replications)
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(lambda b: simulate_block(cfg, b[0], b[1], renormalize), blocks))
    else:
        parts = [simulate_block(cfg, b, size, renormalize) for b, size in blocks]
    return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])


def simulate_path(cfg: SimConfig, rng: np.random.Generator) -> tuple[int, int]:
    """One replication, backer by backer, using the scalar model primitives."""
    hist = HistoryLikelihoods.empty()
    n1 = n2 = 0
    for row in cfg.em.rows:
        signals = tuple(
            ("H" if v == 1 else "L") if rng.random() < p else ("L" if v == 1 else "H")
            for v, p in zip(cfg.state, row)
        )
        if cfg.mode is LearningMode.OL:
            probs = pledge_distribution(posterior(signals, hist, row))
        else:
            probs = nl_decision_distribution(signals, row)
        x = int(rng.choice(3, p=probs / probs.sum()))
        if cfg.mode is LearningMode.OL:
            hist = history_update(hist, x, row)
            hist = HistoryLikelihoods(hist.likelihood / hist.likelihood.sum(), hist.step)
        n1 += x == 1
        n2 += x == 2
    return n1, n2


@dataclass
class SimEstimates:
    """Point estimates and standard errors from simulated pledge counts.

    ``standard_errors`` maps each field name to its standard error; with a
    single replication every standard error is ``inf``.
    """

    mean_n1: float
    mean_n2: float
    success1_freq: float
    success2_freq: float
    contentedness: float
    profit: float
    effectiveness: float
    replications_used: int
    standard_errors: dict[str, float] = field(default_factory=dict)

    def metric(self, kind) -> float:
        kind = MetricKind.parse(kind)
        return {
            MetricKind.CONTENTEDNESS: self.contentedness,
            MetricKind.SUCCESS1: self.success1_freq,
            MetricKind.SUCCESS2: self.success2_freq,
            MetricKind.PROFIT: self.profit,
            MetricKind.EFFECTIVENESS: self.effectiveness,
        }[kind]

    def metric_se(self, kind) -> float:
        name = {
            MetricKind.CONTENTEDNESS: "contentedness",
            MetricKind.SUCCESS1: "success1_freq",
            MetricKind.SUCCESS2: "success2_freq",
            MetricKind.PROFIT: "profit",
            MetricKind.EFFECTIVENESS: "effectiveness",
        }[MetricKind.parse(kind)]
        return self.standard_errors[name]


def _moments(n1: np.ndarray, n2: np.ndarray, target: int) -> np.ndarray:
    """Per-replication ``(n1, n2, 1{n1 >= target}, 1{n2 >= target})``, shape ``(R, 4)``."""
    return np.column_stack([n1, n2, n1 >= target, n2 >= target]).astype(float)


def _gradients(state: QualityState, mean: np.ndarray, n_backers: int, gamma: float) -> dict[str, np.ndarray]:
    e1, e2, f1, f2 = mean
    sign1 = 1.0 if state[0] == 1 else -1.0
    sign2 = 1.0 if state[1] == 1 else -1.0
    content = {
        (1, 1): [1, 1, 0, 0],
        (1, 0): [1, 0, 0, 0],
        (0, 1): [0, 1, 0, 0],
        (0, 0): [-1, -1, 0, 0],
    }[tuple(state)]
    return {
        "mean_n1": np.array([1.0, 0, 0, 0]),
        "mean_n2": np.array([0, 1.0, 0, 0]),
        "success1_freq": np.array([0, 0, 1.0, 0]),
        "success2_freq": np.array([0, 0, 0, 1.0]),
        "contentedness": np.array(content, dtype=float),
        "profit": gamma * np.array([f1, f2, e1, e2]),
        "effectiveness": np.array([sign1 * f1, sign2 * f2, sign1 * e1, sign2 * e2]),
    }


def estimate_from_counts(
    n1: np.ndarray, n2: np.ndarray, state: QualityState, target: int, n_backers: int, gamma: float = 1.0
) -> SimEstimates:
    """Metric estimates from sample moments with delta-method standard errors."""
    x = _moments(np.asarray(n1), np.asarray(n2), target)
    r = x.shape[0]
    mean = x.mean(axis=0)
    v = state_index(state)
    cols = [np.full(4, m) for m in mean]
    metrics = metrics_from_moments(*cols, n_backers, gamma)
    if r > 1:
        cov = np.cov(x, rowvar=False) / r
        se = {k: math.sqrt(max(float(g @ cov @ g), 0.0)) for k, g in _gradients(state, mean, n_backers, gamma).items()}
    else:
        se = {k: math.inf for k in _gradients(state, mean, n_backers, gamma)}
    return SimEstimates(
        mean_n1=float(mean[0]),
        mean_n2=float(mean[1]),
        success1_freq=float(mean[2]),
        success2_freq=float(mean[3]),
        contentedness=float(metrics[MetricKind.CONTENTEDNESS][v]),
        profit=float(metrics[MetricKind.PROFIT][v]),
        effectiveness=float(metrics[MetricKind.EFFECTIVENESS][v]),
        replications_used=r,
        standard_errors=se,
    )


def estimate_metrics(cfg: SimConfig, workers: int = 1) -> SimEstimates:
    n1, n2 = simulate_counts(cfg, workers)
    return estimate_from_counts(n1, n2, cfg.state, cfg.target_count, cfg.n_backers, cfg.service_fee_rate)


def paired_effectiveness_delta(ol_counts, nl_counts, state: QualityState, target: int) -> tuple[float, float]:
    """OL-minus-NL effectiveness and its delta-method standard error.

    Replication ``k`` of both runs shares its signals under common random
    numbers, so the two moment vectors are treated as one paired sample.
    """
    a = _moments(*ol_counts, target)
    b = _moments(*nl_counts, target)
    ma, mb = a.mean(axis=0), b.mean(axis=0)
    g = _gradients(state, ma, 0, 1.0)["effectiveness"]
    h = _gradients(state, mb, 0, 1.0)["effectiveness"]
    delta = float(g[0] * ma[0] + g[1] * ma[1]) - float(h[0] * mb[0] + h[1] * mb[1])
    r = a.shape[0]
    if r < 2 or b.shape[0] != r:
        return delta, math.inf
    cov = np.cov(np.hstack([a, b]), rowvar=False) / r
    grad = np.concatenate([g, -h])
    return delta, math.sqrt(max(float(grad @ cov @ grad), 0.0))


@dataclass(frozen=True)
class Figure9Point:
    n_backers: int
    target_count: int
    state: QualityState
    delta: float
    standard_error: float


def default_targets(n_backers: int) -> list[int]:
    step = max(n_backers // 10, 1)
    return list(range(step, n_backers, step))


def figure9_experiment(
    n_backers: int,
    targets=None,
    replications: int = DEFAULT_REPLICATIONS,
    seed: int = 0,
    states=FIGURE9_STATES,
    levels=FIGURE9_LEVELS,
    common_random_numbers: bool = True,
    workers: int = 1,
) -> list[Figure9Point]:
    """Average OL-minus-NL effectiveness over the half/half expertness systems.

    Each system fixes the first half of the backers at ``p1`` and the second
    half at ``p2``, for all pairs drawn from ``levels``.  Pledge counts do not
    depend on the target, so each (state, system, regime) is simulated once
    and reused for every target.
    """
    if n_backers % 2:
        raise ValueError("the half/half expertness protocol needs an even number of backers")
    targets = default_targets(n_backers) if targets is None else [int(t) for t in targets]
    for t in targets:
        if not 1 <= t <= n_backers:
            raise ValueError(f"target {t} outside [1, {n_backers}]")
    systems = [(a, b) for a in levels for b in levels]
    points = []
    for state in states:
        sums = np.zeros(len(targets))
        var = np.zeros(len(targets))
        for k, (p1, p2) in enumerate(systems):
            em = ExpertnessMatrix.half_half(p1, p2, n_backers)
            counts = {}
            for mode in LearningMode:
                cfg = SimConfig(
                    n_backers, targets[0], state, em, mode, replications, seed,
                    common_random_numbers=common_random_numbers, stream_key=(k,),
                )
                counts[mode] = simulate_counts(cfg, workers)
            for i, t in enumerate(targets):
                d, se = paired_effectiveness_delta(counts[LearningMode.OL], counts[LearningMode.NL], state, t)
                sums[i] += d
                var[i] += se**2
        for i, t in enumerate(targets):
            points.append(Figure9Point(n_backers, t, tuple(state), sums[i] / len(systems), math.sqrt(var[i]) / len(systems)))
    return points
