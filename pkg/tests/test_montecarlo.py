from __future__ import annotations

import math

import numpy as np
import pytest

from crowdol.core import STATES, ExpertnessMatrix
from crowdol.exact import LearningMode, outcome_arrays
from crowdol.metrics import FundingConfig, MetricKind, metric_arrays
from crowdol.montecarlo import (
    BLOCK_SIZE,
    FIGURE9_LEVELS,
    SimConfig,
    block_rng,
    default_targets,
    estimate_from_counts,
    estimate_metrics,
    figure9_experiment,
    simulate_block,
    simulate_counts,
    simulate_path,
)

EXPERT_LEADER = ExpertnessMatrix(np.array([[1.0, 1.0], [0.5, 0.5]]))


def exact_metrics(em, target, mode, gamma=1.0):
    cfg = FundingConfig(target, gamma, em.n_backers)
    return metric_arrays(outcome_arrays(em.rows, mode), cfg)


class TestSimConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            SimConfig(2, 3, (1, 1), EXPERT_LEADER)
        with pytest.raises(ValueError):
            SimConfig(2, 1, (1, 1), EXPERT_LEADER, replications=0)
        with pytest.raises(ValueError):
            SimConfig(3, 1, (1, 1), EXPERT_LEADER)
        with pytest.raises(ValueError):
            SimConfig(2, 1, (2, 1), EXPERT_LEADER)

    def test_mode_parsing(self):
        assert SimConfig(2, 1, (1, 0), EXPERT_LEADER, "nl").mode is LearningMode.NL


class TestSimulation:
    @pytest.mark.parametrize("mode", ["ol", "nl"])
    def test_fully_expert_backers_abstain(self, mode):
        em = ExpertnessMatrix(np.ones((5, 2)))
        n1, n2 = simulate_counts(SimConfig(5, 1, (0, 0), em, mode, 2000, 1))
        assert not n1.any() and not n2.any()

    def test_expert_leader_success(self):
        cfg = SimConfig(2, 2, (1, 0), EXPERT_LEADER, "ol", 200_000, 11)
        n1, _ = simulate_counts(cfg)
        freq = np.mean(n1 == 2)
        se = math.sqrt(freq * (1 - freq) / cfg.replications)
        assert abs(freq - 5 / 6) < 3 * se

    def test_determinism(self):
        em = ExpertnessMatrix.half_half(0.6, 0.9, 6)
        cfg = SimConfig(6, 3, (1, 0), em, "ol", BLOCK_SIZE * 2 + 500, 5)
        a = simulate_counts(cfg)
        b = simulate_counts(cfg)
        c = simulate_counts(cfg, workers=3)
        for x, y, z in zip(a, b, c):
            assert np.array_equal(x, y) and np.array_equal(x, z)

    def test_seed_changes_draws(self):
        em = ExpertnessMatrix.half_half(0.6, 0.9, 6)
        a = simulate_counts(SimConfig(6, 3, (1, 0), em, "ol", 500, 1))
        b = simulate_counts(SimConfig(6, 3, (1, 0), em, "ol", 500, 2))
        assert not np.array_equal(a[0], b[0])

    def test_counts_feasible(self):
        em = ExpertnessMatrix.half_half(0.55, 0.95, 20)
        for mode in LearningMode:
            n1, n2 = simulate_counts(SimConfig(20, 5, (1, 1), em, mode, 3000, 3))
            assert np.all(n1 + n2 <= 20) and np.all(n1 >= 0) and np.all(n2 >= 0)

    def test_renormalization_leaves_draws_unchanged(self):
        em = ExpertnessMatrix(np.random.default_rng(4).uniform(0.5, 1.0, size=(12, 2)))
        cfg = SimConfig(12, 4, (1, 0), em, "ol", 5000, 9)
        raw = simulate_block(cfg, 0, 5000, renormalize=False)
        scaled = simulate_block(cfg, 0, 5000, renormalize=True)
        assert np.array_equal(raw[0], scaled[0]) and np.array_equal(raw[1], scaled[1])

    def test_common_random_numbers(self):
        em = ExpertnessMatrix.half_half(0.6, 0.9, 4)
        ol = SimConfig(4, 2, (1, 0), em, "ol", 10, 3)
        nl = SimConfig(4, 2, (1, 0), em, "nl", 10, 3)
        assert np.array_equal(block_rng(ol, 0, 0).random(5), block_rng(nl, 0, 0).random(5))
        assert not np.array_equal(block_rng(ol, 0, 1).random(5), block_rng(nl, 0, 2).random(5))
        ol_ind = SimConfig(4, 2, (1, 0), em, "ol", 10, 3, common_random_numbers=False)
        nl_ind = SimConfig(4, 2, (1, 0), em, "nl", 10, 3, common_random_numbers=False)
        assert not np.array_equal(block_rng(ol_ind, 0, 0).random(5), block_rng(nl_ind, 0, 0).random(5))

    def test_nl_uses_signal_stream_like_ol(self):
        # with uninformed backers OL and NL decide alike, so shared signals give equal counts in law
        em = ExpertnessMatrix(np.full((4, 2), 0.5))
        a = simulate_counts(SimConfig(4, 2, (1, 1), em, "ol", 20000, 2))
        b = simulate_counts(SimConfig(4, 2, (1, 1), em, "nl", 20000, 2))
        assert abs(a[0].mean() - b[0].mean()) < 0.05


class TestScalarPath:
    def test_expert_leader(self):
        cfg = SimConfig(2, 2, (1, 0), EXPERT_LEADER, "ol", 1, 0)
        rng = np.random.default_rng(123)
        paths = [simulate_path(cfg, rng) for _ in range(4000)]
        freq = np.mean([n1 == 2 for n1, _ in paths])
        assert abs(freq - 5 / 6) < 4 * math.sqrt(5 / 36 / 4000)

    def test_matches_vectorized_in_law(self):
        em = ExpertnessMatrix(np.array([[0.9, 0.6], [0.7, 0.8], [0.6, 0.95]]))
        cfg = SimConfig(3, 2, (0, 1), em, "ol", 1, 0)
        rng = np.random.default_rng(7)
        scalar = np.array([simulate_path(cfg, rng) for _ in range(3000)])
        exact = exact_metrics(em, 2, "ol")
        e2 = exact[MetricKind.CONTENTEDNESS][STATES.index((0, 1))]
        se = scalar[:, 1].std() / math.sqrt(len(scalar))
        assert abs(scalar[:, 1].mean() - e2) < 4 * se


class TestEstimates:
    @pytest.mark.parametrize(
        "rows, state, target, mode",
        [
            ([[0.9, 0.6], [0.7, 0.8]], (1, 0), 2, "ol"),
            ([[0.9, 0.6], [0.7, 0.8]], (0, 0), 1, "ol"),
            ([[0.55, 0.95], [0.8, 0.8]], (1, 1), 1, "nl"),
            ([[0.75, 0.65], [0.95, 0.55]], (0, 1), 2, "nl"),
        ],
    )
    def test_agree_with_exact(self, rows, state, target, mode):
        em = ExpertnessMatrix(np.array(rows))
        est = estimate_metrics(SimConfig(2, target, state, em, mode, 100_000, 21))
        exact = exact_metrics(em, target, mode)
        v = STATES.index(state)
        for m in MetricKind:
            se = est.metric_se(m)
            diff = abs(est.metric(m) - exact[m][v])
            assert diff <= 4 * se or diff < 1e-12

    def test_effectiveness_equals_profit_for_both_high(self):
        em = ExpertnessMatrix.half_half(0.7, 0.8, 4)
        est = estimate_metrics(SimConfig(4, 2, (1, 1), em, "ol", 5000, 1, service_fee_rate=0.5))
        assert est.effectiveness == pytest.approx(est.profit / 0.5)

    def test_single_replication(self):
        est = estimate_metrics(SimConfig(2, 1, (1, 0), EXPERT_LEADER, "ol", 1, 0))
        assert est.replications_used == 1
        assert all(math.isinf(v) for v in est.standard_errors.values())
        assert math.isfinite(est.profit)

    def test_estimate_invariants(self):
        em = ExpertnessMatrix.half_half(0.6, 0.85, 10)
        est = estimate_metrics(SimConfig(10, 4, (1, 0), em, "nl", 3000, 5))
        assert 0 <= est.success1_freq <= 1 and 0 <= est.success2_freq <= 1
        assert 0 <= est.mean_n1 <= 10 and 0 <= est.mean_n2 <= 10
        assert all(v >= 0 for v in est.standard_errors.values())

    def test_product_form(self):
        n1 = np.array([2, 0, 1, 2])
        n2 = np.array([0, 1, 1, 0])
        est = estimate_from_counts(n1, n2, (1, 0), 2, 2)
        assert est.profit == pytest.approx(1.25 * 0.5 + 0.5 * 0.0)
        assert est.effectiveness == pytest.approx(1.25 * 0.5)


class TestFigure9:
    def test_default_targets(self):
        assert default_targets(50) == [5, 10, 15, 20, 25, 30, 35, 40, 45]
        assert default_targets(100)[4] == 50

    def test_odd_population_rejected(self):
        with pytest.raises(ValueError):
            figure9_experiment(5, [2], 10)

    def test_target_range(self):
        with pytest.raises(ValueError):
            figure9_experiment(4, [5], 10)

    def test_small_system_matches_exact(self):
        n, targets, reps = 4, [1, 2, 3], 20_000
        points = figure9_experiment(n, targets, reps, seed=3)
        assert len(points) == 3 * len(targets)
        for p in points:
            v = STATES.index(p.state)
            exact = []
            for a in FIGURE9_LEVELS:
                for b in FIGURE9_LEVELS:
                    em = ExpertnessMatrix.half_half(a, b, n)
                    ol = exact_metrics(em, p.target_count, "ol")[MetricKind.EFFECTIVENESS][v]
                    nl = exact_metrics(em, p.target_count, "nl")[MetricKind.EFFECTIVENESS][v]
                    exact.append(ol - nl)
            assert abs(p.delta - np.mean(exact)) < 5 * p.standard_error
            assert -n <= p.delta <= n
