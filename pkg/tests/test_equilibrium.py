from __future__ import annotations

import numpy as np
import pytest

from crowdol.core import STATES, ExpertnessMatrix
from crowdol.equilibrium import (
    COST_GRID,
    ExpertnessScheme,
    SchemeKind,
    equilibrium_codes,
    equilibrium_map,
    equilibrium_state,
    high_quality_fraction,
    high_quality_fractions,
    net_profitability,
    scheme_rows,
    success_table,
)
from crowdol.metrics import FundingConfig

TIGHT = FundingConfig.tight()
RELAXED = FundingConfig.relaxed()
EXPERT_LEADER = ExpertnessMatrix(np.array([[1.0, 1.0], [0.5, 0.5]]))


class TestSchemes:
    def test_rows(self):
        assert np.array_equal(ExpertnessScheme.backer(0.6, 0.9).matrix().rows, [[0.6, 0.6], [0.9, 0.9]])
        assert np.array_equal(ExpertnessScheme.project(0.6, 0.9).matrix().rows, [[0.6, 0.9], [0.6, 0.9]])
        assert scheme_rows("project", np.full(3, 0.7), np.full(3, 0.8)).shape == (3, 2, 2)

    def test_rejects_bad_levels(self):
        with pytest.raises(ValueError):
            ExpertnessScheme.backer(0.4, 0.9)


class TestNetProfitability:
    def test_examples(self):
        uniform = ExpertnessMatrix(np.full((2, 2), 0.5))
        assert net_profitability(1, (0, 0), uniform, TIGHT, "ol", 0.7) == pytest.approx(0.140625)
        assert net_profitability(1, (1, 0), EXPERT_LEADER, TIGHT, "ol", 0.1) == pytest.approx(5 / 6 - 0.1)

    def test_full_cost_never_profitable(self):
        em = ExpertnessMatrix(np.array([[0.9, 0.9], [0.8, 0.8]]))
        for v in STATES:
            for project in (1, 2):
                if v[project - 1] == 1:
                    assert net_profitability(project, v, em, TIGHT, "ol", 1.0) <= 0.0

    def test_validation(self):
        with pytest.raises(ValueError):
            net_profitability(3, (1, 1), EXPERT_LEADER, TIGHT, "ol", 0.1)
        with pytest.raises(ValueError):
            net_profitability(1, (1, 1), EXPERT_LEADER, TIGHT, "ol", 1.5)


class TestEquilibriumState:
    def test_near_uninformed_backers(self):
        assert equilibrium_state(ExpertnessScheme.backer(0.51, 0.51), TIGHT, "ol", 0.4) == (0, 0)

    @pytest.mark.parametrize("c", [0.1, 0.2, 0.3, 0.4])
    def test_project_asymmetric_mixed(self, c):
        assert equilibrium_state(ExpertnessScheme.project(0.95, 0.55), TIGHT, "ol", c) == (1, 0)
        assert equilibrium_state(ExpertnessScheme.project(0.55, 0.95), TIGHT, "ol", c) == (0, 1)

    @pytest.mark.parametrize("scheme", ["backer", "project"])
    @pytest.mark.parametrize("cfg", [TIGHT, RELAXED])
    def test_full_cost_never_high(self, scheme, cfg):
        for mode in ("ol", "nl"):
            eq = equilibrium_map(scheme, cfg, mode, 1.0, 0.05)
            assert eq.fraction((1, 1)) == 0.0

    def test_codes_tie_handling(self):
        # weak inequality: a tie in the (1,0) follower condition still selects (1,0)
        s1 = np.array([0.5, 0.6, 0.5, 0.3])
        s2 = np.array([0.5, 0.4, 0.6, 0.3])
        assert STATES[int(equilibrium_codes(s1, s2, 0.1))] == (1, 0)
        # strict inequality: S1(1,1) - c == S1(0,1) does not give (1,1)
        s1 = np.array([0.6, 0.2, 0.5, 0.2])
        s2 = np.array([0.6, 0.2, 0.5, 0.2])
        assert STATES[int(equilibrium_codes(s1, s2, 0.1))] != (1, 1)

    def test_literal_rule_available(self):
        eq = equilibrium_map("backer", TIGHT, "ol", 0.4, 0.05, literal=True)
        assert set(np.unique(eq.codes)) <= {0, 1, 2, 3}


class TestMaps:
    @pytest.mark.parametrize("cfg", [TIGHT, RELAXED])
    @pytest.mark.parametrize("mode", ["ol", "nl"])
    def test_backer_scheme_never_mixed(self, cfg, mode):
        for c in COST_GRID:
            eq = equilibrium_map("backer", cfg, mode, c, 0.02)
            assert eq.fraction((1, 0)) == 0.0 and eq.fraction((0, 1)) == 0.0

    def test_low_expertness_corner_is_low_quality(self):
        for kind in SchemeKind:
            eq = equilibrium_map(kind, TIGHT, "ol", 0.1)
            assert eq.state_at(0, 0) == (0, 0)

    def test_project_diagonal_symmetric(self):
        for c in COST_GRID:
            eq = equilibrium_map("project", TIGHT, "ol", c)
            diag = [eq.state_at(i, i) for i in range(len(eq.levels))]
            assert set(diag) <= {(1, 1), (0, 0)}

    def test_project_swap(self):
        c = 0.2
        eq = equilibrium_map("project", TIGHT, "ol", c, 0.02)
        swap = [STATES.index((b, a)) for a, b in STATES]
        p1, p2 = np.meshgrid(eq.levels, eq.levels, indexing="ij")
        s1, s2 = success_table(scheme_rows("project", p1, p2), TIGHT, "ol")
        # where both one-high profiles qualify, the case order picks (1,0) on either side
        high_low = (s1[..., 1] - c > s1[..., 3]) & (s2[..., 1] >= s2[..., 0] - c)
        low_high = (s1[..., 2] >= s1[..., 0] - c) & (s2[..., 2] - c > s2[..., 3])
        both = (high_low & low_high) | (high_low & low_high).T
        mismatch = np.take(swap, eq.codes) != eq.codes.T
        assert not np.any(mismatch & ~both)


class TestFractions:
    @pytest.mark.parametrize("cfg", [TIGHT, RELAXED])
    def test_monotone_and_bounded(self, cfg):
        rows = high_quality_fractions(cfg)
        assert [c for c, _, _ in rows] == list(COST_GRID)
        for k in (1, 2):
            series = [r[k] for r in rows]
            assert series[-1] == 0.0
            assert all(a >= b for a, b in zip(series, series[1:]))

    def test_ol_dominates_tight(self):
        for c, ol, nl in high_quality_fractions(TIGHT):
            if 0.2 <= c <= 0.6:
                assert ol >= nl

    def test_zero_cost_fraction(self):
        levels = np.arange(0.505, 1.0, 0.01)
        p1, p2 = np.meshgrid(levels, levels, indexing="ij")
        s1, s2 = success_table(scheme_rows("backer", p1, p2), TIGHT, "ol")
        direct = np.mean((s1[..., 0] > s1[..., 2]) & (s2[..., 0] > s2[..., 1]))
        assert high_quality_fraction(TIGHT, "ol", 0.0) == pytest.approx(direct)
