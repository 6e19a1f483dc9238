from __future__ import annotations

from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import segments_by_path_walk, shadow_by_forward_expectation
from viability.market_model import build_binomial_tree, path_as_tree, random_tree
from viability.shadow import (
    ShadowPriceBuilder,
    ShadowProcess,
    band_stopping_times,
    build_shadow_price,
    verify_band,
)

F = Fraction
seeds = st.integers(0, 2**32 - 1)
costs = st.fractions(F(1, 100), F(99, 100))


def random_exact_tree(seed):
    return random_tree(seed, factor_range=(F(4, 5), F(6, 5)))


class TestStoppingTimes:
    def test_constant_price(self):
        t = path_as_tree([F(1)] * 4)
        bounds = band_stopping_times(t, F(1, 10))
        assert len(bounds) == 1
        assert bounds[0].triggers == ("horizon",)

    def test_large_moves_exit_at_once(self):
        t = build_binomial_tree(F(1), F(6, 5), F(5, 6), F(1, 2), 2)
        first = band_stopping_times(t, F(3, 10))[0]
        assert {t.time[v] for v in first.nodes} == {1}
        assert set(first.triggers) == {"up", "down"}

    def test_small_moves_need_two_steps(self):
        t = build_binomial_tree(F(1), F(21, 20), F(20, 21), F(1, 2), 2)
        first = band_stopping_times(t, F(3, 10))[0]
        exits = [v for v, k in zip(first.nodes, first.triggers) if k != "horizon"]
        assert sorted(t.price[v] for v in exits) == [F(400, 441), F(441, 400)]
        assert all(t.time[v] == 2 for v in first.nodes)

    def test_level_trigger(self):
        # prices creep up inside the band but cross the level 1 * scale
        t = path_as_tree([F(1), F(21, 20), F(11, 10)])
        bounds = band_stopping_times(t, F(3, 10), level_scale=F(1))
        assert bounds[0].triggers[0] == "level"
        assert bounds[0].nodes[0] == 1

    @given(seeds, costs)
    def test_every_path_reaches_horizon(self, seed, lam):
        t = random_exact_tree(seed)
        bounds = band_stopping_times(t, lam)
        last = bounds[-1]
        assert set(last.nodes) == set(t.leaves)
        assert [b.n for b in bounds] == list(range(1, len(bounds) + 1))


class TestShadowPrice:
    def test_single_period(self):
        t = build_binomial_tree(F(1), F(6, 5), F(9, 10), F(1, 2), 1)
        sh = build_shadow_price(t, F(3, 10))
        assert sh.values == t.price

    def test_example_deviation(self):
        t = build_binomial_tree(F(1), F(21, 20), F(20, 21), F(1, 2), 4)
        lam = F(3, 10)
        band = verify_band(build_shadow_price(t, lam), lam)
        assert band.passed
        assert band.max_deviation <= F(21, 100)
        assert band.max_deviation > 0

    def test_verify_band_boundaries(self):
        t = path_as_tree([F(1), F(2)])
        lam = F(1, 5)
        same = ShadowProcess(t, t.price, (1, 1), (True, False))
        assert verify_band(same, lam).max_deviation == 0
        edge = ShadowProcess(t, (F(1), 2 * (1 + lam)), (1, 1), (True, False))
        rep = verify_band(edge, lam)
        assert rep.max_deviation == lam and not rep.passed and rep.node == 1

    def test_misaligned(self):
        t = path_as_tree([F(1), F(2)])
        with pytest.raises(ValueError):
            verify_band(ShadowProcess(t, (F(1),), (1,), (True,)), F(1, 5))

    def test_float_tree(self):
        t = random_tree(4).as_float()
        assert verify_band(build_shadow_price(t, 0.3), 0.3).passed

    def test_estimator(self):
        t = random_exact_tree(9)
        est = ShadowPriceBuilder(lam=F(3, 10)).fit(t)
        assert est.band_.passed
        assert est.transform(t) == build_shadow_price(t, F(3, 10)).values
        with pytest.raises(ValueError):
            ShadowPriceBuilder(lam=0).fit(t)

    @given(seeds, costs)
    def test_matches_forward_oracle(self, seed, lam):
        t = random_exact_tree(seed)
        sh = build_shadow_price(t, lam)
        scale = 2 * t.price[0]
        seg, opening = segments_by_path_walk(t, lam, scale)
        assert list(sh.segment) == seg and list(sh.opening) == opening
        assert list(sh.values) == shadow_by_forward_expectation(t, lam, scale)

    @given(seeds, costs)
    def test_band_bound(self, seed, lam):
        t = random_exact_tree(seed)
        rep = verify_band(build_shadow_price(t, lam), lam)
        assert rep.max_deviation <= (1 + lam / 3) ** 2 - 1
        assert rep.passed

    @given(seeds, costs)
    def test_segment_martingale_and_anchoring(self, seed, lam):
        t = random_exact_tree(seed)
        sh = build_shadow_price(t, lam)
        for v in range(t.n_nodes):
            if sh.opening[v] or t.is_leaf(v):
                assert sh.values[v] == t.price[v]
                continue
            # one-step conditional expectation of the continuation inside the segment
            target = sum(
                t.prob[c] * (t.price[v] if (sh.opening[c] or t.is_leaf(c)) else sh.values[c])
                for c in t.children[v]
            )
            assert sh.values[v] == target

    def test_deterministic(self):
        t = random_tree(77).as_float()
        a = build_shadow_price(t, 0.3).values
        b = build_shadow_price(t, 0.3).values
        assert a == b
