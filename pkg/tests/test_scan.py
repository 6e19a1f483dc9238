from __future__ import annotations

from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from viability.cps import find_scps
from viability.ledger import check_admissible, liquidation_value
from viability.market_model import (
    PricePath,
    build_binomial_tree,
    parse_tree,
    path_as_tree,
    random_tree,
)
from viability.scan import (
    ArbitrageScanner,
    InadmissibleStrategyError,
    arbitrage_lp,
    buy_and_hold_family,
    detect_obvious_arbitrage,
    leverage_ladder_family,
    shrink_spread,
    upbr_diagnostic,
    zero_family,
)
from viability.shadow import ShadowProcess, build_shadow_price

F = Fraction
seeds = st.integers(0, 2**32 - 1)
ARB_TREE = "r - 1 1 0\nu r 1/2 1.3 1\nd r 1/2 1.1 1\n"


class TestArbitrageLP:
    def test_frictionless_witness(self):
        t = parse_tree(ARB_TREE, exact=True)
        w = arbitrage_lp(t, F(0))
        assert w is not None
        assert w.strategy.dphi_up[0] == 1
        assert min(w.values[v] for v in t.leaves) == F(1, 10)
        assert w.expected_value == F(1, 5)
        assert w.required_wealth == 0

    def test_float_witness(self):
        t = parse_tree(ARB_TREE)
        w = arbitrage_lp(t, 0.0)
        assert w.expected_value == pytest.approx(0.2)

    def test_wide_band_has_none(self):
        assert arbitrage_lp(parse_tree(ARB_TREE, exact=True), F(1, 5)) is None

    def test_costly_witness_needs_wealth(self):
        t = parse_tree(ARB_TREE, exact=True)
        w = arbitrage_lp(t, F(1, 100))
        assert w is not None
        # buying costs the spread up front; terminal values stay non-negative
        assert w.required_wealth == F(2, 100)
        assert check_admissible(w.strategy, t, F(1, 100), w.required_wealth)[0]
        assert all(w.values[v] >= 0 for v in t.leaves)

    def test_witness_csv(self):
        t = parse_tree(ARB_TREE, exact=True)
        text = arbitrage_lp(t, F(0)).to_csv(t)
        assert text.splitlines()[0] == "node_id,dphi_up,dphi_down,V_liq,admissible"

    @given(seeds, st.sampled_from([F(0), F(1, 100), F(1, 10)]))
    def test_witness_revalidates(self, seed, lam):
        t = random_tree(seed, max_periods=3)
        w = arbitrage_lp(t, lam)
        if w is None:
            assert find_scps(t, lam) is not None
            return
        rep = liquidation_value(w.strategy, t, lam, w.required_wealth)
        assert rep.admissible
        terminal = [rep.values[v] - w.required_wealth for v in t.leaves]
        assert min(terminal) >= 0
        assert sum(t.path_prob[v] * (rep.values[v] - w.required_wealth) for v in t.leaves) > 0

    def test_scanner(self):
        t = parse_tree(ARB_TREE, exact=True)
        est = ArbitrageScanner(lam=F(0)).fit(t)
        assert est.consistent_ and not est.viable_
        assert list(ArbitrageScanner(lam=F(1, 5)).fit(t).predict([t, t])) == [True, True]


class TestObviousArbitrage:
    def test_doubling_path_tree(self):
        oa = detect_obvious_arbitrage(path_as_tree([F(1), F(2), F(4)]), F(1, 2))
        assert (oa.sigma, oa.tau, oa.direction) == (0, (1,), "up")
        assert not oa.heuristic

    def test_doubling_path_sample(self):
        p = PricePath([0.0, 1.0, 2.0], [1.0, 2.0, 4.0], [1.0, 1.0, 2.0],
                      ("sample",) * 3, 2.0)
        oa = detect_obvious_arbitrage([p], 0.5)
        assert oa.sigma == ("start", 1.0) and oa.tau == (1,) and oa.heuristic

    def test_symmetric_binomial_has_none(self):
        t = build_binomial_tree(F(1), F(6, 5), F(5, 6), F(1, 2), 2)
        assert detect_obvious_arbitrage(t, F(1, 5)) is None
        assert detect_obvious_arbitrage(t, F(1, 2)) is None

    def test_stopped_at_half(self):
        t = parse_tree("r - 1 1 0\na r 1/2 0.8 1\nb r 1/2 1.1 1\n"
                       "a1 a 1 0.5 2\nb1 b 1 0.5 2\n", exact=True)
        oa = detect_obvious_arbitrage(t, F(1, 2))
        assert oa.sigma == 0 and oa.direction == "down"
        assert oa.tau == tuple(sorted(t.leaves))

    def test_paths_must_share_start(self):
        a = PricePath([0.0], [1.0], [1.0], ("sample",), 0.0)
        b = PricePath([0.0], [2.0], [2.0], ("sample",), 0.0)
        with pytest.raises(ValueError):
            detect_obvious_arbitrage([a, b], 0.5)

    def test_alpha_positive(self):
        with pytest.raises(ValueError):
            detect_obvious_arbitrage(path_as_tree([F(1), F(2)]), 0)

    @given(seeds)
    def test_certified_pairs_hold_on_every_path(self, seed):
        t = random_tree(seed)
        alpha = F(1, 10)
        oa = detect_obvious_arbitrage(t, alpha)
        if oa is None:
            return
        base = t.price[oa.sigma]
        below = {l for l in t.leaves if oa.sigma in t.ancestors(l)}
        covered = {l for u in oa.tau for l in t.leaves_below[u]}
        assert covered == below
        for u in oa.tau:
            r = t.price[u] / base
            assert r >= 1 + alpha if oa.direction == "up" else r * (1 + alpha) <= 1


class TestShrinkSpread:
    def test_identity_shadow(self):
        t = build_binomial_tree(F(1), F(6, 5), F(5, 6), F(1, 2), 2)
        lam = F(3, 10)
        sh = ShadowProcess(t, t.price, (1,) * t.n_nodes, (True,) + (False,) * (t.n_nodes - 1))
        out = shrink_spread(t, lam, sh)
        assert out.prices == t.price and out.lam == F(1, 10)
        assert out.min_gap == (lam - lam / 3) * min(t.price)

    @given(seeds, st.fractions(F(1, 100), F(99, 100)))
    def test_gaps_positive(self, seed, lam):
        t = random_tree(seed)
        out = shrink_spread(t, lam, build_shadow_price(t, lam))
        assert out.min_gap > 0

    def test_band_edge_rejected(self):
        t = path_as_tree([F(1), F(2)])
        lam = F(1, 5)
        edge = ShadowProcess(t, (F(1), 2 * (1 + lam)), (1, 1), (True, False))
        with pytest.raises(ValueError, match="strictly inside"):
            shrink_spread(t, lam, edge)


class TestTailCurves:
    def test_zero_family(self):
        t = random_tree(3)
        curve = upbr_diagnostic(t, F(1, 10), zero_family(), [F(1, 2), 1, F(3, 2), 2])
        assert curve.values == (1.0, 1.0, 0.0, 0.0)
        assert not curve.heuristic

    def test_buy_and_hold_decays(self):
        t = build_binomial_tree(F(1), F(2), F(1, 2), F(1, 3), 4)
        grid = [1, 2, 4, 8]
        curve = upbr_diagnostic(t, F(1, 10), buy_and_hold_family(), grid,
                                paths=20_000, seed=5)
        assert curve.heuristic
        assert all(a >= b for a, b in zip(curve.values, curve.values[1:]))
        assert curve.values[-1] < curve.values[0]

    def test_ladder_on_arbitrage_does_not_decay(self):
        t = parse_tree(ARB_TREE, exact=True)
        w = arbitrage_lp(t, F(0))
        curve = upbr_diagnostic(t, F(0), leverage_ladder_family(base=w.strategy),
                                [1, 2, 3, 4])
        assert curve.values == (1.0, 1.0, 1.0, 1.0)

    def test_inadmissible_member(self):
        t = build_binomial_tree(F(1), F(2), F(1, 2), F(1, 2), 2)
        with pytest.raises(InadmissibleStrategyError) as exc:
            upbr_diagnostic(t, F(1, 10), leverage_ladder_family(), [1, 2])
        assert exc.value.member == 1

    def test_grid_must_be_sorted(self):
        with pytest.raises(ValueError):
            upbr_diagnostic(random_tree(1), F(0), zero_family(), [2, 1])

    @given(seeds)
    def test_monotone_and_deterministic(self, seed):
        t = random_tree(seed)
        grid = list(np.linspace(0.5, 3, 6))
        a = upbr_diagnostic(t, F(1, 20), buy_and_hold_family(), grid, paths=500, seed=seed)
        b = upbr_diagnostic(t, F(1, 20), buy_and_hold_family(), grid, paths=500, seed=seed)
        assert a == b
        assert all(x >= y for x, y in zip(a.values, a.values[1:]))
        assert all(0 <= x <= 1 for x in a.values)
