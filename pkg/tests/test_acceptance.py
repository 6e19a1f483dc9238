"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v -s`` or directly as a script
(``python3 tests/test_acceptance.py``). The criterion lines are also
repeated in the pytest terminal summary.
"""
from __future__ import annotations

import math
import sys
import time
from fractions import Fraction

import numpy as np
import pytest

from conftest import random_strategy
from oracles import (
    ledger_oracle,
    segments_by_path_walk,
    shadow_by_forward_expectation,
    utility_grid_oracle,
)
from viability.counterexamples import run_grs_example, run_poisson_example
from viability.cps import find_scps
from viability.ledger import TradingStrategy, holdings, liquidation_value
from viability.market_model import build_binomial_tree, random_tree
from viability.scan import arbitrage_lp, shrink_spread
from viability.shadow import build_shadow_price, verify_band
from viability.utility import (
    PrimalSolution,
    duality_gap,
    log_utility,
    maximize_utility,
    numeraire_check,
    random_admissible_strategy,
)

F = Fraction
E = math.exp(-1.0)
LAMBDAS = (F(0), F(1, 100), F(1, 10), F(3, 10))


def shadow_trees():
    return [random_tree(seed, factor_range=(F(4, 5), F(6, 5))) for seed in range(500)]


def viable_trees(count, lam, max_periods=4, start=0, exact=False):
    out, seed = [], start
    while len(out) < count:
        t = random_tree(seed, max_periods=max_periods)
        seed += 1
        if not exact:
            t = t.as_float()
        if find_scps(t, lam) is not None:
            out.append(t)
    return out


def kelly_tree():
    return build_binomial_tree(F(1), F(2), F(1, 2), F(3, 4), 1)


# --------------------------------------------------------------------------


def test_criterion_1_no_arbitrage_iff_scps(criterion):
    t0 = time.perf_counter()
    agree = total = exact_runs = 0
    disagreements = []
    for seed in range(200):
        tree = random_tree(seed)
        exact = tree.horizon <= 3
        if not exact:
            tree = tree.as_float()
        for lam in LAMBDAS:
            lam_used = lam if exact else float(lam)
            scps = find_scps(tree, lam_used) is not None
            witness = arbitrage_lp(tree, lam_used) is not None
            total += 1
            exact_runs += exact
            if scps != witness:
                agree += 1
            else:
                disagreements.append((seed, lam))
    elapsed = time.perf_counter() - t0
    passed = agree == total and elapsed < 60
    criterion("1", passed,
              f"{agree}/{total} agree ({exact_runs} in rational mode), {elapsed:.1f} s "
              f"(limit 60 s); disagreements {disagreements[:5]}")
    assert passed


def test_criterion_2_shadow_band(criterion):
    lam = F(3, 10)
    trees = shadow_trees()
    t0 = time.perf_counter()
    shadows = [build_shadow_price(t, lam) for t in trees]
    bands = [verify_band(sh, lam) for sh in shadows]
    elapsed = time.perf_counter() - t0
    bound = (1 + lam / 3) ** 2 - 1
    worst = max(b.max_deviation for b in bands)
    residual = 0
    anchored = True
    oracle_ok = True
    for t, sh in zip(trees, shadows):
        for v in range(t.n_nodes):
            if sh.opening[v] or t.is_leaf(v):
                anchored &= sh.values[v] == t.price[v]
                continue
            target = sum(
                t.prob[c] * (t.price[v] if (sh.opening[c] or t.is_leaf(c)) else sh.values[c])
                for c in t.children[v]
            )
            residual = max(residual, abs(sh.values[v] - target))
        scale = 2 * t.price[0]
        seg, opening = segments_by_path_walk(t, lam, scale)
        oracle_ok &= list(sh.opening) == opening and list(sh.segment) == seg
        oracle_ok &= list(sh.values) == shadow_by_forward_expectation(t, lam, scale)
    passed = (worst <= bound and bound < lam and residual < 1e-10 and anchored
              and oracle_ok and elapsed < 30)
    criterion("2", passed,
              f"max |S~/S-1| = {float(worst):.4f} <= {float(bound):.2f}; martingale residual "
              f"{float(residual):.1e}; anchoring {'exact' if anchored else 'broken'}; forward "
              f"oracle {'matches' if oracle_ok else 'differs'}; {elapsed:.1f} s (limit 30 s)")
    assert passed


def test_criterion_3_spread_shrinking(criterion):
    lam = F(3, 10)
    gaps = []
    for t in shadow_trees():
        out = shrink_spread(t, lam, build_shadow_price(t, lam))
        gaps.append(out.min_gap)
    worst = min(gaps)
    passed = worst > 0
    criterion("3", passed, f"smallest ask/bid gap over 500 trees = {float(worst):.4g} > 0")
    assert passed


@pytest.fixture(scope="module")
def poisson_report():
    t0 = time.perf_counter()
    rep = run_poisson_example(0.1, paths=100_000, seed=7)
    return rep, time.perf_counter() - t0


def test_criterion_4a_pathwise_domination(criterion, poisson_report):
    rep, elapsed = poisson_report
    passed = rep.pathwise_ok and elapsed < 20
    criterion("4a", passed,
              f"{rep.pathwise_violations}/{rep.paths} paths with V_T < 1{{Y_T>0}} at "
              f"x = 1 - 1/e; min margin {rep.pathwise_margin.min():.4f}, min pre-stop value "
              f"{rep.prestop_min.min():.4f}; {elapsed:.1f} s")
    assert passed


def test_criterion_4b_inverse_density(criterion, poisson_report):
    rep, elapsed = poisson_report
    err = abs(rep.inv_y_mean - (1 - E))
    passed = err < 4 * rep.inv_y_se and elapsed < 20
    criterion("4b", passed,
              f"E^P[1/Y_T] = {rep.inv_y_mean:.5f} +- {rep.inv_y_se:.5f} vs 0.63212 "
              f"({err / rep.inv_y_se:.2f} SE); {elapsed:.1f} s")
    assert passed


def test_criterion_4c_expected_value_contradiction(criterion, poisson_report):
    rep, elapsed = poisson_report
    passed = rep.contradiction and elapsed < 20
    criterion("4c", passed,
              f"E^P[V_T] = {rep.value_mean:.4f} +- {rep.value_se:.4f}, needs >= 1 > "
              f"x = {rep.x:.4f}")
    assert passed


def test_criterion_5_barrier_market(criterion):
    rep = run_grs_example(seed=7, paths=100_000, n_max=10)
    first = F(3, 7)
    from viability.counterexamples import grs_tau_distribution

    exact_first = grs_tau_distribution(1, exact=True)[0][0]
    z = [abs(rep.freq[n - 1] - 2.0 ** -n) / rep.freq_se[n - 1] for n in range(1, 5)]
    passed = exact_first == first and max(z) < 4 and rep.all_tau_finite
    criterion("5", passed,
              f"P0(tau=rho_1) = {exact_first}; |freq - 2^-n|/SE for n<=4: "
              f"{', '.join(f'{v:.2f}' for v in z)}; all tau finite: {rep.all_tau_finite}")
    assert passed


def test_criterion_6_utility_duality(criterion):
    U = log_utility()
    sol = maximize_utility(kelly_tree(), 0, 1.0, U)
    kelly_u = 0.75 * math.log(2.25) + 0.25 * math.log(0.375)
    f_err = abs(sol.strategy.dphi_up[0] - 1.25)
    u_err = abs(sol.value - kelly_u)

    worst_gap, worst_low, worst_recon = 0.0, 0.0, 0.0
    for t in viable_trees(50, 0.05):
        for lam in (0.05, 0.1):
            rep = duality_gap(t, lam, 1.0, U)
            worst_gap = max(worst_gap, rep.gap)
            worst_low = min(worst_low, rep.gap)
            worst_recon = max(worst_recon, rep.reconstruction_error)

    worst_grid = 0.0
    for t in viable_trees(20, 0.05, max_periods=2, start=1000):
        for lam in (0.05, 0.1):
            s = maximize_utility(t, lam, 1.0, U)
            _, phi1 = holdings(s.strategy, t, lam)
            width = 2 * max(abs(p) for p in phi1) + 1
            points = 11 if len(t.internal) >= 3 else 21
            u_grid, _ = utility_grid_oracle(t, lam, 1.0, U, width, points=points)
            worst_grid = max(worst_grid, abs(s.value - u_grid))

    passed = (f_err <= 1e-6 and u_err <= 1e-6 and worst_gap <= 1e-5 and worst_low >= -1e-6
              and worst_recon <= 1e-6 and worst_grid <= 1e-4)
    criterion("6", passed,
              f"Kelly |f-1.25| = {f_err:.1e}, |u-u*| = {u_err:.1e}; 50 trees x 2 costs: gap in "
              f"[{worst_low:.1e}, {worst_gap:.1e}], reconstruction {worst_recon:.1e}; "
              f"grid oracle (<=2 periods) max diff {worst_grid:.1e}")
    assert passed


def test_criterion_7_numeraire(criterion):
    U = log_utility()
    worst_ratio, worst_log = -math.inf, -math.inf
    trees = viable_trees(10, 0.0, max_periods=3) + viable_trees(10, 0.05, max_periods=3,
                                                                start=500)
    costs = [0.0] * 10 + [0.05] * 10
    for k, (t, lam) in enumerate(zip(trees, costs)):
        sol = maximize_utility(t, lam, 1.0, U)
        rep = numeraire_check(t, lam, sol, trials=1000, seed=k)
        worst_ratio = max(worst_ratio, rep.max_ratio)
        worst_log = max(worst_log, rep.max_log_ratio)

    kelly = kelly_tree()
    opt = maximize_utility(kelly, 0, 1.0, U)
    flat = PrimalSolution(opt.tree, 0.0, 1.0, U, TradingStrategy.zeros(opt.tree.n_nodes),
                          (1.0,) * opt.tree.n_nodes, (1.0, 1.0), 0.0, 0.0, 0)
    control = numeraire_check(kelly, 0, flat, trials=1000, seed=99)
    passed = worst_ratio <= 1 + 1e-6 and worst_log <= 1e-6 and control.max_ratio > 1
    criterion("7", passed,
              f"20 trees x 1000 strategies: max E[V/V*] - 1 = {worst_ratio - 1:.1e}, max "
              f"E[log V/V*] = {worst_log:.1e}; no-trade control max ratio "
              f"{control.max_ratio:.4f} > 1")
    assert passed


def test_criterion_8_deflation_inequality(criterion):
    rng = np.random.default_rng(8)
    worst = -math.inf
    pairs = 0
    seed = 0
    while pairs < 1000:
        t = random_tree(seed).as_float()
        lam = float(LAMBDAS[1 + seed % 3])
        seed += 1
        cert = find_scps(t, lam)
        if cert is None:
            continue
        leaves = list(t.leaves)
        Z = np.array(cert.Z)[leaves]
        P = t.probs[leaves]
        for _ in range(10):
            strat, _ = random_admissible_strategy(t, lam, 1.0, rng, scale=3.0)
            vals = liquidation_value(strat, t, lam, 1.0).values
            vt = np.array([vals[v] for v in leaves])
            worst = max(worst, float(P @ (vt * Z)) - 1.0)
            pairs += 1
    passed = worst <= 1e-9
    criterion("8", passed, f"{pairs} (strategy, certificate) pairs: max E[V_T Z_T] - x = "
                           f"{worst:.2e} <= 1e-9")
    assert passed


def test_criterion_9_ledger_oracle(criterion):
    rng = np.random.default_rng(9)
    mismatches = 0
    for k in range(1000):
        t = random_tree(int(rng.integers(2**31)), max_periods=3)
        lam = F(int(rng.integers(0, 50)), 100)
        x = F(int(rng.integers(0, 12)), 4)
        s = random_strategy(t, rng)
        rep = liquidation_value(s, t, lam, x)
        oracle = ledger_oracle(s, t, lam, x)
        mismatches += list(rep.values) != oracle
    passed = mismatches == 0
    criterion("9", passed, f"{1000 - mismatches}/1000 strategies match the cash-flow oracle "
                           f"exactly (rational arithmetic)")
    assert passed


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v", "-s", "-p", "no:cacheprovider"]))
