"""Arbitrage and unbounded-profit diagnostics.

* :func:`arbitrage_lp` -- exact (or float) LP search for a zero-cost strategy
  with non-negative terminal liquidation value and positive expectation. It
  is the counterpart of the price-system LP in :mod:`viability.cps`: on
  generic trees exactly one of the two succeeds.
* :func:`detect_obvious_arbitrage` -- guaranteed relative gains between two
  stopping times (exhaustive on trees, a level-crossing heuristic on sampled
  paths).
* :func:`shrink_spread` -- the auxiliary price ``(S_tilde + S) / 2`` with a
  third of the cost, with its gaps to the original bid and ask.
* :func:`upbr_diagnostic` -- tail curves ``m -> sup P(V_T >= m)`` over a
  family of 1-admissible strategies (a heuristic, not a proof).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_lambda, check_positive, check_random_state, check_tree
from .cps import find_scps
from .ledger import TradingStrategy, check_admissible, liquidation_value
from .lp import LPError, simplex_max
from .market_model import EventTree, PricePath
from .shadow import verify_band

log = logging.getLogger(__name__)

WITNESS_TOL = 1e-9

__all__ = [
    "ArbitrageWitness",
    "ObviousArbitrage",
    "ShrunkSpread",
    "TailCurve",
    "InadmissibleStrategyError",
    "arbitrage_lp",
    "detect_obvious_arbitrage",
    "shrink_spread",
    "upbr_diagnostic",
    "zero_family",
    "buy_and_hold_family",
    "leverage_ladder_family",
    "ArbitrageScanner",
]


# --------------------------------------------------------------------------
# arbitrage LP


@dataclass(frozen=True, eq=False)
class ArbitrageWitness:
    """Zero-cost strategy with ``V_T >= 0`` at every leaf and ``E[V_T] > 0``.

    With costs, a trade lowers the liquidation value at the node where it is
    made, so intermediate values of a zero-wealth witness can dip below zero;
    ``required_wealth`` is the smallest ``x`` making it ``x``-admissible.
    """

    strategy: TradingStrategy
    expected_value: object
    values: tuple           # liquidation value per node (x = 0)
    admissible: tuple       # per-node flag V >= 0 (x = 0)

    @property
    def required_wealth(self):
        low = min(self.values)
        return -low if low < 0 else low * 0

    def to_csv(self, tree):
        return _witness_csv(self, tree)


def _witness_csv(w, tree):
    import csv
    import io

    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["node_id", "dphi_up", "dphi_down", "V_liq", "admissible"])
    for v in range(tree.n_nodes):
        wr.writerow([tree.labels[v], _num(w.strategy.dphi_up[v]), _num(w.strategy.dphi_down[v]),
                     _num(w.values[v]), int(w.admissible[v])])
    return buf.getvalue()


def _num(v):
    return str(v) if isinstance(v, Fraction) else repr(float(v))


def _build_arbitrage_lp(tree, lam, exact):
    """Columns: (b_v, s_v) per internal node, then t_leaf per leaf."""
    conv = Fraction if exact else float
    lam = conv(lam)
    internal = tree.internal
    col_b = {v: 2 * i for i, v in enumerate(internal)}
    col_s = {v: 2 * i + 1 for i, v in enumerate(internal)}
    base_t = 2 * len(internal)
    col_t = {leaf: base_t + i for i, leaf in enumerate(tree.leaves)}
    S = [conv(s) for s in tree.price]
    rows, rhs = [], []

    def liq_forms(holder, s_eval):
        """Two linear forms whose minimum is V at price ``s_eval`` with the
        position held after trading at ``holder``."""
        forms = []
        for mark in ((1 - lam) * s_eval, (1 + lam) * s_eval):
            f = {}
            for a in tree.ancestors(holder):
                # cash from the trade at a, plus the share change valued at mark
                f[col_b[a]] = f.get(col_b[a], 0) - (1 + lam) * S[a] + mark
                f[col_s[a]] = f.get(col_s[a], 0) + (1 - lam) * S[a] - mark
            forms.append(f)
        return forms

    for leaf in tree.leaves:
        for f in liq_forms(tree.parent[leaf], S[leaf]):
            row = {k: -a for k, a in f.items() if a != 0}
            row[col_t[leaf]] = conv(1)
            rows.append(row)
            rhs.append(0)
        tv = {}
        for a in tree.ancestors(leaf, include_self=False):
            tv[col_b[a]] = conv(1)
            tv[col_s[a]] = conv(1)
        rows.append(tv)
        rhs.append(1)
    c = [0] * base_t + [conv(tree.path_prob[leaf]) for leaf in tree.leaves]
    return c, rows, rhs, col_b, col_s


def arbitrage_lp(tree, lam, exact=None, tol=WITNESS_TOL):
    """Best zero-cost strategy with total variation at most one per path.

    Maximises ``sum_leaf p * V_T`` subject to ``V_T >= 0`` at every leaf,
    where ``V_T`` is the terminal liquidation value with ``x = 0``. Returns
    an :class:`ArbitrageWitness` when the optimum exceeds ``tol`` (zero in
    exact mode) and ``None`` otherwise. The witness is re-validated by the
    ledger: non-negative at the leaves with no wealth, and admissible with
    its ``required_wealth``.
    """
    check_tree(tree)
    check_lambda(lam)
    if exact is None:
        exact = tree.is_exact and isinstance(lam, (Fraction, int))
    c, rows, rhs, col_b, col_s = _build_arbitrage_lp(tree, lam, exact)
    res = simplex_max(c, rows, rhs, exact=exact)
    if not res.ok:
        raise LPError(f"arbitrage LP ended with status {res.status!r}")
    thresh = 0 if exact else tol
    if not res.value > thresh:
        return None
    zero = Fraction(0) if exact else 0.0
    up = [zero] * tree.n_nodes
    down = [zero] * tree.n_nodes
    for v, j in col_b.items():
        up[v] = res.x[j]
        down[v] = res.x[col_s[v]]
    strat = TradingStrategy(tuple(up), tuple(down)).canonical()
    lam_ = Fraction(lam) if exact else float(lam)
    rep = liquidation_value(strat, tree, lam_, zero)
    ev = sum(tree.path_prob[leaf] * rep.values[leaf] for leaf in tree.leaves)
    slack = 0 if exact else 1e-12
    bad = [leaf for leaf in tree.leaves if rep.values[leaf] < -slack]
    if bad:
        raise LPError(f"LP witness has negative terminal value at node {tree.labels[bad[0]]}")
    if not ev > thresh:
        log.debug("LP value %s but ledger expectation %s; no witness", res.value, ev)
        return None
    flags = tuple(bool(val >= -(0 if exact else 1e-12)) for val in rep.values)
    return ArbitrageWitness(strat, ev, rep.values, flags)


# --------------------------------------------------------------------------
# obvious arbitrage


@dataclass(frozen=True)
class ObviousArbitrage:
    """Stopping-time pair with a guaranteed relative move.

    ``sigma`` is the entry node (tree) or level-crossing description (paths);
    ``tau`` lists, for every scenario where ``sigma`` fires, where the target
    ratio is first reached.
    """

    sigma: object
    tau: tuple
    direction: str      # "up" (S_tau / S_sigma >= 1 + alpha) or "down"
    alpha: float
    heuristic: bool = False


def _first_hits(tree, v, hit):
    """First nodes strictly below ``v`` satisfying ``hit``, or None if some
    path from ``v`` to the horizon never does."""
    out = []
    stack = list(tree.children[v])
    if not stack:
        return None
    while stack:
        u = stack.pop()
        if hit(u):
            out.append(u)
        elif tree.children[u]:
            stack.extend(tree.children[u])
        else:
            return None
    return tuple(sorted(out))


def _oa_tree(tree, alpha):
    S = tree.price
    order = sorted(range(tree.n_nodes), key=lambda v: (tree.time[v], v))
    for v in order:
        up = _first_hits(tree, v, lambda u: S[u] >= (1 + alpha) * S[v])
        if up is not None:
            return ObviousArbitrage(v, up, "up", alpha)
        down = _first_hits(tree, v, lambda u: S[u] * (1 + alpha) <= S[v])
        if down is not None:
            return ObviousArbitrage(v, down, "down", alpha)
    return None


def _crossing(path, level, above):
    idx = np.nonzero(path.price >= level if above else path.price <= level)[0]
    return int(idx[0]) if idx.size else None


def _oa_paths(paths, alpha, n_levels):
    """Level-crossing entries ``sigma = first time S crosses level``.

    The sampled scenarios carry no shared filtration, so only entry rules
    that are stopping times for every model are tried: time zero and first
    crossings of the geometric levels ``S_0 (1 + alpha)**k``.
    """
    s0 = float(paths[0].price[0])
    if any(float(p.price[0]) != s0 for p in paths):
        raise ValueError("all sampled paths must start at the same price")
    candidates = [("start", s0, True)]
    for k in range(1, n_levels + 1):
        candidates.append(("above", s0 * (1 + alpha) ** k, True))
        candidates.append(("below", s0 * (1 + alpha) ** -k, False))
    for kind, level, above in candidates:
        entries = []
        for p in paths:
            i = 0 if kind == "start" else _crossing(p, level, above)
            entries.append(i)
        if all(i is None for i in entries):
            continue
        for direction in ("up", "down"):
            tau, ok = [], True
            for p, i in zip(paths, entries):
                if i is None:
                    tau.append(None)
                    continue
                ref = p.price[i]
                tail = p.price[i + 1:]
                hits = np.nonzero(tail >= (1 + alpha) * ref if direction == "up"
                                  else tail * (1 + alpha) <= ref)[0]
                if not hits.size:
                    ok = False
                    break
                tau.append(i + 1 + int(hits[0]))
            if ok:
                sigma = (kind, level)
                return ObviousArbitrage(sigma, tuple(tau), direction, alpha, heuristic=True)
    return None


def detect_obvious_arbitrage(model, alpha, n_levels=20):
    """Search for an obvious arbitrage with relative move ``alpha``.

    On an :class:`EventTree` the search is complete: an entry node together
    with the first hitting nodes of the target ratio below it, tried in
    time order. On a sequence of :class:`PricePath` scenarios it is a
    heuristic over level-crossing entry times (see ``_oa_paths``) and the
    result is flagged ``heuristic=True``.
    """
    check_positive(alpha, "alpha")
    if isinstance(model, EventTree):
        return _oa_tree(model, alpha)
    if isinstance(model, PricePath):
        model = [model]
    paths = list(model)
    if not paths or not all(isinstance(p, PricePath) for p in paths):
        raise TypeError("model must be an EventTree or a sequence of PricePath")
    return _oa_paths(paths, alpha, n_levels)


# --------------------------------------------------------------------------
# spread shrinking


@dataclass(frozen=True, eq=False)
class ShrunkSpread:
    prices: tuple           # S' per node
    lam: object             # lambda' = lambda / 3
    ask_gap: tuple          # (1 + lam) S - (1 + lam') S'
    bid_gap: tuple          # (1 - lam') S' - (1 - lam) S

    @property
    def min_gap(self):
        return min(min(self.ask_gap), min(self.bid_gap))


def shrink_spread(tree, lam, shadow):
    """Auxiliary price and cost strictly inside the original bid-ask band.

    ``S' = (S_tilde + S) / 2`` and ``lam' = lam / 3``. Requires the shadow
    price to sit strictly inside the ``lam`` band (checked); the gaps are then
    positive for every ``lam < 1`` and are recomputed node by node anyway.
    """
    check_tree(tree)
    check_lambda(lam, allow_zero=False)
    band = verify_band(shadow, lam, tree)
    if not band.passed:
        raise ValueError(
            f"shadow price is not strictly inside the band at node {tree.labels[band.node]} "
            f"(|S_tilde/S - 1| = {float(band.max_deviation):.6g} >= {float(lam):.6g})"
        )
    lam_p = lam / 3
    S = tree.price
    sp = tuple((st + s) / 2 for st, s in zip(shadow.values, S))
    ask = tuple((1 + lam) * s - (1 + lam_p) * q for s, q in zip(S, sp))
    bid = tuple((1 - lam_p) * q - (1 - lam) * s for s, q in zip(S, sp))
    bad = [v for v in range(tree.n_nodes) if not (ask[v] > 0 and bid[v] > 0)]
    if bad:
        raise ValueError(f"non-positive spread gap at node {tree.labels[bad[0]]}")
    return ShrunkSpread(sp, lam_p, ask, bid)


# --------------------------------------------------------------------------
# tail diagnostics


class InadmissibleStrategyError(ValueError):
    def __init__(self, message, member, node):
        super().__init__(message)
        self.member = member
        self.node = node


@dataclass(frozen=True)
class TailCurve:
    """``values[i] = sup over the family of P(V_T >= m_grid[i])``.

    A curve that looks bounded does not prove boundedness in probability;
    ``heuristic`` is True whenever the probabilities are Monte Carlo
    estimates.
    """

    m_grid: tuple
    values: tuple
    family: str
    heuristic: bool

    def to_csv(self):
        lines = ["m,sup_prob"]
        lines += [f"{float(m)!r},{float(p)!r}" for m, p in zip(self.m_grid, self.values)]
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class StrategyFamily:
    """Named generator of tree strategies: ``members(tree, lam)`` yields
    :class:`TradingStrategy` objects."""

    name: str
    members: Callable


def zero_family():
    return StrategyFamily("zero", lambda tree, lam: iter([TradingStrategy.zeros(tree.n_nodes)]))


def _root_purchase(tree, shares):
    up = [0 * shares] * tree.n_nodes
    down = [0 * shares] * tree.n_nodes
    if shares >= 0:
        up[0] = shares
    else:
        down[0] = -shares
    return TradingStrategy(tuple(up), tuple(down))


def buy_and_hold_family(fractions=(0.25, 0.5, 0.75, 1.0)):
    """Buy ``f / ((1 + lam) S_0)`` shares at the root and hold: ``f`` is the
    fraction of the unit wealth spent, so every member is 1-admissible."""
    fractions = tuple(fractions)
    if any(not 0 <= f <= 1 for f in fractions):
        raise ValueError("fractions must lie in [0, 1]")

    def members(tree, lam):
        for f in fractions:
            yield _root_purchase(tree, f / ((1 + lam) * tree.price[0]))

    return StrategyFamily(f"buy_and_hold{fractions}", members)


def leverage_ladder_family(levels=(1, 2, 4, 8, 16, 32), base=None):
    """Scaled copies ``k * base`` of a base strategy (default: one share
    bought at the root). On a market with arbitrage, scaling the witness keeps
    1-admissibility while pushing the payoff out without bound."""
    levels = tuple(levels)

    def members(tree, lam):
        b = _root_purchase(tree, 1) if base is None else base
        for k in levels:
            yield b.scaled(k)

    return StrategyFamily(f"leverage_ladder{levels}", members)


def upbr_diagnostic(model, lam, family, m_grid, paths=None, seed=None, x=1):
    """Tail curve of 1-admissible terminal liquidation values.

    With ``paths=None`` the probabilities are exact tree expectations;
    otherwise ``paths`` leaves are drawn by path probability with ``seed`` and
    the curve is a Monte Carlo estimate. Every member is checked with the
    ledger first; an inadmissible member raises
    :class:`InadmissibleStrategyError` naming the member and node.
    """
    check_tree(model)
    check_lambda(lam)
    m_grid = tuple(m_grid)
    if list(m_grid) != sorted(m_grid):
        raise ValueError("m_grid must be sorted increasingly")
    leaves = np.array(model.leaves)
    probs = np.array([float(model.path_prob[v]) for v in leaves])
    if paths is None:
        weights = probs
    else:
        rng = check_random_state(seed)
        draws = rng.choice(len(leaves), size=int(paths), p=probs / probs.sum())
        weights = np.bincount(draws, minlength=len(leaves)) / float(paths)
    sup = np.zeros(len(m_grid))
    for k, strat in enumerate(family.members(model, lam)):
        ok, node = check_admissible(strat, model, lam, x)
        if not ok:
            raise InadmissibleStrategyError(
                f"{family.name} member {k} is not {x}-admissible (node {model.labels[node]})",
                k, node,
            )
        vals = liquidation_value(strat, model, lam, x).values
        vt = np.array([float(vals[v]) for v in leaves])
        for i, m in enumerate(m_grid):
            # exact comparison on the exact values avoids float ties at m
            hit = [vals[v] >= m for v in leaves]
            if paths is None:
                # sum the tree's own probabilities so exact trees give exact mass
                mass = sum((model.path_prob[v] for v, h in zip(leaves, hit) if h), 0)
            else:
                mass = weights[np.array(hit)].sum()
            sup[i] = max(sup[i], float(mass))
        log.debug("member %d: E[V_T]=%.6g", k, float(vt @ probs))
    sup = np.minimum.accumulate(np.clip(sup, 0.0, 1.0))
    return TailCurve(m_grid, tuple(float(s) for s in sup), family.name, paths is not None)


# --------------------------------------------------------------------------
# estimator


class ArbitrageScanner(BaseEstimator):
    """Decide viability of a tree by both LPs and cross-check them.

    After ``fit``: ``witness_`` (or None), ``certificate_`` (or None),
    ``viable_`` (no witness) and ``consistent_`` (exactly one of the two
    found). ``predict`` returns the viability flag for each tree given.
    """

    def __init__(self, lam=0.0, exact=None, tol=WITNESS_TOL):
        self.lam = lam
        self.exact = exact
        self.tol = tol

    def _scan(self, tree):
        witness = arbitrage_lp(tree, self.lam, self.exact, self.tol)
        cert = find_scps(tree, self.lam, self.exact, self.tol)
        return witness, cert

    def fit(self, tree, y=None):
        check_tree(tree)
        self.witness_, self.certificate_ = self._scan(tree)
        self.viable_ = self.witness_ is None
        self.consistent_ = (self.witness_ is None) != (self.certificate_ is None)
        if not self.consistent_:
            log.warning("arbitrage LP and price-system LP disagree on %r", tree)
        return self

    def predict(self, trees: Iterable | EventTree):
        check_is_fitted(self, "viable_")
        if isinstance(trees, EventTree):
            trees = [trees]
        return np.array([arbitrage_lp(t, self.lam, self.exact, self.tol) is None
                         for t in trees])
