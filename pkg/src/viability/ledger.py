"""Self-financing accounting under proportional transaction costs.

A strategy trades at each node (or path event) through non-negative buy and
sell increments. Buying one share costs ``(1 + lam) S`` in cash and selling
one yields ``(1 - lam) S``; the liquidation value closes the share position
at the bid (long) or the ask (short)::

    V = x + phi0 + max(phi1, 0) (1 - lam) S - max(-phi1, 0) (1 + lam) S

Arithmetic is generic: feed ``Fraction`` prices and increments and every
value comes back exact.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from fractions import Fraction


from ._validation import check_lambda
from .market_model import EventTree, PricePath

ADMISSIBILITY_SLACK = 1e-12

__all__ = [
    "TradingStrategy",
    "SimpleStrategy",
    "LiquidationReport",
    "holdings",
    "liquidation_value",
    "check_admissible",
    "total_variation",
    "strategy_from_positions",
    "embed_simple_strategy",
]


@dataclass(frozen=True, eq=False)
class TradingStrategy:
    """Buy/sell increments executed at each node of a model.

    ``discard`` is cash thrown away at a node (the slack allowed by the
    self-financing inequality); it must be all zeros unless the model is
    evaluated with ``allow_discard=True``. ``at_left_limit`` marks path
    trades executed at the pre-jump price ``S_{t-}``.
    """

    dphi_up: tuple
    dphi_down: tuple
    discard: tuple = ()
    at_left_limit: tuple = ()

    def __post_init__(self):
        n = len(self.dphi_up)
        if len(self.dphi_down) != n:
            raise ValueError("dphi_up and dphi_down differ in length")
        if not self.discard:
            object.__setattr__(self, "discard", (0,) * n)
        if not self.at_left_limit:
            object.__setattr__(self, "at_left_limit", (False,) * n)
        if len(self.discard) != n or len(self.at_left_limit) != n:
            raise ValueError("discard/at_left_limit length differs")
        for i, (a, b, c) in enumerate(zip(self.dphi_up, self.dphi_down, self.discard)):
            if a < 0 or b < 0 or c < 0:
                raise ValueError(f"node {i}: increments and discards must be non-negative")

    def __len__(self):
        return len(self.dphi_up)

    @classmethod
    def zeros(cls, n):
        return cls((0,) * n, (0,) * n)

    @property
    def is_canonical(self):
        """True when no node both buys and sells."""
        return all(a == 0 or b == 0 for a, b in zip(self.dphi_up, self.dphi_down))

    def canonical(self):
        """Net simultaneous buys and sells (never lowers any liquidation value)."""
        up, down = [], []
        for a, b in zip(self.dphi_up, self.dphi_down):
            net = a - b
            up.append(net if net > 0 else net * 0)
            down.append(-net if net < 0 else net * 0)
        return TradingStrategy(tuple(up), tuple(down), self.discard, self.at_left_limit)

    def scaled(self, c):
        return TradingStrategy(
            tuple(c * a for a in self.dphi_up),
            tuple(c * b for b in self.dphi_down),
            tuple(c * d for d in self.discard),
            self.at_left_limit,
        )

    def to_csv(self, labels=None):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["node_id", "dphi_up", "dphi_down"])
        for i, (a, b) in enumerate(zip(self.dphi_up, self.dphi_down)):
            w.writerow([labels[i] if labels else i, _num(a), _num(b)])
        return buf.getvalue()


def _num(v):
    return str(v) if isinstance(v, Fraction) else repr(float(v))


@dataclass(frozen=True)
class SimpleStrategy:
    """Frictionless simple strategy on a tree.

    ``rebalance`` maps a node to the number of shares chosen there; between
    rebalancing nodes the holding is kept, and it is unwound at the leaves.
    Nodes absent from the mapping above the first rebalance hold nothing.
    """

    rebalance: dict = field(default_factory=dict)

    def positions(self, tree):
        pos = [0] * tree.n_nodes
        for v in range(tree.n_nodes):
            inherited = pos[tree.parent[v]] if v else 0
            pos[v] = self.rebalance.get(v, inherited)
        for v in tree.leaves:
            pos[v] = pos[v] * 0
        return pos


@dataclass(frozen=True)
class LiquidationReport:
    values: tuple
    admissible: bool
    first_violation: int | None

    def to_csv(self, labels=None):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["node_id", "V_liq", "admissible"])
        for i, v in enumerate(self.values):
            w.writerow([labels[i] if labels else i, _num(v), int(v >= -_slack(v))])
        return buf.getvalue()


def _slack(v):
    return 0 if isinstance(v, (Fraction, int)) else ADMISSIBILITY_SLACK


def _structure(model):
    """(parents, trade prices, mark prices, times) for a tree or a path."""
    if isinstance(model, EventTree):
        return model.parent, model.price, model.price, model.time
    if isinstance(model, PricePath):
        n = len(model)
        return (tuple(range(-1, n - 1)), tuple(model.price), tuple(model.price),
                tuple(model.times))
    raise TypeError(f"unsupported model type {type(model).__name__}")


def holdings(strategy, model, lam, allow_discard=False):
    """Cash and share holdings after trading at every node."""
    check_lambda(lam)
    parent, price, _, _ = _structure(model)
    if len(strategy) != len(parent):
        raise ValueError(
            f"strategy has {len(strategy)} nodes but the model has {len(parent)}"
        )
    if not allow_discard and any(d != 0 for d in strategy.discard):
        raise ValueError("cash discards present; pass allow_discard=True")
    minus = model.price_minus if isinstance(model, PricePath) else price
    n = len(parent)
    phi0, phi1 = [None] * n, [None] * n
    for v in range(n):
        s = minus[v] if strategy.at_left_limit[v] else price[v]
        up, down = strategy.dphi_up[v], strategy.dphi_down[v]
        cash = (1 - lam) * s * down - (1 + lam) * s * up - strategy.discard[v]
        p = parent[v]
        phi0[v] = cash if p == -1 else phi0[p] + cash
        phi1[v] = up - down if p == -1 else phi1[p] + up - down
    return phi0, phi1


def _liq(x, phi0, phi1, s, lam):
    if phi1 >= 0:
        return x + phi0 + phi1 * (1 - lam) * s
    return x + phi0 + phi1 * (1 + lam) * s


def liquidation_value(strategy, model, lam, x, allow_discard=False):
    """Liquidation value at every node and the admissibility verdict.

    Float values within ``1e-12`` below zero are treated as zero; exact
    (``Fraction``) inputs are judged with no slack.
    """
    phi0, phi1 = holdings(strategy, model, lam, allow_discard)
    _, _, mark, times = _structure(model)
    values = tuple(_liq(x, a, b, s, lam) for a, b, s in zip(phi0, phi1, mark))
    bad = [v for v, val in enumerate(values) if val < -_slack(val)]
    first = min(bad, key=lambda v: (times[v], v)) if bad else None
    return LiquidationReport(values, first is None, first)


def check_admissible(strategy, model, lam, x, allow_discard=False):
    """``(admissible, earliest violating node or None)``."""
    rep = liquidation_value(strategy, model, lam, x, allow_discard)
    return rep.admissible, rep.first_violation


def total_variation(strategy, model):
    """Running sum of buy and sell increments along each path."""
    parent, _, _, _ = _structure(model)
    out = [None] * len(parent)
    for v, p in enumerate(parent):
        step = strategy.dphi_up[v] + strategy.dphi_down[v]
        out[v] = step if p == -1 else out[p] + step
    return out


def strategy_from_positions(model, positions):
    """Canonical strategy whose share holding after trading at node v is ``positions[v]``."""
    parent, _, _, _ = _structure(model)
    up, down = [], []
    for v, p in enumerate(parent):
        prev = 0 if p == -1 else positions[p]
        d = positions[v] - prev
        up.append(d if d > 0 else d * 0)
        down.append(-d if d < 0 else d * 0)
    return TradingStrategy(tuple(up), tuple(down))


def embed_simple_strategy(h, tree, lam, x, return_stops=False):
    """Cost-aware strategy mirroring the simple strategy ``h``.

    At each node the strategy wants the position ``h`` prescribes. It is
    taken only while that keeps the liquidation value positive at the node
    and at every child; otherwise the position is unwound at the node and
    stays flat until the next rebalancing node of ``h`` (a stop). Because a
    flat position never loses value, the result is ``x``-admissible.
    """
    check_lambda(lam)
    if not x > 0:
        raise ValueError("initial wealth must be positive")
    target = h.positions(tree)
    S = tree.price
    n = tree.n_nodes
    pos = [None] * n
    cash = [None] * n
    stopped = [False] * n
    stops = []

    def trade_cash(old, new, s):
        d = new - old
        return -(1 + lam) * s * d if d > 0 else -(1 - lam) * s * d

    for v in range(n):
        p = tree.parent[v]
        old_pos = 0 if p == -1 else pos[p]
        old_cash = 0 if p == -1 else cash[p]
        halted = (p != -1 and stopped[p]) and v not in h.rebalance
        want = 0 * target[v] if halted else target[v]
        new_cash = old_cash + trade_cash(old_pos, want, S[v])
        ok = _liq(x, new_cash, want, S[v], lam) > 0 and all(
            _liq(x, new_cash, want, S[c], lam) > 0 for c in tree.children[v]
        )
        if not ok:
            want = 0 * want
            new_cash = old_cash + trade_cash(old_pos, want, S[v])
            if not halted:
                stops.append(v)
            halted = True
        pos[v], cash[v], stopped[v] = want, new_cash, halted
    strat = strategy_from_positions(tree, pos)
    return (strat, stops) if return_stops else strat
