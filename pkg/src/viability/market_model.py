"""Finite event trees and event-driven sample paths.

Every market used elsewhere in the package is built here: recombining-looking
binomial trees (stored as explicit trees), randomly generated trees for the
property suites, trees loaded from the plain-text node format, and the two
path models behind the counterexamples (a compensated Poisson process stopped
at its first jump or at zero, and the barrier-stopped exponential martingale).
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from pathlib import Path

import numpy as np

from ._validation import check_lambda, check_positive, check_random_state

PROB_TOL = 1e-12

__all__ = [
    "TreeValidationError",
    "EventTree",
    "PricePath",
    "ModelConfig",
    "GRSPath",
    "build_binomial_tree",
    "random_tree",
    "load_tree",
    "parse_tree",
    "format_tree",
    "dump_tree",
    "format_paths",
    "parse_paths",
    "load_paths",
    "path_as_tree",
    "stopped_poisson_path",
    "sample_stopped_poisson",
    "sample_poisson_jump_times",
    "grs_segment",
    "grs_upper_hit_probability",
    "sample_grs_outcomes",
    "sample_grs_path",
]


class TreeValidationError(ValueError):
    """Raised when a tree violates a structural or positivity invariant."""

    def __init__(self, message, node=None):
        super().__init__(message if node is None else f"node {node!r}: {message}")
        self.node = node


@dataclass(frozen=True, eq=False)
class EventTree:
    """Finite discrete-time market on an explicit (non-recombining) tree.

    Nodes are integers ``0..n_nodes-1`` in topological order, so every parent
    index is smaller than its children's. ``prob`` holds the conditional
    transition probability from the parent (1 for the root). Prices and
    probabilities may be floats or ``Fraction`` objects; the exact LP mode
    needs the latter.
    """

    parent: tuple
    time: tuple
    prob: tuple
    price: tuple
    labels: tuple = field(default=())

    def __post_init__(self):
        n = len(self.parent)
        if not (len(self.time) == len(self.prob) == len(self.price) == n):
            raise TreeValidationError("parent/time/prob/price lengths differ")
        if n == 0:
            raise TreeValidationError("tree has no nodes")
        if not self.labels:
            object.__setattr__(self, "labels", tuple(str(i) for i in range(n)))
        elif len(self.labels) != n:
            raise TreeValidationError("labels length differs from node count")
        self._validate()

    def _validate(self):
        lab = self.labels
        if self.parent[0] != -1 or self.time[0] != 0:
            raise TreeValidationError("node 0 must be the root at time 0", lab[0])
        for v in range(1, len(self.parent)):
            p = self.parent[v]
            if p == -1:
                raise TreeValidationError("more than one root", lab[v])
            if not 0 <= p < v:
                raise TreeValidationError("parent must precede child", lab[v])
            if self.time[v] != self.time[p] + 1:
                raise TreeValidationError("time must be parent time + 1", lab[v])
        for v, (pr, s) in enumerate(zip(self.prob, self.price)):
            if not pr > 0:
                raise TreeValidationError(f"probability must be positive, got {pr}", lab[v])
            if not s > 0:
                raise TreeValidationError(f"price must be strictly positive, got {s}", lab[v])
        for v, kids in enumerate(self.children):
            if kids:
                total = sum(self.prob[c] for c in kids)
                if abs(total - 1) > PROB_TOL:
                    raise TreeValidationError(
                        f"children probabilities sum to {float(total):.15g}, not 1", lab[v]
                    )
        horizon = self.horizon
        for v in self.leaves:
            if self.time[v] != horizon:
                raise TreeValidationError(
                    f"leaf at time {self.time[v]} but horizon is {horizon}", lab[v]
                )

    @property
    def n_nodes(self):
        return len(self.parent)

    @cached_property
    def children(self):
        kids = [[] for _ in self.parent]
        for v, p in enumerate(self.parent):
            if p >= 0:
                kids[p].append(v)
        return tuple(tuple(k) for k in kids)

    @cached_property
    def horizon(self):
        return max(self.time)

    @cached_property
    def leaves(self):
        return tuple(v for v, k in enumerate(self.children) if not k)

    @cached_property
    def internal(self):
        return tuple(v for v, k in enumerate(self.children) if k)

    def is_leaf(self, v):
        return not self.children[v]

    @cached_property
    def path_prob(self):
        """Unconditional probability of reaching each node."""
        out = [None] * self.n_nodes
        out[0] = self.prob[0] * 0 + 1
        for v in range(1, self.n_nodes):
            out[v] = out[self.parent[v]] * self.prob[v]
        return tuple(out)

    def ancestors(self, v, include_self=True):
        """Nodes from the root down to ``v``."""
        chain = []
        u = v if include_self else self.parent[v]
        while u != -1:
            chain.append(u)
            u = self.parent[u]
        return chain[::-1]

    @cached_property
    def leaves_below(self):
        """For each node, the tuple of leaves in its subtree."""
        below = [[] for _ in self.parent]
        for leaf in self.leaves:
            for a in self.ancestors(leaf):
                below[a].append(leaf)
        return tuple(tuple(b) for b in below)

    @cached_property
    def prices(self):
        return np.array([float(s) for s in self.price])

    @cached_property
    def probs(self):
        return np.array([float(p) for p in self.path_prob])

    @property
    def is_exact(self):
        return all(isinstance(x, (Fraction, int)) for x in self.price + self.prob)

    def as_float(self):
        return EventTree(
            self.parent, self.time,
            tuple(float(p) for p in self.prob),
            tuple(float(s) for s in self.price),
            self.labels,
        )

    def with_prices(self, prices):
        """Same tree and probabilities with a different price per node."""
        return EventTree(self.parent, self.time, self.prob, tuple(prices), self.labels)

    def __repr__(self):
        return (
            f"EventTree(n_nodes={self.n_nodes}, horizon={self.horizon}, "
            f"leaves={len(self.leaves)}, exact={self.is_exact})"
        )


EVENT_KINDS = ("sample", "jump", "stop")


@dataclass(frozen=True, eq=False)
class PricePath:
    """Event-driven sample path with left limits stored explicitly.

    ``price`` is the value right after each event, ``price_minus`` the value
    just before it. A ``stop`` event may carry price 0 (the Poisson model is
    absorbed there); every other value is strictly positive.
    """

    times: np.ndarray
    price: np.ndarray
    price_minus: np.ndarray
    kinds: tuple
    horizon: float

    def __post_init__(self):
        for name in ("times", "price", "price_minus"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        n = len(self.times)
        if not (len(self.price) == len(self.price_minus) == len(self.kinds) == n) or n == 0:
            raise ValueError("path arrays must be non-empty and of equal length")
        if self.times[0] != 0.0:
            raise ValueError("first event must be at time 0")
        if self.price[0] != self.price_minus[0]:
            raise ValueError("at time 0 the left limit must equal the price")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("event times must be strictly increasing")
        if self.times[-1] > self.horizon + 1e-12:
            raise ValueError("events beyond the horizon")
        for i, k in enumerate(self.kinds):
            if k not in EVENT_KINDS:
                raise ValueError(f"unknown event kind {k!r}")
            lo = min(self.price[i], self.price_minus[i])
            if not (lo >= 0 if k == "stop" else lo > 0):
                raise ValueError(f"event {i}: non-positive price")
            if k == "sample" and i > 0 and self.price_minus[i] != self.price[i - 1]:
                raise ValueError(f"event {i}: sample left limit must equal previous price")

    def __len__(self):
        return len(self.times)

    @property
    def terminal(self):
        return float(self.price[-1])

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["time", "S_minus", "S", "event"])
        for t, sm, s, k in zip(self.times, self.price_minus, self.price, self.kinds):
            w.writerow([repr(float(t)), repr(float(sm)), repr(float(s)), k])
        return buf.getvalue()


@dataclass(frozen=True)
class ModelConfig:
    lam: float
    seed: int = 0
    paths: int = 100_000
    steps: int = 0

    def __post_init__(self):
        check_lambda(self.lam, allow_zero=False)
        if self.paths < 1 or self.steps < 0:
            raise ValueError("paths must be >= 1 and steps >= 0")


# --------------------------------------------------------------------------
# trees


def build_binomial_tree(S0, u, d, p, periods):
    """Binomial model stored as an explicit tree (up child first)."""
    check_positive(S0, "S0")
    if not 0 < d < u:
        raise ValueError(f"need 0 < d < u, got d={d}, u={u}")
    if not 0 < p < 1:
        raise ValueError(f"up probability must lie in (0, 1), got {p}")
    if int(periods) != periods or periods < 1:
        raise ValueError(f"periods must be a positive integer, got {periods}")
    one = p * 0 + 1
    parent, time, prob, price, ups = [-1], [0], [one], [S0 * one], [0]
    frontier = [0]
    for t in range(1, periods + 1):
        nxt = []
        for v in frontier:
            for up, q in ((1, p), (0, one - p)):
                k = ups[v] + up
                parent.append(v)
                time.append(t)
                prob.append(q)
                # closed form keeps equal (t, #ups) nodes bit-identical
                price.append(S0 * u**k * d ** (t - k))
                ups.append(k)
                nxt.append(len(parent) - 1)
        frontier = nxt
    return EventTree(tuple(parent), tuple(time), tuple(prob), tuple(price))


def random_tree(seed, max_periods=4, max_branches=3, factor_range=(0.7, 1.4),
                periods=None, exact=True, min_branches=2):
    """Random tree with rational step factors on a 1/100 grid.

    With ``exact=True`` prices and probabilities are ``Fraction`` objects so
    the same tree can be fed to the rational LP; otherwise floats.
    """
    rng = check_random_state(seed)
    T = int(rng.integers(1, max_periods + 1)) if periods is None else periods
    lo, hi = (int(round(100 * f)) for f in factor_range)
    one = Fraction(1)
    parent, time, prob, price = [-1], [0], [one], [one]
    frontier = [0]
    for t in range(1, T + 1):
        nxt = []
        for v in frontier:
            k = int(rng.integers(min_branches, max_branches + 1))
            factors = rng.choice(np.arange(lo, hi + 1), size=k, replace=False)
            weights = rng.integers(1, 10, size=k)
            for f, wgt in zip(factors, weights):
                parent.append(v)
                time.append(t)
                prob.append(Fraction(int(wgt), int(weights.sum())))
                price.append(price[v] * Fraction(int(f), 100))
                nxt.append(len(parent) - 1)
        frontier = nxt
    tree = EventTree(tuple(parent), tuple(time), tuple(prob), tuple(price))
    return tree if exact else tree.as_float()


def path_as_tree(prices, probs=None):
    """Single-branch tree through the given price sequence (deterministic model)."""
    n = len(prices)
    return EventTree(
        tuple(range(-1, n - 1)), tuple(range(n)),
        tuple([1] * n if probs is None else probs), tuple(prices),
    )


def _parse_number(text, exact):
    return Fraction(text) if exact else float(Fraction(text))


def parse_tree(text, exact=False):
    """Parse the plain-text node format.

    One node per line, whitespace or comma separated::

        # id  parent  prob  price  time
        r     -       1     1      0
        u     r       0.5   1.2    1

    Lines starting with ``#`` are comments; the root's parent is ``-``.
    Nodes may appear in any order. Numbers accept decimals or ``a/b``.
    """
    rows = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.replace(",", " ").split()
        if len(parts) != 5:
            raise ValueError(f"line {lineno}: expected 5 fields, got {len(parts)}")
        nid, par, pr, s, t = parts
        try:
            rows.append((nid, None if par in ("-", "root", "None") else par,
                         _parse_number(pr, exact), _parse_number(s, exact), int(t)))
        except (ValueError, ZeroDivisionError) as exc:
            raise ValueError(f"line {lineno}: {exc}") from None
    if not rows:
        raise ValueError("no nodes found")
    ids = [r[0] for r in rows]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate node ids")
    by_id = {r[0]: r for r in rows}
    roots = [r[0] for r in rows if r[1] is None]
    if len(roots) != 1:
        raise TreeValidationError(f"expected exactly one root, found {len(roots)}")
    kids = {i: [] for i in ids}
    for r in rows:
        if r[1] is not None:
            if r[1] not in by_id:
                raise TreeValidationError(f"unknown parent {r[1]!r}", r[0])
            kids[r[1]].append(r[0])
    order, queue = [], [roots[0]]
    while queue:
        nid = queue.pop(0)
        order.append(nid)
        queue.extend(kids[nid])
    if len(order) != len(rows):
        raise TreeValidationError("nodes unreachable from the root (cycle?)")
    index = {nid: i for i, nid in enumerate(order)}
    parent = tuple(-1 if by_id[n][1] is None else index[by_id[n][1]] for n in order)
    return EventTree(
        parent,
        tuple(by_id[n][4] for n in order),
        tuple(by_id[n][2] for n in order),
        tuple(by_id[n][3] for n in order),
        tuple(order),
    )


def load_tree(path, exact=False):
    return parse_tree(Path(path).read_text(), exact=exact)


def _fmt(x):
    if isinstance(x, Fraction):
        return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"
    return repr(float(x))


def format_tree(tree):
    lines = ["# id parent prob price time"]
    for v in range(tree.n_nodes):
        par = "-" if tree.parent[v] == -1 else tree.labels[tree.parent[v]]
        lines.append(
            f"{tree.labels[v]} {par} {_fmt(tree.prob[v])} {_fmt(tree.price[v])} {tree.time[v]}"
        )
    return "\n".join(lines) + "\n"


def dump_tree(tree, path):
    Path(path).write_text(format_tree(tree))


def format_paths(paths):
    """CSV of several paths: ``path,time,S_minus,S,event`` rows."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["path", "time", "S_minus", "S", "event"])
    for i, p in enumerate(paths):
        for t, sm, s, k in zip(p.times, p.price_minus, p.price, p.kinds):
            w.writerow([i, repr(float(t)), repr(float(sm)), repr(float(s)), k])
    return buf.getvalue()


def parse_paths(text):
    """Inverse of :func:`format_paths`; the ``path`` column may be omitted
    for a single path. Each path's horizon is its last event time."""
    rows = list(csv.DictReader(io.StringIO(text)))
    if not rows:
        raise ValueError("no path events found")
    need = {"time", "S_minus", "S", "event"}
    missing = need - set(rows[0])
    if missing:
        raise ValueError(f"path CSV lacks columns {sorted(missing)}")
    groups = {}
    for r in rows:
        groups.setdefault(r.get("path", "0"), []).append(r)
    out = []
    for key, rs in groups.items():
        try:
            times = [float(r["time"]) for r in rs]
            out.append(PricePath(times, [float(r["S"]) for r in rs],
                                 [float(r["S_minus"]) for r in rs],
                                 tuple(r["event"] for r in rs), horizon=times[-1]))
        except ValueError as exc:
            raise ValueError(f"path {key}: {exc}") from None
    return out


def load_paths(path):
    return parse_paths(Path(path).read_text())


# --------------------------------------------------------------------------
# compensated Poisson process stopped at its first jump or at zero


def _check_intensity(beta, T):
    check_positive(beta, "beta")
    check_positive(T, "T")
    if beta * T > 1 + 1e-15:
        raise ValueError(f"intensity must satisfy beta*T <= 1, got {beta * T}")


def stopped_poisson_path(beta, T, rho):
    """Deterministic path ``Y_t = 1 - beta t + 1{t >= rho}`` given the jump time.

    The path stops at the first of: the jump ``rho``, the zero-hitting time
    ``1/beta``, or the horizon ``T``.
    """
    _check_intensity(beta, T)
    tau = 1.0 / beta
    stop = min(rho, tau, T)
    if rho <= stop and rho < tau:
        if rho == 0.0:
            # jump at time zero: left limit equals the start value
            return PricePath([0.0], [2.0], [2.0], ("stop",), T)
        pre = 1.0 - beta * rho
        return PricePath([0.0, rho], [1.0, pre + 1.0], [1.0, pre], ("sample", "stop"), T)
    end = max(1.0 - beta * stop, 0.0)
    return PricePath([0.0, stop], [1.0, end], [1.0, end], ("sample", "stop"), T)


def sample_poisson_jump_times(beta, paths, seed):
    """First jump times of a rate-``beta`` Poisson process, one per path."""
    check_positive(beta, "beta")
    rng = check_random_state(seed)
    return rng.exponential(1.0 / beta, size=int(paths))


def sample_stopped_poisson(beta, T, seed):
    rho = float(sample_poisson_jump_times(beta, 1, seed)[0])
    _check_intensity(beta, T)
    return stopped_poisson_path(beta, T, rho)


# --------------------------------------------------------------------------
# barrier-stopped exponential Brownian martingale


def grs_segment(n, exact=False):
    """(start, lower, upper) barriers of segment ``n >= 1``.

    Segment 1 starts at 1 with barriers 1/4 and 2; segment ``n >= 2`` starts
    at ``2**-2**(n-1)`` with barriers ``2**-2**n`` and ``2**(2-n)``. Reaching
    the upper barrier stops the price.
    """
    if n < 1:
        raise ValueError("segments are numbered from 1")
    two = Fraction(2) if exact else 2.0
    start = two ** 0 if n == 1 else two ** -(2 ** (n - 1))
    return start, two ** -(2**n), two ** (2 - n)


def grs_upper_hit_probability(n, exact=False):
    """Probability that the martingale reaches the upper barrier first.

    Optional stopping gives ``(start - lower) / (upper - lower)``. In float
    mode the value is formed in log space so it stays positive for large n.
    """
    if exact:
        s, a, b = grs_segment(n, exact=True)
        return (s - a) / (b - a)
    ln2 = math.log(2.0)
    log_s = 0.0 if n == 1 else -(2.0 ** (n - 1)) * ln2
    log_b = (2 - n) * ln2
    # a/s and a/b written as powers of two to avoid underflow
    a_over_s = 0.25 if n == 1 else 2.0 ** -(2.0 ** (n - 1))
    a_over_b = 2.0 ** (-(2.0**n) - (2 - n))
    return math.exp(log_s + math.log1p(-a_over_s) - log_b - math.log1p(-a_over_b))


def sample_grs_outcomes(n_max, paths, seed):
    """Segment index at which each path stops (0 if still running after ``n_max``)."""
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    rng = check_random_state(seed)
    q = np.array([grs_upper_hit_probability(n) for n in range(1, n_max + 1)])
    draws = rng.random((int(paths), n_max)) < q
    hit = draws.any(axis=1)
    return np.where(hit, draws.argmax(axis=1) + 1, 0)


@dataclass(frozen=True, eq=False)
class GRSPath:
    path: PricePath
    outcomes: tuple     # per visited segment: "upper" or "lower"
    tau_index: int | None
    capped: bool


def _segment_visual(rng, log_start, log_lo, log_hi, want_upper, steps, dt):
    """Euler path in log space for plotting, rejection-matched to the exact outcome."""
    for _ in range(200):
        xs = [log_start]
        for _ in range(steps * 1000):
            xs.append(xs[-1] - 0.5 * dt + math.sqrt(dt) * rng.standard_normal())
            if xs[-1] >= log_hi or xs[-1] <= log_lo:
                break
        else:
            continue
        if (xs[-1] >= log_hi) == want_upper:
            return xs[1:-1]
    return []


def sample_grs_path(n_max, steps_per_segment, seed):
    """One stopped path of the barrier construction.

    Segment outcomes are drawn from the exact hitting probabilities. When
    ``steps_per_segment > 0`` a fine Euler path is inserted inside each
    segment for visualisation only; otherwise event times are a segment clock
    (segment ``n`` ends at time ``n``).
    """
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    rng = check_random_state(seed)
    times, values, kinds, outcomes = [0.0], [1.0], ["sample"], []
    clock, tau = 0.0, None
    dt = 1.0 / steps_per_segment if steps_per_segment else 0.0
    for n in range(1, n_max + 1):
        s, a, b = grs_segment(n)
        up = rng.random() < grs_upper_hit_probability(n)
        if steps_per_segment:
            interior = _segment_visual(rng, math.log(s), math.log(a) if a > 0 else -np.inf,
                                       math.log(b), up, steps_per_segment, dt)
            for x in interior:
                clock += dt
                times.append(clock)
                values.append(math.exp(x))
                kinds.append("sample")
            clock += dt
        else:
            clock += 1.0
        times.append(clock)
        values.append(b if up else a)
        kinds.append("stop" if up else "sample")
        outcomes.append("upper" if up else "lower")
        if up:
            tau = n
            break
    # lower barriers underflow past n ~ 10; keep the path strictly positive
    values = [max(v, np.finfo(float).tiny) for v in values]
    minus = [values[0]] + values[:-1]
    path = PricePath(times, values, minus, tuple(kinds), horizon=clock)
    return GRSPath(path, tuple(outcomes), tau, tau is None)
