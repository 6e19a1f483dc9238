"""Shadow price construction by band stopping and segment-wise pasting.

Along each path the price is watched from the last segment opening
``S_open``: a new segment opens at the first later node whose ratio to
``S_open`` leaves ``[1/(1 + lam/3), 1 + lam/3]``, or whose price exceeds the
segment number (prices measured in units of twice ``S_0``). Inside a segment the candidate shadow price is the
conditional expectation of the price one step before the segment ends (the
discrete left limit at the exit), pinned to the market price at the opening
node and at the horizon. Every value then lies within a factor
``(1 + lam/3)**2`` of the market price, strictly inside the ``lam`` band.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass

from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_lambda, check_node_array, check_tree

__all__ = [
    "SegmentBoundary",
    "ShadowProcess",
    "BandCheck",
    "band_stopping_times",
    "build_shadow_price",
    "verify_band",
    "ShadowPriceBuilder",
]


@dataclass(frozen=True)
class SegmentBoundary:
    """Nodes at which the ``n``-th stopping time fires, with their trigger."""

    n: int
    nodes: tuple
    triggers: tuple     # "up" | "down" | "level" | "horizon", aligned with nodes


@dataclass(frozen=True, eq=False)
class ShadowProcess:
    tree: object
    values: tuple
    segment: tuple
    opening: tuple      # True where a segment opens (root and exit nodes)

    @property
    def ratio(self):
        return tuple(st / s for st, s in zip(self.values, self.tree.price))

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["node_id", "S", "S_tilde", "ratio", "segment"])
        for v in range(self.tree.n_nodes):
            s, st = self.tree.price[v], self.values[v]
            w.writerow([self.tree.labels[v], repr(float(s)), repr(float(st)),
                        repr(float(st / s)), self.segment[v]])
        return buf.getvalue()


@dataclass(frozen=True)
class BandCheck:
    max_deviation: object
    node: int
    passed: bool


def _band_factor(lam):
    return 1 + lam / 3


def _exit_kind(s, s_open, n, band):
    if s > band * s_open:
        return "up"
    if s * band < s_open:
        return "down"
    if s > n:
        return "level"
    return None


def _segments(tree, lam, level_scale=None):
    """Per-node (segment index, opening flag, trigger of the opening)."""
    band = _band_factor(lam)
    unit = 2 * tree.price[0] if level_scale is None else level_scale
    n_nodes = tree.n_nodes
    seg = [1] * n_nodes
    opening = [False] * n_nodes
    trigger = [None] * n_nodes
    open_price = [None] * n_nodes
    opening[0] = True
    open_price[0] = tree.price[0]
    for v in range(1, n_nodes):
        p = tree.parent[v]
        kind = _exit_kind(tree.price[v], open_price[p], seg[p] * unit, band)
        if kind is None:
            seg[v], open_price[v] = seg[p], open_price[p]
        else:
            seg[v], open_price[v] = seg[p] + 1, tree.price[v]
            opening[v], trigger[v] = True, kind
    return seg, opening, trigger


def band_stopping_times(tree, lam, level_scale=None):
    """Stopping times of the band construction, one boundary per index ``n``.

    For each ``n`` the boundary lists the nodes where the ``n``-th stopping
    time fires: exit nodes of segment ``n`` and, for paths whose segment
    ``n`` (or an earlier one) is still open at the horizon, the leaf.
    The list ends at the first index where every path has reached the horizon.

    The level trigger compares ``S / level_scale`` with ``n``. The default
    ``level_scale = 2 * S_0`` measures prices in units where the initial
    price is 1/2, so the trigger is idle until the price has grown ``2n``-fold.
    """
    check_tree(tree)
    check_lambda(lam)
    seg, opening, trigger = _segments(tree, lam, level_scale)
    n_max = max(seg)
    out = []
    for n in range(1, n_max + 1):
        nodes, kinds = [], []
        for v in range(1, tree.n_nodes):
            if opening[v] and seg[v] == n + 1:
                nodes.append(v)
                kinds.append(trigger[v])
        for leaf in tree.leaves:
            if seg[leaf] <= n and not (opening[leaf] and seg[leaf] == n + 1):
                nodes.append(leaf)
                kinds.append("horizon")
        out.append(SegmentBoundary(n, tuple(nodes), tuple(kinds)))
    return out


def build_shadow_price(tree, lam, level_scale=None):
    """Pasted shadow price, computed by exact backward induction per segment."""
    check_tree(tree)
    check_lambda(lam)
    seg, opening, _ = _segments(tree, lam, level_scale)
    S = tree.price
    values = [None] * tree.n_nodes
    # left-limit target seen from node v: price of v itself when a child ends
    # the segment (exit or horizon), else the continued conditional expectation
    for v in reversed(range(tree.n_nodes)):
        if tree.is_leaf(v) or opening[v]:
            continue
        acc = 0
        for c in tree.children[v]:
            ends = opening[c] or tree.is_leaf(c)
            acc = acc + tree.prob[c] * (S[v] if ends else values[c])
        values[v] = acc
    for v in range(tree.n_nodes):
        if tree.is_leaf(v) or opening[v]:
            values[v] = S[v]
    return ShadowProcess(tree, tuple(values), tuple(seg), tuple(opening))


def verify_band(shadow, lam, tree=None):
    """Largest ``|S_tilde/S - 1|`` over nodes; passes iff strictly below ``lam``."""
    check_lambda(lam)
    tree = shadow.tree if tree is None else tree
    check_node_array(shadow.values, tree, "shadow")
    devs = [abs(st / s - 1) for st, s in zip(shadow.values, tree.price)]
    node = max(range(len(devs)), key=devs.__getitem__)
    return BandCheck(devs[node], node, devs[node] < lam)


class ShadowPriceBuilder(TransformerMixin, BaseEstimator):
    """Estimator wrapper: ``fit`` a tree, ``transform`` returns the shadow prices.

    Parameters
    ----------
    lam : float
        Proportional transaction cost, in (0, 1).
    level_scale : float, optional
        Price unit for the level trigger; defaults to twice the initial price.
    """

    def __init__(self, lam=0.1, level_scale=None):
        self.lam = lam
        self.level_scale = level_scale

    def fit(self, tree, y=None):
        check_tree(tree)
        check_lambda(self.lam, allow_zero=False)
        self.boundaries_ = band_stopping_times(tree, self.lam, self.level_scale)
        self.shadow_ = build_shadow_price(tree, self.lam, self.level_scale)
        self.band_ = verify_band(self.shadow_, self.lam)
        return self

    def transform(self, tree):
        check_is_fitted(self, "shadow_")
        if tree is not self.shadow_.tree:
            return build_shadow_price(check_tree(tree), self.lam, self.level_scale).values
        return self.shadow_.values
