"""Independent reference computations used as test oracles.

Each oracle recomputes a quantity from first principles with a different
traversal than the package code: path walks from the root instead of
forward recursions, forward conditional expectations instead of backward
induction, and brute-force grids instead of Newton solvers.
"""
from __future__ import annotations

import itertools
import math


def path_to(tree, v):
    chain = [v]
    while tree.parent[chain[-1]] != -1:
        chain.append(tree.parent[chain[-1]])
    return chain[::-1]


def ledger_oracle(strategy, tree, lam, x):
    """Liquidation value at each node by re-walking the whole path from the root."""
    out = []
    for v in range(tree.n_nodes):
        cash = 0
        shares = 0
        for u in path_to(tree, v):
            s = tree.price[u]
            cash -= (1 + lam) * s * strategy.dphi_up[u]
            cash += (1 - lam) * s * strategy.dphi_down[u]
            shares += strategy.dphi_up[u] - strategy.dphi_down[u]
        s = tree.price[v]
        bid, ask = (1 - lam) * s, (1 + lam) * s
        close = shares * bid if shares >= 0 else shares * ask
        out.append(x + cash + close)
    return out


def leaf_descendants(tree, v):
    return [leaf for leaf in tree.leaves if v in path_to(tree, leaf)]


def segments_by_path_walk(tree, lam, level_scale):
    """Segment index and opening flag per node from a root-to-node walk."""
    band = 1 + lam / 3
    seg, opening = [], []
    for v in range(tree.n_nodes):
        n, s_open, opened = 1, tree.price[0], True
        for u in path_to(tree, v)[1:]:
            s = tree.price[u]
            opened = s > band * s_open or s * band < s_open or s > n * level_scale
            if opened:
                n, s_open = n + 1, s
        seg.append(n)
        opening.append(opened)
    return seg, opening


def shadow_by_forward_expectation(tree, lam, level_scale):
    """Shadow price as an explicit conditional expectation over leaves.

    For a node inside a segment, each leaf below it is followed down to the
    first node that opens a new segment or is a leaf; the target is the
    price one step before that node. The leaf-probability weighted average
    of the targets is the shadow price; openings and leaves keep ``S``.
    """
    _, opening = segments_by_path_walk(tree, lam, level_scale)
    pp = tree.path_prob
    out = []
    for v in range(tree.n_nodes):
        if opening[v] or tree.is_leaf(v):
            out.append(tree.price[v])
            continue
        acc = 0
        for leaf in leaf_descendants(tree, v):
            chain = path_to(tree, leaf)
            below = chain[chain.index(v) + 1:]
            for c in below:
                if opening[c] or tree.is_leaf(c):
                    acc = acc + pp[leaf] / pp[v] * tree.price[tree.parent[c]]
                    break
        out.append(acc)
    return out


def grid_maximize(f, lo, hi, points=21, resolution=1e-4, rounds=12):
    """Nested coarse-to-fine grid maximisation of ``f`` over a box.

    ``lo``/``hi`` are sequences (one entry per coordinate). Each round
    evaluates a full tensor grid and zooms around the best point until the
    grid spacing falls below ``resolution``.
    """
    lo = list(lo)
    hi = list(hi)
    best_val, best_x = -math.inf, None
    for _ in range(rounds):
        axes = [
            [a + (b - a) * i / (points - 1) for i in range(points)]
            for a, b in zip(lo, hi)
        ]
        for x in itertools.product(*axes):
            val = f(x)
            if val > best_val:
                best_val, best_x = val, x
        step = max((b - a) / (points - 1) for a, b in zip(lo, hi))
        if step < resolution:
            break
        width = [2 * (b - a) / (points - 1) for a, b in zip(lo, hi)]
        lo = [c - w for c, w in zip(best_x, width)]
        hi = [c + w for c, w in zip(best_x, width)]
    return best_val, best_x


def utility_grid_oracle(tree, lam, x, U, half_width, points=21, resolution=1e-4):
    """Maximise expected utility over share positions by nested grid search.

    One coordinate per internal node: the number of shares held after
    trading there. Every grid point is valued by a vectorised cash walk;
    points with a negative liquidation value anywhere (or a non-positive
    terminal value) are infeasible. The grid is zoomed around the best point
    (two cells each side) until the cell size is below ``resolution``.
    Returns ``(u, positions)``.
    """
    import numpy as np

    internal = list(tree.internal)
    col = {v: j for j, v in enumerate(internal)}
    S = np.array([float(s) for s in tree.price])
    P = np.array([float(p) for p in tree.path_prob])
    lam = float(lam)
    K = len(internal)
    center = np.zeros(K)
    width = np.full(K, float(half_width))
    best_val, best_pos = -math.inf, center
    while True:
        axes = [np.linspace(c - w, c + w, points) for c, w in zip(center, width)]
        grid = np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, K)
        n = grid.shape[0]
        pos = np.zeros((tree.n_nodes, n))
        cash = np.zeros((tree.n_nodes, n))
        feasible = np.ones(n, dtype=bool)
        utility = np.zeros(n)
        for v in range(tree.n_nodes):
            p = tree.parent[v]
            held = np.zeros(n) if p == -1 else pos[p]
            prev_cash = np.zeros(n) if p == -1 else cash[p]
            new = grid[:, col[v]] if v in col else held
            d = new - held
            cash[v] = prev_cash - np.where(d > 0, (1 + lam) * S[v] * d, (1 - lam) * S[v] * d)
            pos[v] = new
            liq = np.where(new >= 0, (1 - lam) * S[v] * new, (1 + lam) * S[v] * new)
            value = x + cash[v] + liq
            feasible &= value >= -1e-12
            if tree.is_leaf(v):
                feasible &= value > 0
                with np.errstate(divide="ignore", invalid="ignore"):
                    utility += P[v] * np.where(value > 0, U.U(np.maximum(value, 1e-300)), -np.inf)
        utility[~feasible] = -np.inf
        k = int(np.argmax(utility))
        if utility[k] > best_val:
            best_val, best_pos = float(utility[k]), grid[k].copy()
        cell = 2 * width / (points - 1)
        if cell.max() < resolution:
            return best_val, best_pos
        center = best_pos
        width = 2 * cell
