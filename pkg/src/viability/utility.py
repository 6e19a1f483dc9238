"""Expected utility of terminal liquidation value on finite trees.

Primal: maximise ``E[U(V_T)]`` over self-financing strategies that keep the
liquidation value non-negative at every node. With costs the decision
variables are buy/sell increments ``b, s >= 0`` at internal nodes plus an
epigraph variable ``t <= V_T`` per leaf (``V_T`` is the minimum of two linear
forms); without costs the net trades are free variables and ``V_T`` is
linear in them. Either way the problem is concave with linear constraints
and is solved with a log-barrier Newton method.

Dual: minimise ``E[V(y Z_T)]`` over the polar of the admissible terminal
values, where ``V`` is the convex conjugate of ``U`` and ``Z_T`` is the
certificate mass at the leaves over ``P``. The polar is the consistent
price system polytope of :mod:`viability.cps` enlarged by mass parked at
internal nodes (the multipliers of the solvency constraints); the strict
certificate found by the LP gives the interior starting point.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_lambda, check_positive, check_random_state, check_tree
from .cps import find_scps
from .ledger import TradingStrategy, check_admissible, liquidation_value
from .scan import arbitrage_lp

log = logging.getLogger(__name__)

KKT_TOL = 1e-8
GAP_TOL = 1e-12          # target barrier gap mu * (#inequalities)

__all__ = [
    "UtilityFunction",
    "log_utility",
    "power_utility",
    "parse_utility",
    "NotViableError",
    "ConvergenceError",
    "PrimalSolution",
    "DualSolution",
    "DualityReport",
    "maximize_utility",
    "dual_value",
    "duality_gap",
    "numeraire_check",
    "NumeraireReport",
    "random_admissible_strategy",
    "UtilityMaximizer",
]


# --------------------------------------------------------------------------
# utilities


@dataclass(frozen=True)
class UtilityFunction:
    """Log utility (``kind="log"``) or power utility ``x**p / p`` with
    ``p < 1, p != 0``."""

    kind: str = "log"
    p: float | None = None

    def __post_init__(self):
        if self.kind == "log":
            if self.p is not None:
                raise ValueError("log utility takes no exponent")
        elif self.kind == "power":
            if self.p is None or not self.p < 1 or self.p == 0:
                raise ValueError(f"power utility needs p < 1, p != 0 (got {self.p})")
        else:
            raise ValueError(f"unknown utility kind {self.kind!r}")

    @property
    def name(self):
        return "log" if self.kind == "log" else f"power:{self.p:g}"

    @property
    def asymptotic_elasticity(self):
        """``limsup x U'(x) / U(x)``: 0 for log, ``p`` for power."""
        return 0.0 if self.kind == "log" else float(self.p)

    AE = asymptotic_elasticity

    def U(self, x):
        x = np.asarray(x, dtype=float)
        out = np.full(x.shape, -np.inf)
        pos = x > 0
        if self.kind == "log":
            out[pos] = np.log(x[pos])
        else:
            out[pos] = np.power(x[pos], self.p) / self.p
            if self.p > 0:
                out[x == 0] = 0.0
        return out if out.ndim else float(out)

    def U_prime(self, x):
        x = np.asarray(x, dtype=float)
        return 1.0 / x if self.kind == "log" else np.power(x, self.p - 1)

    def U_second(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "log":
            return -1.0 / (x * x)
        return (self.p - 1) * np.power(x, self.p - 2)

    def I(self, y):
        """Inverse marginal utility."""
        y = np.asarray(y, dtype=float)
        return 1.0 / y if self.kind == "log" else np.power(y, 1.0 / (self.p - 1))

    def V(self, y):
        """Convex conjugate ``sup_x [U(x) - x y]``."""
        y = np.asarray(y, dtype=float)
        if self.kind == "log":
            return -np.log(y) - 1.0
        p = self.p
        return (1 - p) / p * np.power(y, p / (p - 1))

    def V_prime(self, y):
        return -self.I(y)

    def V_second(self, y):
        y = np.asarray(y, dtype=float)
        if self.kind == "log":
            return 1.0 / (y * y)
        p = self.p
        return np.power(y, (2 - p) / (p - 1)) / (1 - p)


def log_utility():
    return UtilityFunction("log")


def power_utility(p):
    return UtilityFunction("power", float(p))


def parse_utility(text):
    """``"log"`` or ``"power:p"``."""
    text = text.strip().lower()
    if text == "log":
        return log_utility()
    if text.startswith("power:"):
        return power_utility(float(text.split(":", 1)[1]))
    raise ValueError(f"utility must be 'log' or 'power:p', got {text!r}")


# --------------------------------------------------------------------------
# barrier Newton


class NotViableError(ValueError):
    """The tree admits arbitrage at this cost level; carries the witness."""

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class ConvergenceError(RuntimeError):
    def __init__(self, message, residual):
        super().__init__(f"{message} (KKT residual {residual:.3e})")
        self.residual = residual


@dataclass
class _BarrierResult:
    z: np.ndarray
    value: float
    residual: float
    iterations: int
    mu: float


def _barrier_minimize(fun, z0, G, h, A=None, b=None, mu0=1e-1, gap=GAP_TOL,
                      max_newton=100, ridge=1e-14):
    """Minimise convex ``fun`` subject to ``G z <= h`` and ``A z = b``.

    ``fun(z)`` returns ``(f, grad, hess)`` or ``None`` outside its domain.
    ``z0`` must be strictly feasible for the inequalities and satisfy the
    equalities. Equalities are eliminated by moving only within the null
    space of ``A`` (redundant rows are fine), which keeps them satisfied to
    rounding error however ill-conditioned the barrier Hessian becomes.
    """
    from scipy.linalg import null_space

    z = np.array(z0, dtype=float)
    n = z.size
    m_ineq = G.shape[0]
    if A is None:
        A = np.zeros((0, n))
    N = null_space(A) if A.shape[0] else np.eye(n)
    if np.any(h - G @ z <= 0):
        raise ValueError("barrier start is not strictly feasible")
    mu = mu0
    total = 0

    def phi(zz, mu):
        out = fun(zz)
        if out is None:
            return None
        s = h - G @ zz
        if np.any(s <= 0):
            return None
        f, g, H = out
        inv = 1.0 / s
        val = f - mu * np.log(s).sum()
        grad = N.T @ (g + mu * (G.T @ inv))
        GN = G @ N
        hess = N.T @ H @ N + mu * (GN.T * inv**2) @ GN
        return val, grad, hess

    while True:
        for _ in range(max_newton):
            val, grad, hess = phi(z, mu)
            hess = hess + ridge * np.eye(hess.shape[0])
            try:
                du = np.linalg.solve(hess, -grad)
            except np.linalg.LinAlgError:
                du = np.linalg.lstsq(hess, -grad, rcond=None)[0]
            dz = N @ du
            dec2 = float(-grad @ du)
            total += 1
            if dec2 / 2 <= 1e-24 * max(1.0, abs(val)):
                break
            step = 1.0
            while True:
                trial = z + step * dz
                nxt = phi(trial, mu)
                if nxt is not None and nxt[0] <= val - 0.25 * step * dec2:
                    break
                step *= 0.5
                if step < 1e-16:
                    break
            if step < 1e-16:
                break
            z = trial
        if mu * m_ineq <= gap:
            break
        mu = max(mu * 0.1, gap / max(m_ineq, 1) * 0.999)
    z = _polish(fun, z, G, h, A, b)
    residual = _kkt_residual(fun(z)[1], G, h - G @ z, A)
    f = fun(z)[0]
    return _BarrierResult(z, f, residual, total, mu)


def _polish(fun, z, G, h, A, b, thresholds=(1e-13, 1e-12, 1e-11, 1e-10, 1e-9, 1e-8,
                                             1e-7, 1e-6, 1e-5)):
    """Crossover: fix near-active constraints as equalities and finish with
    Newton steps on that face (no barrier term, so no ill-conditioning).

    The barrier point is only optimal to within its duality gap, which on
    flat objectives (small leaf probabilities) leaves the optimiser itself
    much less accurate. For each activity threshold the face problem is
    solved; the feasible result with the lowest objective is kept, and the
    barrier point is kept when no face solution improves on it.
    """
    from scipy.linalg import null_space

    if b is None:
        b = np.zeros(A.shape[0])
    best_z, best_f = z, fun(z)[0]
    slack0 = h - G @ z
    scale = max(1.0, float(np.abs(slack0).max(initial=0.0)))
    tried = set()
    for thr in thresholds:
        act = tuple(np.nonzero(slack0 <= thr * scale)[0])
        if act in tried:
            continue
        tried.add(act)
        act = np.array(act, dtype=int)
        E = np.vstack([A, G[act]])
        e = np.concatenate([b, h[act]])
        if E.shape[0] == 0:
            continue
        zz = z + np.linalg.lstsq(E, e - E @ z, rcond=None)[0]
        N = null_space(E)
        out = fun(zz)
        for _ in range(30):
            if out is None or N.shape[1] == 0:
                break
            _, g, H = out
            gN = N.T @ g
            du = np.linalg.lstsq(N.T @ H @ N, -gN, rcond=None)[0]
            zz = zz + N @ du
            out = fun(zz)
            if np.abs(N @ du).max(initial=0.0) < 1e-15 * max(1.0, np.abs(zz).max()):
                break
        if out is None:
            continue
        if (h - G @ zz).min() < -1e-13 * scale:
            continue
        if out[0] <= best_f:
            best_z, best_f = zz, out[0]
    return best_z


def _kkt_residual(grad, G, slack, A, thresholds=(1e-10, 1e-9, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4)):
    """KKT residual of a point, independent of the barrier parameter.

    For a given activity threshold, non-negative multipliers for the
    constraints with small slack (free ones for equalities) are fitted by
    bounded least squares; the residual is the larger of the stationarity
    error and the complementarity ``max lambda_j * s_j``. Every threshold
    yields a valid upper bound, so the smallest one is reported.
    """
    from scipy.optimize import lsq_linear

    scale = max(1.0, float(np.abs(slack).max(initial=0.0)))
    best = float(np.abs(grad).max(initial=0.0))
    for thr in thresholds:
        act = np.nonzero(slack <= thr * scale)[0]
        cols = [G[act].T] if act.size else []
        lb = [np.zeros(act.size)]
        if A.shape[0]:
            cols.append(A.T)
            lb.append(np.full(A.shape[0], -np.inf))
        if not cols:
            continue
        M = np.hstack(cols)
        lbv = np.concatenate(lb)
        fit = lsq_linear(M, -grad, bounds=(lbv, np.full(lbv.size, np.inf)), method="bvls")
        stat = float(np.abs(grad + M @ fit.x).max(initial=0.0))
        comp = float(np.max(fit.x[:act.size] * slack[act], initial=0.0))
        best = min(best, max(stat, comp))
    return best


# --------------------------------------------------------------------------
# primal


@dataclass(frozen=True, eq=False)
class PrimalSolution:
    """Optimal strategy and terminal wealth; ``terminal[i]`` belongs to
    ``tree.leaves[i]``."""

    tree: object
    lam: float
    x: float
    utility: UtilityFunction
    strategy: TradingStrategy
    values: tuple           # liquidation value at every node
    terminal: tuple         # V_T* per leaf
    value: float            # u(x)
    kkt_residual: float
    iterations: int

    def to_csv(self):
        import csv
        import io

        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["node_id", "dphi_up", "dphi_down", "V_liq"])
        for v in range(self.tree.n_nodes):
            w.writerow([self.tree.labels[v], repr(float(self.strategy.dphi_up[v])),
                        repr(float(self.strategy.dphi_down[v])), repr(float(self.values[v]))])
        return buf.getvalue()


def _ancestor_matrix(tree):
    """``M[v, j] = 1`` when internal node ``internal[j]`` is an ancestor-or-self of ``v``."""
    idx = {v: j for j, v in enumerate(tree.internal)}
    M = np.zeros((tree.n_nodes, len(tree.internal)))
    for v in range(tree.n_nodes):
        for a in tree.ancestors(v):
            if a in idx:
                M[v, idx[a]] = 1.0
    return M


def _primal_pieces(tree, lam):
    """Linear maps from (b, s) to liquidation forms.

    Returns ``(M, S_int, S)`` where the position held after trading at ``v``
    is ``M[v] @ (b - s)`` and its cash is ``-M[v] @ ((1+lam) S_int b -
    (1-lam) S_int s)``.
    """
    S = tree.prices
    S_int = S[list(tree.internal)]
    return _ancestor_matrix(tree), S_int, S


def _check_viable(tree, lam):
    if find_scps(tree, lam) is None:
        witness = arbitrage_lp(tree, lam)
        msg = f"tree is not viable at lam={float(lam):g}: no strictly consistent price system"
        if witness is not None:
            msg += f"; arbitrage with E[V_T] = {float(witness.expected_value):.6g}"
        raise NotViableError(msg, witness)


def _solve_primal_costly(tree, lam, x, U):
    M, S_int, S = _primal_pieces(tree, lam)
    leaves = list(tree.leaves)
    L, K = len(leaves), len(S_int)
    held = M[[tree.parent[v] for v in leaves]]       # positions held into each leaf
    P = tree.probs[leaves]
    n = 2 * K + L
    rows, rhs = [], []

    def form(Mrow, mark):
        # coefficients on (b, s) of  cash + position * mark
        cb = Mrow * (-(1 + lam) * S_int + mark)
        cs = Mrow * ((1 - lam) * S_int - mark)
        return cb, cs

    for i, leaf in enumerate(leaves):
        for mark in ((1 - lam) * S[leaf], (1 + lam) * S[leaf]):
            cb, cs = form(held[i], mark)
            r = np.zeros(n)
            r[:K], r[K:2 * K], r[2 * K + i] = -cb, -cs, 1.0
            rows.append(r)
            rhs.append(x)
    for v in tree.internal:
        for mark in ((1 - lam) * S[v], (1 + lam) * S[v]):
            cb, cs = form(M[v], mark)
            r = np.zeros(n)
            r[:K], r[K:2 * K] = -cb, -cs
            rows.append(r)
            rhs.append(x)
    Gb = np.zeros((2 * K, n))
    Gb[np.arange(2 * K), np.arange(2 * K)] = -1.0
    G = np.vstack([np.array(rows).reshape(-1, n), Gb])
    h = np.concatenate([rhs, np.zeros(2 * K)])

    def fun(z):
        t = z[2 * K:]
        if np.any(t <= 0):
            return None
        f = -float(P @ U.U(t))
        g = np.zeros(n)
        g[2 * K:] = -P * U.U_prime(t)
        H = np.zeros((n, n))
        H[2 * K:, 2 * K:] = np.diag(-P * U.U_second(t))
        return f, g, H

    # interior start: a tiny round trip everywhere, leaf values just below V_T
    eps = 1e-3 * x / (float(S.max()) * max(K, 1))
    z0 = np.full(n, eps)
    slack_no_t = h - G @ np.concatenate([z0[:2 * K], np.zeros(L)])
    caps = np.minimum(slack_no_t[0:2 * L:2], slack_no_t[1:2 * L:2])
    z0[2 * K:] = 0.5 * caps
    res = _barrier_minimize(fun, z0, G, h)
    bs = res.z[:2 * K]
    return bs[:K], bs[K:], res


def _solve_primal_frictionless(tree, x, U):
    M, S_int, S = _primal_pieces(tree, 0.0)
    leaves = list(tree.leaves)
    K = len(S_int)
    held = M[[tree.parent[v] for v in leaves]]
    P = tree.probs[leaves]
    # wealth at node v: x + sum_a theta_a (S_v - S_a) over ancestors a held into v
    into = np.zeros((tree.n_nodes, K))
    for v in range(1, tree.n_nodes):
        into[v] = M[tree.parent[v]]
    gain = into * (S[:, None] - S_int[None, :])
    A_leaf = gain[leaves]
    internal_rows = [v for v in tree.internal if v != 0]
    G = -gain[internal_rows] if internal_rows else np.zeros((0, K))
    h = np.full(G.shape[0], x)
    del held

    def fun(z):
        V = x + A_leaf @ z
        if np.any(V <= 0):
            return None
        f = -float(P @ U.U(V))
        g = -A_leaf.T @ (P * U.U_prime(V))
        H = (A_leaf.T * (-P * U.U_second(V))) @ A_leaf
        return f, g, H

    if G.shape[0] == 0:
        G, h = np.zeros((1, K)), np.ones(1)   # inert row keeps the solver generic
    res = _barrier_minimize(fun, np.zeros(K), G, h)
    theta = res.z
    return np.maximum(theta, 0.0), np.maximum(-theta, 0.0), res


def _min_variation(tree, lam, x, target, b0, s0):
    """Among strategies reaching at least ``target`` at every leaf (up to a
    tiny tolerance), pick one with the least total trading."""
    from scipy.optimize import linprog

    M, S_int, S = _primal_pieces(tree, lam)
    K = len(S_int)
    rows, rhs = [], []
    tol = 1e-11 * max(1.0, float(np.max(np.abs(target))))
    for i, leaf in enumerate(tree.leaves):
        Mrow = M[tree.parent[leaf]]
        for mark in ((1 - lam) * S[leaf], (1 + lam) * S[leaf]):
            cb = Mrow * (-(1 + lam) * S_int + mark)
            cs = Mrow * ((1 - lam) * S_int - mark)
            rows.append(np.concatenate([-cb, -cs]))
            rhs.append(x - target[i] + tol)
    for v in tree.internal:
        for mark in ((1 - lam) * S[v], (1 + lam) * S[v]):
            cb = M[v] * (-(1 + lam) * S_int + mark)
            cs = M[v] * ((1 - lam) * S_int - mark)
            rows.append(np.concatenate([-cb, -cs]))
            rhs.append(x)
    res = linprog(np.ones(2 * K), A_ub=np.array(rows), b_ub=np.array(rhs),
                  bounds=(0, None), method="highs")
    if res.status != 0:
        log.debug("min-variation LP failed (%s); keeping barrier strategy", res.message)
        return b0, s0
    return res.x[:K], res.x[K:]


def maximize_utility(tree, lam, x, U, min_variation=True):
    """Optimal terminal liquidation value for utility ``U`` from wealth ``x``.

    Refuses (:class:`NotViableError`) when the tree has no strictly
    consistent price system. Raises :class:`ConvergenceError` when the
    barrier method stops with KKT residual above ``1e-8``. With
    ``min_variation`` the strategy is re-selected among those attaining the
    optimal terminal values by minimal total trading.
    """
    check_tree(tree)
    check_lambda(lam)
    check_positive(x, "x")
    tree_f = tree.as_float() if tree.is_exact else tree
    lam, x = float(lam), float(x)
    _check_viable(tree, lam)
    if lam > 0:
        b, s, res = _solve_primal_costly(tree_f, lam, x, U)
    else:
        b, s, res = _solve_primal_frictionless(tree_f, x, U)
    if res.residual > KKT_TOL:
        raise ConvergenceError("utility maximisation did not converge", res.residual)
    strat = _strategy(tree_f, b, s)
    vals = liquidation_value(strat, tree_f, lam, x).values
    if min_variation:
        target = np.array([vals[v] for v in tree_f.leaves])
        b2, s2 = _min_variation(tree_f, lam, x, target, b, s)
        alt = _strategy(tree_f, b2, s2)
        alt_vals = liquidation_value(alt, tree_f, lam, x).values
        if min(alt_vals) >= -1e-12 and all(alt_vals[v] >= vals[v] - 1e-9 for v in tree_f.leaves):
            strat, vals = alt, alt_vals
    terminal = tuple(float(vals[v]) for v in tree_f.leaves)
    if min(terminal) <= 0:
        raise ConvergenceError("optimal terminal wealth is not strictly positive", res.residual)
    P = tree_f.probs[list(tree_f.leaves)]
    value = float(P @ U.U(np.array(terminal)))
    return PrimalSolution(tree_f, lam, x, U, strat, tuple(float(v) for v in vals), terminal,
                          value, res.residual, res.iterations)


def _strategy(tree, b, s):
    up = np.zeros(tree.n_nodes)
    down = np.zeros(tree.n_nodes)
    for j, v in enumerate(tree.internal):
        up[v], down[v] = max(b[j], 0.0), max(s[j], 0.0)
    return TradingStrategy(tuple(up.tolist()), tuple(down.tolist())).canonical()


# --------------------------------------------------------------------------
# dual


@dataclass(frozen=True, eq=False)
class DualSolution:
    """Minimising deflator ``Y_T = y Z_T`` per leaf (leaf order of the tree).

    ``absorbed`` is the certificate mass parked at internal nodes; it is
    zero for a plain consistent price system and positive when a solvency
    constraint of the primal problem binds.
    """

    y: float
    Y: tuple
    Z: tuple
    w: tuple                # certificate mass per leaf
    absorbed: float
    value: float            # v(y)
    kkt_residual: float


def _subtrees(tree):
    sub = [[] for _ in range(tree.n_nodes)]
    for u in range(tree.n_nodes):
        for a in tree.ancestors(u):
            sub[a].append(u)
    return sub


def _dual_constraints(tree, lam):
    """Constraints on per-node certificate masses.

    Variables are ``(w_v, m_v)`` for every node (``w_v`` only when
    ``lam = 0``, with ``m_v = S_v w_v``). Each node's own pair and each
    internal node's subtree totals must satisfy the bid-ask band, and the
    total mass is one. Mass kept at an internal node is the multiplier of
    the solvency constraint there; with it set to zero this is exactly the
    consistent-price-system polytope.
    """
    n = tree.n_nodes
    S = tree.prices
    sub = _subtrees(tree)
    if lam > 0:
        rows = []
        for v in range(n):
            r_lo, r_hi = np.zeros(2 * n), np.zeros(2 * n)
            r_lo[v], r_lo[n + v] = (1 - lam) * S[v], -1.0
            r_hi[v], r_hi[n + v] = -(1 + lam) * S[v], 1.0
            rows += [r_lo, r_hi]
        for a in tree.internal:
            r_lo, r_hi = np.zeros(2 * n), np.zeros(2 * n)
            for u in sub[a]:
                r_lo[u], r_lo[n + u] = (1 - lam) * S[a], -1.0
                r_hi[u], r_hi[n + u] = -(1 + lam) * S[a], 1.0
            rows += [r_lo, r_hi]
        G = np.array(rows)
        A = np.zeros((1, 2 * n))
        A[0, :n] = 1.0
        return G, np.zeros(G.shape[0]), A, np.ones(1)
    eqs = []
    for a in tree.internal:
        r = np.zeros(n)
        for u in sub[a]:
            r[u] = S[u] - S[a]
        eqs.append(r)
    eqs.append(np.ones(n))
    b = np.zeros(len(eqs))
    b[-1] = 1.0
    return -np.eye(n), np.zeros(n), np.array(eqs), b


def _dual_start(tree, lam, kill=0.01):
    """Strictly interior certificate: the LP's strict price system with a
    constant fraction ``kill`` of the mass reaching each internal node
    parked there at the consistent price (optional stopping keeps every
    subtree ratio equal to the consistent price)."""
    cert = find_scps(tree, lam)
    if cert is None:
        witness = arbitrage_lp(tree, lam)
        raise NotViableError("tree is not viable: no strictly consistent price system", witness)
    w = np.array([float(a) for a in cert.w])
    st = np.array([float(a) for a in cert.S_tilde])
    reach = w * (1 - kill) ** np.array(tree.time, dtype=float)
    own = np.where([tree.is_leaf(v) for v in range(tree.n_nodes)], reach, kill * reach)
    own = own / own.sum()
    if lam > 0:
        return np.concatenate([own, own * st])
    return own


def dual_value(tree, lam, y, U):
    """``v(y) = min over consistent price systems of E[V(y Z_T)]``.

    The minimum runs over the polar of the attainable terminal values: a
    consistent price system whose measure may leave mass at internal nodes
    (see :class:`DualSolution`).
    """
    return _dual_value(tree, lam, y, U)[0]


def _dual_value(tree, lam, y, U, start=None, candidate=None):
    """Returns ``(DualSolution, z)`` with ``z`` the raw optimiser. ``start`` is
    a strictly feasible warm start. ``candidate`` is a point (e.g. the
    optimiser for a nearby ``y``) that is accepted without solving when it
    is feasible and passes the KKT check at this ``y``.
    """
    check_tree(tree)
    check_lambda(lam)
    check_positive(y, "y")
    tree_f = tree.as_float() if tree.is_exact else tree
    lam, y = float(lam), float(y)
    leaves = np.array(tree_f.leaves)
    P = tree_f.probs[leaves]
    G, h, A, b = _dual_constraints(tree_f, lam)
    n = G.shape[1]
    z0 = _dual_start(tree_f, lam) if start is None else np.asarray(start, float)

    def fun(z):
        w = z[leaves]
        if np.any(w <= 0):
            return None
        eta = y * w / P
        f = float(P @ U.V(eta))
        g = np.zeros(n)
        g[leaves] = y * U.V_prime(eta)
        H = np.zeros((n, n))
        H[leaves, leaves] = y * y / P * U.V_second(eta)
        return f, g, H

    def solution(zz, value, resid):
        w = zz[leaves]
        Z = w / P
        return DualSolution(y, tuple(y * Z), tuple(Z), tuple(w),
                            float(1.0 - w.sum()), value, resid)

    if candidate is not None:
        cz = np.asarray(candidate, float)
        out = fun(cz)
        sl = h - G @ cz
        if out is not None and sl.min() >= -1e-13 and np.abs(A @ cz - b).max() < 1e-12:
            r = _kkt_residual(out[1], G, np.maximum(sl, 0.0), A)
            if r <= KKT_TOL * 1e-2:
                return solution(cz, out[0], r), cz
    # a warm start sits near the previous optimum, far from the centre of
    # the polytope, so begin with a small barrier weight there
    res = _barrier_minimize(fun, z0, G, h, A, b, mu0=1e-1 if start is None else 1e-6)
    if res.residual > KKT_TOL:
        raise ConvergenceError("dual minimisation did not converge", res.residual)
    return solution(res.z, res.value, res.residual), res.z


@dataclass(frozen=True)
class DualityReport:
    gap: float              # u(x) - inf_y [v(y) + x y]
    u: float
    y_star: float
    dual_bound: float
    reconstruction_error: float     # max_leaf |V*_T - I(Y*_T)|
    primal: PrimalSolution
    dual: DualSolution


def _golden_min(f, lo, hi, tol=1e-10, max_iter=200):
    g = (math.sqrt(5) - 1) / 2
    a, b = lo, hi
    c, d = b - g * (b - a), a + g * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if abs(b - a) <= tol * max(1.0, abs(a) + abs(b)):
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - g * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + g * (b - a)
            fd = f(d)
    return (a + b) / 2


def duality_gap(tree, lam, x, U, primal=None):
    """Conjugate-duality check and primal-from-dual reconstruction.

    ``inf_y [v(y) + x y]`` is found by golden-section search on ``log y``
    over ``[U'(10 x), U'(x / 10)]``. Each ``v(y)`` solve is warm-started from
    the previous minimiser.
    """
    primal = maximize_utility(tree, lam, x, U) if primal is None else primal
    x = float(x)
    tree_f = tree.as_float() if tree.is_exact else tree
    anchor = _dual_start(tree_f, float(lam))     # strictly interior certificate
    state = {"z": None}
    cache = {}

    def objective(log_y):
        if log_y in cache:
            return cache[log_y][0]
        y = math.exp(log_y)
        # previous minimiser pulled slightly towards the interior anchor, so
        # the warm start is strictly feasible
        start = None if state["z"] is None else 0.999 * state["z"] + 0.001 * anchor
        sol, z = _dual_value(tree_f, lam, y, U, start=start, candidate=state["z"])
        state["z"] = z
        cache[log_y] = (sol.value + x * y, sol)
        return cache[log_y][0]

    lo = math.log(float(U.U_prime(10 * x)))
    hi = math.log(float(U.U_prime(x / 10)))
    lo, hi = min(lo, hi), max(lo, hi)
    ly = _golden_min(objective, lo, hi)
    bound = objective(ly)
    dual = cache[ly][1]
    recon = np.abs(np.array(primal.terminal) - U.I(np.array(dual.Y)))
    return DualityReport(primal.value - bound, primal.value, dual.y, bound,
                         float(recon.max()), primal, dual)


# --------------------------------------------------------------------------
# numeraire property


@dataclass(frozen=True)
class NumeraireReport:
    max_ratio: float            # max over trials of E[V_T / V*_T]
    max_log_ratio: float        # max over trials of E[log(V_T / V*_T)]
    argmax: int
    trials: int
    rejected: int


def random_admissible_strategy(tree, lam, x, rng, scale=1.0, max_halvings=30):
    """Random position changes at internal nodes, halved until ``x``-admissible."""
    S = tree.prices
    pos = np.zeros(tree.n_nodes)
    for v in range(tree.n_nodes):
        inherited = pos[tree.parent[v]] if v else 0.0
        if tree.is_leaf(v):
            pos[v] = inherited
        elif rng.random() < 0.7:
            pos[v] = inherited + rng.normal(0.0, scale * x / S[v])
        else:
            pos[v] = inherited
    rejected = 0
    for _ in range(max_halvings):
        up = np.zeros(tree.n_nodes)
        down = np.zeros(tree.n_nodes)
        for v in tree.internal:
            d = pos[v] - (pos[tree.parent[v]] if v else 0.0)
            up[v], down[v] = max(d, 0.0), max(-d, 0.0)
        strat = TradingStrategy(tuple(up.tolist()), tuple(down.tolist()))
        ok, _ = check_admissible(strat, tree, lam, x)
        if ok:
            return strat, rejected
        rejected += 1
        pos = pos * 0.5
    return TradingStrategy.zeros(tree.n_nodes), rejected


def numeraire_check(tree, lam, candidate, trials=1000, seed=0, scale=1.0, extra=()):
    """Largest ``E[V_T / V*_T]`` (and log version) over random competitors.

    Competitors start from the candidate's wealth ``x``; ``extra`` adds
    specific strategies to the trial set (they must be admissible).
    """
    tree_f = candidate.tree
    lam, x = float(lam), candidate.x
    vstar = np.array(candidate.terminal)
    if np.any(vstar <= 0):
        raise ValueError("candidate has a non-positive terminal value")
    leaves = list(tree_f.leaves)
    P = tree_f.probs[leaves]
    rng = check_random_state(seed)
    best, best_log, arg, rejected = -np.inf, -np.inf, -1, 0
    strategies = list(extra)
    for _ in range(trials):
        strat, rej = random_admissible_strategy(tree_f, lam, x, rng, scale)
        rejected += rej
        strategies.append(strat)
    for k, strat in enumerate(strategies):
        vals = liquidation_value(strat, tree_f, lam, x)
        if not vals.admissible:
            raise ValueError(f"competitor {k} is not admissible (node {vals.first_violation})")
        vt = np.maximum(np.array([vals.values[v] for v in leaves], dtype=float), 0.0)
        ratio = float(P @ (vt / vstar))
        with np.errstate(divide="ignore"):
            lr = float(P @ np.log(vt / vstar))
        if ratio > best:
            best, arg = ratio, k
        best_log = max(best_log, lr)
    return NumeraireReport(best, best_log, arg, len(strategies), rejected)


# --------------------------------------------------------------------------
# estimator


class UtilityMaximizer(BaseEstimator):
    """Estimator wrapper: ``fit(tree)`` solves the primal problem;
    ``predict`` returns the optimal terminal wealth per leaf and ``score``
    the optimal expected utility."""

    def __init__(self, lam=0.05, wealth=1.0, utility="log", min_variation=True):
        self.lam = lam
        self.wealth = wealth
        self.utility = utility
        self.min_variation = min_variation

    def _utility(self):
        return self.utility if isinstance(self.utility, UtilityFunction) else parse_utility(self.utility)

    def fit(self, tree, y=None):
        self.solution_ = maximize_utility(tree, self.lam, self.wealth, self._utility(),
                                          self.min_variation)
        self.value_ = self.solution_.value
        self.strategy_ = self.solution_.strategy
        return self

    def predict(self, tree=None):
        check_is_fitted(self, "solution_")
        return np.array(self.solution_.terminal)

    def score(self, tree=None, y=None):
        check_is_fitted(self, "solution_")
        return self.value_
