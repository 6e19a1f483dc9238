"""The two continuous-time markets that admit a strictly consistent local
martingale system but no consistent price system.

Jump market
    ``Y`` is a compensated Poisson process with intensity ``beta = 1/T``
    started at 1 and stopped at its first jump ``rho`` or when it reaches 0 at
    ``tau = 1/beta``. Under the reference measure ``P0`` paths are simulated
    event by event (only ``rho`` is random); the market measure is
    ``dP/dP0 = Y_T``. The strategy holds ``exp(-1 + beta t)`` shares up to
    the stop, buying continuously at the ask, and all of its cash flows have
    closed-form antiderivatives::

        int_0^theta (1 - beta s) beta e^{-1+beta s} ds = e^{-1} [(2 - u) e^u - 2],
        u = beta theta

    so the liquidation value at the stop is exact up to float rounding::

        V = x - (1 + lam) e^{-1} [(2 - u) e^u - 1] + (1 - lam) e^{-1+u} S_theta

Barrier market
    ``X = exp(W - t/2)`` is run through segments with barriers
    ``(2**-2**n, 2**(2-n))`` started at the previous lower barrier; ``tau`` is
    the first segment ending at its upper barrier. Segment outcomes follow the
    exact hitting probabilities ``(s - a) / (b - a)`` and the market measure
    reweights ``{tau = rho_n}`` to probability ``2**-n``.
"""
from __future__ import annotations

import csv
import io
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from ._validation import check_lambda, check_positive
from .market_model import (
    PricePath,
    grs_segment,
    grs_upper_hit_probability,
    sample_grs_outcomes,
)
from .scan import detect_obvious_arbitrage

log = logging.getLogger(__name__)

CHUNK = 1 << 16
E_INV = math.exp(-1.0)
POISSON_LAMBDA_MAX = (1.0 - E_INV) / 2.0

__all__ = [
    "PoissonExampleReport",
    "GRSExampleReport",
    "poisson_wealth",
    "poisson_terminal_value",
    "poisson_prestop_infimum",
    "run_poisson_example",
    "grs_tau_distribution",
    "grs_barrier_sequences",
    "grs_oa_scan",
    "OAScan",
    "run_grs_example",
]


def _spawn(seed, paths, chunk=CHUNK):
    """Chunk sizes and independent generators; fixed by (seed, paths) only,
    so the thread count never changes the random stream."""
    sizes = [chunk] * (paths // chunk)
    if paths % chunk:
        sizes.append(paths % chunk)
    children = np.random.SeedSequence(seed).spawn(len(sizes))
    return sizes, [np.random.default_rng(c) for c in children]


def _map_chunks(fn, sizes, rngs, threads):
    if threads and threads > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            return list(ex.map(fn, sizes, rngs))
    return [fn(n, r) for n, r in zip(sizes, rngs)]


# --------------------------------------------------------------------------
# jump market


def poisson_wealth(lam, kind="nominal"):
    """Initial wealth of the jump example.

    ``"nominal"`` is ``1 - 1/e``, the frictionless replication cost of
    ``1{Y_T > 0}``. ``"corrected"`` adds the cost of the proportional
    charges, ``lam (2 - 1/e)``, the least wealth for which the strategy's
    liquidation value dominates ``1{Y_T > 0}`` on every path.
    """
    if kind == "nominal":
        return 1.0 - E_INV
    if kind == "corrected":
        return 1.0 - E_INV + lam * (2.0 - E_INV)
    raise ValueError(f"unknown wealth kind {kind!r}; expected 'nominal' or 'corrected'")


def _bought_cost(u):
    """Shares-times-price paid up to ``u = beta t``, initial purchase included."""
    return E_INV * ((2.0 - u) * np.exp(u) - 1.0)


def poisson_terminal_value(lam, x, u, s_stop):
    """Liquidation value at the stop for stop clock ``u = beta theta``."""
    u = np.asarray(u, dtype=float)
    return x - (1.0 + lam) * _bought_cost(u) + (1.0 - lam) * np.exp(u - 1.0) * s_stop


def poisson_prestop_infimum(lam, x, u):
    """``inf_{t < theta} V_t``: the value before the stop is decreasing in
    ``t``, so the infimum is its left limit at the stop."""
    u = np.asarray(u, dtype=float)
    return x - (1.0 + lam) * _bought_cost(u) + (1.0 - lam) * np.exp(u - 1.0) * (1.0 - u)


@dataclass(frozen=True, eq=False)
class PoissonExampleReport:
    lam: float
    x: float
    wealth_kind: str
    beta: float
    horizon: float
    seed: int
    rho: np.ndarray             # first jump time per path (may exceed the stop)
    jumped: np.ndarray          # True when the jump precedes the zero-hitting time
    terminal_price: np.ndarray  # Y_T
    terminal_value: np.ndarray  # V_T^liq of the strategy, per path
    prestop_min: np.ndarray     # inf of V_t before the stop, per path
    inv_y_mean: float           # E^P[1 / Y_T] via dP/dP0 = Y_T
    inv_y_se: float
    value_mean: float           # E^P[V_T]
    value_se: float
    zero_fraction: float        # P0(Y_T = 0)

    @property
    def paths(self):
        return len(self.rho)

    @property
    def indicator(self):
        return self.jumped.astype(float)

    @property
    def pathwise_margin(self):
        """``V_T - 1{Y_T > 0}`` per path."""
        return self.terminal_value - self.indicator

    @property
    def pathwise_violations(self):
        return int(np.count_nonzero(self.pathwise_margin < 0.0))

    @property
    def pathwise_ok(self):
        return self.pathwise_violations == 0

    @property
    def prestop_ok(self):
        return bool(np.all(self.prestop_min >= 0.0))

    @property
    def strict_local_gap(self):
        """``1/Y_0 - E^P[1/Y_T]``; the target is ``1/e``."""
        return 1.0 - self.inv_y_mean

    @property
    def contradiction(self):
        """``E^P[V_T] >= 1 > x``: no price-system bound ``E[V_T] <= x`` can hold."""
        return self.value_mean >= 1.0 > self.x

    def summary(self):
        return {
            "lambda": self.lam,
            "wealth": self.x,
            "wealth_kind": self.wealth_kind,
            "paths": self.paths,
            "seed": self.seed,
            "E_P_inv_Y": self.inv_y_mean,
            "E_P_inv_Y_se": self.inv_y_se,
            "target_inv_Y": 1.0 - E_INV,
            "strict_local_gap": self.strict_local_gap,
            "P0_zero_fraction": self.zero_fraction,
            "E_P_V": self.value_mean,
            "E_P_V_se": self.value_se,
            "pathwise_violations": self.pathwise_violations,
            "min_pathwise_margin": float(self.pathwise_margin.min()),
            "min_prestop_value": float(self.prestop_min.min()),
            "contradiction": bool(self.contradiction),
        }

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["path", "rho", "jumped", "Y_T", "V_T", "indicator", "margin",
                    "prestop_min"])
        margin = self.pathwise_margin
        for i in range(self.paths):
            w.writerow([i, repr(float(self.rho[i])), int(self.jumped[i]),
                        repr(float(self.terminal_price[i])),
                        repr(float(self.terminal_value[i])), int(self.jumped[i]),
                        repr(float(margin[i])), repr(float(self.prestop_min[i]))])
        return buf.getvalue()


def run_poisson_example(lam, paths=100_000, seed=0, wealth="nominal", horizon=1.0,
                        threads=1):
    """Simulate the jump market under ``P0`` and evaluate the strategy exactly.

    ``wealth`` is ``"nominal"``, ``"corrected"`` (see :func:`poisson_wealth`)
    or a number. Expectations under ``P`` use the density ``Y_T``.
    """
    check_lambda(lam, allow_zero=False)
    if not lam < POISSON_LAMBDA_MAX:
        raise ValueError(
            f"lambda must be below (1 - 1/e)/2 = {POISSON_LAMBDA_MAX:.6f}, got {lam}"
        )
    check_positive(horizon, "horizon")
    paths = int(paths)
    if paths < 2:
        raise ValueError("need at least two paths for standard errors")
    if isinstance(wealth, str):
        kind, x = wealth, poisson_wealth(lam, wealth)
    else:
        kind, x = "custom", float(wealth)
    beta = 1.0 / horizon

    sizes, rngs = _spawn(seed, paths)
    rho = np.concatenate(_map_chunks(lambda n, r: r.exponential(1.0 / beta, size=n),
                                     sizes, rngs, threads))
    # ties rho == 1/beta have probability zero; count them as "hit zero first"
    jumped = rho < 1.0 / beta
    u = np.where(jumped, beta * rho, 1.0)
    y_t = np.where(jumped, 2.0 - u, 0.0)
    v_t = poisson_terminal_value(lam, x, u, y_t)
    pre = poisson_prestop_infimum(lam, x, u)

    n = float(paths)
    # E^P[1/Y_T] = E0[Y_T * (1/Y_T) 1{Y_T > 0}]
    g = jumped.astype(float)
    wv = y_t * v_t
    report = PoissonExampleReport(
        lam=float(lam), x=x, wealth_kind=kind, beta=beta, horizon=horizon, seed=seed,
        rho=rho, jumped=jumped, terminal_price=y_t, terminal_value=v_t, prestop_min=pre,
        inv_y_mean=float(g.mean()), inv_y_se=float(g.std(ddof=1) / math.sqrt(n)),
        value_mean=float(wv.mean()), value_se=float(wv.std(ddof=1) / math.sqrt(n)),
        zero_fraction=float(1.0 - g.mean()),
    )
    log.info("jump example: lam=%g x=%.6f E_P[1/Y]=%.5f E_P[V]=%.5f violations=%d",
             lam, x, report.inv_y_mean, report.value_mean, report.pathwise_violations)
    return report


# --------------------------------------------------------------------------
# barrier market


def grs_tau_distribution(n_max, exact=False):
    """``(P0(tau = rho_n) for n = 1..n_max, P0(tau > rho_{n_max}))``.

    Each probability is the product of lower-barrier outcomes in the earlier
    segments and an upper-barrier outcome in segment ``n``. Exact mode
    returns ``Fraction`` values (practical up to ``n_max`` around 20).
    """
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    probs = []
    survive = Fraction(1) if exact else 1.0
    for n in range(1, n_max + 1):
        q = grs_upper_hit_probability(n, exact=exact)
        probs.append(survive * q)
        survive = survive * (1 - q)
    return tuple(probs), survive


def grs_never_stops_probability(tol=1e-300):
    """``P0(tau = infinity)``: the infinite product of lower-barrier outcomes."""
    out, n = 1.0, 1
    while True:
        q = grs_upper_hit_probability(n)
        out *= 1.0 - q
        if q < tol:
            return out
        n += 1


def grs_barrier_sequences(n_max):
    """Both readings of the upper barriers, side by side.

    Row ``n``: segment start, lower barrier ``2**-2**n``, the value
    ``2**(2-n)`` that defines ``tau`` at ``rho_n``, and the upper barrier of
    the hitting time that opens segment ``n`` (2 for the first segment,
    ``2**(-(n-1)+1)`` for the restarted ones). Under the adopted reading the
    last two columns coincide.
    """
    rows = []
    for n in range(1, n_max + 1):
        start, lower, _ = grs_segment(n, exact=True)
        tau_value = Fraction(2) ** (2 - n)
        segment_upper = Fraction(2) if n == 1 else Fraction(2) ** (-(n - 1) + 1)
        rows.append((n, start, lower, tau_value, segment_upper))
    return rows


def grs_path_values(n):
    """Segment-end values of the path stopping in segment ``n``.

    Lower barriers below the smallest positive float are clamped to it.
    """
    vals = [1.0]
    tiny = np.finfo(float).tiny
    for k in range(1, n):
        vals.append(max(2.0 ** -(2.0 ** k), tiny))
    vals.append(2.0 ** (2 - n))
    return vals


def _waypoint_path(points, levels):
    """Continuous path through ``points``: between consecutive waypoints the
    price moves monotonically and every level strictly between them is
    inserted, so level crossings happen exactly at the level."""
    vals = [points[0]]
    for a, b in zip(points[:-1], points[1:]):
        inner = sorted((L for L in levels if min(a, b) < L < max(a, b)), reverse=bool(b < a))
        vals.extend(inner)
        vals.append(b)
    times = np.arange(len(vals), dtype=float)
    kinds = ("sample",) * (len(vals) - 1) + ("stop",)
    return PricePath(times, vals, [vals[0]] + vals[:-1], kinds, horizon=float(len(vals) - 1))


def _grs_price_path(n, levels=()):
    """Price path stopping in segment ``n``, monotone inside each segment."""
    return _waypoint_path(grs_path_values(n), levels)


def _grs_support(depth, levels):
    """Path shapes covering the model's support for level-crossing rules.

    For every stop segment ``n <= depth``: the monotone shape, and for each
    segment ``k <= n`` and each level strictly between that segment's
    barriers, the shape that first visits the level inside segment ``k``
    (the price can wander anywhere between the barriers before exiting).
    """
    for n in range(1, depth + 1):
        ends = grs_path_values(n)
        yield n, _waypoint_path(ends, levels)
        for k in range(1, n + 1):
            lo = max(2.0 ** -(2.0 ** k), np.finfo(float).tiny)
            hi = 2.0 ** (2 - k)
            for L in levels:
                if lo < L < hi:
                    pts = ends[:k] + [L] + ends[k:]
                    yield n, _waypoint_path(pts, levels)


def _oa_levels(alpha, n_levels):
    return [(1 + alpha) ** k for k in range(-n_levels, n_levels + 1) if k]


def _oa_refuted(candidate, scenarios):
    """Label of the first ``(label, path)`` scenario on which the candidate's
    entry rule fires but the target ratio is never reached, else None."""
    kind, level = candidate.sigma
    alpha = candidate.alpha
    for label, p in scenarios:
        if kind == "start":
            i = 0
        else:
            idx = np.nonzero(p.price >= level if kind == "above" else p.price <= level)[0]
            if not idx.size:
                continue
            i = int(idx[0])
        ref, tail = p.price[i], p.price[i + 1:]
        ok = (tail >= (1 + alpha) * ref) if candidate.direction == "up" else \
            (tail * (1 + alpha) <= ref)
        if not ok.any():
            return label
    return None


@dataclass(frozen=True)
class OAScan:
    """Obvious-arbitrage search for one ``alpha``.

    ``candidate`` is what the level-crossing heuristic finds on the sampled
    path shapes alone; ``refuted_by`` is the first stop segment of a
    support shape on which it fails. ``certified`` is the heuristic run on
    the support shapes themselves (every stop segment up to
    ``support_depth``, with excursions to every level): a pair returned
    there holds on each positive-probability shape considered.
    """

    alpha: float
    candidate: object
    refuted_by: int | None
    certified: object
    support_depth: int
    support_size: int

    @property
    def found(self):
        return self.certified is not None


def grs_oa_scan(stop_segments, alpha, n_levels=20, support_depth=None):
    """Heuristic obvious-arbitrage scan of the barrier market.

    ``stop_segments`` are the sampled stop indices (one monotone path shape
    each). The default ``support_depth`` is deep enough that the final price
    of the deepest shape lies below every scanned level.
    """
    if support_depth is None:
        support_depth = int(math.ceil(2 + (n_levels + 1) * math.log2(1 + alpha))) + 2
    levels = _oa_levels(alpha, n_levels)
    distinct = sorted(set(int(n) for n in stop_segments if n >= 1))
    sampled = [_grs_price_path(n, levels) for n in distinct]
    candidate = detect_obvious_arbitrage(sampled, alpha, n_levels)
    support = list(_grs_support(support_depth, levels))
    refuted = _oa_refuted(candidate, support) if candidate is not None else None
    certified = detect_obvious_arbitrage([p for _, p in support], alpha, n_levels)
    return OAScan(float(alpha), candidate, refuted, certified, support_depth, len(support))


@dataclass(frozen=True, eq=False)
class GRSExampleReport:
    n_max: int
    seed: int
    paths: int
    tau_probs: tuple            # exact P0(tau = rho_n), n = 1..n_max
    tail: float                 # P0(tau > rho_{n_max})
    never_stops: float          # P0(tau = infinity)
    weights: np.ndarray         # 2^-n / P0(tau = rho_n)
    weight_mass: float          # sum_n P0(tau = rho_n) * weight_n = 1 - 2^-n_max
    p0_outcomes: np.ndarray     # stop segment per P0 path (0 = beyond n_max)
    freq: np.ndarray            # weighted estimate of P(tau = rho_n)
    freq_se: np.ndarray
    p0_freq: np.ndarray         # unweighted P0 frequencies of tau = rho_n
    p_outcomes: np.ndarray      # stop segment per path sampled directly under P
    weighted_capped_mass: float # weighted mass of P0 paths still running at n_max
    oa: dict                    # alpha -> OAScan
    barriers: list = field(default_factory=list)

    @property
    def all_tau_finite(self):
        """Every P-path stops: the directly sampled ones by construction of
        their segment index, the reweighted ones because running paths carry
        zero weight."""
        return bool(np.all(self.p_outcomes >= 1)) and self.weighted_capped_mass == 0.0

    @property
    def oa_found(self):
        return any(v.found for v in self.oa.values())

    def visit_frequencies(self):
        """``P(tau >= rho_n)``-style barrier visits: fraction of P-paths that
        reach segment ``n`` (exact value ``2**-(n-1)``)."""
        return np.array([np.mean(self.p_outcomes >= n) for n in range(1, self.n_max + 1)])

    def summary(self):
        return {
            "n_max": self.n_max,
            "paths": self.paths,
            "seed": self.seed,
            "P0_tau_rho1": float(self.tau_probs[0]),
            "P0_tail": float(self.tail),
            "P0_never_stops": self.never_stops,
            "weight_mass": self.weight_mass,
            "all_tau_finite": self.all_tau_finite,
            "oa_found": self.oa_found,
        }

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "P0_tau_eq_rho_n", "weight", "P_freq", "P_freq_se", "target",
                    "P0_freq", "visit_freq", "lower_barrier", "tau_value", "segment_upper"])
        visits = self.visit_frequencies()
        for i in range(self.n_max):
            n, _, lower, tau_value, upper = self.barriers[i]
            w.writerow([n, repr(float(self.tau_probs[i])), repr(float(self.weights[i])),
                        repr(float(self.freq[i])), repr(float(self.freq_se[i])),
                        repr(2.0 ** -n), repr(float(self.p0_freq[i])), repr(float(visits[i])),
                        str(lower), str(tau_value), str(upper)])
        return buf.getvalue()


def run_grs_example(seed=0, paths=100_000, n_max=10, alphas=(0.1, 0.5, 1.0), threads=1):
    """Sample the barrier market and reweight to the market measure.

    ``P0`` paths use exact segment outcomes; weights ``2**-n / P0(tau = rho_n)``
    turn their stop-segment frequencies into estimates of ``P(tau = rho_n)``.
    Independently, ``P``-paths are drawn directly (stop segment geometric with
    parameter 1/2) and scanned for obvious arbitrage at each ``alpha`` (see
    :func:`grs_oa_scan`).
    """
    if n_max < 2:
        raise ValueError("n_max must be >= 2")
    paths = int(paths)
    if paths < 2:
        raise ValueError("need at least two paths")
    probs, tail = grs_tau_distribution(n_max)
    probs_arr = np.array(probs, dtype=float)
    weights = np.array([2.0 ** -n for n in range(1, n_max + 1)]) / probs_arr

    sizes, rngs = _spawn(seed, paths)
    outcomes = np.concatenate(_map_chunks(
        lambda n, r: sample_grs_outcomes(n_max, n, r), sizes, rngs, threads))
    # market-measure paths: independent stream spawned from the same seed
    p_rng = np.random.default_rng(np.random.SeedSequence([seed, 1]))
    p_outcomes = p_rng.geometric(0.5, size=paths)

    w_path = np.where(outcomes > 0, weights[np.maximum(outcomes, 1) - 1], 0.0)
    ind = outcomes[:, None] == np.arange(1, n_max + 1)[None, :]
    contrib = ind * w_path[:, None]
    freq = contrib.mean(axis=0)
    freq_se = contrib.std(axis=0, ddof=1) / math.sqrt(paths)
    p0_freq = ind.mean(axis=0)
    capped_mass = float(w_path[outcomes == 0].sum())

    oa = {float(a): grs_oa_scan(p_outcomes, a) for a in alphas}

    report = GRSExampleReport(
        n_max=n_max, seed=seed, paths=paths, tau_probs=probs, tail=tail,
        never_stops=grs_never_stops_probability(), weights=weights,
        weight_mass=float(probs_arr @ weights), p0_outcomes=outcomes, freq=freq,
        freq_se=freq_se, p0_freq=p0_freq, p_outcomes=p_outcomes,
        weighted_capped_mass=capped_mass, oa=oa, barriers=grs_barrier_sequences(n_max),
    )
    log.info("barrier example: P0(tau=rho_1)=%.6f tail=%.3g oa_found=%s",
             probs[0], tail, report.oa_found)
    return report
