"""Consistent price systems on finite trees.

A certificate is a pair of node weights ``w = Q(node)`` and products
``m = w * S_tilde``. In these variables the measure and martingale conditions
are linear, and parametrising by the leaves makes them automatic::

    w(v) = sum of w over leaves below v,   m(v) = likewise

so the LP only carries the band constraints

    (1 - lam) S w + delta S  <=  m  <=  (1 + lam) S w - delta S
    w_leaf >= delta,  sum(w_leaf) <= 1,  delta <= 1

and maximises ``delta``. Since ``w <= 1`` the ratio ``S_tilde / S`` then
stays at least ``delta`` away from each band edge. With ``lam = 0`` the band
collapses to ``m = S w`` and ``delta`` only bounds the weights from below, so
the certificate is an equivalent martingale measure.
"""
from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field
from fractions import Fraction

from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_lambda, check_tree
from .lp import LPError, simplex_max

log = logging.getLogger(__name__)

SCPS_TOL = 1e-9
VERIFY_TOL = 1e-10

__all__ = [
    "CPSCertificate",
    "VerificationReport",
    "solve_cps_lp",
    "find_scps",
    "verify_certificate",
    "deflator_from_measure",
    "CPSSolver",
]


@dataclass(frozen=True, eq=False)
class CPSCertificate:
    tree: object
    w: tuple
    m: tuple
    delta: object

    @property
    def S_tilde(self):
        return tuple(mi / wi for mi, wi in zip(self.m, self.w))

    @property
    def Z(self):
        return deflator_from_measure(self)

    @property
    def exact(self):
        return isinstance(self.delta, Fraction)

    def to_csv(self):
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["node_id", "w", "S_tilde", "Z", "slack"])
        lam_free = self.tree.price
        for v in range(self.tree.n_nodes):
            st, s = self.m[v] / self.w[v], lam_free[v]
            wr.writerow([self.tree.labels[v], repr(float(self.w[v])), repr(float(st)),
                         repr(float(self.Z[v])), repr(float(st / s - 1))])
        return buf.getvalue()


@dataclass
class VerificationReport:
    violations: list = field(default_factory=list)   # (check, node, residual)

    @property
    def passed(self):
        return not self.violations

    def add(self, check, node, residual):
        self.violations.append((check, node, residual))


def _build_lp(tree, lam, exact):
    L = len(tree.leaves)
    col = {leaf: i for i, leaf in enumerate(tree.leaves)}
    conv = Fraction if exact else float
    lam = conv(lam)
    rows, rhs = [], []
    iw, im, idelta = 0, L, 2 * L
    for v in range(tree.n_nodes):
        s = conv(tree.price[v])
        below = [col[leaf] for leaf in tree.leaves_below[v]]
        if lam > 0:
            lower = {iw + j: (1 - lam) * s for j in below}
            lower.update({im + j: -conv(1) for j in below})
            lower[idelta] = s
            upper = {iw + j: -(1 + lam) * s for j in below}
            upper.update({im + j: conv(1) for j in below})
            upper[idelta] = s
            rows += [lower, upper]
            rhs += [0, 0]
        else:
            eq = {iw + j: -s for j in below}
            eq.update({im + j: conv(1) for j in below})
            rows += [eq, {k: -a for k, a in eq.items()}]
            rhs += [0, 0]
    for j in range(L):
        rows.append({idelta: conv(1), iw + j: -conv(1)})
        rhs.append(0)
    rows.append({iw + j: conv(1) for j in range(L)})
    rhs.append(1)
    rows.append({idelta: conv(1)})
    rhs.append(1)
    c = [0] * (2 * L) + [1]
    return c, rows, rhs


def solve_cps_lp(tree, lam, exact=None):
    """Solve the max-margin LP; returns ``(delta, certificate or None, LPResult)``.

    ``exact=None`` picks rational arithmetic when the tree itself is exact.
    """
    check_tree(tree)
    check_lambda(lam)
    if exact is None:
        exact = tree.is_exact and isinstance(lam, (Fraction, int))
    c, rows, rhs = _build_lp(tree, lam, exact)
    res = simplex_max(c, rows, rhs, exact=exact)
    if not res.ok:
        raise LPError(f"CPS LP ended with status {res.status!r}")
    L = len(tree.leaves)
    wl, ml, delta = res.x[:L], res.x[L:2 * L], res.x[2 * L]
    total = sum(wl)
    if not total > 0:
        return delta * 0, None, res
    wl = [a / total for a in wl]
    ml = [a / total for a in ml]
    delta = delta / total
    idx = {leaf: i for i, leaf in enumerate(tree.leaves)}
    w = tuple(sum(wl[idx[l]] for l in tree.leaves_below[v]) for v in range(tree.n_nodes))
    m = tuple(sum(ml[idx[l]] for l in tree.leaves_below[v]) for v in range(tree.n_nodes))
    return delta, CPSCertificate(tree, w, m, delta), res


def find_scps(tree, lam, exact=None, tol=SCPS_TOL):
    """Strictly consistent price system with the largest certified margin, or None.

    Returns None when the optimal margin is not above ``tol`` (zero in exact
    mode): either no consistent price system exists or only boundary ones do.
    """
    delta, cert, res = solve_cps_lp(tree, lam, exact)
    thresh = 0 if isinstance(delta, Fraction) else tol
    if cert is None or not delta > thresh:
        log.debug("no SCPS: delta=%s after %d pivots", delta, res.iterations)
        return None
    return cert


def deflator_from_measure(cert):
    """Density process ``Z = Q(node) / P(node)``."""
    return tuple(w / p for w, p in zip(cert.w, cert.tree.path_prob))


def verify_certificate(cert, tree, lam, strict=True, tol=VERIFY_TOL):
    """Re-check every certificate invariant from scratch.

    Exact certificates are checked with zero tolerance.
    """
    check_lambda(lam)
    rep = VerificationReport()
    if len(cert.w) != tree.n_nodes or len(cert.m) != tree.n_nodes:
        raise ValueError("certificate is not aligned with the tree")
    tol = 0 if cert.exact else tol
    w, m, S = cert.w, cert.m, tree.price
    if abs(w[0] - 1) > tol:
        rep.add("measure_root", 0, w[0] - 1)
    for v in range(tree.n_nodes):
        if not w[v] > 0:
            rep.add("equivalence", v, w[v])
            continue
        lo = (1 - lam) * S[v] * w[v]
        hi = (1 + lam) * S[v] * w[v]
        if m[v] < lo - tol:
            rep.add("band_lower", v, m[v] - lo)
        if m[v] > hi + tol:
            rep.add("band_upper", v, m[v] - hi)
        if strict and lam > 0 and not abs(m[v] / w[v] / S[v] - 1) < lam:
            rep.add("strictness", v, abs(m[v] / w[v] / S[v] - 1) - lam)
        kids = tree.children[v]
        if kids:
            r_w = sum(w[c] for c in kids) - w[v]
            r_m = sum(m[c] for c in kids) - m[v]
            if abs(r_w) > tol:
                rep.add("measure", v, r_w)
            if abs(r_m) > tol:
                rep.add("martingale", v, r_m)
    if rep.violations:
        return rep
    # same identities seen from P: Z and S_tilde * Z are P-martingales
    Z = deflator_from_measure(cert)
    st = cert.S_tilde
    for v in tree.internal:
        kids = tree.children[v]
        r_z = sum(tree.prob[c] * Z[c] for c in kids) - Z[v]
        r_sz = sum(tree.prob[c] * Z[c] * st[c] for c in kids) - Z[v] * st[v]
        if abs(r_z) > tol:
            rep.add("Z_martingale", v, r_z)
        if abs(r_sz) > tol:
            rep.add("SZ_martingale", v, r_sz)
    return rep


class CPSSolver(TransformerMixin, BaseEstimator):
    """Estimator wrapper around :func:`solve_cps_lp`.

    After ``fit``: ``delta_`` (optimal margin), ``exists_`` (SCPS found) and
    ``certificate_`` (None when no SCPS). ``transform`` returns the
    consistent price per node.
    """

    def __init__(self, lam=0.1, exact=None, tol=SCPS_TOL):
        self.lam = lam
        self.exact = exact
        self.tol = tol

    def fit(self, tree, y=None):
        check_tree(tree)
        delta, cert, res = solve_cps_lp(tree, self.lam, self.exact)
        thresh = 0 if isinstance(delta, Fraction) else self.tol
        self.delta_ = delta
        self.exists_ = cert is not None and delta > thresh
        self.certificate_ = cert if self.exists_ else None
        self.lp_iterations_ = res.iterations
        return self

    def transform(self, tree=None):
        check_is_fitted(self, "exists_")
        if not self.exists_:
            raise ValueError("no strictly consistent price system for this tree")
        return self.certificate_.S_tilde
