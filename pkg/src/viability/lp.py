"""Tableau simplex for ``max c.x  s.t.  A x <= b, x >= 0`` with ``b >= 0``.

Both LPs used by the package (consistent price systems and arbitrage
witnesses) are homogeneous apart from normalisation rows, so the slack basis
at the origin is always feasible and no phase one is needed.

Back ends:

* ``exact=False`` (default ``backend="highs"``): HiGHS through
  ``scipy.optimize.linprog``.
* ``exact=False, backend="tableau"``: dense ``numpy`` tableau in float64,
  Dantzig pricing with Bland's rule during degenerate stalls.
* ``exact=True``: Bland's rule on sparse rows of exact rationals (``gmpy2.mpq`` when
  available); results are returned as ``Fraction``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

try:  # C rationals: same semantics as Fraction, an order of magnitude faster
    from gmpy2 import mpq as _rational
except ImportError:  # pragma: no cover
    _rational = Fraction

log = logging.getLogger(__name__)

FLOAT_TOL = 1e-11
STALL_LIMIT = 50


class LPError(RuntimeError):
    """Numerical failure or unexpected status from the simplex routine."""


@dataclass
class LPResult:
    status: str          # "optimal" | "unbounded" | "iteration_limit"
    x: list              # primal solution (length n)
    value: object        # objective value
    duals: list          # multipliers of the <= rows (length m)
    iterations: int

    @property
    def ok(self):
        return self.status == "optimal"


def _as_sparse_rows(A, n):
    rows = []
    for row in A:
        if isinstance(row, dict):
            rows.append({j: v for j, v in row.items() if v != 0})
        else:
            rows.append({j: v for j, v in enumerate(row) if v != 0})
    for r in rows:
        if any(not 0 <= j < n for j in r):
            raise ValueError("constraint column out of range")
    return rows


def simplex_max(c, A, b, exact=False, max_iter=None, backend="highs"):
    """Maximise ``c.x`` over ``A x <= b``, ``x >= 0``.

    ``A`` is a sequence of rows, each either a dense sequence or a sparse
    ``{column: coefficient}`` dict; ``b`` must be entrywise non-negative.
    In float mode ``backend`` selects HiGHS (``"highs"``, robust on the
    heavily degenerate homogeneous LPs) or the in-house tableau
    (``"tableau"``); exact mode always uses the rational tableau.
    """
    n = len(c)
    rows = _as_sparse_rows(A, n)
    m = len(rows)
    if len(b) != m:
        raise ValueError("b length differs from number of rows")
    if any(bi < 0 for bi in b):
        raise ValueError("right-hand side must be non-negative (origin feasibility)")
    if max_iter is None:
        max_iter = 50 * (n + m) + 1000
    if exact:
        return _simplex_exact(c, rows, b, n, m, max_iter)
    if backend == "highs":
        return _solve_highs(c, rows, b, n, m)
    if backend != "tableau":
        raise ValueError(f"unknown backend {backend!r}")
    return _simplex_float(c, rows, b, n, m, max_iter)


def _solve_highs(c, rows, b, n, m):
    from scipy.optimize import linprog
    from scipy.sparse import csr_matrix

    data, ri, ci = [], [], []
    for i, r in enumerate(rows):
        for j, v in r.items():
            ri.append(i)
            ci.append(j)
            data.append(float(v))
    A = csr_matrix((data, (ri, ci)), shape=(m, n))
    cost = -np.asarray([float(v) for v in c])
    res = linprog(cost, A_ub=A, b_ub=np.asarray([float(v) for v in b]),
                  bounds=(0, None), method="highs")
    status = {0: "optimal", 1: "iteration_limit", 3: "unbounded"}.get(res.status)
    if status is None:
        raise LPError(f"HiGHS failed: {res.message}")
    if status != "optimal":
        return LPResult(status, [0.0] * n, float("nan"), [0.0] * m, int(res.nit))
    x = np.maximum(res.x, 0.0)
    duals = list(-res.ineqlin.marginals)
    return LPResult(status, list(x), float(-res.fun), duals, int(res.nit))


def _simplex_float(c, rows, b, n, m, max_iter):
    width = n + m
    T = np.zeros((m + 1, width + 1))
    for i, r in enumerate(rows):
        for j, v in r.items():
            T[i, j] = float(v)
        T[i, n + i] = 1.0
        T[i, -1] = float(b[i])
    T[m, :n] = -np.asarray([float(v) for v in c])
    basis = list(range(n, n + m))
    scale = max(1.0, float(np.abs(T).max()))
    tol = FLOAT_TOL * scale
    it = 0
    stall = 0
    while True:
        cand = np.nonzero(T[m, :width] < -tol)[0]
        if cand.size == 0:
            status = "optimal"
            break
        if it >= max_iter:
            status = "iteration_limit"
            break
        # Dantzig pricing while the objective moves; Bland's rule (lowest
        # index) during degenerate stalls, which rules out cycling
        if stall < STALL_LIMIT:
            j = int(cand[np.argmin(T[m, cand])])
        else:
            j = int(cand[0])
        col = T[:m, j]
        pos = np.nonzero(col > tol)[0]
        if pos.size == 0:
            status = "unbounded"
            break
        ratios = T[pos, -1] / col[pos]
        best = ratios.min()
        ties = pos[ratios <= best + tol * max(1.0, abs(best))]
        r = int(min(ties, key=lambda i: basis[i]))
        stall = stall + 1 if T[r, -1] <= tol else 0
        T[r] /= T[r, j]
        f = T[:, j].copy()
        f[r] = 0.0
        T -= np.outer(f, T[r])
        T[:, j] = 0.0
        T[r, j] = 1.0
        # flush round-off so degenerate vertices stay exactly degenerate;
        # otherwise Bland's rule can be defeated by noise and cycle
        T[np.abs(T) < tol * 1e-3] = 0.0
        np.maximum(T[:m, -1], 0.0, out=T[:m, -1])
        basis[r] = j
        it += 1
    x = np.zeros(width)
    for i, bv in enumerate(basis):
        x[bv] = T[i, -1]
    x = np.maximum(x, 0.0)
    return LPResult(status, list(x[:n]), float(T[m, -1]), list(T[m, n:width]), it)


def _simplex_exact(c, rows, b, n, m, max_iter):
    Q = _rational

    def q(v):
        v = Fraction(v)
        return Q(v.numerator, v.denominator)

    rows = [{j: q(v) for j, v in r.items()} for r in rows]
    for i, r in enumerate(rows):
        r[n + i] = Q(1)
    rhs = [q(v) for v in b]
    obj = {j: -q(v) for j, v in enumerate(c) if v != 0}
    obj_val = Q(0)
    basis = list(range(n, n + m))
    it = 0
    while True:
        neg = [j for j, v in obj.items() if v < 0]
        if not neg:
            status = "optimal"
            break
        if it >= max_iter:
            status = "iteration_limit"
            break
        j = min(neg)
        r, best = None, None
        for i, row in enumerate(rows):
            a = row.get(j)
            if a is not None and a > 0:
                ratio = rhs[i] / a
                if best is None or ratio < best or (ratio == best and basis[i] < basis[r]):
                    r, best = i, ratio
        if r is None:
            status = "unbounded"
            break
        piv = rows[r][j]
        prow = {k: v / piv for k, v in rows[r].items()}
        rows[r] = prow
        rhs[r] = rhs[r] / piv
        for i, row in enumerate(rows):
            if i == r:
                continue
            f = row.get(j)
            if f is None:
                continue
            for k, v in prow.items():
                nv = row.get(k, 0) - f * v
                if nv:
                    row[k] = nv
                else:
                    row.pop(k, None)
            rhs[i] -= f * rhs[r]
        f = obj.get(j)
        if f is not None:
            for k, v in prow.items():
                nv = obj.get(k, 0) - f * v
                if nv:
                    obj[k] = nv
                else:
                    obj.pop(k, None)
            obj_val -= f * rhs[r]
        basis[r] = j
        it += 1
    x = [Q(0)] * (n + m)
    for i, bv in enumerate(basis):
        x[bv] = rhs[i]
    duals = [_to_fraction(obj.get(n + i, 0)) for i in range(m)]
    return LPResult(status, [_to_fraction(v) for v in x[:n]], _to_fraction(obj_val),
                    duals, it)


def _to_fraction(v):
    return Fraction(int(v.numerator), int(v.denominator))
