"""Dense two-phase simplex with Bland's rule, in float or exact rational mode.

Small and deliberately boring: the package solves LPs with at most a few
thousand variables and a few hundred rows, so a full-tableau method with
anti-cycling pivoting is fast enough and easy to certify. The reduced-cost
row rides inside the tableau and is updated by the same pivots. Callers
with an obvious basic feasible solution (the assignment LP has one) can
pass ``start_basis`` to skip phase 1. Rational mode runs the same code over
``fractions.Fraction`` entries (numpy object dtype) and is used to
adjudicate tolerance-sensitive instances.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import Infeasible

PIVOT_TOL = 1e-9


@dataclass
class LpSolution:
    status: str  # "optimal" | "infeasible" | "unbounded"
    x: np.ndarray | None
    objective: object
    y_eq: np.ndarray | None  # duals of the equality rows, y = c_B B^-1
    y_ub: np.ndarray | None  # duals of the <= rows (<= 0 at optimum of a min)
    slack: np.ndarray | None


def _as_array(data, exact, shape=None):
    if exact:
        src = np.asarray(data, dtype=object)
        arr = np.empty(src.shape if shape is None else shape, dtype=object)
        flat, sflat = arr.reshape(-1), src.reshape(-1)
        for i, v in enumerate(sflat):
            flat[i] = v if isinstance(v, Fraction) else Fraction(v)
        return arr
    out = np.asarray(data, dtype=float)
    return out.reshape(shape) if shape is not None else out


class _Tableau:
    """Rows 0..m-1 hold the constraints, row m the reduced costs."""

    def __init__(self, A, b, exact):
        m, n = A.shape
        self.m, self.n = m, n
        self.exact = exact
        self.tol = Fraction(0) if exact else PIVOT_TOL
        dtype = object if exact else float
        self.T = np.zeros((m + 1, n + m + 1), dtype=dtype)
        if exact:
            self.T[:, :] = Fraction(0)
        self.T[:m, :n] = A
        for i in range(m):
            self.T[i, n + i] = Fraction(1) if exact else 1.0
        self.T[:m, -1] = b
        self.basis = list(range(n, n + m))

    def pivot(self, row, col):
        T = self.T
        piv = T[row, col]
        T[row, :] = T[row, :] / piv
        if self.exact:
            for r in range(self.m + 1):
                if r == row:
                    continue
                factor = T[r, col]
                if factor != 0:
                    T[r, :] = T[r, :] - factor * T[row, :]
        else:
            factors = T[:, col].copy()
            factors[row] = 0.0
            nz = np.nonzero(factors)[0]
            if len(nz):
                T[nz, :] -= np.outer(factors[nz], T[row, :])
        self.basis[row] = col

    def install_cost(self, cost):
        """Load a cost row and price out the current basis."""
        T = self.T
        width = self.n + self.m
        if self.exact:
            row = np.empty(width + 1, dtype=object)
            row[:] = Fraction(0)
        else:
            row = np.zeros(width + 1)
        row[:len(cost)] = cost
        for i in range(self.m):
            cb = cost[self.basis[i]] if self.basis[i] < len(cost) else 0
            if cb != 0:
                row = row - cb * T[i, :]
        T[self.m, :] = row

    def install_basis(self, basis):
        """Pivot the given basis in, row by row; the caller orders rows so
        every pivot entry is nonzero when reached."""
        for i, col in enumerate(basis):
            if abs(self.T[i, col]) <= self.tol:
                raise Infeasible("start basis is singular in row order")
            self.pivot(i, col)

    def run(self, allowed_mask, max_iters):
        """Bland's rule primal iterations on the installed cost row."""
        T, m = self.T, self.m
        tol = self.tol
        iters = 0
        while True:
            iters += 1
            if iters > max_iters:
                raise RuntimeError("simplex iteration cap exceeded")
            r = T[m, :-1]
            enter = -1
            if self.exact:
                for j in range(len(r)):
                    if allowed_mask[j] and r[j] < -tol:
                        enter = j
                        break
            else:
                neg = np.nonzero((r < -tol) & allowed_mask)[0]
                enter = int(neg[0]) if len(neg) else -1
            if enter < 0:
                return "optimal"
            best, best_row = None, -1
            col = T[:m, enter]
            rhs = T[:m, -1]
            for i in range(m):
                a = col[i]
                if a > tol:
                    ratio = rhs[i] / a
                    if best is None or ratio < best or \
                            (ratio == best and self.basis[i] < self.basis[best_row]):
                        best, best_row = ratio, i
            if best_row < 0:
                return "unbounded"
            self.pivot(best_row, enter)

    def solution(self, n_real):
        x = np.zeros(n_real, dtype=object if self.exact else float)
        if self.exact:
            x[:] = Fraction(0)
        for i in range(self.m):
            if self.basis[i] < n_real:
                x[self.basis[i]] = self.T[i, -1]
        return x

    def duals(self, cost):
        """y = c_B B^-1, read under the artificial block."""
        dtype = object if self.exact else float
        y = np.zeros(self.m, dtype=dtype)
        if self.exact:
            y[:] = Fraction(0)
        for i in range(self.m):
            cb = cost[self.basis[i]] if self.basis[i] < len(cost) else 0
            if cb != 0:
                y = y + cb * self.T[i, self.n:self.n + self.m]
        return y


def _solve_standard(c, A, b, exact, max_iters=None, start_basis=None):
    """min c.x  s.t.  A x = b, x >= 0.

    Returns (status, x, objective, y). ``start_basis`` must name one column
    per row forming a feasible basis; phase 1 is skipped when it is given.
    """
    m, n = A.shape
    if max_iters is None:
        max_iters = 4000 + 80 * (m + n)
    A = A.copy()
    b = b.copy()
    for i in range(m):
        if b[i] < 0:
            A[i, :] = -A[i, :]
            b[i] = -b[i]
    tab = _Tableau(A, b, exact)
    width = n + m
    one = Fraction(1) if exact else 1.0
    zero = Fraction(0) if exact else 0.0

    if start_basis is not None:
        tab.install_basis(list(start_basis))
        if any(v < -PIVOT_TOL for v in (tab.T[i, -1] for i in range(m))):
            raise Infeasible("start basis is not primal feasible")
    else:
        phase1 = np.zeros(width, dtype=object if exact else float)
        if exact:
            phase1[:] = zero
        phase1[n:] = one
        tab.install_cost(phase1)
        allowed = np.ones(width, dtype=bool)
        status = tab.run(allowed, max_iters)
        assert status == "optimal"
        p1 = sum(phase1[tab.basis[i]] * tab.T[i, -1] for i in range(m))
        if p1 > (PIVOT_TOL if not exact else 0):
            return "infeasible", None, None, None
        for i in range(m):  # drive artificials out where a real pivot exists
            if tab.basis[i] >= n:
                for j in range(n):
                    if tab.T[i, j] > tab.tol or tab.T[i, j] < -tab.tol:
                        tab.pivot(i, j)
                        break

    cost = np.zeros(width, dtype=object if exact else float)
    if exact:
        cost[:] = zero
    cost[:n] = c
    tab.install_cost(cost)
    allowed = np.zeros(width, dtype=bool)
    allowed[:n] = True
    status = tab.run(allowed, max_iters)
    if status == "unbounded":
        return "unbounded", None, None, None
    x = tab.solution(n)
    obj = sum(c[j] * x[j] for j in range(n) if x[j] != 0)
    y = tab.duals(cost)
    return "optimal", x, obj, y


def solve_lp(c, a_eq=None, b_eq=None, a_ub=None, b_ub=None, exact=False,
             max_iters=None, start_basis=None) -> LpSolution:
    """min c.x  s.t.  a_eq x = b_eq, a_ub x <= b_ub, x >= 0.

    ``start_basis`` indexes the combined column space (real variables first,
    then one slack per <= row)."""
    c = _as_array(c, exact)
    n = len(c)
    n_eq = 0
    if a_eq is not None and len(a_eq):
        a_eq = _as_array(a_eq, exact, shape=(len(b_eq), n))
        b_eq = _as_array(b_eq, exact)
        n_eq = a_eq.shape[0]
    n_ub = 0
    if a_ub is not None and len(a_ub):
        a_ub = _as_array(a_ub, exact, shape=(len(b_ub), n))
        b_ub = _as_array(b_ub, exact)
        n_ub = a_ub.shape[0]

    m = n_eq + n_ub
    total = n + n_ub
    dtype = object if exact else float
    A = np.zeros((m, total), dtype=dtype)
    b = np.zeros(m, dtype=dtype)
    if exact:
        A[:, :] = Fraction(0)
        b[:] = Fraction(0)
    if n_eq:
        A[:n_eq, :n] = a_eq
        b[:n_eq] = b_eq
    if n_ub:
        A[n_eq:, :n] = a_ub
        for i in range(n_ub):
            A[n_eq + i, n + i] = Fraction(1) if exact else 1.0
        b[n_eq:] = b_ub
    cost = np.zeros(total, dtype=dtype)
    if exact:
        cost[:] = Fraction(0)
    cost[:n] = c

    flips = np.array([-1 if b[i] < 0 else 1 for i in range(m)])
    status, x_full, obj, y = _solve_standard(cost, A, b, exact,
                                             max_iters=max_iters,
                                             start_basis=start_basis)
    if status != "optimal":
        return LpSolution(status, None, None, None, None, None)
    y = y * _as_array(flips, exact)
    x = x_full[:n]
    slack = x_full[n:] if n_ub else None
    y_eq = y[:n_eq] if n_eq else None
    y_ub = y[n_eq:] if n_ub else None
    return LpSolution("optimal", x, obj, y_eq, y_ub, slack)


def check_certificate(sol: LpSolution, c, a_eq=None, b_eq=None, a_ub=None, b_ub=None,
                      tol=1e-7, exact=False):
    """Verify primal/dual feasibility and complementary slackness by
    substitution. Returns the maximum violation found (0 in exact mode when
    everything holds)."""
    if sol.status != "optimal":
        raise Infeasible(f"no certificate for status {sol.status}")
    zero = Fraction(0) if exact else 0.0
    worst = zero
    x = sol.x
    c = _as_array(c, exact)
    n = len(c)

    def bump(v):
        nonlocal worst
        if v > worst:
            worst = v

    for j in range(n):
        bump(-(x[j]))
    if a_eq is not None and len(a_eq):
        a_eq = _as_array(a_eq, exact, shape=(len(b_eq), n))
        b_eq = _as_array(b_eq, exact)
        res = a_eq @ x - b_eq
        for v in res:
            bump(v if v > zero else -v)
    if a_ub is not None and len(a_ub):
        a_ub = _as_array(a_ub, exact, shape=(len(b_ub), n))
        b_ub = _as_array(b_ub, exact)
        res = a_ub @ x - b_ub
        for i, v in enumerate(res):
            bump(v)
            bump(abs(sol.y_ub[i] * v))  # y_ub_i * slack_i = 0
        for yv in sol.y_ub:
            bump(yv)  # y_ub <= 0 for a min problem
    red = c.copy()
    if a_eq is not None and len(a_eq):
        red = red - sol.y_eq @ a_eq
    if a_ub is not None and len(a_ub):
        red = red - sol.y_ub @ a_ub
    for j in range(n):
        bump(-red[j])
        bump(abs(x[j] * red[j]))
    if not exact and worst > tol:
        raise Infeasible(f"certificate violation {worst} exceeds {tol}")
    if exact and worst > 0:
        raise Infeasible(f"exact certificate violation {worst}")
    return worst
