"""Dense two-phase primal simplex with Bland's anti-cycling rule.

Solves  min c.x  s.t.  A x {<=,=,>=} b,  x >= 0.  Upper bounds must be given
as explicit rows by the caller.  Deterministic: fixed variable order, Bland's
rule for entering and leaving variables.
"""

from __future__ import annotations

import numpy as np

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
ITERATION_LIMIT = "iteration-limit"


def solve_dense(c, rows, n_vars, tol=1e-9, max_iter=None):
    """rows: list of (coeffs: dict var->float, sense, rhs).

    Returns (status, x, objective, certificate_row_index).
    """
    m = len(rows)
    if max_iter is None:
        max_iter = 200 * (m + n_vars + 10)

    senses = []
    b = np.zeros(m)
    A = np.zeros((m, n_vars))
    for r, (coeffs, sense, rhs) in enumerate(rows):
        for j, a in coeffs.items():
            A[r, j] = a
        b[r] = rhs
        if rhs < 0:  # keep RHS nonnegative so slacks/artificials start basic
            A[r] *= -1.0
            b[r] *= -1.0
            sense = {"<=": ">=", ">=": "<=", "=": "="}[sense]
        senses.append(sense)

    n_slack = sum(1 for s in senses if s in ("<=", ">="))
    n_art = sum(1 for s in senses if s in (">=", "="))
    total = n_vars + n_slack + n_art
    T = np.zeros((m, total + 1))
    T[:, :n_vars] = A
    T[:, -1] = b

    basis = np.empty(m, dtype=int)
    art_rows = {}
    js, ja = n_vars, n_vars + n_slack
    for r, sense in enumerate(senses):
        if sense == "<=":
            T[r, js] = 1.0
            basis[r] = js
            js += 1
        elif sense == ">=":
            T[r, js] = -1.0
            js += 1
            T[r, ja] = 1.0
            basis[r] = ja
            art_rows[ja] = r
            ja += 1
        else:
            T[r, ja] = 1.0
            basis[r] = ja
            art_rows[ja] = r
            ja += 1

    cost2 = np.zeros(total + 1)
    for j, cj in c.items():
        cost2[j] = cj
    cost1 = np.zeros(total + 1)
    cost1[n_vars + n_slack : total] = 1.0
    # price out the basic artificials from the phase-1 cost row
    for art, r in art_rows.items():
        cost1 -= T[r]

    iters = 0
    in_basis = np.zeros(total, dtype=bool)
    in_basis[basis] = True

    def pivot(row, col):
        in_basis[basis[row]] = False
        in_basis[col] = True
        T[row] /= T[row, col]
        cols = T[:, col].copy()
        cols[row] = 0.0
        T[:, :] -= np.outer(cols, T[row])
        basis[row] = col

    def run_phase(cost, allowed_end):
        nonlocal iters
        while True:
            if iters >= max_iter:
                return ITERATION_LIMIT
            enter = -1
            for j in range(allowed_end):  # Bland: lowest nonbasic index
                if not in_basis[j] and cost[j] < -tol:
                    enter = j
                    break
            if enter < 0:
                return OPTIMAL
            col = T[:, enter]
            ratios = np.full(m, np.inf)
            pos = col > tol
            # clamp tiny negative basic values so degenerate pivots stay at 0
            ratios[pos] = np.maximum(T[pos, -1], 0.0) / col[pos]
            rmin = ratios.min()
            if rmin == np.inf:
                return "unbounded"
            leave = -1
            for r in range(m):  # Bland tie-break: smallest basic index
                if ratios[r] <= rmin + tol and (leave < 0 or basis[r] < basis[leave]):
                    leave = r
            pivot(leave, enter)
            cost -= cost[enter] * T[leave]
            iters += 1

    if n_art:
        status = run_phase(cost1, total)
        if status == ITERATION_LIMIT:
            return ITERATION_LIMIT, None, None, None
        if -cost1[-1] > 1e-7:  # phase-1 optimum: artificial mass remains
            worst = None
            for art, r in art_rows.items():
                if basis[r] == art and T[r, -1] > 1e-9:
                    worst = r
                    break
            return INFEASIBLE, None, None, worst
        # drive zero-level artificials out of the basis where possible
        for r in range(m):
            if basis[r] >= n_vars + n_slack:
                for j in range(n_vars + n_slack):
                    if abs(T[r, j]) > tol:
                        pivot(r, j)
                        break

    for r in range(m):  # price out the basic variables from the phase-2 cost
        if cost2[basis[r]] != 0.0:
            cost2 -= cost2[basis[r]] * T[r]
    status = run_phase(cost2, n_vars + n_slack)
    if status == ITERATION_LIMIT:
        return ITERATION_LIMIT, None, None, None
    if status == "unbounded":
        return "unbounded", None, None, None

    x = np.zeros(n_vars)
    for r in range(m):
        if basis[r] < n_vars:
            x[basis[r]] = T[r, -1]
    obj = sum(cj * x[j] for j, cj in c.items())
    return OPTIMAL, x, obj, None
