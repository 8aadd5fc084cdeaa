"""Linear relaxation of delay scheduling: model builder, solver, checker.

The relaxation has per-copy assignment variables x[v,i], same-phase variables
z[u,v,i] for every transitive predecessor pair and machine, start times S[v],
and the makespan C.  Machine indices follow nondecreasing speed order, which
the delay and phase rows depend on.

Solving uses a bundled dense simplex for small models and scipy's HiGHS
backend for larger ones; both are deterministic for a fixed model.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

from . import _simplex
from .instance import TOL, Instance, transitive_predecessors, validate_instance

FEAS_TOL = 1e-6
OPT_TOL = 1e-7

# models at most this large go to the bundled simplex; the dense Bland
# tableau stalls on bigger degenerate systems, which HiGHS handles
_BUNDLED_MAX_CELLS = 5_000


@dataclass
class LpModel:
    """Sparse LP: named variables with bounds, named rows, min objective."""

    var_names: list[str] = field(default_factory=list)
    bounds: list[tuple[float, float]] = field(default_factory=list)
    rows: list[tuple[str, dict[int, float], str, float]] = field(default_factory=list)
    objective: dict[int, float] = field(default_factory=dict)
    # semantic lookup for scheduling models (empty for alternate relaxations)
    x_index: dict[tuple[str, str], int] = field(default_factory=dict)
    z_index: dict[tuple[str, str, str], int] = field(default_factory=dict)
    s_index: dict[str, int] = field(default_factory=dict)
    c_index: int | None = None

    def add_var(self, name: str, lo: float = 0.0, hi: float = math.inf) -> int:
        self.var_names.append(name)
        self.bounds.append((lo, hi))
        return len(self.var_names) - 1

    def add_row(self, name: str, coeffs: dict[int, float], sense: str, rhs: float):
        self.rows.append((name, coeffs, sense, rhs))

    @property
    def n_vars(self) -> int:
        return len(self.var_names)


@dataclass
class LpSolution:
    """Variable assignment with objective; status 'feasible' marks constructed
    (not solver-optimal) solutions such as embeddings and gap certificates."""

    values: dict[str, float]
    objective: float
    status: str
    x: dict[tuple[str, str], float] = field(default_factory=dict)
    z: dict[tuple[str, str, str], float] = field(default_factory=dict)
    start: dict[str, float] = field(default_factory=dict)
    infeasible_row: str | None = None


def _safe(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9_]", "_", name)


def build_relaxation(inst: Instance, preds=None) -> LpModel:
    """Instantiate the nine constraint families over a valid instance.

    With rho = 0 the same-phase machinery is vacuous: z variables and the
    delay/phase rows are omitted (the pipeline skips delay logic entirely).
    """
    report = validate_instance(inst)
    if not report.ok:
        raise ValueError(f"invalid instance: {'; '.join(report.violations)}")
    preds = preds if preds is not None else transitive_predecessors(inst)
    rho = inst.rho
    model = LpModel()

    model.c_index = model.add_var("C")
    for v in inst.jobs:
        model.s_index[v.id] = model.add_var(f"S_{_safe(v.id)}")
    for v in inst.jobs:
        for mc in inst.machines:
            model.x_index[(v.id, mc.id)] = model.add_var(
                f"x_{_safe(v.id)}_{_safe(mc.id)}", 0.0, 1.0
            )
    if rho > 0:
        for v in inst.jobs:
            for u in sorted(preds[v.id]):
                for mc in inst.machines:
                    model.z_index[(u, v.id, mc.id)] = model.add_var(
                        f"z_{_safe(u)}_{_safe(v.id)}_{_safe(mc.id)}", 0.0, 1.0
                    )

    model.objective = {model.c_index: 1.0}
    C = model.c_index

    for v in inst.jobs:
        # (1) makespan covers start plus fractional execution time
        coeffs = {C: 1.0, model.s_index[v.id]: -1.0}
        for mc in inst.machines:
            coeffs[model.x_index[(v.id, mc.id)]] = -v.size / mc.speed
        model.add_row(f"c1_{_safe(v.id)}", coeffs, ">=", 0.0)

    for v in inst.jobs:
        for u in sorted(preds[v.id]):
            # (2) a job starts after each predecessor's fractional completion
            coeffs = {model.s_index[v.id]: 1.0, model.s_index[u]: -1.0}
            for mc in inst.machines:
                coeffs[model.x_index[(u, mc.id)]] = -inst.size(u) / mc.speed
            model.add_row(f"c2_{_safe(u)}_{_safe(v.id)}", coeffs, ">=", 0.0)

    if rho > 0:
        for v in inst.jobs:
            for u in sorted(preds[v.id]):
                for i, mc in enumerate(inst.machines):
                    # (3) delay: rho gap unless u shares v's phase at index <= i
                    coeffs = {model.s_index[v.id]: 1.0, model.s_index[u]: -1.0}
                    for mc2 in inst.machines[: i + 1]:
                        coeffs[model.x_index[(v.id, mc2.id)]] = -rho
                    coeffs[model.z_index[(u, v.id, mc.id)]] = rho
                    model.add_row(
                        f"c3_{_safe(u)}_{_safe(v.id)}_{_safe(mc.id)}", coeffs, ">=", 0.0
                    )
        for v in inst.jobs:
            if not preds[v.id]:
                continue
            for i, mc in enumerate(inst.machines):
                # (4) same-phase predecessors fit in rho time at speed s_i
                coeffs: dict[int, float] = {}
                for mc2 in inst.machines[: i + 1]:
                    coeffs[model.x_index[(v.id, mc2.id)]] = 1.0
                for u in sorted(preds[v.id]):
                    idx = model.z_index[(u, v.id, mc.id)]
                    coeffs[idx] = coeffs.get(idx, 0.0) - inst.size(u) / (rho * mc.speed)
                model.add_row(f"c4_{_safe(v.id)}_{_safe(mc.id)}", coeffs, ">=", 0.0)

    for mc in inst.machines:
        # (5) machine load at most C * speed
        coeffs = {C: mc.speed}
        for v in inst.jobs:
            coeffs[model.x_index[(v.id, mc.id)]] = -v.size
        model.add_row(f"c5_{_safe(mc.id)}", coeffs, ">=", 0.0)

    for v in inst.jobs:
        # (6) every job fully assigned
        coeffs = {model.x_index[(v.id, mc.id)]: 1.0 for mc in inst.machines}
        model.add_row(f"c6_{_safe(v.id)}", coeffs, "=", 1.0)

    return model


def _solution_from_values(model: LpModel, values_arr, status, objective, cert=None):
    values = {name: float(values_arr[k]) for k, name in enumerate(model.var_names)}
    sol = LpSolution(values=values, objective=float(objective), status=status)
    sol.x = {key: values[model.var_names[idx]] for key, idx in model.x_index.items()}
    sol.z = {key: values[model.var_names[idx]] for key, idx in model.z_index.items()}
    sol.start = {key: values[model.var_names[idx]] for key, idx in model.s_index.items()}
    sol.infeasible_row = cert
    return sol


def solve_lp(model: LpModel, tol: float = OPT_TOL, max_iter: int | None = None, engine: str = "auto") -> LpSolution:
    """Minimize the model objective; deterministic for identical models."""
    if engine == "auto":
        cells = (len(model.rows) + model.n_vars) * model.n_vars
        if cells <= _BUNDLED_MAX_CELLS:
            sol = _solve_bundled(model, tol, max_iter)
            if sol.status == "optimal":
                return sol
        return _solve_highs(model, max_iter)
    if engine == "bundled":
        return _solve_bundled(model, tol, max_iter)
    return _solve_highs(model, max_iter)


def _solve_bundled(model: LpModel, tol, max_iter) -> LpSolution:
    rows = [(coeffs, sense, rhs) for _, coeffs, sense, rhs in model.rows]
    for j, (lo, hi) in enumerate(model.bounds):
        if hi != math.inf:
            rows.append(({j: 1.0}, "<=", hi))
        if lo != 0.0:
            raise ValueError("bundled solver expects zero lower bounds")
    status, x, obj, cert_row = _simplex.solve_dense(
        model.objective, rows, model.n_vars, tol=tol, max_iter=max_iter
    )
    if status != _simplex.OPTIMAL:
        cert = None
        if cert_row is not None and cert_row < len(model.rows):
            cert = model.rows[cert_row][0]
        empty = [0.0] * model.n_vars
        return _solution_from_values(model, empty, status, math.nan, cert)
    return _solution_from_values(model, x, "optimal", obj)


def _solve_highs(model: LpModel, max_iter) -> LpSolution:
    import numpy as np
    from scipy import sparse
    from scipy.optimize import linprog

    n = model.n_vars
    c = np.zeros(n)
    for j, cj in model.objective.items():
        c[j] = cj

    ub_r, ub_c, ub_v, b_ub = [], [], [], []
    eq_r, eq_c, eq_v, b_eq = [], [], [], []
    for _, coeffs, sense, rhs in model.rows:
        if sense == "=":
            r = len(b_eq)
            for j, a in coeffs.items():
                eq_r.append(r)
                eq_c.append(j)
                eq_v.append(a)
            b_eq.append(rhs)
        else:
            flip = -1.0 if sense == ">=" else 1.0
            r = len(b_ub)
            for j, a in coeffs.items():
                ub_r.append(r)
                ub_c.append(j)
                ub_v.append(flip * a)
            b_ub.append(flip * rhs)

    A_ub = sparse.csr_matrix((ub_v, (ub_r, ub_c)), shape=(len(b_ub), n)) if b_ub else None
    A_eq = sparse.csr_matrix((eq_v, (eq_r, eq_c)), shape=(len(b_eq), n)) if b_eq else None
    bounds = [(lo, None if hi == math.inf else hi) for lo, hi in model.bounds]
    options = {"presolve": True}
    if max_iter is not None:
        options["maxiter"] = max_iter
    res = linprog(
        c, A_ub=A_ub, b_ub=b_ub or None, A_eq=A_eq, b_eq=b_eq or None,
        bounds=bounds, method="highs", options=options,
    )
    if res.status == 0:
        return _solution_from_values(model, res.x, "optimal", res.fun)
    if res.status == 1:
        empty = [0.0] * n
        return _solution_from_values(model, empty, "iteration-limit", math.nan)
    # fall back to the bundled engine for an infeasibility certificate row
    cert = None
    if (len(model.rows) + n) * n <= _BUNDLED_MAX_CELLS:
        return _solve_bundled(model, OPT_TOL, None)
    empty = [0.0] * n
    return _solution_from_values(model, empty, "infeasible", math.nan, cert)


def check_lp_feasibility(solution: LpSolution, model: LpModel, tol: float = FEAS_TOL):
    """Every violated row or bound, as (name, residual) with residual < -tol."""
    vals = solution.values
    missing = [nm for nm in model.var_names if nm not in vals]
    if missing:
        raise ValueError(f"solution does not assign variable {missing[0]}")
    arr = [vals[nm] for nm in model.var_names]
    out = []
    for name, coeffs, sense, rhs in model.rows:
        lhs = sum(a * arr[j] for j, a in coeffs.items())
        if sense == ">=":
            resid = lhs - rhs
        elif sense == "<=":
            resid = rhs - lhs
        else:
            resid = -abs(lhs - rhs)
        if resid < -tol:
            out.append((name, resid))
    for j, (lo, hi) in enumerate(model.bounds):
        if arr[j] < lo - tol:
            out.append((f"bound_lo_{model.var_names[j]}", arr[j] - lo))
        if arr[j] > hi + tol:
            out.append((f"bound_hi_{model.var_names[j]}", hi - arr[j]))
    return out


def embed_schedule_as_lp(inst: Instance, sched, model: LpModel | None = None) -> LpSolution:
    """Turn a valid schedule into a feasible point with objective twice its
    makespan: phase-doubled starts, unit assignment to the first-completion
    machine, and 0/1 same-phase variables."""
    from .schedmodel import makespan as sched_makespan
    from .schedmodel import validate_schedule

    report = validate_schedule(inst, sched)
    if not report.valid:
        raise ValueError(f"invalid schedule: {'; '.join(report.violations[:3])}")
    model = model if model is not None else build_relaxation(inst)
    rho = inst.rho

    def doubled_start(p):
        if rho <= 0:
            return p.start
        return p.start + math.floor(p.start / rho + TOL) * rho

    first: dict[str, tuple[float, int, str]] = {}
    for p in sched.placements:
        s2 = doubled_start(p)
        comp = s2 + inst.size(p.job) / inst.speed(p.machine)
        key = (comp, inst.machine_index(p.machine), p.machine)
        if p.job not in first or key < first[p.job]:
            first[p.job] = key
    star_machine = {v: key[2] for v, key in first.items()}
    start_of: dict[str, float] = {}
    for p in sched.placements:
        if p.machine == star_machine[p.job]:
            s2 = doubled_start(p)
            if p.job not in start_of or s2 < start_of[p.job]:
                start_of[p.job] = s2

    values = {nm: 0.0 for nm in model.var_names}
    for (v, i), idx in model.x_index.items():
        values[model.var_names[idx]] = 1.0 if i == star_machine[v] else 0.0
    for v, idx in model.s_index.items():
        values[model.var_names[idx]] = start_of[v]
    for (u, v, i), idx in model.z_index.items():
        on = (
            inst.machine_index(i) >= inst.machine_index(star_machine[v])
            and start_of[v] - start_of[u] <= rho + TOL
        )
        values[model.var_names[idx]] = 1.0 if on else 0.0
    objective = 2.0 * sched_makespan(inst, sched)
    values[model.var_names[model.c_index]] = objective

    arr = [values[nm] for nm in model.var_names]
    return _solution_from_values(model, arr, "feasible", objective)


def export_lp_text(model: LpModel) -> str:
    """LP-format text: objective, named constraint rows, bounds section."""
    def term(j, a, first):
        sign = "-" if a < 0 else ("" if first else "+")
        mag = abs(a)
        coef = "" if abs(mag - 1.0) < 1e-15 else f"{mag:.12g} "
        return f"{sign} {coef}{model.var_names[j]} ".replace("  ", " ")

    lines = ["Minimize", " obj: " + "".join(
        term(j, a, k == 0) for k, (j, a) in enumerate(sorted(model.objective.items()))
    ).strip(), "Subject To"]
    for name, coeffs, sense, rhs in model.rows:
        expr = "".join(
            term(j, a, k == 0) for k, (j, a) in enumerate(sorted(coeffs.items()))
        ).strip()
        op = {"<=": "<=", ">=": ">=", "=": "="}[sense]
        lines.append(f" {name}: {expr} {op} {rhs:.12g}")
    lines.append("Bounds")
    for j, (lo, hi) in enumerate(model.bounds):
        if hi == math.inf:
            lines.append(f" {lo:.12g} <= {model.var_names[j]}")
        else:
            lines.append(f" {lo:.12g} <= {model.var_names[j]} <= {hi:.12g}")
    lines.append("End")
    return "\n".join(lines) + "\n"
