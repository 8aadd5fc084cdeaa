"""Relaxation-gap experiments: the layered fractional certificate, alternate
relaxations, and an empirical gap driver.

The layered family admits a hand-built fractional point of value rho (uniform
machine split, layer-staggered starts), while integral schedules provably
need many more communication phases; the driver reports the measured ratio
without asserting any asymptotic claim.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass

from .instance import TOL, Instance, transitive_predecessors, validate_instance
from .lp import LpModel, LpSolution, _safe, build_relaxation, solve_lp

_LAYER_RE = re.compile(r"^L(\d+)_j\d+$")


def _layer_structure(inst: Instance) -> dict[str, int]:
    """Map job -> layer for a layered-gap instance; raises if not layered."""
    layers: dict[str, int] = {}
    for j in inst.jobs:
        m = _LAYER_RE.match(j.id)
        if not m:
            raise ValueError(f"job {j.id} does not follow the layered naming")
        layers[j.id] = int(m.group(1))
        if abs(j.size - 1.0) > TOL:
            raise ValueError("layered instances must have unit jobs")
    for mc in inst.machines:
        if abs(mc.speed - 1.0) > TOL:
            raise ValueError("layered instances must have unit machines")
    L = max(layers.values())
    counts = [sum(1 for l in layers.values() if l == k) for k in range(1, L + 1)]
    if len(set(counts)) != 1:
        raise ValueError("layer sizes differ")
    if counts[0] * L != inst.m * inst.rho:
        raise ValueError("layer size does not match m*rho/L")
    for a, b in inst.edges:
        if layers[a] != layers[b] + 1:
            raise ValueError(f"edge ({a}, {b}) does not point one layer down")
    return layers


def gap_lp_certificate(inst: Instance, model: LpModel | None = None) -> LpSolution:
    """Feasible point of value exactly rho for a layered-gap instance.

    Every job is spread uniformly over the machines, same-phase variables
    grow linearly with machine index, and starts step down by rho/L per
    layer.
    """
    layers = _layer_structure(inst)
    model = model if model is not None else build_relaxation(inst)
    L = max(layers.values())
    m = inst.m
    rho = inst.rho
    values = {nm: 0.0 for nm in model.var_names}
    for (v, i), idx in model.x_index.items():
        values[model.var_names[idx]] = 1.0 / m
    for (u, v, i), idx in model.z_index.items():
        values[model.var_names[idx]] = inst.machine_index(i) / m
    for v, idx in model.s_index.items():
        values[model.var_names[idx]] = (L - layers[v]) * rho / L
    values[model.var_names[model.c_index]] = rho
    arr = [values[nm] for nm in model.var_names]
    from .lp import _solution_from_values

    return _solution_from_values(model, arr, "feasible", rho)


def build_alternate_relaxation(inst: Instance, kind: str, horizon: int | None = None) -> LpModel:
    """Alternate programs: same_machine, time_indexed, or same_phase."""
    report = validate_instance(inst)
    if not report.ok:
        raise ValueError(f"invalid instance: {'; '.join(report.violations)}")
    if kind == "same_machine":
        return _same_machine_model(inst)
    if kind == "time_indexed":
        return _time_indexed_model(inst, horizon)
    if kind == "same_phase":
        return _same_phase_model(inst)
    raise ValueError(f"unknown relaxation kind: {kind}")


def _same_machine_model(inst: Instance) -> LpModel:
    """Same-machine indicator program (unit-style execution/load rows)."""
    preds = transitive_predecessors(inst)
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
    delta: dict[tuple[str, str, str], int] = {}
    for v in inst.jobs:
        for u in sorted(preds[v.id]):
            for mc in inst.machines:
                delta[(u, v.id, mc.id)] = model.add_var(
                    f"d_{_safe(u)}_{_safe(v.id)}_{_safe(mc.id)}", 0.0, 1.0
                )
    model.objective = {model.c_index: 1.0}
    for v in inst.jobs:
        model.add_row(
            f"comp_{_safe(v.id)}",
            {model.c_index: 1.0, model.s_index[v.id]: -1.0},
            ">=",
            1.0,
        )
    for mc in inst.machines:
        coeffs = {model.c_index: mc.speed}
        for v in inst.jobs:
            coeffs[model.x_index[(v.id, mc.id)]] = -1.0
        model.add_row(f"load_{_safe(mc.id)}", coeffs, ">=", 0.0)
    for v in inst.jobs:
        for u in sorted(preds[v.id]):
            coeffs = {model.s_index[v.id]: 1.0, model.s_index[u]: -1.0}
            for mc in inst.machines:
                coeffs[delta[(u, v.id, mc.id)]] = rho
            model.add_row(f"delay_{_safe(u)}_{_safe(v.id)}", coeffs, ">=", rho)
            model.add_row(
                f"exec_{_safe(u)}_{_safe(v.id)}",
                {model.s_index[v.id]: 1.0, model.s_index[u]: -1.0},
                ">=",
                1.0,
            )
            for mc in inst.machines:
                model.add_row(
                    f"dv_{_safe(u)}_{_safe(v.id)}_{_safe(mc.id)}",
                    {model.x_index[(v.id, mc.id)]: 1.0, delta[(u, v.id, mc.id)]: -1.0},
                    ">=",
                    0.0,
                )
                model.add_row(
                    f"du_{_safe(u)}_{_safe(v.id)}_{_safe(mc.id)}",
                    {model.x_index[(u, mc.id)]: 1.0, delta[(u, v.id, mc.id)]: -1.0},
                    ">=",
                    0.0,
                )
    for v in inst.jobs:
        coeffs = {model.x_index[(v.id, mc.id)]: 1.0 for mc in inst.machines}
        model.add_row(f"cover_{_safe(v.id)}", coeffs, "=", 1.0)
    return model


def _time_indexed_model(inst: Instance, horizon: int | None) -> LpModel:
    """Completion-indexed program over integer steps 1..horizon.

    The makespan variable dominates each job's fractional completion time; an
    undersized horizon makes the model infeasible, which callers may report.
    """
    s_max = max(mc.speed for mc in inst.machines)
    if horizon is None:
        horizon = math.ceil(2.0 * sum(j.size for j in inst.jobs) / s_max)
    horizon = max(1, int(horizon))
    preds = transitive_predecessors(inst)
    rho = inst.rho
    model = LpModel()
    model.c_index = model.add_var("C")
    idx: dict[tuple[str, str, int], int] = {}
    for v in inst.jobs:
        for mc in inst.machines:
            for t in range(1, horizon + 1):
                idx[(v.id, mc.id, t)] = model.add_var(
                    f"x_{_safe(v.id)}_{_safe(mc.id)}_{t}", 0.0, 1.0
                )
    model.objective = {model.c_index: 1.0}
    for v in inst.jobs:
        coeffs = {idx[(v.id, mc.id, t)]: 1.0 for mc in inst.machines for t in range(1, horizon + 1)}
        model.add_row(f"cover_{_safe(v.id)}", coeffs, "=", 1.0)
        coeffs = {model.c_index: 1.0}
        for mc in inst.machines:
            for t in range(1, horizon + 1):
                coeffs[idx[(v.id, mc.id, t)]] = -float(t)
        model.add_row(f"mk_{_safe(v.id)}", coeffs, ">=", 0.0)
    for mc in inst.machines:
        for t in range(1, horizon + 1):
            coeffs = {idx[(v.id, mc.id, t)]: 1.0 for v in inst.jobs}
            model.add_row(f"cap_{_safe(mc.id)}_{t}", coeffs, "<=", 1.0)
    for v in inst.jobs:
        for u in sorted(preds[v.id]):
            for t in range(0, horizon):
                coeffs: dict[int, float] = {}
                for mc in inst.machines:
                    for t2 in range(1, t + 2):
                        coeffs[idx[(v.id, mc.id, t2)]] = 1.0
                    for t2 in range(1, t + 1):
                        coeffs[idx[(u, mc.id, t2)]] = coeffs.get(idx[(u, mc.id, t2)], 0.0) - 1.0
                model.add_row(f"prec_{_safe(u)}_{_safe(v.id)}_{t}", coeffs, "<=", 0.0)
            for mc in inst.machines:
                for t in range(0, horizon):
                    coeffs = {idx[(v.id, mc.id, t + 1)]: 1.0}
                    for mc2 in inst.machines:
                        if mc2.id == mc.id:
                            continue
                        for t2 in range(max(1, t - int(rho)), t + 1):
                            key = idx[(u, mc2.id, t2)]
                            coeffs[key] = coeffs.get(key, 0.0) + 1.0
                    model.add_row(
                        f"delay_{_safe(u)}_{_safe(v.id)}_{_safe(mc.id)}_{t}",
                        coeffs,
                        "<=",
                        1.0,
                    )
    return model


def _same_phase_model(inst: Instance) -> LpModel:
    """Pairwise same-phase indicator program with speed-weighted phase row."""
    preds = transitive_predecessors(inst)
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
    phi: dict[tuple[str, str], int] = {}
    for v in inst.jobs:
        for u in sorted(preds[v.id]):
            phi[(u, v.id)] = model.add_var(f"phi_{_safe(u)}_{_safe(v.id)}", 0.0, 1.0)
    model.objective = {model.c_index: 1.0}
    for v in inst.jobs:
        model.add_row(
            f"mk_{_safe(v.id)}", {model.c_index: 1.0, model.s_index[v.id]: -1.0}, ">=", 0.0
        )
    for mc in inst.machines:
        coeffs = {model.c_index: mc.speed}
        for v in inst.jobs:
            coeffs[model.x_index[(v.id, mc.id)]] = -v.size
        model.add_row(f"load_{_safe(mc.id)}", coeffs, ">=", 0.0)
    for v in inst.jobs:
        for u in sorted(preds[v.id]):
            model.add_row(
                f"delay_{_safe(u)}_{_safe(v.id)}",
                {
                    model.s_index[v.id]: 1.0,
                    model.s_index[u]: -1.0,
                    phi[(u, v.id)]: rho,
                },
                ">=",
                rho,
            )
            model.add_row(
                f"prec_{_safe(u)}_{_safe(v.id)}",
                {model.s_index[v.id]: 1.0, model.s_index[u]: -1.0},
                ">=",
                0.0,
            )
    for v in inst.jobs:
        if not preds[v.id]:
            continue
        coeffs: dict[int, float] = {}
        for mc in inst.machines:
            coeffs[model.x_index[(v.id, mc.id)]] = rho * mc.speed
        for u in sorted(preds[v.id]):
            coeffs[phi[(u, v.id)]] = -inst.size(u)
        model.add_row(f"phase_{_safe(v.id)}", coeffs, ">=", 0.0)
    for v in inst.jobs:
        coeffs = {model.x_index[(v.id, mc.id)]: 1.0 for mc in inst.machines}
        model.add_row(f"cover_{_safe(v.id)}", coeffs, "=", 1.0)
    return model


@dataclass(frozen=True)
class GapReport:
    params: dict
    lp_value: float
    lp_source: str  # "certificate" or "solved"
    pipeline_makespan: float | None
    baseline_makespan: float | None
    ratio: float | None

    def to_json(self) -> str:
        doc = {
            "params": self.params,
            "lp_value": self.lp_value,
            "lp_source": self.lp_source,
            "pipeline_makespan": self.pipeline_makespan,
            "baseline_makespan": self.baseline_makespan,
            "ratio": self.ratio,
        }
        return json.dumps(doc, indent=2, sort_keys=True)


def measure_gap(inst: Instance, eta: float | None = None) -> GapReport:
    """LP value (certificate when layered), pipeline and baseline makespans."""
    from .cli import PipelineConfig, run_pipeline
    from .oracle import combinatorial_baseline
    from .schedmodel import makespan

    try:
        _layer_structure(inst)
        lp_value = float(inst.rho)
        lp_source = "certificate"
    except ValueError:
        model = build_relaxation(inst)
        sol = solve_lp(model)
        lp_value = sol.objective
        lp_source = "solved"

    result = run_pipeline(inst, PipelineConfig(eta=eta))
    pipe_ms = result.report.makespan
    base_ms = makespan(inst, combinatorial_baseline(inst))
    integral = min(x for x in (pipe_ms, base_ms) if x is not None)
    ratio = integral / lp_value if lp_value > 0 else None
    return GapReport(
        params={"n": inst.n, "m": inst.m, "rho": inst.rho},
        lp_value=lp_value,
        lp_source=lp_source,
        pipeline_makespan=pipe_ms,
        baseline_makespan=base_ms,
        ratio=ratio,
    )
