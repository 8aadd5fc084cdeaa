"""Instance data model: jobs, machines, DAG edges, and a fixed communication delay.

Provides validation, transitive-predecessor computation, normalization to
(min size, max speed) = (1, 1), seeded instance generators, and the JSON codec.
All numeric comparisons use an additive tolerance of ``TOL``.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field

TOL = 1e-9


@dataclass(frozen=True)
class Job:
    id: str
    size: float


@dataclass(frozen=True)
class Machine:
    id: str
    speed: float


@dataclass(frozen=True)
class Instance:
    """A scheduling instance: DAG of jobs, related machines, delay ``rho``.

    Machines are expected in nondecreasing speed order (ties by id); the
    position in that order is the machine index used by the relaxation.
    """

    jobs: tuple[Job, ...]
    machines: tuple[Machine, ...]
    edges: tuple[tuple[str, str], ...]
    rho: float

    @property
    def n(self) -> int:
        return len(self.jobs)

    @property
    def m(self) -> int:
        return len(self.machines)

    def job_map(self) -> dict[str, Job]:
        return {j.id: j for j in self.jobs}

    def machine_map(self) -> dict[str, Machine]:
        return {mc.id: mc for mc in self.machines}

    def size(self, job_id: str) -> float:
        return self.job_map()[job_id].size

    def speed(self, machine_id: str) -> float:
        return self.machine_map()[machine_id].speed

    def machine_index(self, machine_id: str) -> int:
        """1-based position of a machine in the speed-sorted machine list."""
        for pos, mc in enumerate(self.machines, start=1):
            if mc.id == machine_id:
                return pos
        raise KeyError(machine_id)

    def successors(self) -> dict[str, list[str]]:
        succ: dict[str, list[str]] = {j.id: [] for j in self.jobs}
        for a, b in self.edges:
            succ[a].append(b)
        return succ

    def direct_predecessors(self) -> dict[str, list[str]]:
        pred: dict[str, list[str]] = {j.id: [] for j in self.jobs}
        for a, b in self.edges:
            pred[b].append(a)
        return pred


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations


@dataclass(frozen=True)
class ScaleRecord:
    """Scaling applied by :func:`normalize_instance`; allows exact inversion.

    Sizes were multiplied by ``alpha``, speeds by ``beta``, and all times
    (including rho) by ``alpha / beta``.
    """

    alpha: float
    beta: float

    @property
    def time_scale(self) -> float:
        return self.alpha / self.beta

    def time_to_original(self, t: float) -> float:
        return t / self.time_scale

    def time_to_normalized(self, t: float) -> float:
        return t * self.time_scale


def make_instance(jobs, machines, edges, rho) -> Instance:
    """Build an Instance with machines sorted by (speed, id)."""
    ms = tuple(sorted(machines, key=lambda mc: (mc.speed, mc.id)))
    return Instance(jobs=tuple(jobs), machines=ms, edges=tuple(edges), rho=float(rho))


def validate_instance(inst: Instance) -> ValidationReport:
    """Check every Instance invariant; violations are returned, not raised."""
    bad: list[str] = []
    job_ids = [j.id for j in inst.jobs]
    mach_ids = [mc.id for mc in inst.machines]
    if len(set(job_ids)) != len(job_ids):
        bad.append("duplicate job ids")
    if len(set(mach_ids)) != len(mach_ids):
        bad.append("duplicate machine ids")
    for j in inst.jobs:
        if not (j.size > 0):
            bad.append(f"job {j.id}: size must be > 0")
    for mc in inst.machines:
        if not (mc.speed > 0):
            bad.append(f"machine {mc.id}: speed must be > 0")
    if inst.rho < 0:
        bad.append("rho must be >= 0")
    for k in range(len(inst.machines) - 1):
        a, b = inst.machines[k], inst.machines[k + 1]
        if a.speed > b.speed + TOL or (abs(a.speed - b.speed) <= TOL and a.id > b.id):
            bad.append("machines not sorted by nondecreasing speed (ties by id)")
            break
    known = set(job_ids)
    for a, b in inst.edges:
        if a not in known or b not in known:
            bad.append(f"dangling edge ({a}, {b})")
    if not any(v.startswith("dangling") for v in bad) and _has_cycle(inst):
        bad.append("cycle in precedence graph")
    return ValidationReport(tuple(bad))


def _has_cycle(inst: Instance) -> bool:
    succ = inst.successors()
    state: dict[str, int] = {}  # 0 unvisited / 1 on stack / 2 done

    def visit(v: str) -> bool:
        state[v] = 1
        for w in succ[v]:
            s = state.get(w, 0)
            if s == 1 or (s == 0 and visit(w)):
                return True
        state[v] = 2
        return False

    return any(state.get(j.id, 0) == 0 and visit(j.id) for j in inst.jobs)


def topological_order(inst: Instance, key=None) -> list[str]:
    """Topological order of job ids; among ready jobs, smallest ``key`` first."""
    import heapq

    key = key or (lambda v: v)
    succ = inst.successors()
    indeg = {j.id: 0 for j in inst.jobs}
    for _, b in inst.edges:
        indeg[b] += 1
    heap = [(key(v), v) for v, d in indeg.items() if d == 0]
    heapq.heapify(heap)
    out: list[str] = []
    while heap:
        _, v = heapq.heappop(heap)
        out.append(v)
        for w in succ[v]:
            indeg[w] -= 1
            if indeg[w] == 0:
                heapq.heappush(heap, (key(w), w))
    if len(out) != inst.n:
        raise ValueError("precedence graph has a cycle")
    return out


def transitive_predecessors(inst: Instance) -> dict[str, frozenset[str]]:
    """Exact transitive closure of the edge relation, keyed by job id."""
    report = validate_instance(inst)
    if not report.ok:
        raise ValueError(f"invalid instance: {'; '.join(report.violations)}")
    pred = inst.direct_predecessors()
    closure: dict[str, frozenset[str]] = {}
    for v in topological_order(inst):
        acc: set[str] = set()
        for u in pred[v]:
            acc.add(u)
            acc |= closure[u]
        closure[v] = frozenset(acc)
    return closure


def normalize_instance(inst: Instance) -> tuple[Instance, ScaleRecord]:
    """Scale so the shortest job has size 1 and the fastest machine speed 1.

    All execution times (size/speed) scale uniformly by ``alpha/beta``, and
    rho is scaled by the same factor so behavior is preserved exactly.
    """
    alpha = 1.0 / min(j.size for j in inst.jobs)
    beta = 1.0 / max(mc.speed for mc in inst.machines)
    if alpha == 1.0 and beta == 1.0:
        return inst, ScaleRecord(1.0, 1.0)
    jobs = tuple(Job(j.id, j.size * alpha) for j in inst.jobs)
    machines = tuple(Machine(mc.id, mc.speed * beta) for mc in inst.machines)
    rho = inst.rho * alpha / beta
    return Instance(jobs, machines, inst.edges, rho), ScaleRecord(alpha, beta)


# ---------------------------------------------------------------------------
# Generators.  All use random.Random (Mersenne Twister) seeded explicitly, so
# corpora are reproducible across runs and platforms.
# ---------------------------------------------------------------------------


def gen_random_dag(
    n: int,
    m: int,
    edge_prob: float,
    size_range: tuple[float, float],
    speed_range: tuple[float, float],
    rho: float,
    seed: int,
) -> Instance:
    """Random DAG: edge (i, j), i < j in a shuffled topological order, w.p. edge_prob."""
    if n < 1 or m < 1:
        raise ValueError("need n >= 1 and m >= 1")
    if not (0.0 <= edge_prob <= 1.0):
        raise ValueError("edge_prob must be in [0, 1]")
    rng = random.Random(seed)
    names = [f"j{k}" for k in range(n)]
    order = names[:]
    rng.shuffle(order)
    edges = []
    for a in range(n):
        for b in range(a + 1, n):
            if rng.random() < edge_prob:
                edges.append((order[a], order[b]))
    jobs = [Job(v, rng.uniform(*size_range)) for v in names]
    machines = [Machine(f"m{k}", rng.uniform(*speed_range)) for k in range(m)]
    return make_instance(jobs, machines, edges, rho)


def gen_layered_gap(L: int, d: int, seed: int) -> Instance:
    """Layered unit instance used for relaxation-gap experiments.

    rho = d**L, m = rho unit machines, L layers of n = m*rho/L unit jobs, and
    each layer-l job (l < L) depends on d distinct random jobs one layer up.
    For d = 1 the power formula degenerates below L, so rho = max(d**L, L)
    keeps the per-layer count m*rho/L integral in the smallest cases.
    """
    if L < 2 or d < 1:
        raise ValueError("need L >= 2 and d >= 1")
    rho = max(d**L, L)
    m = rho
    per_layer, rem = divmod(m * rho, L)
    if rem != 0:
        raise ValueError(f"m*rho/L = {m * rho}/{L} is not an integer")
    if d > per_layer:
        raise ValueError("layer too small to pick d distinct predecessors")
    rng = random.Random(seed)
    jobs = []
    layer_ids: dict[int, list[str]] = {}
    for layer in range(1, L + 1):
        ids = [f"L{layer}_j{k}" for k in range(per_layer)]
        layer_ids[layer] = ids
        jobs.extend(Job(v, 1.0) for v in ids)
    edges = []
    for layer in range(1, L):
        for v in layer_ids[layer]:
            for u in rng.sample(layer_ids[layer + 1], d):
                edges.append((u, v))
    machines = [Machine(f"m{k}", 1.0) for k in range(m)]
    return make_instance(jobs, machines, edges, float(rho))


def gen_binary_tree(rho_exp: int) -> Instance:
    """Complete binary out-tree with rho levels plus a root-predecessor job.

    All jobs are unit size; there are 2**(rho-1) leaves and as many unit
    machines.  rho_exp doubles as the communication delay.
    """
    if rho_exp < 1 or rho_exp != int(rho_exp):
        raise ValueError("rho_exp must be an integer >= 1")
    rho = int(rho_exp)
    n_tree = 2**rho - 1
    jobs = [Job("pre", 1.0)]
    edges = [("pre", "t1")]
    for k in range(1, n_tree + 1):
        jobs.append(Job(f"t{k}", 1.0))
        if 2 * k <= n_tree:
            edges.append((f"t{k}", f"t{2 * k}"))
        if 2 * k + 1 <= n_tree:
            edges.append((f"t{k}", f"t{2 * k + 1}"))
    machines = [Machine(f"m{k}", 1.0) for k in range(2 ** (rho - 1))]
    return make_instance(jobs, machines, edges, float(rho))


def binary_tree_path_schedule(inst: Instance):
    """One machine per leaf running its root-to-leaf path back to back.

    Valid for instances from :func:`gen_binary_tree`; makespan is rho + 1.
    """
    from .schedmodel import Placement, Schedule

    n_tree = sum(1 for j in inst.jobs if j.id != "pre")
    leaves = [k for k in range(1, n_tree + 1) if 2 * k > n_tree]
    placements = []
    for mc, leaf in zip(inst.machines, leaves):
        path = []
        k = leaf
        while k >= 1:
            path.append(f"t{k}")
            k //= 2
        path.append("pre")
        t = 0.0
        for v in reversed(path):
            placements.append(Placement(v, mc.id, t))
            t += inst.size(v) / mc.speed
    return Schedule(tuple(placements))


# ---------------------------------------------------------------------------
# JSON codec.  Round-trips are exact: floats are emitted with repr precision.
# ---------------------------------------------------------------------------


class CodecError(ValueError):
    """Malformed document; the message names the offending field."""


def _require(doc: dict, key: str, where: str):
    if key not in doc:
        raise CodecError(f"missing field '{key}' in {where}")
    return doc[key]


def instance_to_json(inst: Instance) -> str:
    doc = {
        "rho": inst.rho,
        "jobs": [{"id": j.id, "size": j.size} for j in inst.jobs],
        "machines": [{"id": mc.id, "speed": mc.speed} for mc in inst.machines],
        "edges": [[a, b] for a, b in inst.edges],
    }
    return json.dumps(doc, indent=2, sort_keys=True)


def instance_from_json(text: str) -> Instance:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CodecError(f"not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise CodecError("instance document must be a JSON object")
    rho = _require(doc, "rho", "instance document")
    jobs = []
    for k, item in enumerate(_require(doc, "jobs", "instance document")):
        jobs.append(Job(str(_require(item, "id", f"jobs[{k}]")), float(_require(item, "size", f"jobs[{k}]"))))
    machines = []
    for k, item in enumerate(_require(doc, "machines", "instance document")):
        machines.append(
            Machine(str(_require(item, "id", f"machines[{k}]")), float(_require(item, "speed", f"machines[{k}]")))
        )
    edges = []
    for k, pair in enumerate(_require(doc, "edges", "instance document")):
        if not isinstance(pair, (list, tuple)) or len(pair) != 2:
            raise CodecError(f"edges[{k}] must be a [from, to] pair")
        edges.append((str(pair[0]), str(pair[1])))
    return Instance(tuple(jobs), tuple(machines), tuple(edges), float(rho))
