"""Ant colony optimizer for the task-to-node assignment problem.

Each ant builds a full placement by visiting the tasks in a private random
order and sampling one candidate node per task, with probability
proportional to pheromone^alpha * heuristic^beta over the candidates that
still fit the resources this ant has left. Pheromones evaporate every
iteration and the best placement found so far deposits reinforcement on
its pairs.

Placements are ranked lexicographically: more assigned tasks first, then
lower mean cost. Ranking this way (instead of dividing the cost sum by the
full task count) stops a solution from looking good by silently dropping
expensive tasks.

An exact branch-and-bound search over the same search space serves as the
verification oracle for small instances.

Given the same seed and inputs every operation here is fully
deterministic, including under ant-level thread parallelism: each
(iteration, ant) pair derives its own RNG stream from the seed, and the
per-iteration reduction scans ants in index order.
"""

from __future__ import annotations

import math
import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

from .costs import CostBreakdown, CostWeights, candidate_costs, plan_cost
from .errors import InvariantViolation
from .filtering import CandidateEntry, CandidateMap
from .graph import InfraGraph, TaskSpec

#: Ceiling for the heuristic ratio; also substituted for infinite-bandwidth
#: sentinels inside the heuristic only (costs keep the true zero transfer).
ETA_CAP = 1e12

#: Refusal threshold for exhaustive search, counting the unassigned branch.
BRUTE_FORCE_LIMIT = 10_000_000

_MASK64 = (1 << 64) - 1

_PROB_TOL = 1e-12


class InstanceTooLarge(ValueError):
    """Exhaustive search asked for more states than the guard allows."""


@dataclass(frozen=True)
class AcoParams:
    """Tuning knobs of the colony.

    tau_min/tau_max default to 0.01*tau0 and 100*tau0; pass 0 and inf to
    disable clamping.
    """

    alpha: float = 1.0
    beta: float = 2.0
    rho: float = 0.1
    tau0: float = 1.0
    n_ants: int = 20
    n_iters: int = 100
    seed: int = 0
    q: float = 1.0
    tau_min: float | None = None
    tau_max: float | None = None

    def __post_init__(self) -> None:
        if not 0 < self.rho < 1:
            raise ValueError("rho must be in (0, 1)")
        if self.tau0 <= 0:
            raise ValueError("tau0 must be > 0")
        if self.alpha < 0 or self.beta < 0:
            raise ValueError("alpha and beta must be >= 0")
        if self.n_ants < 1 or self.n_iters < 1:
            raise ValueError("n_ants and n_iters must be positive")
        if self.q <= 0:
            raise ValueError("q must be > 0")
        if self.tau_min is None:
            object.__setattr__(self, "tau_min", 0.01 * self.tau0)
        if self.tau_max is None:
            object.__setattr__(self, "tau_max", 100.0 * self.tau0)
        if not self.tau_min <= self.tau0 <= self.tau_max:
            raise ValueError("need tau_min <= tau0 <= tau_max")

    @classmethod
    def from_mapping(cls, doc: dict | None) -> "AcoParams":
        doc = doc or {}
        known = {"alpha", "beta", "rho", "tau0", "n_ants", "n_iters", "seed",
                 "q", "tau_min", "tau_max"}
        extra = set(doc) - known
        if extra:
            raise ValueError(f"unknown field {sorted(extra)[0]!r} in aco params")
        return cls(**doc)


#: (task id, node id) -> pheromone value.
PheromoneTable = dict[tuple[str, str], float]


@dataclass(frozen=True)
class PlanAssignment:
    node_id: str
    cost: CostBreakdown


@dataclass
class PlacementPlan:
    """A task -> node mapping with cost decomposition and leftovers."""

    assignments: dict[str, PlanAssignment] = field(default_factory=dict)
    unassigned: set[str] = field(default_factory=set)
    mean_cost: float = math.inf
    assigned_count: int = 0

    def rank(self) -> tuple[int, float]:
        """Lexicographic rank; smaller is better."""
        return (-self.assigned_count, self.mean_cost)

    def to_jsonable(self) -> dict:
        return {
            "assignments": {
                task: {
                    "node": a.node_id,
                    "cost": {
                        "exec": a.cost.exec,
                        "comm": a.cost.comm,
                        "energy": a.cost.energy,
                        "total": a.cost.total,
                    },
                }
                for task, a in sorted(self.assignments.items())
            },
            "unassigned": sorted(self.unassigned),
            "mean_cost": self.mean_cost,
            "assigned_count": self.assigned_count,
        }


def heuristic_value(entry: CandidateEntry, cap: float = ETA_CAP) -> float:
    """Static desirability of a pair: summed bandwidth over summed latency.

    Infinite-bandwidth sentinels count as ``cap`` bytes/s, and the ratio is
    ceilinged at ``cap`` so zero-latency pairs stay finite.
    """
    bw = (entry.bw_in if entry.bw_in != math.inf else cap) \
        + (entry.bw_out if entry.bw_out != math.inf else cap)
    lat = entry.lat_in + entry.lat_out
    if lat <= 0:
        return cap
    return min(bw / lat, cap)


@dataclass
class AssignmentProblem:
    """A prepared optimization instance: every per-pair quantity realized.

    task order, candidate order, and all dict iteration orders are fixed at
    build time, which is what makes every downstream operation
    reproducible.
    """

    task_ids: list[str]
    tasks: dict[str, TaskSpec]
    candidates: dict[str, list[CandidateEntry]]
    breakdowns: dict[str, list[CostBreakdown]]
    totals: dict[str, list[float]]
    etas: dict[str, list[float]]
    avail: dict[str, tuple[int, int, int]]
    reqs: dict[str, tuple[int, int, int]]

    @classmethod
    def build(
        cls,
        graph: InfraGraph,
        tasks: list[TaskSpec],
        candidates: CandidateMap,
        weights: CostWeights,
        normalize: bool = False,
        heuristic_scale: Callable[[str, CandidateEntry], float] | None = None,
    ) -> "AssignmentProblem":
        task_ids = sorted(t.id for t in tasks if t.id in candidates)
        by_id = {t.id: t for t in tasks}
        breakdowns: dict[str, list[CostBreakdown]] = {}
        totals: dict[str, list[float]] = {}
        etas: dict[str, list[float]] = {}
        needed: set[str] = set()
        for tid in task_ids:
            entries = candidates[tid]
            breakdowns[tid] = candidate_costs(
                graph, by_id[tid], entries, weights, normalize=normalize
            )
            totals[tid] = [b.total for b in breakdowns[tid]]
            eta = [heuristic_value(e) for e in entries]
            if heuristic_scale is not None:
                eta = [v * heuristic_scale(tid, e) for v, e in zip(eta, entries)]
            etas[tid] = eta
            needed.update(e.node_id for e in entries)
        avail = {
            n: (graph.nodes[n].cpu_avail, graph.nodes[n].ram_avail,
                graph.nodes[n].storage_avail)
            for n in sorted(needed)
        }
        reqs = {
            tid: (by_id[tid].req_cpu, by_id[tid].req_ram, by_id[tid].exe_size)
            for tid in task_ids
        }
        return cls(task_ids=task_ids, tasks=by_id, candidates=candidates,
                   breakdowns=breakdowns, totals=totals, etas=etas,
                   avail=avail, reqs=reqs)


def init_pheromones(problem: AssignmentProblem, params: AcoParams) -> PheromoneTable:
    return {
        (tid, entry.node_id): params.tau0
        for tid in problem.task_ids
        for entry in problem.candidates[tid]
    }


def selection_weights(
    taus: list[float], etas: list[float], params: AcoParams
) -> list[float]:
    """Unnormalized sampling weights tau^alpha * eta^beta per candidate."""
    return [t ** params.alpha * e ** params.beta for t, e in zip(taus, etas)]


def _static_weights(
    problem: AssignmentProblem, pheromones: PheromoneTable, params: AcoParams
) -> dict[str, list[float]]:
    return {
        tid: selection_weights(
            [pheromones[(tid, e.node_id)] for e in problem.candidates[tid]],
            problem.etas[tid], params,
        )
        for tid in problem.task_ids
    }


def construct_solution(
    problem: AssignmentProblem,
    pheromones: PheromoneTable,
    params: AcoParams,
    rng: random.Random,
    static_weights: dict[str, list[float]] | None = None,
) -> PlacementPlan:
    """One ant's placement: sample a node per task under live resource bookkeeping.

    Tasks are visited in an order shuffled with the ant's own RNG, so early
    positions do not systematically monopolize scarce nodes. A task whose
    feasible set is empty is left unassigned, never an error.
    """
    if static_weights is None:
        static_weights = _static_weights(problem, pheromones, params)
    avail = {n: list(triple) for n, triple in problem.avail.items()}
    order = list(problem.task_ids)
    rng.shuffle(order)

    assignments: dict[str, PlanAssignment] = {}
    unassigned: set[str] = set()
    cost_sum = 0.0
    for tid in order:
        entries = problem.candidates[tid]
        if not entries:
            unassigned.add(tid)
            continue
        req_cpu, req_ram, req_sto = problem.reqs[tid]
        weights = static_weights[tid]
        feasible: list[int] = []
        masses: list[float] = []
        for k, entry in enumerate(entries):
            a = avail[entry.node_id]
            if a[0] >= req_cpu and a[1] >= req_ram and a[2] >= req_sto:
                feasible.append(k)
                masses.append(weights[k])
        if not feasible:
            unassigned.add(tid)
            continue
        total = sum(masses)
        if total <= 0.0:
            # all weights underflowed to zero; fall back to uniform sampling
            probs = [1.0 / len(feasible)] * len(feasible)
        else:
            probs = [m / total for m in masses]
        if abs(sum(probs) - 1.0) > _PROB_TOL:
            raise InvariantViolation(
                "probability normalization: construction step weights "
                f"sum to {sum(probs)!r}"
            )
        k = feasible[rng.choices(range(len(feasible)), weights=probs)[0]]
        entry = entries[k]
        a = avail[entry.node_id]
        a[0] -= req_cpu
        a[1] -= req_ram
        a[2] -= req_sto
        assignments[tid] = PlanAssignment(entry.node_id, problem.breakdowns[tid][k])
        cost_sum += problem.totals[tid][k]
    return PlacementPlan(
        assignments=assignments,
        unassigned=unassigned,
        mean_cost=plan_cost([a.cost.total for a in assignments.values()]),
        assigned_count=len(assignments),
    )


def optimize(
    graph: InfraGraph,
    tasks: list[TaskSpec],
    candidates: CandidateMap,
    weights: CostWeights,
    params: AcoParams,
    normalize: bool = False,
    threads: int = 1,
    trace: list | None = None,
    on_iteration: Callable[[int, PheromoneTable, PlacementPlan], None] | None = None,
    heuristic_scale: Callable[[str, CandidateEntry], float] | None = None,
) -> PlacementPlan:
    """Run the colony and return the best placement found.

    ``trace`` (when given) collects one (iteration, assigned_count,
    mean_cost) incumbent row per iteration; ``on_iteration`` is called with
    the post-update pheromone table and the incumbent, which is how the
    test suite watches pheromone bounds and incumbent monotonicity.
    Results are independent of ``threads``.
    """
    problem = AssignmentProblem.build(
        graph, tasks, candidates, weights,
        normalize=normalize, heuristic_scale=heuristic_scale,
    )
    pheromones = init_pheromones(problem, params)
    incumbent = PlacementPlan(unassigned=set(problem.task_ids))
    pool = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None
    try:
        for iteration in range(params.n_iters):
            static = _static_weights(problem, pheromones, params)

            def run_ant(index: int, _it: int = iteration) -> PlacementPlan:
                rng = random.Random(_mix64(params.seed, _it, index))
                return construct_solution(problem, pheromones, params, rng, static)

            if pool is not None:
                plans = list(pool.map(run_ant, range(params.n_ants)))
            else:
                plans = [run_ant(i) for i in range(params.n_ants)]
            for plan in plans:
                if plan.rank() < incumbent.rank():
                    incumbent = plan

            keep = 1.0 - params.rho
            for pair in pheromones:
                pheromones[pair] *= keep
            if incumbent.assignments:
                delta = params.q if incumbent.mean_cost == 0 \
                    else params.q / incumbent.mean_cost
                for tid, a in incumbent.assignments.items():
                    pheromones[(tid, a.node_id)] += delta
            lo, hi = params.tau_min, params.tau_max
            for pair, value in pheromones.items():
                if value < lo:
                    pheromones[pair] = lo
                elif value > hi:
                    pheromones[pair] = hi

            if trace is not None:
                trace.append((iteration, incumbent.assigned_count, incumbent.mean_cost))
            if on_iteration is not None:
                on_iteration(iteration, pheromones, incumbent)
    finally:
        if pool is not None:
            pool.shutdown()
    return incumbent


def brute_force(
    graph: InfraGraph,
    tasks: list[TaskSpec],
    candidates: CandidateMap,
    weights: CostWeights,
    normalize: bool = False,
) -> PlacementPlan:
    """Exact lexicographic optimum by branch-and-bound over all mappings.

    Partial mappings are part of the search space (a task may stay
    unassigned). Ties resolve toward the first solution in task-id /
    node-id enumeration order. Instances beyond the state guard are
    refused outright rather than silently truncated.
    """
    problem = AssignmentProblem.build(graph, tasks, candidates, weights,
                                      normalize=normalize)
    states = 1
    for tid in problem.task_ids:
        states *= len(problem.candidates[tid]) + 1
        if states > BRUTE_FORCE_LIMIT:
            raise InstanceTooLarge(
                f"exhaustive search over more than {BRUTE_FORCE_LIMIT} mappings "
                f"refused; shrink the instance or use optimize()"
            )

    order = problem.task_ids
    n = len(order)
    # admissible per-task bound: cheapest candidate ignoring resources
    min_total = [min(problem.totals[t]) if problem.totals[t] else 0.0 for t in order]
    assignable_suffix = [0] * (n + 1)
    min_suffix = [0.0] * (n + 1)
    for i in range(n - 1, -1, -1):
        has = 1 if problem.candidates[order[i]] else 0
        assignable_suffix[i] = assignable_suffix[i + 1] + has
        min_suffix[i] = min_suffix[i + 1] + (min_total[i] if has else 0.0)

    avail = {node: list(triple) for node, triple in problem.avail.items()}
    best: dict = {"count": 0, "sum": 0.0, "choice": [-1] * n}
    choice = [-1] * n

    def dfs(level: int, count: int, cost_sum: float) -> None:
        if level == n:
            if count > best["count"] or (count == best["count"]
                                         and cost_sum < best["sum"]):
                best["count"] = count
                best["sum"] = cost_sum
                best["choice"] = choice.copy()
            return
        ceiling = count + assignable_suffix[level]
        if ceiling < best["count"]:
            return
        if ceiling == best["count"] and best["choice"] != [-1] * n:
            if cost_sum + min_suffix[level] >= best["sum"]:
                return
        tid = order[level]
        req_cpu, req_ram, req_sto = problem.reqs[tid]
        for k, entry in enumerate(problem.candidates[tid]):
            a = avail[entry.node_id]
            if a[0] < req_cpu or a[1] < req_ram or a[2] < req_sto:
                continue
            a[0] -= req_cpu
            a[1] -= req_ram
            a[2] -= req_sto
            choice[level] = k
            dfs(level + 1, count + 1, cost_sum + problem.totals[tid][k])
            a[0] += req_cpu
            a[1] += req_ram
            a[2] += req_sto
        choice[level] = -1
        dfs(level, count, cost_sum) if False else None
        dfs_unassigned(level, count, cost_sum)

    def dfs_unassigned(level: int, count: int, cost_sum: float) -> None:
        dfs(level + 1, count, cost_sum)

    if n:
        dfs(0, 0, 0.0)

    assignments: dict[str, PlanAssignment] = {}
    unassigned: set[str] = set()
    for i, tid in enumerate(order):
        k = best["choice"][i]
        if k < 0:
            unassigned.add(tid)
        else:
            entry = problem.candidates[tid][k]
            assignments[tid] = PlanAssignment(entry.node_id, problem.breakdowns[tid][k])
    return PlacementPlan(
        assignments=assignments,
        unassigned=unassigned,
        mean_cost=plan_cost([a.cost.total for a in assignments.values()]),
        assigned_count=len(assignments),
    )


def verify_plan_feasible(graph: InfraGraph, plan: PlacementPlan) -> None:
    """Re-simulate a plan against the graph; raise InvariantViolation on breach.

    Checks cumulative per-node resources and that the recorded mean equals
    a fresh mean over the recorded totals.
    """
    avail = {
        n.id: [n.cpu_avail, n.ram_avail, n.storage_avail]
        for n in graph.nodes.values()
    }
    for tid in sorted(plan.assignments):
        task = graph.task(tid)
        a = avail[plan.assignments[tid].node_id]
        a[0] -= task.req_cpu
        a[1] -= task.req_ram
        a[2] -= task.exe_size
        if min(a) < 0:
            raise InvariantViolation(
                f"plan feasibility: node {plan.assignments[tid].node_id!r} "
                f"oversubscribed by task {tid!r}"
            )
    expected = plan_cost([a.cost.total for a in plan.assignments.values()])
    if expected != plan.mean_cost:
        raise InvariantViolation(
            f"plan mean_cost {plan.mean_cost!r} != recomputed {expected!r}"
        )
    if plan.assigned_count != len(plan.assignments):
        raise InvariantViolation("plan assigned_count does not match assignments")


def _mix64(*parts: int) -> int:
    """Stable splitmix64-style mixer for deriving per-ant RNG streams."""
    x = 0x9E3779B97F4A7C15
    for p in parts:
        x = (x + (p & _MASK64)) & _MASK64
        x ^= x >> 30
        x = (x * 0xBF58476D1CE4E5B9) & _MASK64
        x ^= x >> 27
        x = (x * 0x94D049BB133111EB) & _MASK64
        x ^= x >> 31
    return x
