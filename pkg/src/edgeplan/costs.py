"""Cost evaluation for (task, node) pairs.

Three components, combined by nonnegative weights into one scalar:

    exec   = cycles / freq                                   [s]
    comm   = in_size/in_bw + in_lat + out_size/out_bw + out_lat   [s]
    energy = energy_coeff * cycles * freq^2                  [J]
    total  = w_ex * exec + w_co * comm + w_en * energy

Seconds and joules are mixed in the total deliberately; the weights carry
any unit conversion the caller wants. An optional min-max normalization
rescales each component over a task's candidate set before weighting,
making the total dimensionless (off by default).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .graph import GraphError, InfraGraph, NodeRecord, TaskSpec
from .filtering import CandidateEntry

#: Architecture energy coefficient applied when a scenario omits one,
#: in J * s^2 / cycle (a typical DVFS-style magnitude).
DEFAULT_ENERGY_COEFF = 1e-27


@dataclass(frozen=True)
class CostWeights:
    """Weights for the execution, communication, and energy components."""

    w_ex: float = 1.0
    w_co: float = 1.0
    w_en: float = 1.0

    def __post_init__(self) -> None:
        if min(self.w_ex, self.w_co, self.w_en) < 0:
            raise ValueError("cost weights must be nonnegative")
        if self.w_ex == 0 and self.w_co == 0 and self.w_en == 0:
            raise ValueError("at least one cost weight must be positive")

    @classmethod
    def from_mapping(cls, doc: dict | None) -> "CostWeights":
        doc = doc or {}
        extra = set(doc) - {"w_ex", "w_co", "w_en", "normalize"}
        if extra:
            raise ValueError(f"unknown field {sorted(extra)[0]!r} in weights")
        return cls(
            w_ex=float(doc.get("w_ex", 1.0)),
            w_co=float(doc.get("w_co", 1.0)),
            w_en=float(doc.get("w_en", 1.0)),
        )


@dataclass(frozen=True)
class CostBreakdown:
    """Per-pair cost components and their exact weighted total.

    Under min-max normalization the components are dimensionless values in
    [0, 1]; otherwise exec/comm are seconds and energy is joules. In both
    cases ``total == w_ex*exec + w_co*comm + w_en*energy`` exactly.
    """

    exec: float
    comm: float
    energy: float
    total: float


def exec_time(task: TaskSpec, node: NodeRecord) -> float:
    """Seconds to run the task's cycles at the node's frequency."""
    if not node.is_compute() or not node.freq:
        raise GraphError(f"node {node.id!r} is not a compute node")
    return task.cycles / node.freq


def comm_time(task: TaskSpec, entry: CandidateEntry) -> float:
    """Transfer plus propagation time over the input and output paths.

    An infinite-bandwidth entry (co-located endpoints) contributes a zero
    transfer term; IEEE division by +inf handles that without a branch.
    """
    return (task.input_size / entry.bw_in + entry.lat_in
            + task.output_size / entry.bw_out + entry.lat_out)


def energy_cost(task: TaskSpec, node: NodeRecord) -> float:
    """Joules consumed executing the task on the node."""
    if not node.is_compute() or not node.freq:
        raise GraphError(f"node {node.id!r} is not a compute node")
    coeff = node.energy_coeff if node.energy_coeff is not None else DEFAULT_ENERGY_COEFF
    return coeff * task.cycles * node.freq ** 2


def pair_cost(
    task: TaskSpec,
    node: NodeRecord,
    entry: CandidateEntry,
    weights: CostWeights,
) -> CostBreakdown:
    """Full cost breakdown of placing the task on the node."""
    ex = exec_time(task, node)
    co = comm_time(task, entry)
    en = energy_cost(task, node)
    return CostBreakdown(
        exec=ex, comm=co, energy=en,
        total=weights.w_ex * ex + weights.w_co * co + weights.w_en * en,
    )


def candidate_costs(
    graph: InfraGraph,
    task: TaskSpec,
    entries: list[CandidateEntry],
    weights: CostWeights,
    normalize: bool = False,
) -> list[CostBreakdown]:
    """Breakdowns for one task across its candidate list, in list order.

    With ``normalize`` each component is min-max scaled over this candidate
    set before weighting (constant components scale to 0).
    """
    raw = [pair_cost(task, graph.node(e.node_id), e, weights) for e in entries]
    if not normalize or not raw:
        return raw
    scaled = []
    spans = {}
    for comp in ("exec", "comm", "energy"):
        values = [getattr(b, comp) for b in raw]
        lo, hi = min(values), max(values)
        spans[comp] = (lo, hi - lo)
    for b in raw:
        ex = _minmax(b.exec, *spans["exec"])
        co = _minmax(b.comm, *spans["comm"])
        en = _minmax(b.energy, *spans["energy"])
        scaled.append(CostBreakdown(
            exec=ex, comm=co, energy=en,
            total=weights.w_ex * ex + weights.w_co * co + weights.w_en * en,
        ))
    return scaled


def _minmax(value: float, lo: float, span: float) -> float:
    return 0.0 if span == 0 else (value - lo) / span


def plan_cost(totals: list[float]) -> float:
    """Arithmetic mean of assigned-pair totals.

    The divisor is the number of assigned tasks; a plan with nothing
    assigned gets the distinguished value +inf so that ranking never
    divides by zero and an empty plan never wins.
    """
    if not totals:
        return math.inf
    return sum(totals) / len(totals)
