"""Pre-optimization candidate filtering.

For each unassigned task, keep exactly the compute nodes that

  1. are reachable from the device generating the task's input data,
  2. can reach the node where the task's output must be delivered, and
  3. currently have enough free CPU, RAM, and storage for the task,

annotated with the latency and aggregated bandwidth of the two paths. The
optimizer then only ever sees feasible pairs. Reachability is directed;
with bidirectional links both readings coincide.

Everything here is a pure function of the graph state, so per-task calls
may run concurrently between graph mutations.
"""

from __future__ import annotations

from dataclasses import dataclass

from .graph import InfraGraph, PathSummary, TaskSpec

#: Task id -> candidate entries in ascending node-id order.
CandidateMap = dict[str, list["CandidateEntry"]]


@dataclass(frozen=True)
class CandidateEntry:
    """A feasible (task, node) pair with its path attributes."""

    node_id: str
    lat_in: float
    bw_in: float
    lat_out: float
    bw_out: float

    @classmethod
    def from_paths(cls, node_id: str, inbound: PathSummary, outbound: PathSummary):
        return cls(
            node_id=node_id,
            lat_in=inbound.total_latency,
            bw_in=inbound.avg_bandwidth,
            lat_out=outbound.total_latency,
            bw_out=outbound.avg_bandwidth,
        )


def _fits(node, task: TaskSpec) -> bool:
    # rule 3: storage demand is the executable footprint
    return (node.cpu_avail >= task.req_cpu
            and node.ram_avail >= task.req_ram
            and node.storage_avail >= task.exe_size)


def filter_candidates(
    graph: InfraGraph,
    tasks: list[TaskSpec],
    bw_agg: str = "mean",
    exclude: frozenset[str] | set[str] = frozenset(),
) -> CandidateMap:
    """Candidate map for every unassigned task in the list.

    Tasks already carrying an assignment are omitted from the map; a task
    whose rules are unsatisfiable maps to an empty list (never an error).
    ``exclude`` removes specific nodes from candidacy without touching
    their routing role.
    """
    out: CandidateMap = {}
    for task in sorted(tasks, key=lambda t: t.id):
        if graph.assignment_of(task.id) is not None:
            continue
        graph.node(task.source_device)
        graph.node(task.sink_node)
        inbound = graph.shortest_paths_from(task.source_device, bw_agg=bw_agg)
        outbound = graph.shortest_paths_to(task.sink_node, bw_agg=bw_agg)
        entries = []
        for node in graph.compute_nodes():
            if node.id in exclude or not _fits(node, task):
                continue
            path_in = inbound.get(node.id)
            path_out = outbound.get(node.id)
            if path_in is None or path_out is None:
                continue
            entries.append(CandidateEntry.from_paths(node.id, path_in, path_out))
        out[task.id] = entries
    return out


def refresh_entry(
    graph: InfraGraph,
    task: TaskSpec,
    node_id: str,
    bw_agg: str = "mean",
) -> CandidateEntry | None:
    """Re-evaluate the three rules for a single (task, node) pair.

    Returns the freshly annotated entry, or None when any rule fails now.
    """
    node = graph.node(node_id)
    graph.node(task.source_device)
    graph.node(task.sink_node)
    if not node.is_compute() or not _fits(node, task):
        return None
    path_in = graph.best_path(task.source_device, node_id, bw_agg=bw_agg)
    if path_in is None:
        return None
    path_out = graph.best_path(node_id, task.sink_node, bw_agg=bw_agg)
    if path_out is None:
        return None
    return CandidateEntry.from_paths(node_id, path_in, path_out)
