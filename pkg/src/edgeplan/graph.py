"""Embedded property graph of an edge-fog-cloud infrastructure and its workload.

The graph holds four record kinds: compute/device nodes, network links,
workload tasks, and task-to-node assignments. It answers latency-optimal
path queries and keeps per-node resource accounting exact (integer units),
so that assigning and releasing a task round-trips bit-identically.

All quantities are SI base units: seconds, bytes, Hz, joules. CPU capacity
is expressed in milli-cores (1 core = 1000).

Path queries accumulate latency in exact rational arithmetic internally and
re-sum the final hop list in canonical left-to-right float order, so the
same path always reports the same float total regardless of the direction
the search ran in.
"""

from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Iterable

LAYERS = ("device", "edge", "fog", "cloud")
COMPUTE_LAYERS = ("edge", "fog", "cloud")

#: Bandwidth aggregation over a path: arithmetic mean of the link bandwidths
#: (default) or the bottleneck minimum.
BW_AGG_MODES = ("mean", "bottleneck")


class GraphError(ValueError):
    """Invalid graph input or reference to an unknown record."""


class SnapshotError(GraphError):
    """Malformed or referentially inconsistent snapshot document."""


@dataclass
class NodeRecord:
    """An infrastructure node.

    Device-layer nodes generate data only: they carry no frequency, no
    energy coefficient, and zero capacity, and they never host tasks.
    Compute nodes (edge/fog/cloud) require freq > 0 and energy_coeff > 0.
    """

    id: str
    layer: str
    freq: float | None = None  # Hz
    cpu_total: int = 0  # milli-cores
    cpu_avail: int = 0
    ram_total: int = 0  # bytes
    ram_avail: int = 0
    storage_total: int = 0  # bytes
    storage_avail: int = 0
    energy_coeff: float | None = None  # J * s^2 / cycle

    def is_compute(self) -> bool:
        return self.layer in COMPUTE_LAYERS

    def validate(self) -> None:
        if self.layer not in LAYERS:
            raise GraphError(f"invalid layer {self.layer!r} for node {self.id!r}")
        for name in ("cpu", "ram", "storage"):
            total = getattr(self, f"{name}_total")
            avail = getattr(self, f"{name}_avail")
            if total < 0 or avail < 0 or avail > total:
                raise GraphError(
                    f"node {self.id!r}: need 0 <= {name}_avail <= {name}_total, "
                    f"got {avail}/{total}"
                )
        if self.layer == "device":
            if self.cpu_total or self.ram_total or self.storage_total:
                raise GraphError(f"device node {self.id!r} must have zero capacity")
        else:
            if not self.freq or self.freq <= 0:
                raise GraphError(f"compute node {self.id!r} requires freq > 0")
            if not self.energy_coeff or self.energy_coeff <= 0:
                raise GraphError(f"compute node {self.id!r} requires energy_coeff > 0")


@dataclass(frozen=True)
class LinkRecord:
    """A network link; latency in seconds, bandwidth in bytes/second."""

    src: str
    dst: str
    latency: float
    bandwidth: float
    bidirectional: bool = True

    def validate(self) -> None:
        if self.src == self.dst:
            raise GraphError(f"self-loop link on {self.src!r} is not allowed")
        if self.latency < 0:
            raise GraphError(f"link {self.src}->{self.dst}: latency must be >= 0")
        if self.bandwidth <= 0:
            raise GraphError(f"link {self.src}->{self.dst}: bandwidth must be > 0")


@dataclass(frozen=True)
class TaskSpec:
    """A workload unit.

    ``cycles`` is the CPU work, sizes are in bytes. A placed task reserves
    ``req_cpu`` milli-cores, ``req_ram`` bytes of memory, and ``exe_size``
    bytes of storage (the executable footprint doubles as the storage
    requirement).
    """

    id: str
    cycles: float
    input_size: int
    output_size: int
    exe_size: int
    req_cpu: int
    req_ram: int
    source_device: str
    sink_node: str

    def validate(self) -> None:
        if self.cycles <= 0:
            raise GraphError(f"task {self.id!r}: cycles must be > 0")
        for name in ("input_size", "output_size", "exe_size", "req_cpu", "req_ram"):
            if getattr(self, name) < 0:
                raise GraphError(f"task {self.id!r}: {name} must be >= 0")


@dataclass(frozen=True)
class AssignmentEdge:
    """Records that a task executes on a node, from the given event time."""

    task_id: str
    node_id: str
    assigned_at: float = 0.0


@dataclass(frozen=True)
class PathSummary:
    """Evaluation of one path: ordered hops, total latency, aggregated bandwidth.

    The empty path (src == dst) has latency 0 and bandwidth +inf, meaning
    the transfer term vanishes for co-located endpoints.
    """

    hops: tuple[str, ...]
    total_latency: float
    avg_bandwidth: float


_SNAPSHOT_NODE_FIELDS = (
    "id", "layer", "freq", "cpu_total", "cpu_avail", "ram_total", "ram_avail",
    "storage_total", "storage_avail", "energy_coeff",
)
_SNAPSHOT_LINK_FIELDS = ("src", "dst", "latency", "bandwidth", "bidirectional")
_SNAPSHOT_TASK_FIELDS = (
    "id", "cycles", "input_size", "output_size", "exe_size", "req_cpu",
    "req_ram", "source_device", "sink_node",
)
_SNAPSHOT_ASSIGNMENT_FIELDS = ("task_id", "node_id", "assigned_at")


class InfraGraph:
    """Unified infrastructure + workload model with single-writer semantics.

    All mutation happens on one logical thread; read-only queries are safe
    to issue concurrently between mutations.
    """

    def __init__(self) -> None:
        self.nodes: dict[str, NodeRecord] = {}
        # directed adjacency: src -> dst -> link record (bidirectional links
        # appear under both orderings, pointing at the same record)
        self._adj: dict[str, dict[str, LinkRecord]] = {}
        self.tasks: dict[str, TaskSpec] = {}
        self.assignments: dict[str, AssignmentEdge] = {}

    # -- nodes -------------------------------------------------------------

    def upsert_node(self, record: NodeRecord) -> str:
        """Insert or replace a node; the id is preserved on re-upsert."""
        record.validate()
        self.nodes[record.id] = record
        self._adj.setdefault(record.id, {})
        return record.id

    def node(self, node_id: str) -> NodeRecord:
        try:
            return self.nodes[node_id]
        except KeyError:
            raise GraphError(f"unknown node {node_id!r}") from None

    def compute_nodes(self) -> list[NodeRecord]:
        """Compute-layer nodes in ascending id order."""
        return [self.nodes[i] for i in sorted(self.nodes) if self.nodes[i].is_compute()]

    # -- links -------------------------------------------------------------

    def upsert_link(self, record: LinkRecord) -> tuple[str, str]:
        """Insert or replace the link between record.src and record.dst.

        A re-upsert for the same node pair (either orientation) replaces the
        previous record, so path queries reflect the new attributes
        immediately.
        """
        record.validate()
        self.node(record.src)
        self.node(record.dst)
        self._drop_link(record.src, record.dst)
        self._adj[record.src][record.dst] = record
        if record.bidirectional:
            self._adj[record.dst][record.src] = record
        return (record.src, record.dst)

    def _drop_link(self, a: str, b: str) -> None:
        for u, v in ((a, b), (b, a)):
            old = self._adj.get(u, {}).get(v)
            if old is None:
                continue
            del self._adj[u][v]
            if old.bidirectional:
                # remove the mirror entry of a replaced bidirectional record
                if self._adj.get(v, {}).get(u) is old:
                    del self._adj[v][u]

    def links(self) -> list[LinkRecord]:
        """Distinct link records, sorted by (src, dst)."""
        seen: dict[int, LinkRecord] = {}
        for neighbours in self._adj.values():
            for rec in neighbours.values():
                seen[id(rec)] = rec
        return sorted(seen.values(), key=lambda r: (r.src, r.dst))

    def neighbours(self, node_id: str) -> dict[str, LinkRecord]:
        return self._adj.get(node_id, {})

    # -- tasks & assignments -------------------------------------------------

    def add_task(self, spec: TaskSpec) -> str:
        spec.validate()
        src = self.node(spec.source_device)
        if src.layer != "device":
            raise GraphError(
                f"task {spec.id!r}: source_device {spec.source_device!r} "
                f"is a {src.layer} node, expected device"
            )
        self.node(spec.sink_node)
        self.tasks[spec.id] = spec
        return spec.id

    def task(self, task_id: str) -> TaskSpec:
        try:
            return self.tasks[task_id]
        except KeyError:
            raise GraphError(f"unknown task {task_id!r}") from None

    def assignment_of(self, task_id: str) -> AssignmentEdge | None:
        return self.assignments.get(task_id)

    def tasks_on(self, node_id: str) -> list[str]:
        """Task ids currently assigned to a node, ascending."""
        return sorted(t for t, e in self.assignments.items() if e.node_id == node_id)

    def assign(self, task_id: str, node_id: str, at: float = 0.0) -> AssignmentEdge:
        """Place a task on a compute node, reserving its footprint."""
        task = self.task(task_id)
        node = self.node(node_id)
        if not node.is_compute():
            raise GraphError(f"cannot assign {task_id!r} to non-compute node {node_id!r}")
        if task_id in self.assignments:
            raise GraphError(f"task {task_id!r} is already assigned")
        if (node.cpu_avail < task.req_cpu or node.ram_avail < task.req_ram
                or node.storage_avail < task.exe_size):
            raise GraphError(
                f"node {node_id!r} lacks resources for task {task_id!r}"
            )
        node.cpu_avail -= task.req_cpu
        node.ram_avail -= task.req_ram
        node.storage_avail -= task.exe_size
        edge = AssignmentEdge(task_id=task_id, node_id=node_id, assigned_at=at)
        self.assignments[task_id] = edge
        return edge

    def release_assignment(self, task_id: str) -> tuple[int, int, int]:
        """Remove a task's assignment and return its (cpu, ram, storage) footprint."""
        edge = self.assignments.get(task_id)
        if edge is None:
            raise GraphError(f"task {task_id!r} is not assigned")
        task = self.task(task_id)
        node = self.node(edge.node_id)
        node.cpu_avail += task.req_cpu
        node.ram_avail += task.req_ram
        node.storage_avail += task.exe_size
        if (node.cpu_avail > node.cpu_total or node.ram_avail > node.ram_total
                or node.storage_avail > node.storage_total):
            raise GraphError(
                f"release of {task_id!r} overflowed capacity on {edge.node_id!r}"
            )
        del self.assignments[task_id]
        return (task.req_cpu, task.req_ram, task.exe_size)

    def check_conservation(self) -> None:
        """Raise if any node's available + reserved resources != totals."""
        reserved: dict[str, list[int]] = {}
        for task_id, edge in self.assignments.items():
            task = self.tasks[task_id]
            acc = reserved.setdefault(edge.node_id, [0, 0, 0])
            acc[0] += task.req_cpu
            acc[1] += task.req_ram
            acc[2] += task.exe_size
        for node in self.nodes.values():
            cpu, ram, sto = reserved.get(node.id, (0, 0, 0))
            if (node.cpu_avail + cpu != node.cpu_total
                    or node.ram_avail + ram != node.ram_total
                    or node.storage_avail + sto != node.storage_total):
                raise GraphError(
                    f"resource conservation violated on node {node.id!r}"
                )

    # -- path queries --------------------------------------------------------

    def _summarize(self, hops: tuple[str, ...], bw_agg: str) -> PathSummary:
        # canonical left-to-right float sums so equal hop lists always yield
        # byte-equal summaries
        if len(hops) <= 1:
            return PathSummary(hops=hops, total_latency=0.0, avg_bandwidth=math.inf)
        total = 0.0
        bws: list[float] = []
        for a, b in zip(hops, hops[1:]):
            link = self._adj[a][b]
            total += link.latency
            bws.append(link.bandwidth)
        if bw_agg == "bottleneck":
            bandwidth = min(bws)
        else:
            bandwidth = sum(bws) / len(bws)
        return PathSummary(hops=hops, total_latency=total, avg_bandwidth=bandwidth)

    def best_path(self, src: str, dst: str, bw_agg: str = "mean") -> PathSummary | None:
        """Minimum-latency path from src to dst, or None when unreachable.

        Ties are broken by fewer hops, then lexicographically smaller hop
        sequence.
        """
        self.node(src)
        self.node(dst)
        paths = self.shortest_paths_from(src, bw_agg=bw_agg, stop_at=dst)
        return paths.get(dst)

    def shortest_paths_from(
        self, src: str, bw_agg: str = "mean", stop_at: str | None = None
    ) -> dict[str, PathSummary]:
        """Single-source variant of best_path, keyed by reachable node id."""
        self.node(src)
        _check_bw_agg(bw_agg)
        # keys are (exact latency, hop count, hop tuple): extension strictly
        # increases the key, so settle-on-first-pop yields the tie-broken optimum
        heap: list[tuple[Fraction, int, tuple[str, ...]]] = [
            (Fraction(0), 1, (src,))
        ]
        settled: dict[str, PathSummary] = {}
        while heap:
            lat, hops, path = heapq.heappop(heap)
            node = path[-1]
            if node in settled:
                continue
            settled[node] = self._summarize(path, bw_agg)
            if stop_at is not None and node == stop_at:
                return settled
            for nxt, link in self._adj[node].items():
                if nxt in settled:
                    continue
                heapq.heappush(heap, (lat + Fraction(link.latency), hops + 1, path + (nxt,)))
        return settled

    def shortest_paths_to(self, dst: str, bw_agg: str = "mean") -> dict[str, PathSummary]:
        """best_path(n, dst) for every node n that can reach dst.

        Runs one reverse Dijkstra for the exact (latency, hop) optima, then
        reconstructs the lexicographically least forward path per node, so
        each entry equals what best_path(n, dst) would return.
        """
        self.node(dst)
        _check_bw_agg(bw_agg)
        reverse: dict[str, dict[str, LinkRecord]] = {n: {} for n in self.nodes}
        for u, neighbours in self._adj.items():
            for v, link in neighbours.items():
                reverse[v][u] = link
        dist: dict[str, tuple[Fraction, int]] = {}
        heap: list[tuple[Fraction, int, str]] = [(Fraction(0), 1, dst)]
        while heap:
            lat, hops, node = heapq.heappop(heap)
            if node in dist:
                continue
            dist[node] = (lat, hops)
            for prev, link in reverse[node].items():
                if prev not in dist:
                    heapq.heappush(heap, (lat + Fraction(link.latency), hops + 1, prev))

        out: dict[str, PathSummary] = {}
        for start in dist:
            path = [start]
            node = start
            while node != dst:
                lat, hops = dist[node]
                nxt = min(
                    v for v, link in sorted(self._adj[node].items())
                    if v in dist
                    and dist[v][0] + Fraction(link.latency) == lat
                    and dist[v][1] + 1 == hops
                )
                path.append(nxt)
                node = nxt
            out[start] = self._summarize(tuple(path), bw_agg)
        return out

    # -- snapshots -----------------------------------------------------------

    def snapshot(self) -> dict:
        """JSON-shaped document capturing the full graph state."""
        nodes = []
        for node_id in sorted(self.nodes):
            node = self.nodes[node_id]
            doc = {
                "id": node.id,
                "layer": node.layer,
                "cpu_total": node.cpu_total,
                "cpu_avail": node.cpu_avail,
                "ram_total": node.ram_total,
                "ram_avail": node.ram_avail,
                "storage_total": node.storage_total,
                "storage_avail": node.storage_avail,
            }
            if node.freq is not None:
                doc["freq"] = node.freq
            if node.energy_coeff is not None:
                doc["energy_coeff"] = node.energy_coeff
            nodes.append(doc)
        links = [
            {
                "src": link.src,
                "dst": link.dst,
                "latency": link.latency,
                "bandwidth": link.bandwidth,
                "bidirectional": link.bidirectional,
            }
            for link in self.links()
        ]
        tasks = [
            {f: getattr(self.tasks[t], f) for f in _SNAPSHOT_TASK_FIELDS}
            for t in sorted(self.tasks)
        ]
        assignments = [
            {f: getattr(self.assignments[t], f) for f in _SNAPSHOT_ASSIGNMENT_FIELDS}
            for t in sorted(self.assignments)
        ]
        return {"nodes": nodes, "links": links, "tasks": tasks, "assignments": assignments}

    @classmethod
    def load(cls, document: dict) -> "InfraGraph":
        """Rebuild a graph from a snapshot document, checking integrity."""
        if not isinstance(document, dict):
            raise SnapshotError("snapshot document must be an object")
        graph = cls()
        for doc in _snapshot_array(document, "nodes"):
            fields = _take_fields(doc, _SNAPSHOT_NODE_FIELDS, "nodes")
            try:
                graph.upsert_node(NodeRecord(**fields))
            except TypeError as exc:
                raise SnapshotError(f"bad node record: {exc}") from None
        claimed_avail = {
            n.id: (n.cpu_avail, n.ram_avail, n.storage_avail)
            for n in graph.nodes.values()
        }
        # assignments re-derive availability; reset to totals first
        for node in graph.nodes.values():
            node.cpu_avail = node.cpu_total
            node.ram_avail = node.ram_total
            node.storage_avail = node.storage_total
        for doc in _snapshot_array(document, "links"):
            fields = _take_fields(doc, _SNAPSHOT_LINK_FIELDS, "links")
            try:
                graph.upsert_link(LinkRecord(**fields))
            except GraphError as exc:
                raise SnapshotError(str(exc)) from None
        for doc in _snapshot_array(document, "tasks"):
            fields = _take_fields(doc, _SNAPSHOT_TASK_FIELDS, "tasks")
            try:
                graph.add_task(TaskSpec(**fields))
            except GraphError as exc:
                raise SnapshotError(str(exc)) from None
        for doc in _snapshot_array(document, "assignments"):
            fields = _take_fields(doc, _SNAPSHOT_ASSIGNMENT_FIELDS, "assignments")
            try:
                graph.assign(fields["task_id"], fields["node_id"],
                             at=fields.get("assigned_at", 0.0))
            except GraphError as exc:
                raise SnapshotError(str(exc)) from None
        for node_id, triple in claimed_avail.items():
            node = graph.nodes[node_id]
            if (node.cpu_avail, node.ram_avail, node.storage_avail) != triple:
                raise SnapshotError(
                    f"node {node_id!r}: declared availability {triple} does not "
                    f"match totals minus assignments"
                )
        return graph

    def copy(self) -> "InfraGraph":
        """Deep-enough copy: records are value objects, node rows are cloned."""
        g = InfraGraph()
        for node_id in self.nodes:
            g.nodes[node_id] = replace(self.nodes[node_id])
            g._adj[node_id] = dict(self._adj[node_id])
        g.tasks = dict(self.tasks)
        g.assignments = dict(self.assignments)
        return g


def _check_bw_agg(mode: str) -> None:
    if mode not in BW_AGG_MODES:
        raise GraphError(f"unknown bandwidth aggregation mode {mode!r}")


def _snapshot_array(document: dict, key: str) -> Iterable[dict]:
    value = document.get(key, [])
    if not isinstance(value, list):
        raise SnapshotError(f"snapshot field {key!r} must be an array")
    for item in value:
        if not isinstance(item, dict):
            raise SnapshotError(f"snapshot field {key!r} must contain objects")
        yield item


def _take_fields(doc: dict, allowed: tuple[str, ...], section: str) -> dict:
    unknown = set(doc) - set(allowed)
    if unknown:
        raise SnapshotError(
            f"unknown field {sorted(unknown)[0]!r} in snapshot section {section!r}"
        )
    return dict(doc)


def snapshot_to_json(graph: InfraGraph) -> str:
    """Canonical single-line JSON rendering of a snapshot."""
    return json.dumps(graph.snapshot(), sort_keys=True, separators=(",", ":")) + "\n"


def graph_from_json(text: str) -> InfraGraph:
    try:
        document = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SnapshotError(f"snapshot is not valid JSON: {exc}") from None
    return InfraGraph.load(document)
