"""Combined X-Z Tanner graph and balanced two-way min-cut partitioning.

Stacking H_X on H_Z gives one bipartite graph over the shared data qubits;
data *and* check vertices are then assigned to one of two network nodes by a
Fiduccia-Mattheyses pass structure (gain buckets, single-vertex moves, best
prefix rollback) restarted from random balanced seeds.  Every Tanner edge
crossing the node boundary costs one Bell pair per syndrome cycle.
"""

from __future__ import annotations

from dataclasses import dataclass
from io import StringIO

import numpy as np

from .codes import CssCode

DATA, XCHECK, ZCHECK = "data", "xcheck", "zcheck"


class PartitionError(ValueError):
    pass


@dataclass(frozen=True)
class TannerGraph:
    """Bipartite graph: data vertices 0..n-1, then X-check, then Z-check
    vertices; one edge per nonzero entry of [H_X; H_Z]."""

    n_data: int
    n_xchecks: int
    n_zchecks: int
    edges: tuple[tuple[int, int], ...]  # (check vertex id, data vertex id)

    @property
    def n_vertices(self) -> int:
        return self.n_data + self.n_xchecks + self.n_zchecks

    def kind(self, v: int) -> str:
        if v < self.n_data:
            return DATA
        if v < self.n_data + self.n_xchecks:
            return XCHECK
        return ZCHECK

    def local_index(self, v: int) -> int:
        """Index of v within its kind block."""
        if v < self.n_data:
            return v
        if v < self.n_data + self.n_xchecks:
            return v - self.n_data
        return v - self.n_data - self.n_xchecks

    def vertex_id(self, kind: str, index: int) -> int:
        base = {DATA: 0, XCHECK: self.n_data, ZCHECK: self.n_data + self.n_xchecks}
        try:
            offset = base[kind]
        except KeyError:
            raise PartitionError(f"unknown vertex kind {kind!r}")
        counts = {DATA: self.n_data, XCHECK: self.n_xchecks, ZCHECK: self.n_zchecks}
        if not 0 <= index < counts[kind]:
            raise PartitionError(f"{kind} index {index} out of range")
        return offset + index

    def adjacency(self) -> list[list[int]]:
        adj: list[list[int]] = [[] for _ in range(self.n_vertices)]
        for c, d in self.edges:
            adj[c].append(d)
            adj[d].append(c)
        return adj


def build_combined_tanner(code: CssCode) -> TannerGraph:
    """One vertex per data qubit and per check row; edges from check supports."""
    n = code.n
    edges = []
    for r in range(code.hx.rows):
        for q in code.hx.row_support(r):
            edges.append((n + r, q))
    for r in range(code.hz.rows):
        for q in code.hz.row_support(r):
            edges.append((n + code.hx.rows + r, q))
    return TannerGraph(n, code.hx.rows, code.hz.rows, tuple(edges))


@dataclass(frozen=True)
class Partition:
    """Node assignment (0 or 1) for every Tanner-graph vertex."""

    assignment: tuple[int, ...]
    n_data: int
    n_xchecks: int
    n_zchecks: int

    def __post_init__(self):
        if len(self.assignment) != self.n_data + self.n_xchecks + self.n_zchecks:
            raise PartitionError("assignment length != vertex count")
        if any(a not in (0, 1) for a in self.assignment):
            raise PartitionError("node ids must be 0 or 1")

    def _counts(self, lo: int, hi: int) -> tuple[int, int]:
        ones = sum(self.assignment[lo:hi])
        return (hi - lo - ones, ones)

    @property
    def data_counts(self) -> tuple[int, int]:
        return self._counts(0, self.n_data)

    @property
    def x_check_counts(self) -> tuple[int, int]:
        return self._counts(self.n_data, self.n_data + self.n_xchecks)

    @property
    def z_check_counts(self) -> tuple[int, int]:
        lo = self.n_data + self.n_xchecks
        return self._counts(lo, lo + self.n_zchecks)

    def node_of(self, v: int) -> int:
        return self.assignment[v]


@dataclass(frozen=True)
class PartitionStats:
    """Cut statistics; one Bell pair per cut edge per syndrome cycle."""

    cut_edges_x: int
    cut_edges_z: int
    local_edges_x: int
    local_edges_z: int
    cross_stabs_x: int
    cross_stabs_z: int
    data_counts: tuple[int, int]
    x_check_counts: tuple[int, int]
    z_check_counts: tuple[int, int]

    @property
    def cut_edges_total(self) -> int:
        return self.cut_edges_x + self.cut_edges_z

    @property
    def local_edges(self) -> int:
        return self.local_edges_x + self.local_edges_z

    def bell_pairs_per_shot(self, n_rep: int) -> int:
        return self.cut_edges_total * n_rep

    def to_json_dict(self) -> dict:
        return {
            "checks_x": self.x_check_counts[0] + self.x_check_counts[1],
            "checks_z": self.z_check_counts[0] + self.z_check_counts[1],
            "tanner_edges_x": self.cut_edges_x + self.local_edges_x,
            "tanner_edges_z": self.cut_edges_z + self.local_edges_z,
            "bridge_edges_x": self.cut_edges_x,
            "bridge_edges_z": self.cut_edges_z,
            "bridge_edges_total": self.cut_edges_total,
            "local_edges_x": self.local_edges_x,
            "local_edges_z": self.local_edges_z,
            "local_edges_total": self.local_edges,
            "cross_partition_stabilizers_x": self.cross_stabs_x,
            "cross_partition_stabilizers_z": self.cross_stabs_z,
            "cross_partition_stabilizers_total": self.cross_stabs_x + self.cross_stabs_z,
            "data_split": list(self.data_counts),
            "x_check_split": list(self.x_check_counts),
            "z_check_split": list(self.z_check_counts),
        }


def partition_stats(graph: TannerGraph, partition: Partition) -> PartitionStats:
    if len(partition.assignment) != graph.n_vertices:
        raise PartitionError("partition does not cover the graph")
    cut = {XCHECK: 0, ZCHECK: 0}
    local = {XCHECK: 0, ZCHECK: 0}
    cross_checks = {XCHECK: set(), ZCHECK: set()}
    for c, d in graph.edges:
        kind = graph.kind(c)
        if partition.assignment[c] != partition.assignment[d]:
            cut[kind] += 1
            cross_checks[kind].add(c)
        else:
            local[kind] += 1
    return PartitionStats(
        cut_edges_x=cut[XCHECK],
        cut_edges_z=cut[ZCHECK],
        local_edges_x=local[XCHECK],
        local_edges_z=local[ZCHECK],
        cross_stabs_x=len(cross_checks[XCHECK]),
        cross_stabs_z=len(cross_checks[ZCHECK]),
        data_counts=partition.data_counts,
        x_check_counts=partition.x_check_counts,
        z_check_counts=partition.z_check_counts,
    )


# ---------------------------------------------------------------------------
# Fiduccia-Mattheyses bipartitioning


class _GainBuckets:
    """Max-gain bucket structure over unlocked vertices."""

    def __init__(self, gains: np.ndarray, unlocked: np.ndarray):
        self.buckets: dict[int, set[int]] = {}
        self.gains = gains
        for v in np.nonzero(unlocked)[0]:
            self.buckets.setdefault(int(gains[v]), set()).add(int(v))

    def remove(self, v: int) -> None:
        g = int(self.gains[v])
        bucket = self.buckets.get(g)
        if bucket and v in bucket:
            bucket.discard(v)
            if not bucket:
                del self.buckets[g]

    def update(self, v: int, new_gain: int) -> None:
        self.remove(v)
        self.gains[v] = new_gain
        self.buckets.setdefault(new_gain, set()).add(v)

    def candidates_by_gain(self):
        for g in sorted(self.buckets, reverse=True):
            yield g, self.buckets[g]


def _fm_pass(graph, adj, assignment, balance_tol, data_counts):
    """One FM pass: greedy locked moves, then rollback to the best prefix.

    Returns the total cut reduction achieved (>= 0).
    """
    n_vert = graph.n_vertices
    gains = np.zeros(n_vert, dtype=np.int64)
    for v in range(n_vert):
        for u in adj[v]:
            gains[v] += 1 if assignment[u] != assignment[v] else -1
    unlocked = np.ones(n_vert, dtype=bool)
    buckets = _GainBuckets(gains.copy(), unlocked)

    check_imbalance = _check_imbalance(graph, assignment)
    moves: list[int] = []
    cum_gain = 0
    best_gain, best_prefix = 0, 0

    for _ in range(n_vert):
        move = _select_move(graph, buckets, assignment, data_counts, balance_tol,
                            check_imbalance, adj)
        if move is None:
            break
        v = move
        buckets.remove(v)
        unlocked[v] = False
        cum_gain += int(buckets.gains[v])
        side = assignment[v]
        if graph.kind(v) == DATA:
            data_counts[side] -= 1
            data_counts[1 - side] += 1
        else:
            delta = -1 if side == 0 else 1
            check_imbalance += 2 * delta  # imbalance = (side0 - side1) count
        assignment[v] = 1 - side
        moves.append(v)
        for u in adj[v]:
            if unlocked[u]:
                # v switched sides: edge (u, v) flips local/cut status
                delta = 2 if assignment[u] == side else -2
                buckets.update(u, int(buckets.gains[u]) + delta)
        if cum_gain > best_gain:
            best_gain, best_prefix = cum_gain, len(moves)

    for v in moves[best_prefix:]:  # roll back past the best prefix
        side = assignment[v]
        assignment[v] = 1 - side
        if graph.kind(v) == DATA:
            data_counts[side] -= 1
            data_counts[1 - side] += 1
    return best_gain


def _check_imbalance(graph, assignment) -> int:
    lo = graph.n_data
    section = assignment[lo:]
    return int(len(section) - 2 * sum(section))  # side0 - side1


def _select_move(graph, buckets, assignment, data_counts, balance_tol,
                 check_imbalance, adj):
    """Highest-gain admissible vertex; ties prefer improving check balance,
    then the lowest index."""
    for _gain, bucket in buckets.candidates_by_gain():
        best = None
        for v in sorted(bucket):
            side = assignment[v]
            if graph.kind(v) == DATA:
                after = abs((data_counts[side] - 1) - (data_counts[1 - side] + 1))
                if after > balance_tol:
                    continue
                key = (1, v)  # neutral for check balance
            else:
                sign = 1 if side == 0 else -1
                before = abs(check_imbalance)
                after = abs(check_imbalance - 2 * sign)
                key = (0 if after < before else (1 if after == before else 2), v)
            if best is None or key < best[0]:
                best = (key, v)
        if best is not None:
            return best[1]
    return None


def bipartition(
    graph: TannerGraph,
    balance_tol: int = 2,
    restarts: int = 64,
    seed: int = 0,
    nodes: int = 2,
) -> Partition:
    """Best-of-restarts balanced min-cut assignment of all Tanner vertices.

    Balance is enforced on data vertices (|D1 - D2| <= balance_tol); check
    balance is a soft tie-break.  Deterministic given ``seed``: restart r uses
    its own generator, so growing ``restarts`` never worsens the result.
    """
    if nodes != 2:
        raise PartitionError(f"only 2-way partitioning is implemented (got {nodes})")
    if graph.n_vertices == 0:
        raise PartitionError("empty graph")
    if balance_tol < 0 or balance_tol < graph.n_data % 2:
        raise PartitionError(
            f"balance tolerance {balance_tol} infeasible for {graph.n_data} data vertices"
        )
    adj = graph.adjacency()
    best_cut, best_assignment = None, None
    for r in range(max(1, restarts)):
        rng = np.random.default_rng([seed, r])
        assignment = _random_balanced_init(graph, rng)
        data_counts = list(Partition(tuple(assignment), graph.n_data,
                                     graph.n_xchecks, graph.n_zchecks).data_counts)
        while _fm_pass(graph, adj, assignment, balance_tol, data_counts) > 0:
            pass
        cut = _cut_size(graph, assignment)
        if best_cut is None or cut < best_cut:
            best_cut, best_assignment = cut, tuple(assignment)
    return Partition(best_assignment, graph.n_data, graph.n_xchecks, graph.n_zchecks)


def _random_balanced_init(graph, rng) -> list[int]:
    assignment = [0] * graph.n_vertices
    half = graph.n_data // 2
    ones = rng.permutation(graph.n_data)[:half]
    for v in ones:
        assignment[v] = 1
    n_checks = graph.n_xchecks + graph.n_zchecks
    ones = rng.permutation(n_checks)[: n_checks // 2]
    for v in ones:
        assignment[graph.n_data + v] = 1
    return assignment


def _cut_size(graph, assignment) -> int:
    return sum(1 for c, d in graph.edges if assignment[c] != assignment[d])


# ---------------------------------------------------------------------------
# Import / export

_KINDS = (DATA, XCHECK, ZCHECK)


def export_partition(partition: Partition, file) -> None:
    """Write ``vertex_kind index node`` lines."""
    own = isinstance(file, str)
    fh = open(file, "w") if own else file
    try:
        counts = {DATA: partition.n_data, XCHECK: partition.n_xchecks,
                  ZCHECK: partition.n_zchecks}
        v = 0
        for kind in _KINDS:
            for i in range(counts[kind]):
                fh.write(f"{kind} {i} {partition.assignment[v]}\n")
                v += 1
    finally:
        if own:
            fh.close()


def import_partition(file, graph: TannerGraph | None = None) -> Partition:
    """Parse a partition file, validating completeness and uniqueness.

    With ``graph`` supplied, vertex counts must match it exactly; otherwise
    counts are inferred from the file (indices must be contiguous from 0).
    """
    if isinstance(file, str):
        with open(file) as fh:
            text = fh.read()
    else:
        text = file.read()
    seen: dict[str, dict[int, int]] = {k: {} for k in _KINDS}
    for lineno, line in enumerate(StringIO(text), start=1):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 3:
            raise PartitionError(f"line {lineno}: expected 'kind index node'")
        kind, idx_s, node_s = parts
        if kind not in _KINDS:
            raise PartitionError(f"line {lineno}: unknown kind {kind!r}")
        try:
            idx, node = int(idx_s), int(node_s)
        except ValueError:
            raise PartitionError(f"line {lineno}: non-integer field")
        if node not in (0, 1):
            raise PartitionError(f"line {lineno}: node must be 0 or 1")
        if idx in seen[kind]:
            raise PartitionError(f"line {lineno}: {kind} {idx} assigned twice")
        seen[kind][idx] = node
    if graph is not None:
        expect = {DATA: graph.n_data, XCHECK: graph.n_xchecks, ZCHECK: graph.n_zchecks}
    else:
        expect = {k: (max(v) + 1 if v else 0) for k, v in seen.items()}
    assignment = []
    for kind in _KINDS:
        for i in range(expect[kind]):
            if i not in seen[kind]:
                raise PartitionError(f"missing vertex: {kind} {i}")
            assignment.append(seen[kind][i])
        extra = set(seen[kind]) - set(range(expect[kind]))
        if extra:
            raise PartitionError(f"unexpected {kind} indices {sorted(extra)}")
    return Partition(tuple(assignment), expect[DATA], expect[XCHECK], expect[ZCHECK])
