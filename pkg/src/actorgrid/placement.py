"""Silo placement by balanced graph partitioning.

Actors are assigned to k simulated silos so that the total weight of
relationship edges crossing silos is small while silo sizes stay within a
balance tolerance. The heuristic is greedy BFS-region seeding followed by
move/swap local search (a Kernighan-Lin flavor): a candidate move or swap is
accepted only if it strictly decreases the cut and keeps balance, so
refinement terminates. An exhaustive oracle for up to 12 nodes backs the
quality tests, and :func:`rebalance` folds graph growth into an existing
assignment under a move budget.

Only the edge types named in ``type_filter`` count toward the cut: not every
relationship implies communication, so placement looks at the communication-
affine subset (e.g. feeds/measures) of the relationship graph.
"""

from __future__ import annotations

import itertools
import math
import random
from dataclasses import dataclass, field
from typing import Iterable

from . import telemetry
from .errors import InfeasibleBalance, TooLarge, UncoveredNode
from .graph import GraphView
from .ids import ActorId

BRUTE_FORCE_MAX_NODES = 12


@dataclass(frozen=True)
class Assignment:
    """Total map actor -> silo over the placeable nodes of one view."""

    silos: dict[ActorId, int]
    k: int

    def silo_of(self, id: ActorId) -> int:
        return self.silos[id]

    def sizes(self) -> list[int]:
        counts = [0] * self.k
        for silo in self.silos.values():
            counts[silo] += 1
        return counts

    def to_text(self) -> str:
        lines = [f"{id}\t{self.silos[id]}" for id in sorted(self.silos)]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "Assignment":
        silos: dict[ActorId, int] = {}
        for line in text.splitlines():
            if not line.strip():
                continue
            id_text, silo_text = line.split("\t")
            silos[ActorId.parse(id_text)] = int(silo_text)
        k = max(silos.values()) + 1 if silos else 1
        return cls(silos, k)


@dataclass
class CutReport:
    cut_weight: float
    silo_sizes: list[int]
    objective_trace: list[float] = field(default_factory=list)

    def to_text(self) -> str:
        lines = [
            f"cut_weight = {self.cut_weight!r}",
            f"silo_sizes = {','.join(str(s) for s in self.silo_sizes)}",
            "objective_trace = " + ",".join(repr(v) for v in self.objective_trace),
        ]
        return "\n".join(lines) + "\n"


def _adjacency(
    view: GraphView, type_filter: Iterable[str] | None
) -> dict[ActorId, dict[ActorId, float]]:
    """Undirected weighted adjacency over the filtered edges (parallel edges merge)."""
    adj: dict[ActorId, dict[ActorId, float]] = {n: {} for n in view.nodes}
    for edge in view.filtered_edges(type_filter):
        if edge.src == edge.dst:
            continue
        adj[edge.src][edge.dst] = adj[edge.src].get(edge.dst, 0.0) + edge.weight
        adj[edge.dst][edge.src] = adj[edge.dst].get(edge.src, 0.0) + edge.weight
    return adj


def _size_cap(n: int, k: int, balance_tol: float) -> int:
    return int(math.floor(math.ceil(n / k) * (1.0 + balance_tol) + 1e-9))


def cut_weight(
    view: GraphView,
    assignment: Assignment,
    type_filter: Iterable[str] | None = None,
) -> float:
    """Total weight of filtered edges whose endpoints sit in different silos."""
    telemetry.record("placement.cut_weight")
    for node in view.nodes:
        if node not in assignment.silos:
            raise UncoveredNode(f"assignment misses {node}")
    total = 0.0
    for edge in view.filtered_edges(type_filter):
        if assignment.silos[edge.src] != assignment.silos[edge.dst]:
            total += edge.weight
    return total


def _cut_of(adj: dict[ActorId, dict[ActorId, float]], silos: dict[ActorId, int]) -> float:
    total = 0.0
    for node, neighbors in adj.items():
        for other, weight in neighbors.items():
            if node < other and silos[node] != silos[other]:
                total += weight
    return total


def partition(
    view: GraphView,
    k: int,
    type_filter: Iterable[str] | None = None,
    balance_tol: float = 0.1,
    seed: int = 0,
    restarts: int = 6,
) -> tuple[Assignment, CutReport]:
    """Greedy-seeded, local-search-refined balanced partition.

    Deterministic for a given seed: restarts draw their region seeds from one
    master generator and the best (lowest-cut) result wins, first found.
    """
    telemetry.record("placement.partition")
    nodes = sorted(view.nodes)
    n = len(nodes)
    if k < 1:
        raise ValueError("k must be >= 1")
    if k > n:
        raise InfeasibleBalance(f"cannot split {n} nodes into {k} nonempty silos")
    adj = _adjacency(view, type_filter)
    cap = _size_cap(n, k, balance_tol)
    if cap * k < n:
        raise InfeasibleBalance(f"cap {cap} x {k} silos cannot hold {n} nodes")
    if k == 1:
        silos = {node: 0 for node in nodes}
        return Assignment(silos, 1), CutReport(0.0, [n], [0.0])

    # Restart seeds are drawn up front so candidate partitions could be
    # evaluated in parallel without changing the result.
    master = random.Random(seed)
    restart_seeds = [master.randrange(2**63) for _ in range(max(1, restarts))]
    best: tuple[float, dict[ActorId, int], list[float]] | None = None
    for restart_seed in restart_seeds:
        rng = random.Random(restart_seed)
        silos = _greedy_seed(nodes, adj, k, cap, rng)
        cut, trace = _refine(adj, silos, k, cap)
        if best is None or cut < best[0]:
            best = (cut, silos, trace)
    cut, silos, trace = best
    assignment = Assignment(silos, k)
    return assignment, CutReport(cut, assignment.sizes(), trace)


def _greedy_seed(
    nodes: list[ActorId],
    adj: dict[ActorId, dict[ActorId, float]],
    k: int,
    cap: int,
    rng: random.Random,
) -> dict[ActorId, int]:
    silos: dict[ActorId, int] = {}
    sizes = [0] * k
    for silo, seed_node in enumerate(rng.sample(nodes, k)):
        silos[seed_node] = silo
        sizes[silo] = 1
    # Grow regions round-robin along the strongest attachment; isolated
    # leftovers go to the least-loaded silo.
    remaining = [n for n in nodes if n not in silos]
    while remaining:
        progressed = False
        for silo in range(k):
            if sizes[silo] >= cap:
                continue
            best_node = None
            best_gain = -1.0
            for node in remaining:
                gain = sum(w for nb, w in adj[node].items() if silos.get(nb) == silo)
                if gain > best_gain or (gain == best_gain and (best_node is None or node < best_node)):
                    best_gain = gain
                    best_node = node
            if best_node is None:
                continue
            silos[best_node] = silo
            sizes[silo] += 1
            remaining.remove(best_node)
            progressed = True
            if not remaining:
                break
        if not progressed:
            node = remaining.pop(0)
            silo = min(range(k), key=lambda s: (sizes[s], s))
            silos[node] = silo
            sizes[silo] += 1
    return silos


def _refine(
    adj: dict[ActorId, dict[ActorId, float]],
    silos: dict[ActorId, int],
    k: int,
    cap: int,
) -> tuple[float, list[float]]:
    nodes = sorted(adj)
    sizes = [0] * k
    for silo in silos.values():
        sizes[silo] += 1
    cut = _cut_of(adj, silos)
    trace = [cut]
    while True:
        # Single-node moves are cheap; scan pairwise swaps only once moves
        # are exhausted (they matter mostly under tight balance).
        move = _best_move(adj, silos, sizes, nodes, k, cap)
        if move is not None:
            gain, node, silo = move
            sizes[silos[node]] -= 1
            silos[node] = silo
            sizes[silo] += 1
            cut -= gain
            trace.append(cut)
            continue
        swap = _best_swap(adj, silos, nodes)
        if swap is None:
            break
        gain, a, b = swap
        silos[a], silos[b] = silos[b], silos[a]
        cut -= gain
        trace.append(cut)
    return cut, trace


def _attachment(adj, silos, node, silo) -> float:
    return sum(w for nb, w in adj[node].items() if silos[nb] == silo)


def _best_move(adj, silos, sizes, nodes, k, cap):
    best = None
    for node in nodes:
        home = silos[node]
        if sizes[home] <= 1:
            continue  # never empty a silo
        internal = _attachment(adj, silos, node, home)
        for silo in range(k):
            if silo == home or sizes[silo] >= cap:
                continue
            gain = _attachment(adj, silos, node, silo) - internal
            if gain > 1e-12 and (best is None or gain > best[0]):
                best = (gain, node, silo)
    return best


def _best_swap(adj, silos, nodes):
    best = None
    for i, a in enumerate(nodes):
        for b in nodes[i + 1 :]:
            if silos[a] == silos[b]:
                continue
            gain = (
                _attachment(adj, silos, a, silos[b])
                - _attachment(adj, silos, a, silos[a])
                + _attachment(adj, silos, b, silos[a])
                - _attachment(adj, silos, b, silos[b])
                - 2 * adj[a].get(b, 0.0)
            )
            if gain > 1e-12 and (best is None or gain > best[0]):
                best = (gain, a, b)
    return best


def brute_force_partition(
    view: GraphView,
    k: int,
    type_filter: Iterable[str] | None = None,
    balance_tol: float = 0.0,
) -> tuple[Assignment, float]:
    """Exhaustive minimum-cut balanced partition; test oracle for n <= 12.

    Ties break toward the lexicographically smallest assignment vector over
    nodes in sorted order.
    """
    telemetry.record("placement.brute_force_partition")
    nodes = sorted(view.nodes)
    n = len(nodes)
    if n > BRUTE_FORCE_MAX_NODES:
        raise TooLarge(f"{n} nodes exceeds the exhaustive oracle limit of 12")
    if k > n:
        raise InfeasibleBalance(f"cannot split {n} nodes into {k} nonempty silos")
    adj = _adjacency(view, type_filter)
    cap = _size_cap(n, k, balance_tol)
    best: tuple[float, tuple[int, ...]] | None = None
    for vector in itertools.product(range(k), repeat=n):
        sizes = [0] * k
        for silo in vector:
            sizes[silo] += 1
        if max(sizes) > cap or min(sizes) == 0:
            continue
        silos = dict(zip(nodes, vector))
        cut = _cut_of(adj, silos)
        if best is None or cut < best[0]:
            best = (cut, vector)
    if best is None:
        raise InfeasibleBalance("no balanced assignment exists")
    cut, vector = best
    return Assignment(dict(zip(nodes, vector)), k), cut


def rebalance(
    view: GraphView,
    assignment: Assignment,
    move_budget: int,
    type_filter: Iterable[str] | None = None,
    balance_tol: float = 0.1,
) -> tuple[Assignment, CutReport]:
    """Fold graph growth into an existing assignment.

    Nodes new to the view seed onto the least-loaded silo; nodes gone from
    the view are dropped. Then at most ``move_budget`` single-node moves are
    applied, each strictly reducing the cut while keeping balance.
    """
    telemetry.record("placement.rebalance")
    k = assignment.k
    nodes = sorted(view.nodes)
    silos = {n: s for n, s in assignment.silos.items() if n in set(nodes)}
    sizes = [0] * k
    for silo in silos.values():
        sizes[silo] += 1
    for node in nodes:
        if node not in silos:
            silo = min(range(k), key=lambda s: (sizes[s], s))
            silos[node] = silo
            sizes[silo] += 1
    cap = _size_cap(len(nodes), k, balance_tol)
    if cap * k < len(nodes):
        raise InfeasibleBalance(f"cap {cap} x {k} silos cannot hold {len(nodes)} nodes")
    adj = _adjacency(view, type_filter)
    cut = _cut_of(adj, silos)
    trace = [cut]
    for _ in range(max(0, move_budget)):
        move = _best_move(adj, silos, sizes, nodes, k, cap)
        if move is None:
            break
        gain, node, silo = move
        sizes[silos[node]] -= 1
        silos[node] = silo
        sizes[silo] += 1
        cut -= gain
        trace.append(cut)
    result = Assignment(silos, k)
    return result, CutReport(cut, result.sizes(), trace)


def random_balanced_assignment(nodes: Iterable[ActorId], k: int, seed: int) -> Assignment:
    """Uniformly shuffled chunk assignment; silo sizes differ by at most one."""
    ordered = sorted(nodes)
    rng = random.Random(seed)
    rng.shuffle(ordered)
    silos: dict[ActorId, int] = {}
    for index, node in enumerate(ordered):
        silos[node] = index % k
    return Assignment(silos, k)
