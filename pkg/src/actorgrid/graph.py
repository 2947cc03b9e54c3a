"""Temporal relationship graph over all actors.

Nodes are actors; edges are typed, weighted relationships with half-open
validity intervals ``[valid_from, valid_to)``. Nothing is ever deleted:
ending an edge closes its interval, so any past topology can be recovered by
querying "as of" a timestamp. Every mutation is appended to an event log,
and a snapshot at time t equals the replay of all events up to t.

The registry also carries the subscription index used for change
notification and a nearest-provider search used for service discovery.
"""

from __future__ import annotations

import fnmatch
import json
import math
import pickle
from collections import deque
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable

from . import telemetry
from .errors import (
    DuplicateId,
    InvalidInterval,
    MissingGeo,
    NoOpenEdge,
    OverlappingValidity,
    UnknownActor,
)
from .ids import ActorId
from .recordio import RecordLog

EARTH_RADIUS_KM = 6371.0


def haversine_km(a: tuple[float, float], b: tuple[float, float]) -> float:
    """Great-circle distance between two (lat, lon) points in degrees."""
    lat1, lon1 = (math.radians(x) for x in a)
    lat2, lon2 = (math.radians(x) for x in b)
    dlat = lat2 - lat1
    dlon = lon2 - lon1
    h = math.sin(dlat / 2) ** 2 + math.cos(lat1) * math.cos(lat2) * math.sin(dlon / 2) ** 2
    return 2 * EARTH_RADIUS_KM * math.asin(math.sqrt(h))


@dataclass
class NodeRecord:
    id: ActorId
    kind: str
    attrs: dict[str, Any] = field(default_factory=dict)
    created_at: int = 0


@dataclass
class EdgeRecord:
    src: ActorId
    dst: ActorId
    type: str
    weight: float
    valid_from: int
    valid_to: int | None = None  # None = open

    def valid_at(self, t: int) -> bool:
        return self.valid_from <= t and (self.valid_to is None or t < self.valid_to)


@dataclass(frozen=True)
class Subscription:
    subscriber: ActorId
    publisher: ActorId
    key: str


@dataclass(frozen=True)
class EdgeView:
    src: ActorId
    dst: ActorId
    type: str
    weight: float


@dataclass(frozen=True)
class GraphView:
    """Frozen set of nodes and edges valid at one instant."""

    at: int
    nodes: tuple[ActorId, ...]
    kinds: dict[ActorId, str]
    attrs: dict[ActorId, dict[str, Any]]
    edges: tuple[EdgeView, ...]

    def filtered_edges(self, type_filter: Iterable[str] | None = None) -> tuple[EdgeView, ...]:
        if type_filter is None:
            return self.edges
        allowed = set(type_filter)
        return tuple(e for e in self.edges if e.type in allowed)

    def out_neighbors(self, node: ActorId, type_filter: Iterable[str] | None = None) -> list[ActorId]:
        return sorted(e.dst for e in self.filtered_edges(type_filter) if e.src == node)

    def induced(self, keep: Iterable[ActorId]) -> "GraphView":
        """Subgraph view over ``keep``, preserving only internal edges."""
        kept = set(keep)
        return GraphView(
            at=self.at,
            nodes=tuple(n for n in self.nodes if n in kept),
            kinds={n: k for n, k in self.kinds.items() if n in kept},
            attrs={n: dict(a) for n, a in self.attrs.items() if n in kept},
            edges=tuple(e for e in self.edges if e.src in kept and e.dst in kept),
        )


class GraphRegistry:
    """In-memory temporal graph with a persisted mutation event log."""

    def __init__(self, log: RecordLog | None = None):
        self._nodes: dict[ActorId, NodeRecord] = {}
        self._attr_events: dict[ActorId, list[tuple[int, str, Any]]] = {}
        self._out: dict[tuple[ActorId, str], list[EdgeRecord]] = {}
        self._in: dict[tuple[ActorId, str], list[EdgeRecord]] = {}
        self._open: dict[tuple[ActorId, ActorId, str], EdgeRecord] = {}
        self._subs: dict[ActorId, dict[str, set[ActorId]]] = {}
        self.events: list[tuple] = []
        self.log = log

    # -- nodes ----------------------------------------------------------------

    def add_node(self, id: ActorId, kind: str, attrs: dict[str, Any] | None = None, at: int = 0) -> NodeRecord:
        if id in self._nodes:
            raise DuplicateId(f"node {id} already registered")
        node = NodeRecord(id=id, kind=kind, attrs=dict(attrs or {}), created_at=at)
        self._nodes[id] = node
        self._attr_events[id] = [(at, k, v) for k, v in sorted(node.attrs.items())]
        self._record(("add_node", at, str(id), kind, node.attrs))
        return node

    def node(self, id: ActorId) -> NodeRecord:
        try:
            return self._nodes[id]
        except KeyError:
            raise UnknownActor(f"unknown actor {id}") from None

    def has_node(self, id: ActorId) -> bool:
        return id in self._nodes

    def nodes_of_kind(self, kind: str) -> list[NodeRecord]:
        return sorted((n for n in self._nodes.values() if n.kind == kind), key=lambda n: n.id)

    def set_attr(self, id: ActorId, key: str, value: Any, at: int) -> None:
        node = self.node(id)
        node.attrs[key] = value
        self._attr_events[id].append((at, key, value))
        self._record(("set_attr", at, str(id), key, value))

    # -- edges ----------------------------------------------------------------

    def add_edge(
        self, src: ActorId, dst: ActorId, type: str, weight: float, valid_from: int
    ) -> EdgeRecord:
        telemetry.record("graph.add_edge")
        self.node(src)
        self.node(dst)
        triple = (src, dst, type)
        if triple in self._open:
            raise OverlappingValidity(f"open {type} edge {src} -> {dst} already exists")
        for edge in self._out.get((src, type), []):
            if edge.dst == dst and edge.valid_to is not None and edge.valid_to > valid_from:
                raise OverlappingValidity(
                    f"{type} edge {src} -> {dst} would overlap [{edge.valid_from}, {edge.valid_to})"
                )
        edge = EdgeRecord(src, dst, type, float(weight), valid_from)
        self._out.setdefault((src, type), []).append(edge)
        self._in.setdefault((dst, type), []).append(edge)
        self._open[triple] = edge
        self._record(("add_edge", valid_from, str(src), str(dst), type, float(weight)))
        return edge

    def end_edge(self, src: ActorId, dst: ActorId, type: str, valid_to: int) -> EdgeRecord:
        telemetry.record("graph.end_edge")
        edge = self._open.get((src, dst, type))
        if edge is None:
            raise NoOpenEdge(f"no open {type} edge {src} -> {dst}")
        if valid_to <= edge.valid_from:
            raise InvalidInterval(
                f"valid_to {valid_to} must exceed valid_from {edge.valid_from}"
            )
        edge.valid_to = valid_to
        del self._open[(src, dst, type)]
        self._record(("end_edge", valid_to, str(src), str(dst), type))
        return edge

    def open_edge(self, src: ActorId, dst: ActorId, type: str) -> EdgeRecord | None:
        return self._open.get((src, dst, type))

    def apply_batch(self, ops: list[tuple]) -> None:
        """Apply graph mutations atomically: on any failure, undo the prefix."""
        undo: list[Callable[[], None]] = []
        try:
            for op in ops:
                verb = op[0]
                if verb == "add_edge":
                    _, src, dst, type_, weight, valid_from = op
                    edge = self.add_edge(src, dst, type_, weight, valid_from)
                    undo.append(lambda e=edge: self._retract_add(e))
                elif verb == "end_edge":
                    _, src, dst, type_, valid_to = op
                    edge = self.end_edge(src, dst, type_, valid_to)
                    undo.append(lambda e=edge: self._retract_end(e))
                elif verb == "set_attr":
                    _, id_, key, value, at = op
                    old = self.node(id_).attrs.get(key)
                    had = key in self.node(id_).attrs
                    self.set_attr(id_, key, value, at)
                    undo.append(lambda i=id_, k=key, o=old, h=had: self._retract_attr(i, k, o, h))
                else:
                    raise ValueError(f"unknown graph op {verb!r}")
        except Exception:
            for action in reversed(undo):
                action()
            raise

    # -- queries ----------------------------------------------------------------

    def neighbors(self, node: ActorId, type: str, at: int) -> list[ActorId]:
        telemetry.record("graph.neighbors")
        self.node(node)
        return sorted(e.dst for e in self._out.get((node, type), []) if e.valid_at(at))

    def in_neighbors(self, node: ActorId, type: str, at: int) -> list[ActorId]:
        self.node(node)
        return sorted(e.src for e in self._in.get((node, type), []) if e.valid_at(at))

    def traverse(
        self,
        origin: ActorId,
        at: int,
        edge_types: Iterable[str] | None = None,
        predicate: Callable[[EdgeRecord], bool] | None = None,
    ) -> frozenset[ActorId]:
        """Breadth-first closure (including the origin) over edges valid at
        ``at`` whose type passes ``edge_types`` and whose record passes
        ``predicate``."""
        telemetry.record("graph.traverse")
        self.node(origin)
        types = None if edge_types is None else set(edge_types)
        seen = {origin}
        frontier = deque([origin])
        while frontier:
            current = frontier.popleft()
            candidates: list[EdgeRecord] = []
            if types is None:
                for (src, _type), edges in self._out.items():
                    if src == current:
                        candidates.extend(edges)
            else:
                for type_ in types:
                    candidates.extend(self._out.get((current, type_), []))
            for edge in sorted(candidates, key=lambda e: (e.dst, e.type)):
                if not edge.valid_at(at):
                    continue
                if predicate is not None and not predicate(edge):
                    continue
                if edge.dst not in seen:
                    seen.add(edge.dst)
                    frontier.append(edge.dst)
        return frozenset(seen)

    def find_service(
        self,
        origin: ActorId,
        kind: str,
        predicate: Callable[[dict[str, Any]], bool] | None,
        at: int,
    ) -> ActorId | None:
        """Nearest node of ``kind`` (by great-circle distance) satisfying
        ``predicate`` and existing at ``at``; ties break on smallest id."""
        telemetry.record("graph.find_service")
        origin_node = self.node(origin)
        origin_geo = origin_node.attrs.get("geo")
        if origin_geo is None:
            raise MissingGeo(f"{origin} has no geo attrs for distance ranking")
        best: tuple[float, ActorId] | None = None
        for node in self.nodes_of_kind(kind):
            if node.created_at > at:
                continue
            if predicate is not None and not predicate(node.attrs):
                continue
            geo = node.attrs.get("geo")
            if geo is None:
                continue
            candidate = (haversine_km(origin_geo, geo), node.id)
            if best is None or candidate < best:
                best = candidate
        return best[1] if best else None

    def snapshot_at(self, t: int) -> GraphView:
        telemetry.record("graph.snapshot_at")
        nodes = sorted(n.id for n in self._nodes.values() if n.created_at <= t)
        node_set = set(nodes)
        attrs: dict[ActorId, dict[str, Any]] = {}
        for id in nodes:
            current: dict[str, Any] = {}
            for at, key, value in self._attr_events[id]:
                if at <= t:
                    current[key] = value
            attrs[id] = current
        edges = []
        for edge_list in self._out.values():
            for e in edge_list:
                if e.valid_at(t) and e.src in node_set and e.dst in node_set:
                    edges.append(EdgeView(e.src, e.dst, e.type, e.weight))
        edges.sort(key=lambda e: (e.src, e.dst, e.type))
        return GraphView(
            at=t,
            nodes=tuple(nodes),
            kinds={id: self._nodes[id].kind for id in nodes},
            attrs=attrs,
            edges=tuple(edges),
        )

    # -- subscriptions -----------------------------------------------------------

    def subscribe(self, subscriber: ActorId, publisher: ActorId, key: str) -> Subscription:
        telemetry.record("graph.subscribe")
        self.node(subscriber)
        self.node(publisher)
        self._subs.setdefault(publisher, {}).setdefault(key, set()).add(subscriber)
        return Subscription(subscriber, publisher, key)

    def unsubscribe(self, subscriber: ActorId, publisher: ActorId, key: str) -> None:
        self._subs.get(publisher, {}).get(key, set()).discard(subscriber)

    def subscribers_of(self, publisher: ActorId, key: str) -> list[ActorId]:
        self.node(publisher)
        matched: set[ActorId] = set()
        for pattern, subscribers in self._subs.get(publisher, {}).items():
            if fnmatch.fnmatchcase(key, pattern):
                matched.update(subscribers)
        return sorted(matched)

    # -- persistence ---------------------------------------------------------------

    def _record(self, event: tuple) -> None:
        self.events.append(event)
        if self.log is not None:
            self.log.append(pickle.dumps(event, protocol=4))

    def _retract_add(self, edge: EdgeRecord) -> None:
        self._out[(edge.src, edge.type)].remove(edge)
        self._in[(edge.dst, edge.type)].remove(edge)
        del self._open[(edge.src, edge.dst, edge.type)]
        self.events.pop()

    def _retract_end(self, edge: EdgeRecord) -> None:
        edge.valid_to = None
        self._open[(edge.src, edge.dst, edge.type)] = edge
        self.events.pop()

    def _retract_attr(self, id: ActorId, key: str, old: Any, had: bool) -> None:
        node = self._nodes[id]
        if had:
            node.attrs[key] = old
        else:
            del node.attrs[key]
        self._attr_events[id].pop()
        self.events.pop()


# -- ingestion file format --------------------------------------------------

def _format_attr(value: Any) -> str:
    if isinstance(value, tuple):
        return ",".join(repr(float(v)) for v in value)
    return json.dumps(value) if isinstance(value, str) else repr(value)


def _parse_attr(text: str) -> Any:
    if "," in text:
        return tuple(float(part) for part in text.split(","))
    if text.startswith('"'):
        return json.loads(text)
    try:
        value = float(text)
        return int(value) if value.is_integer() and "." not in text else value
    except ValueError:
        return text


def dump_text(registry: GraphRegistry) -> str:
    """Serialize nodes and open edges as line-based ingestion records."""
    lines = []
    for node in sorted(registry._nodes.values(), key=lambda n: n.id):
        attr_text = " ".join(
            f"{k}={_format_attr(v)}" for k, v in sorted(node.attrs.items())
        )
        lines.append(f"node {node.kind} {node.id.local_id} {attr_text}".rstrip())
    for triple in sorted(registry._open, key=lambda t: (t[0], t[1], t[2])):
        edge = registry._open[triple]
        lines.append(
            f"edge {edge.type} {edge.src} {edge.dst} {edge.weight!r} {edge.valid_from}"
        )
    return "\n".join(lines) + "\n"


def load_text(text: str, registry: GraphRegistry | None = None) -> GraphRegistry:
    """Build a registry from ingestion records (inverse of :func:`dump_text`)."""
    registry = registry if registry is not None else GraphRegistry()
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if parts[0] == "node":
            _, kind, local_id, *attr_parts = parts
            attrs = {}
            for part in attr_parts:
                key, _, raw = part.partition("=")
                attrs[key] = _parse_attr(raw)
            registry.add_node(ActorId(kind, local_id), kind, attrs)
        elif parts[0] == "edge":
            _, type_, src, dst, weight, valid_from = parts
            registry.add_edge(
                ActorId.parse(src), ActorId.parse(dst), type_, float(weight), int(valid_from)
            )
        else:
            raise ValueError(f"unrecognized ingestion line: {line!r}")
    return registry
