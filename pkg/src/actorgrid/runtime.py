"""Virtual actor runtime.

Each actor is a synchronized digital representation of one physical entity:
isolated key-value state, a kind-specific behavior table, and message-only
interaction. Handlers are pure functions of (state, payload, read-only
views); they declare their effects through a :class:`HandlerContext` and the
runtime applies the collected :class:`EffectSet` atomically after the handler
returns, so a failed handler leaves no partial updates behind.

Delivery is exactly-once and FIFO per (src, dst) pair, driven by a single
deterministic event loop: pending items are processed in (time, seq) order
with ties broken by (src, dst). Idle actors are snapshotted to an
append-only checksummed store and transparently reactivated when the next
envelope arrives.
"""

from __future__ import annotations

import heapq
import pickle
from dataclasses import dataclass, field
from enum import Enum
from types import MappingProxyType
from typing import Any, Callable, Mapping

from . import telemetry
from .clock import HOUR, VirtualClock
from .context import AppendOp, PutOp, RelevancePolicy, SeriesAddOp
from .errors import (
    DuplicateId,
    PersistenceFailure,
    UnhandledMessage,
    UnknownActor,
    UnknownKind,
)
from .graph import GraphRegistry
from .ids import EXTERNAL, ActorId
from .recordio import RecordLog

Handler = Callable[["HandlerContext", Any], None]


class ActorStatus(Enum):
    ACTIVE = "active"
    DEACTIVATED = "deactivated"


@dataclass(frozen=True)
class BehaviorTable:
    """Kind-specific dispatch table: payload type -> handler.

    One handler per message type replaces conditionals on entity kind;
    payload types without a handler raise :class:`UnhandledMessage`.
    """

    kind: str
    handlers: Mapping[type, Handler]


@dataclass
class ActorRecord:
    id: ActorId
    behavior: BehaviorTable
    state: dict[str, Any] | None
    status: ActorStatus = ActorStatus.ACTIVE
    last_message_time: int = 0


@dataclass(frozen=True)
class Envelope:
    src: ActorId
    dst: ActorId
    payload: Any
    send_time: int
    seq: int


@dataclass(frozen=True)
class DeliveryReceipt:
    seq: int
    send_time: int
    latency: int


@dataclass(frozen=True)
class SnapshotHandle:
    actor: ActorId
    offset: int


@dataclass(frozen=True)
class Publication:
    key: str
    old_value: Any
    new_value: Any


@dataclass
class EffectSet:
    """Everything a single dispatch wants to change, applied atomically."""

    state_updates: dict[str, Any] = field(default_factory=dict)
    sends: list[tuple[ActorId, Any]] = field(default_factory=list)
    context_ops: list[PutOp | AppendOp | SeriesAddOp] = field(default_factory=list)
    graph_ops: list[tuple] = field(default_factory=list)
    publications: list[Publication] = field(default_factory=list)
    subscribe_ops: list[tuple[str, ActorId, str]] = field(default_factory=list)


class HandlerContext:
    """What a handler may see and declare.

    Reads: own state (read-only mapping), the graph registry's query surface,
    own context values, and the virtual clock. Writes: accumulated effect
    declarations only; nothing is applied until the handler returns.
    """

    def __init__(self, runtime: "ActorRuntime", record: ActorRecord, envelope: Envelope):
        self._runtime = runtime
        self._record = record
        self.envelope = envelope
        self.effects = EffectSet()

    @property
    def actor_id(self) -> ActorId:
        return self._record.id

    @property
    def state(self) -> Mapping[str, Any]:
        return MappingProxyType(self._record.state)

    @property
    def now(self) -> int:
        return self._runtime.clock.now

    @property
    def graph(self) -> GraphRegistry:
        return self._runtime.graph

    def own_value(self, key: str, at: int | None = None) -> Any:
        store = self._runtime.context_store
        record = store.get(self._record.id, key, as_of=at)
        return store.read_value(record)

    # -- effect declarations -------------------------------------------------

    def set_state(self, key: str, value: Any) -> None:
        self.effects.state_updates[key] = value

    def send(self, dst: ActorId, payload: Any) -> None:
        self.effects.sends.append((dst, payload))

    def put_context(
        self,
        key: str,
        value: Any,
        timestamp: int,
        policy: RelevancePolicy,
        unit: str | None = None,
    ) -> None:
        self.effects.context_ops.append(PutOp(key, value, unit, timestamp, policy))

    def append_sample(
        self,
        key: str,
        value: float,
        unit: str,
        timestamp: int,
        policy: RelevancePolicy,
        resolution: int | None = None,
    ) -> None:
        self.effects.context_ops.append(
            AppendOp(key, value, unit, timestamp, policy, resolution or HOUR)
        )

    def series_add(self, key: str, timestamp: int, delta: float) -> None:
        self.effects.context_ops.append(SeriesAddOp(key, timestamp, delta))

    def add_edge(self, src: ActorId, dst: ActorId, type: str, weight: float, valid_from: int) -> None:
        self.effects.graph_ops.append(("add_edge", src, dst, type, weight, valid_from))

    def end_edge(self, src: ActorId, dst: ActorId, type: str, valid_to: int) -> None:
        self.effects.graph_ops.append(("end_edge", src, dst, type, valid_to))

    def set_node_attr(self, id: ActorId, key: str, value: Any) -> None:
        self.effects.graph_ops.append(("set_attr", id, key, value, self.now))

    def publish(self, key: str, old_value: Any, new_value: Any) -> None:
        self.effects.publications.append(Publication(key, old_value, new_value))

    def subscribe(self, publisher: ActorId, key: str) -> None:
        self.effects.subscribe_ops.append(("subscribe", publisher, key))

    def unsubscribe(self, publisher: ActorId, key: str) -> None:
        self.effects.subscribe_ops.append(("unsubscribe", publisher, key))


class ActorRuntime:
    """Hosts actors over a deterministic sequential scheduler."""

    def __init__(
        self,
        clock: VirtualClock | None = None,
        *,
        graph: GraphRegistry | None = None,
        snapshot_log: RecordLog | None = None,
    ):
        self.clock = clock if clock is not None else VirtualClock()
        self.graph = graph if graph is not None else GraphRegistry()
        self.snapshots = snapshot_log if snapshot_log is not None else RecordLog()
        self.context_store = None  # wired by the world
        self.publication_sink: Callable[[ActorId, Publication, int], None] | None = None
        self.cost_model = None
        self.assignment: dict[ActorId, int] | None = None

        self._behaviors: dict[str, BehaviorTable] = {}
        self._actors: dict[ActorId, ActorRecord] = {}
        self._handles: dict[ActorId, SnapshotHandle] = {}
        self._seqs: dict[tuple[ActorId, ActorId], int] = {}
        self._pair_last_send: dict[tuple[ActorId, ActorId], int] = {}
        self._queue: list[tuple[tuple, int, Any]] = []
        self._task_seq = 0

        # Observability: message trace for the cost model, failed deliveries,
        # and per-run counters. Every envelope is delivered exactly once or
        # recorded as failed: enqueued == delivered + failed + pending.
        self.trace: list[tuple] = []
        self.failed: list[tuple[Envelope, str]] = []
        self.enqueued = 0
        self.delivered = 0
        self.injected = 0
        self.persist_failures: list[tuple[ActorId, str]] = []

    # -- registration and lookup ---------------------------------------------

    def register_behavior(self, table: BehaviorTable) -> None:
        self._behaviors[table.kind] = table

    def actor(self, id: ActorId) -> ActorRecord:
        try:
            return self._actors[id]
        except KeyError:
            raise UnknownActor(f"unknown actor {id}") from None

    def has_actor(self, id: ActorId) -> bool:
        return id in self._actors

    def actors(self) -> list[ActorRecord]:
        return [self._actors[id] for id in sorted(self._actors)]

    def silo_of(self, id: ActorId) -> int:
        if self.assignment is None:
            return 0
        return self.assignment.get(id, 0)

    # -- lifecycle -------------------------------------------------------------

    def spawn(
        self,
        kind: str,
        local_id: str,
        initial_state: dict[str, Any] | None = None,
        *,
        node_attrs: dict[str, Any] | None = None,
    ) -> ActorId:
        telemetry.record("runtime.spawn")
        table = self._behaviors.get(kind)
        if table is None:
            raise UnknownKind(f"no behavior table registered for kind {kind!r}")
        id = ActorId(kind, local_id)
        if id in self._actors:
            raise DuplicateId(f"actor {id} already exists")
        self._actors[id] = ActorRecord(
            id=id,
            behavior=table,
            state=dict(initial_state or {}),
            last_message_time=self.clock.now,
        )
        self.graph.add_node(id, kind, node_attrs, at=self.clock.now)
        return id

    def persist_snapshot(self, id: ActorId) -> SnapshotHandle:
        telemetry.record("runtime.persist_snapshot")
        record = self.actor(id)
        payload = pickle.dumps({"id": str(id), "state": record.state}, protocol=4)
        offset = self.snapshots.append(payload)
        handle = SnapshotHandle(id, offset)
        self._handles[id] = handle
        self.trace.append(("snapshot", id))
        return handle

    def deactivate_idle(self, idle_threshold: int) -> list[ActorId]:
        """Snapshot and deactivate every active actor idle for at least
        ``idle_threshold``. A persistence failure skips that actor only."""
        telemetry.record("runtime.deactivate_idle")
        now = self.clock.now
        deactivated: list[ActorId] = []
        for id in sorted(self._actors):
            record = self._actors[id]
            if record.status is not ActorStatus.ACTIVE:
                continue
            if now - record.last_message_time < idle_threshold:
                continue
            try:
                self.persist_snapshot(id)
            except PersistenceFailure as exc:
                self.persist_failures.append((id, str(exc)))
                continue
            record.state = None
            record.status = ActorStatus.DEACTIVATED
            deactivated.append(id)
        return deactivated

    def activate(self, id: ActorId) -> ActorRecord:
        telemetry.record("runtime.activate")
        record = self.actor(id)
        if record.status is ActorStatus.ACTIVE:
            return record
        handle = self._handles[id]
        payload = self.snapshots.read_at(handle.offset)
        data = pickle.loads(payload)
        record.state = data["state"]
        record.status = ActorStatus.ACTIVE
        return record

    # -- messaging ---------------------------------------------------------------

    def send(self, src: ActorId, dst: ActorId, payload: Any, *, at: int | None = None) -> DeliveryReceipt:
        telemetry.record("runtime.send")
        if dst not in self._actors:
            raise UnknownActor(f"cannot send to unknown actor {dst}")
        t = self.clock.now if at is None else at
        pair = (src, dst)
        last = self._pair_last_send.get(pair)
        if last is not None and t < last:
            raise ValueError(f"send times must be nondecreasing per pair, got {t} < {last}")
        self._pair_last_send[pair] = t
        seq = self._seqs.get(pair, 0) + 1
        self._seqs[pair] = seq
        envelope = Envelope(src, dst, payload, t, seq)
        if src == EXTERNAL:
            latency = 0
            self.injected += 1
        else:
            same_silo = self.silo_of(src) == self.silo_of(dst)
            latency = (
                self.cost_model.message_latency(same_silo) if self.cost_model else 0
            )
            self.trace.append(("msg", src, dst))
        key = (t, 0, seq, src.kind, src.local_id, dst.kind, dst.local_id)
        heapq.heappush(self._queue, (key, 0, envelope))
        self.enqueued += 1
        return DeliveryReceipt(seq=seq, send_time=t, latency=latency)

    def inject(self, dst: ActorId, payload: Any, at: int) -> DeliveryReceipt:
        """Deliver sensor input / scripted commands from the physical world."""
        return self.send(EXTERNAL, dst, payload, at=at)

    def schedule_task(self, at: int, fn: Callable[[], None], name: str = "") -> None:
        """Run a system task at virtual time ``at``, after all envelopes
        bearing that timestamp have been dispatched."""
        self._task_seq += 1
        key = (at, 1, self._task_seq, "", "", "", "")
        heapq.heappush(self._queue, (key, 1, (name, fn)))

    def dispatch(self, record: ActorRecord, envelope: Envelope) -> EffectSet:
        """Run the handler for one envelope and apply its effects atomically."""
        telemetry.record("runtime.dispatch")
        handler = record.behavior.handlers.get(type(envelope.payload))
        if handler is None:
            raise UnhandledMessage(
                f"{record.id} ({record.behavior.kind}) has no handler for "
                f"{type(envelope.payload).__name__}"
            )
        ctx = HandlerContext(self, record, envelope)
        handler(ctx, envelope.payload)
        self._apply_effects(record, ctx.effects)
        record.last_message_time = self.clock.now
        return ctx.effects

    def run_until(self, t: int) -> None:
        """Process every queued item with timestamp <= t, then land the clock on t."""
        while self._queue and self._queue[0][0][0] <= t:
            (key, kind, item) = heapq.heappop(self._queue)
            # An envelope sent at an earlier instant but processed only now is
            # delivered now; the clock never moves backward.
            if key[0] > self.clock.now:
                self.clock.advance_to(key[0])
            if kind == 1:
                _name, fn = item
                fn()
            else:
                self._deliver(item)
        self.clock.advance_to(t)

    def drain_now(self) -> None:
        """Process everything already due at the current instant."""
        self.run_until(self.clock.now)

    def pending(self) -> int:
        return len(self._queue)

    def pending_envelopes(self) -> int:
        return sum(1 for _key, kind, _item in self._queue if kind == 0)

    # -- internals -----------------------------------------------------------------

    def _deliver(self, envelope: Envelope) -> None:
        record = self._actors.get(envelope.dst)
        if record is None:
            self.failed.append((envelope, "UnknownActor"))
            return
        if record.status is ActorStatus.DEACTIVATED:
            self.activate(record.id)
        try:
            self.dispatch(record, envelope)
            self.delivered += 1
        except Exception as exc:
            self.failed.append((envelope, f"{type(exc).__name__}: {exc}"))

    def _apply_effects(self, record: ActorRecord, effects: EffectSet) -> None:
        # Validate before any mutation so a bad effect set is all-or-nothing.
        for dst, _payload in effects.sends:
            if dst not in self._actors:
                raise UnknownActor(f"effect send to unknown actor {dst}")
        for verb, other, _key in effects.subscribe_ops:
            self.graph.node(other)
        if effects.context_ops and self.context_store is None:
            raise RuntimeError("context ops require a wired context store")
        for op in effects.context_ops:
            self.context_store.validate_op(record.id, op)
        if effects.graph_ops:
            self.graph.apply_batch(effects.graph_ops)  # atomic with undo
        for op in effects.context_ops:
            self.context_store.apply_op(record.id, op)
        record.state.update(effects.state_updates)
        for verb, publisher, key in effects.subscribe_ops:
            if verb == "subscribe":
                self.graph.subscribe(record.id, publisher, key)
            else:
                self.graph.unsubscribe(record.id, publisher, key)
        for publication in effects.publications:
            if self.publication_sink is not None:
                self.publication_sink(record.id, publication, self.clock.now)
        for dst, payload in effects.sends:
            self.send(record.id, dst, payload)
