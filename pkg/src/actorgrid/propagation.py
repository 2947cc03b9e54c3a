"""Event-driven change propagation.

Three responsibilities sit here:

* **publish**: fan a context change out to every subscriber of
  (publisher, key) as ordinary actor messages, reactivating deactivated
  subscribers on delivery;
* **propagate_topology_change**: toggle a switch through its own handler,
  resolve which substations and meters changed reachability, enqueue a
  re-aggregation job per affected substation, and log the action;
* **reaggregate**: rebuild a substation's hourly aggregate series using the
  topology that was valid at each measurement hour, never the current one.

Re-aggregation jobs run synchronously inside the simulation step that
dequeues them, so reports stay deterministic.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass
from typing import Any

from . import telemetry
from .clock import HOUR
from .context import RelevancePolicy, TimeSeriesSegment
from .errors import InsufficientRetention, NoStateChange, UnknownActor
from .graph import GraphRegistry
from .ids import ActorId
from .runtime import ActorRuntime, Publication


@dataclass(frozen=True)
class ChangeEvent:
    """One observed context change; totally ordered by (timestamp, publisher, key)."""

    publisher: ActorId
    key: str
    old_value: Any
    new_value: Any
    timestamp: int

    def order_key(self) -> tuple:
        return (self.timestamp, self.publisher, self.key)


@dataclass(frozen=True)
class Notification:
    """Envelope payload delivered to subscribers of a published change."""

    publisher: ActorId
    key: str
    old_value: Any
    new_value: Any
    timestamp: int


@dataclass(frozen=True)
class SwitchToggle:
    """Command payload asking a switch actor to change state."""

    new_state: str  # "open" | "closed"
    at: int


@dataclass(frozen=True)
class AffectedSet:
    substations: tuple[ActorId, ...]
    meters: tuple[ActorId, ...]


@dataclass(frozen=True)
class ReaggregationJob:
    substation: ActorId
    window: tuple[int, int]
    trigger: ChangeEvent


@dataclass(frozen=True)
class ActionLogEntry:
    t: int
    actor: ActorId
    action: str
    params: dict[str, Any]


class ActionLog:
    """Append-only record of every command issued to the system."""

    def __init__(self) -> None:
        self.entries: list[ActionLogEntry] = []

    def append(self, t: int, actor: ActorId, action: str, params: dict[str, Any]) -> ActionLogEntry:
        entry = ActionLogEntry(t, actor, action, dict(params))
        self.entries.append(entry)
        return entry

    def __len__(self) -> int:
        return len(self.entries)

    def to_text(self) -> str:
        lines = [
            "\t".join(
                (
                    str(e.t),
                    str(e.actor),
                    e.action,
                    json.dumps(e.params, sort_keys=True, separators=(",", ":")),
                )
            )
            for e in self.entries
        ]
        return "\n".join(lines) + ("\n" if lines else "")

    @classmethod
    def from_text(cls, text: str) -> "ActionLog":
        log = cls()
        for line in text.splitlines():
            if not line.strip():
                continue
            t, actor, action, params = line.split("\t")
            log.append(int(t), ActorId.parse(actor), action, json.loads(params))
        return log


class PropagationEngine:
    """Wires the runtime, graph and context store into one change pipeline."""

    def __init__(self, runtime: ActorRuntime, *, aggregate_key: str = "aggregate_consumption"):
        self.runtime = runtime
        self.graph: GraphRegistry = runtime.graph
        self.aggregate_key = aggregate_key
        self.action_log = ActionLog()
        self.jobs: deque[ReaggregationJob] = deque()
        self.completed_jobs: list[ReaggregationJob] = []
        self.events: list[ChangeEvent] = []
        runtime.publication_sink = self._on_publication

    # -- publication fan-out ---------------------------------------------------

    def _on_publication(self, publisher: ActorId, publication: Publication, t: int) -> None:
        self.publish(
            ChangeEvent(publisher, publication.key, publication.old_value, publication.new_value, t)
        )

    def publish(self, event: ChangeEvent) -> list[ActorId]:
        """Notify every subscriber of (publisher, key); returns them sorted."""
        telemetry.record("propagation.publish")
        if not self.runtime.has_actor(event.publisher):
            raise UnknownActor(f"publisher {event.publisher} was never spawned")
        self.events.append(event)
        notified = self.graph.subscribers_of(event.publisher, event.key)
        payload = Notification(
            event.publisher, event.key, event.old_value, event.new_value, event.timestamp
        )
        for subscriber in notified:
            self.runtime.send(event.publisher, subscriber, payload)
        return notified

    # -- topology changes ----------------------------------------------------------

    def propagate_topology_change(self, switch: ActorId, new_state: str, t: int) -> AffectedSet:
        """Toggle ``switch`` at time ``t`` and resolve the affected set.

        The switch's own handler performs the feeds-edge mutations; afterwards
        the affected set is the symmetric difference of each substation's
        feeds-reachability just before and at ``t``. Every affected substation
        gets a re-aggregation job over the pre-toggle window, and the toggle
        is appended to the action log.
        """
        telemetry.record("propagation.propagate_topology_change")
        record = self.runtime.activate(switch)  # no-op when already active
        current = record.state.get("state")
        if current == new_state:
            raise NoStateChange(f"{switch} is already {new_state}")

        self.runtime.inject(switch, SwitchToggle(new_state, t), at=t)
        self.runtime.run_until(t)

        substations = [n.id for n in self.graph.nodes_of_kind("substation")]
        affected_subs: list[ActorId] = []
        affected_meters: set[ActorId] = set()
        for sub in substations:
            before = self.graph.traverse(sub, t - 1, edge_types=("feeds",))
            after = self.graph.traverse(sub, t, edge_types=("feeds",))
            moved = before.symmetric_difference(after)
            if moved:
                affected_subs.append(sub)
                affected_meters.update(m for m in moved if m.kind == "meter")

        trigger = ChangeEvent(switch, "switch_state", current, new_state, t)
        # History can only be corrected where meter data was recorded: clip
        # the window to the recorded horizon (retention failures inside it
        # still raise InsufficientRetention).
        window = (0, min(t, self._recorded_end()))
        for sub in sorted(affected_subs):
            self.jobs.append(ReaggregationJob(sub, window, trigger))
        self.action_log.append(
            t, switch, "switch_toggle", {"new_state": new_state}
        )
        self.run_pending_jobs(t)
        return AffectedSet(tuple(sorted(affected_subs)), tuple(sorted(affected_meters)))

    def _recorded_end(self) -> int:
        store = self.runtime.context_store
        end = 0
        for node in self.graph.nodes_of_kind("meter"):
            for record in reversed(store.timeline(node.id, "consumption")):
                value = store.read_value(record)
                if isinstance(value, TimeSeriesSegment):
                    end = max(end, value.end)
                    break
        return end

    def run_pending_jobs(self, t_now: int) -> list[ReaggregationJob]:
        done = []
        while self.jobs:
            job = self.jobs.popleft()
            self.reaggregate(job.substation, job.window, t_now)
            self.completed_jobs.append(job)
            done.append(job)
        return done

    # -- historical re-aggregation ----------------------------------------------------

    def reaggregate(
        self, substation: ActorId, window: tuple[int, int], t_now: int
    ) -> TimeSeriesSegment:
        """Recompute the substation's hourly aggregate over ``window``.

        For every hour h, the output is the sum over meters reachable from the
        substation via feeds edges *valid at h* of that meter's consumption
        sample at h. The result overwrites the substation's aggregate series
        for the window and is returned as its own segment.
        """
        telemetry.record("propagation.reaggregate")
        store = self.runtime.context_store
        start, end = window
        samples: list[float] = []
        for h in range(start, end, HOUR):
            reachable = self.graph.traverse(substation, h, edge_types=("feeds",))
            total = 0.0
            for meter in sorted(m for m in reachable if m.kind == "meter"):
                total += self._hourly_sample(store, meter, h)
            samples.append(total)
            store.series_set(substation, self.aggregate_key, h, total)
        return TimeSeriesSegment(start, HOUR, samples, "kWh")

    def _hourly_sample(self, store, meter: ActorId, h: int) -> float:
        for record in reversed(store.timeline(meter, "consumption")):
            value = store.read_value(record)
            if isinstance(value, TimeSeriesSegment):
                if value.resolution > HOUR:
                    raise InsufficientRetention(
                        f"{meter} consumption downsampled to {value.resolution} ticks"
                    )
                if value.covers(h):
                    return value.sample_at(h)
        raise InsufficientRetention(f"{meter} has no hourly consumption at {h}")


def ensure_aggregate_series(
    store, substation: ActorId, start: int, hours: int, policy: RelevancePolicy
) -> None:
    """Preallocate a zeroed hourly aggregate series for online accumulation."""
    segment = TimeSeriesSegment(start, HOUR, [0.0] * hours, "kWh")
    store.put(substation, "aggregate_consumption", segment, start, policy)
