"""Simulated latency cost model.

Charges use the canonical "latency numbers every programmer should know":
a same-silo message costs one main-memory reference, a cross-silo message one
intra-datacenter round trip, and a snapshot one disk seek plus shipping 1 KB
over the network. Charges are pure accounting: they never advance the
scenario clock.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ..errors import UnknownActorInTrace
from ..ids import ActorId
from .. import telemetry
from ..placement import Assignment

LOCAL_REF_NS = 100
CROSS_SILO_RTT_NS = 500_000
DISK_SEEK_NS = 10_000_000
NET_1K_NS = 10_000
SSD_4K_NS = 150_000


@dataclass(frozen=True)
class CostModel:
    local_ref: int = LOCAL_REF_NS
    cross_silo_rtt: int = CROSS_SILO_RTT_NS
    disk_seek: int = DISK_SEEK_NS
    net_1k: int = NET_1K_NS
    ssd_4k: int = SSD_4K_NS

    def message_latency(self, same_silo: bool) -> int:
        return self.local_ref if same_silo else self.cross_silo_rtt

    def snapshot_charge(self) -> int:
        return self.disk_seek + self.net_1k


@dataclass
class CostSummary:
    total_ns: int
    message_count: int
    cross_silo_count: int
    snapshot_count: int
    per_silo_messages: list[int] = field(default_factory=list)

    def to_text(self) -> str:
        lines = [
            f"total_ns = {self.total_ns}",
            f"messages = {self.message_count}",
            f"cross_silo = {self.cross_silo_count}",
            f"snapshots = {self.snapshot_count}",
            "per_silo_messages = " + ",".join(str(c) for c in self.per_silo_messages),
        ]
        return "\n".join(lines) + "\n"


def cost_report(
    trace: list[tuple], assignment: Assignment, model: CostModel | None = None
) -> CostSummary:
    """Charge a recorded trace against an assignment.

    ``("msg", src, dst)`` entries cost local_ref when src and dst share a
    silo, otherwise cross_silo_rtt. ``("snapshot", actor)`` entries cost a
    disk seek plus one 1 KB network send.
    """
    telemetry.record("sim.cost_report")
    model = model if model is not None else CostModel()
    total = 0
    messages = 0
    cross = 0
    snapshots = 0
    per_silo = [0] * assignment.k

    def silo(actor: ActorId) -> int:
        try:
            return assignment.silos[actor]
        except KeyError:
            raise UnknownActorInTrace(f"trace references unplaced actor {actor}") from None

    for entry in trace:
        kind = entry[0]
        if kind == "msg":
            _, src, dst = entry
            s_src, s_dst = silo(src), silo(dst)
            same = s_src == s_dst
            total += model.message_latency(same)
            messages += 1
            per_silo[s_dst] += 1
            if not same:
                cross += 1
        elif kind == "snapshot":
            _, actor = entry
            silo(actor)
            total += model.snapshot_charge()
            snapshots += 1
        else:
            raise ValueError(f"unknown trace entry {entry!r}")
    return CostSummary(total, messages, cross, snapshots, per_silo)
