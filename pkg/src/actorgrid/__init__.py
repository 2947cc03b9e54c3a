"""actorgrid: a deterministic virtual-actor analytics stack for smart grids.

Core pieces: an actor runtime with isolated state and FIFO exactly-once
message delivery over a virtual clock; a per-actor context store tiered by
relevance (scope, period, access intensity); a temporal relationship graph
with as-of queries and a subscription index; balanced graph partitioning for
silo placement with a simulated latency cost model; and a scenario harness
that reproduces four smart-grid failure modes, where patterns that look
fixed in the data drift in reality, against brute-force oracles.
"""

from .clock import DAY, HOUR, MINUTE, SECOND, VirtualClock
from .context import (
    ContextStore,
    DecayedCounter,
    RelevancePolicy,
    Tier,
    TimeSeriesSegment,
    downsample,
    record_access,
)
from .graph import EdgeRecord, GraphRegistry, GraphView, NodeRecord, Subscription
from .ids import EXTERNAL, ActorId
from .placement import (
    Assignment,
    CutReport,
    brute_force_partition,
    cut_weight,
    partition,
    random_balanced_assignment,
    rebalance,
)
from .propagation import (
    ActionLog,
    ActionLogEntry,
    AffectedSet,
    ChangeEvent,
    Notification,
    PropagationEngine,
    ReaggregationJob,
)
from .recordio import RecordLog
from .runtime import (
    ActorRecord,
    ActorRuntime,
    ActorStatus,
    BehaviorTable,
    DeliveryReceipt,
    EffectSet,
    Envelope,
    HandlerContext,
    SnapshotHandle,
)

__version__ = "0.1.0"

__all__ = [
    "ActionLog",
    "ActionLogEntry",
    "ActorId",
    "ActorRecord",
    "ActorRuntime",
    "ActorStatus",
    "AffectedSet",
    "Assignment",
    "BehaviorTable",
    "ChangeEvent",
    "ContextStore",
    "CutReport",
    "DAY",
    "DecayedCounter",
    "DeliveryReceipt",
    "EXTERNAL",
    "EdgeRecord",
    "EffectSet",
    "Envelope",
    "GraphRegistry",
    "GraphView",
    "HandlerContext",
    "HOUR",
    "MINUTE",
    "NodeRecord",
    "Notification",
    "PropagationEngine",
    "ReaggregationJob",
    "RecordLog",
    "RelevancePolicy",
    "SECOND",
    "SnapshotHandle",
    "Subscription",
    "Tier",
    "TimeSeriesSegment",
    "VirtualClock",
    "brute_force_partition",
    "cut_weight",
    "downsample",
    "partition",
    "random_balanced_assignment",
    "rebalance",
    "record_access",
]
