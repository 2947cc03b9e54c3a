"""Per-actor context storage with relevance-driven tiering.

Every context record carries a relevance policy along three dimensions:

* **scope**: the set of application tags allowed to read the record;
* **period**: how long the record stays relevant before maintenance may
  demote, compress, downsample or delete it (``None`` means never);
* **intensity**: an exponentially decayed access counter that drives the
  hot/warm/cold temperature classification.

Hot records live in memory. Warm records live uncompressed in the shared
append-only record file, cold records compressed (and, for old time series,
downsampled). A record is in exactly one tier, and reads return identical
value bytes regardless of tier.
"""

from __future__ import annotations

import bisect
import enum
import math
import pickle
import zlib
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Iterator

from . import telemetry
from .clock import HOUR, VirtualClock
from .errors import (
    ClockRegression,
    EmptySegment,
    MissingUnit,
    NotFound,
    ScopeDenied,
    UnknownActor,
)
from .ids import ActorId
from .recordio import RecordLog


class Tier(enum.IntEnum):
    # Ordered hottest-first so "lower tier" compares with >.
    HOT = 0
    WARM = 1
    COLD = 2

    def __str__(self) -> str:  # report-friendly
        return self.name.lower()


@dataclass
class DecayedCounter:
    """Access-intensity estimator: halves per ``half_life`` of idle time."""

    value: float
    half_life: int
    last_update: int

    def decayed(self, now: int) -> float:
        if now < self.last_update:
            raise ClockRegression(
                f"decay query at {now} precedes last update {self.last_update}"
            )
        if now == self.last_update or self.value == 0.0:
            return self.value
        return self.value * math.pow(2.0, -(now - self.last_update) / self.half_life)

    def touch(self, now: int) -> "DecayedCounter":
        """Decay to ``now`` and count one access."""
        self.value = self.decayed(now) + 1.0
        self.last_update = now
        return self


def record_access(counter: DecayedCounter, now: int) -> DecayedCounter:
    telemetry.record("context.record_access")
    return counter.touch(now)


@dataclass(frozen=True)
class RelevancePolicy:
    """Where, for how long, and how hotly a context item is stored.

    ``scope`` is the set of application tags that may read the item (the
    owner always may). ``period`` is the relevance duration in ticks, or
    ``None`` for profile data that never expires. ``deletable`` marks items
    maintenance may remove entirely once stale.
    """

    scope: frozenset[str] = frozenset()
    period: int | None = None
    half_life: int = 24 * HOUR
    deletable: bool = False

    def allows(self, reader_scope: str | None) -> bool:
        return reader_scope is None or reader_scope in self.scope


@dataclass
class TimeSeriesSegment:
    """Uniform-resolution series of float samples with a unit tag."""

    start: int
    resolution: int
    samples: list[float]
    unit: str

    @property
    def end(self) -> int:
        return self.start + self.resolution * len(self.samples)

    def covers(self, t: int) -> bool:
        return self.start <= t < self.end

    def slot(self, t: int) -> int:
        return (t - self.start) // self.resolution

    def sample_at(self, t: int) -> float:
        if not self.covers(t):
            raise NotFound(f"time {t} outside segment [{self.start}, {self.end})")
        return self.samples[self.slot(t)]

    def copy(self) -> "TimeSeriesSegment":
        return replace(self, samples=list(self.samples))


def downsample(segment: TimeSeriesSegment, factor: int) -> TimeSeriesSegment:
    """Reduce a segment by block means.

    Each output sample is the arithmetic mean of ``factor`` consecutive input
    samples (a trailing partial block is averaged over its actual length), so
    block sums, and therefore energy totals, are preserved up to the stated
    resolution change.
    """
    telemetry.record("context.downsample")
    if not segment.samples:
        raise EmptySegment("cannot downsample an empty segment")
    if factor < 2:
        raise ValueError("downsample factor must be >= 2")
    out: list[float] = []
    samples = segment.samples
    for i in range(0, len(samples), factor):
        block = samples[i : i + factor]
        out.append(math.fsum(block) / len(block))
    return TimeSeriesSegment(segment.start, segment.resolution * factor, out, segment.unit)


def _value_nbytes(value: Any) -> int:
    if isinstance(value, TimeSeriesSegment):
        return 16 + 8 * len(value.samples)
    if isinstance(value, (int, float)):
        return 8
    if isinstance(value, str):
        return len(value.encode("utf-8"))
    if isinstance(value, (bytes, bytearray)):
        return len(value)
    return len(pickle.dumps(value, protocol=4))


@dataclass
class ContextRecord:
    """One context item. ``value`` is populated only while the record is hot;
    warm/cold values are fetched from the record log on demand."""

    owner: ActorId
    key: str
    value: Any
    unit: str | None
    timestamp: int
    policy: RelevancePolicy
    counter: DecayedCounter
    tier: Tier = Tier.HOT
    offset: int | None = None
    compressed: bool = False
    downsampled: bool = False
    nbytes: int = 0


# Effect ops the actor runtime applies on a handler's behalf.

@dataclass(frozen=True)
class PutOp:
    key: str
    value: Any
    unit: str | None
    timestamp: int
    policy: RelevancePolicy


@dataclass(frozen=True)
class AppendOp:
    key: str
    value: float
    unit: str
    timestamp: int
    policy: RelevancePolicy
    resolution: int = HOUR


@dataclass(frozen=True)
class SeriesAddOp:
    key: str
    timestamp: int
    delta: float


@dataclass
class MaintenanceReport:
    """Outcome of one maintenance pass: one action tuple per line."""

    actions: list[tuple[str, ActorId, str, str, str]] = field(default_factory=list)
    skipped: list[tuple[ActorId, str, str]] = field(default_factory=list)

    def count(self, verb: str) -> int:
        return sum(1 for a in self.actions if a[0] == verb)

    def to_text(self) -> str:
        lines = [
            "\t".join((verb, str(owner), key, t_from, t_to))
            for verb, owner, key, t_from, t_to in self.actions
        ]
        lines.extend(f"skip\t{owner}\t{key}\t{reason}\t-" for owner, key, reason in self.skipped)
        return "\n".join(lines) + ("\n" if lines else "")


class ContextStore:
    """Timeline-per-(owner, key) context store with hot/warm/cold tiering."""

    def __init__(
        self,
        clock: VirtualClock,
        *,
        hot_min: float = 2.0,
        cold_max: float = 0.25,
        hot_cap_bytes: int = 16 * 1024 * 1024,
        downsample_factor: int = 4,
        log: RecordLog | None = None,
        owner_exists: Callable[[ActorId], bool] | None = None,
    ):
        if hot_min <= cold_max:
            raise ValueError("hot_min must exceed cold_max")
        self.clock = clock
        self.hot_min = hot_min
        self.cold_max = cold_max
        self.hot_cap_bytes = hot_cap_bytes
        self.downsample_factor = downsample_factor
        self.log = log if log is not None else RecordLog()
        self._owner_exists = owner_exists
        self._timelines: dict[tuple[ActorId, str], list[ContextRecord]] = {}
        self._hot_bytes = 0

    # -- write paths --------------------------------------------------------

    def put(
        self,
        owner: ActorId,
        key: str,
        value: Any,
        timestamp: int,
        policy: RelevancePolicy,
        unit: str | None = None,
    ) -> ContextRecord:
        telemetry.record("context.put")
        self._check_owner(owner)
        if isinstance(value, TimeSeriesSegment):
            if not value.unit:
                raise MissingUnit(f"series for {owner}/{key} has no unit tag")
            unit = value.unit
        elif isinstance(value, (int, float)) and not isinstance(value, bool):
            if unit is None:
                raise MissingUnit(f"measurement {owner}/{key} needs a unit tag")
        # Validity time and access intensity run on separate clocks: a record
        # may be valid in the logical past, but its counter starts now.
        record = ContextRecord(
            owner=owner,
            key=key,
            value=value,
            unit=unit,
            timestamp=timestamp,
            policy=policy,
            counter=DecayedCounter(1.0, policy.half_life, self.clock.now),
            nbytes=_value_nbytes(value),
        )
        self._insert(record)
        self._hot_bytes += record.nbytes
        return record

    def append_sample(
        self,
        owner: ActorId,
        key: str,
        value: float,
        unit: str,
        timestamp: int,
        policy: RelevancePolicy,
        resolution: int = HOUR,
    ) -> ContextRecord:
        """Append one sample to the open series for (owner, key).

        Extends the newest record when it is a hot series with the same unit
        and resolution whose coverage ends exactly at ``timestamp``; otherwise
        a new segment record is started. Demoted series therefore rotate
        naturally: appends after a demotion begin a fresh hot segment.
        """
        if not unit:
            raise MissingUnit(f"sample for {owner}/{key} needs a unit tag")
        timeline = self._timelines.get((owner, key))
        if timeline:
            last = timeline[-1]
            if (
                last.tier is Tier.HOT
                and isinstance(last.value, TimeSeriesSegment)
                and last.unit == unit
                and last.value.resolution == resolution
                and last.value.end == timestamp
            ):
                last.value.samples.append(float(value))
                last.nbytes += 8
                self._hot_bytes += 8
                return last
        segment = TimeSeriesSegment(timestamp, resolution, [float(value)], unit)
        return self.put(owner, key, segment, timestamp, policy)

    def series_add(self, owner: ActorId, key: str, timestamp: int, delta: float) -> None:
        """Add ``delta`` into the series slot covering ``timestamp``."""
        self._series_update(owner, key, timestamp, delta, replace_slot=False)

    def series_set(self, owner: ActorId, key: str, timestamp: int, value: float) -> None:
        """Overwrite the series slot covering ``timestamp``."""
        self._series_update(owner, key, timestamp, value, replace_slot=True)

    def _series_update(
        self, owner: ActorId, key: str, timestamp: int, value: float, *, replace_slot: bool
    ) -> None:
        for record in reversed(self._timeline(owner, key)):
            segment = self.read_value(record)
            if isinstance(segment, TimeSeriesSegment) and segment.covers(timestamp):
                slot = segment.slot(timestamp)
                if replace_slot:
                    segment.samples[slot] = value
                else:
                    segment.samples[slot] += value
                if record.tier is not Tier.HOT:
                    self._rewrite_stored(record, segment)
                return
        raise NotFound(f"no series slot for {owner}/{key} at {timestamp}")

    def apply_op(self, owner: ActorId, op: PutOp | AppendOp | SeriesAddOp) -> None:
        if isinstance(op, PutOp):
            self.put(owner, op.key, op.value, op.timestamp, op.policy, unit=op.unit)
        elif isinstance(op, AppendOp):
            self.append_sample(
                owner, op.key, op.value, op.unit, op.timestamp, op.policy, op.resolution
            )
        elif isinstance(op, SeriesAddOp):
            self.series_add(owner, op.key, op.timestamp, op.delta)
        else:
            raise TypeError(f"unknown context op {op!r}")

    def validate_op(self, owner: ActorId, op: PutOp | AppendOp | SeriesAddOp) -> None:
        """Raise exactly what apply_op would, without mutating anything.

        Lets the runtime keep a dispatch's effect set all-or-nothing across
        subsystems: context ops are vetted before graph mutations apply.
        """
        self._check_owner(owner)
        if isinstance(op, PutOp):
            numeric = isinstance(op.value, (int, float)) and not isinstance(op.value, bool)
            if isinstance(op.value, TimeSeriesSegment) and not op.value.unit:
                raise MissingUnit(f"series for {owner}/{op.key} has no unit tag")
            if numeric and op.unit is None:
                raise MissingUnit(f"measurement {owner}/{op.key} needs a unit tag")
        elif isinstance(op, AppendOp):
            if not op.unit:
                raise MissingUnit(f"sample for {owner}/{op.key} needs a unit tag")
        elif isinstance(op, SeriesAddOp):
            for record in reversed(self._timeline(owner, op.key)):
                value = self.read_value(record)
                if isinstance(value, TimeSeriesSegment) and value.covers(op.timestamp):
                    return
            raise NotFound(f"no series slot for {owner}/{op.key} at {op.timestamp}")
        else:
            raise TypeError(f"unknown context op {op!r}")

    # -- read paths ---------------------------------------------------------

    def get(
        self,
        owner: ActorId,
        key: str,
        as_of: int | None = None,
        reader_scope: str | None = None,
    ) -> ContextRecord:
        """Return the record valid at ``as_of`` (latest timestamp <= as_of).

        Bumps the record's intensity counter and promotes a warm/cold record
        back to hot when the counter crosses the hot threshold. A
        ``reader_scope`` of ``None`` means owner/system access.
        """
        telemetry.record("context.get")
        timeline = self._timeline(owner, key)
        if not timeline:
            raise NotFound(f"no context for {owner}/{key}")
        record = self._as_of(timeline, as_of)
        if record is None:
            raise NotFound(f"no context for {owner}/{key} at or before {as_of}")
        if not record.policy.allows(reader_scope):
            raise ScopeDenied(
                f"scope {reader_scope!r} may not read {owner}/{key}"
            )
        intensity = record_access(record.counter, self.clock.now).value
        if record.tier is not Tier.HOT and intensity >= self.hot_min:
            self.promote(record)
        return record

    def get_value(
        self,
        owner: ActorId,
        key: str,
        as_of: int | None = None,
        reader_scope: str | None = None,
    ) -> Any:
        return self.read_value(self.get(owner, key, as_of, reader_scope))

    def value_at(
        self,
        owner: ActorId,
        key: str,
        t: int,
        reader_scope: str | None = None,
    ) -> Any:
        """Point-in-time value: series records resolve to the sample at ``t``."""
        record = self.get(owner, key, as_of=t, reader_scope=reader_scope)
        value = self.read_value(record)
        if isinstance(value, TimeSeriesSegment):
            if value.covers(t):
                return value.sample_at(t)
            if t >= value.end and value.samples:
                return value.samples[-1]
            raise NotFound(f"{owner}/{key} has no sample at {t}")
        return value

    def read_value(self, record: ContextRecord) -> Any:
        """Materialize the record's value regardless of tier."""
        if record.tier is Tier.HOT:
            return record.value
        payload = self.log.read_at(record.offset)
        if record.compressed:
            payload = zlib.decompress(payload)
        value, _unit = pickle.loads(payload)
        return value

    def timeline(self, owner: ActorId, key: str) -> tuple[ContextRecord, ...]:
        return tuple(self._timeline(owner, key))

    def records(self) -> Iterator[ContextRecord]:
        for key in sorted(self._timelines):
            yield from self._timelines[key]

    @property
    def hot_bytes(self) -> int:
        return self._hot_bytes

    # -- temperature and maintenance -----------------------------------------

    def classify_temperature(
        self,
        record: ContextRecord,
        now: int,
        thresholds: tuple[float, float] | None = None,
    ) -> Tier:
        """Hot if decayed intensity >= hot_min (ties promote), cold if <= cold_max."""
        telemetry.record("context.classify_temperature")
        hot_min, cold_max = thresholds if thresholds else (self.hot_min, self.cold_max)
        if hot_min <= cold_max:
            raise ValueError("hot_min must exceed cold_max")
        intensity = record.counter.decayed(now)
        if intensity >= hot_min:
            return Tier.HOT
        if intensity <= cold_max:
            return Tier.COLD
        return Tier.WARM

    def demote(self, record: ContextRecord, to_tier: Tier) -> None:
        if to_tier <= record.tier:
            raise ValueError(f"cannot demote {record.tier} to {to_tier}")
        value = self.read_value(record)
        payload = pickle.dumps((value, record.unit), protocol=4)
        if to_tier is Tier.COLD:
            payload = zlib.compress(payload)
        offset = self.log.append(payload)
        if record.tier is Tier.HOT:
            self._hot_bytes -= record.nbytes
        record.value = None
        record.offset = offset
        record.compressed = to_tier is Tier.COLD
        record.tier = to_tier

    def promote(self, record: ContextRecord) -> None:
        if record.tier is Tier.HOT:
            return
        value = self.read_value(record)
        record.value = value
        record.offset = None
        record.compressed = False
        record.tier = Tier.HOT
        record.nbytes = _value_nbytes(value)
        self._hot_bytes += record.nbytes

    def maintain(self, now: int | None = None) -> MaintenanceReport:
        """One maintenance pass: demote, compress, downsample, delete, then
        enforce the hot-tier byte cap by evicting lowest-intensity records.

        Infinite-period records are exempt from the age-based rules but still
        participate in cap eviction (tier moves are transparent to readers).
        """
        telemetry.record("context.maintain")
        now = self.clock.now if now is None else now
        report = MaintenanceReport()
        for tl_key in sorted(self._timelines):
            for record in list(self._timelines[tl_key]):
                period = record.policy.period
                if period is None:
                    continue
                age = now - record.timestamp
                if age <= period:
                    continue
                if record.policy.deletable:
                    self._delete(record)
                    report.actions.append(
                        ("delete", record.owner, record.key, str(record.tier), "-")
                    )
                    continue
                classified = self.classify_temperature(record, now)
                if classified > record.tier:
                    tier_from = record.tier
                    self.demote(record, classified)
                    verb = "compress" if classified is Tier.COLD else "demote"
                    report.actions.append(
                        (verb, record.owner, record.key, str(tier_from), str(classified))
                    )
                if (
                    record.tier is Tier.COLD
                    and not record.downsampled
                    and age > 2 * period
                ):
                    value = self.read_value(record)
                    if isinstance(value, TimeSeriesSegment):
                        if len(value.samples) >= self.downsample_factor:
                            reduced = downsample(value, self.downsample_factor)
                            self._rewrite_stored(record, reduced)
                            record.downsampled = True
                            report.actions.append(
                                ("downsample", record.owner, record.key, "cold", "cold")
                            )
                        else:
                            report.skipped.append(
                                (record.owner, record.key, "series-shorter-than-factor")
                            )
        self._enforce_cap(report)
        return report

    # -- internals ------------------------------------------------------------

    def _enforce_cap(self, report: MaintenanceReport) -> None:
        if self._hot_bytes <= self.hot_cap_bytes:
            return
        hot = [r for r in self.records() if r.tier is Tier.HOT]
        now = self.clock.now
        hot.sort(key=lambda r: (r.counter.decayed(now), r.owner, r.key, r.timestamp))
        for record in hot:
            if self._hot_bytes <= self.hot_cap_bytes:
                break
            self.demote(record, Tier.WARM)
            report.actions.append(("evict", record.owner, record.key, "hot", "warm"))

    def _rewrite_stored(self, record: ContextRecord, value: Any) -> None:
        if record.tier is Tier.HOT:
            record.value = value
            return
        payload = pickle.dumps((value, record.unit), protocol=4)
        if record.compressed:
            payload = zlib.compress(payload)
        record.offset = self.log.append(payload)

    def _delete(self, record: ContextRecord) -> None:
        timeline = self._timelines[(record.owner, record.key)]
        timeline.remove(record)
        if record.tier is Tier.HOT:
            self._hot_bytes -= record.nbytes
        if not timeline:
            del self._timelines[(record.owner, record.key)]

    def _check_owner(self, owner: ActorId) -> None:
        if self._owner_exists is not None and not self._owner_exists(owner):
            raise UnknownActor(f"context owner {owner} was never spawned")

    def _timeline(self, owner: ActorId, key: str) -> list[ContextRecord]:
        return self._timelines.get((owner, key), [])

    def _insert(self, record: ContextRecord) -> None:
        timeline = self._timelines.setdefault((record.owner, record.key), [])
        stamps = [r.timestamp for r in timeline]
        timeline.insert(bisect.bisect_right(stamps, record.timestamp), record)

    @staticmethod
    def _as_of(timeline: list[ContextRecord], as_of: int | None) -> ContextRecord | None:
        if as_of is None:
            return timeline[-1]
        stamps = [r.timestamp for r in timeline]
        idx = bisect.bisect_right(stamps, as_of)
        return timeline[idx - 1] if idx else None
