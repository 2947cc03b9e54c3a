"""Brute-force oracles for the scenario assertions.

Every oracle here recomputes its answer from raw inputs (the graph mutation
event log, stored meter series, and ground-truth arrays) without going
through the query paths it checks. Interval joins and reachability are
reimplemented directly on the event tuples.
"""

from __future__ import annotations

from collections import defaultdict

import numpy as np

from ..clock import HOUR
from ..context import TimeSeriesSegment
from ..graph import GraphRegistry
from ..ids import ActorId


def edge_intervals(
    events: list[tuple], edge_type: str
) -> dict[tuple[ActorId, ActorId], list[tuple[int, int | None]]]:
    """Replay add/end events into validity intervals per (src, dst)."""
    intervals: dict[tuple[ActorId, ActorId], list[tuple[int, int | None]]] = defaultdict(list)
    for event in events:
        verb = event[0]
        if verb == "add_edge" and event[4] == edge_type:
            _, valid_from, src, dst, _type, _weight = event
            intervals[(ActorId.parse(src), ActorId.parse(dst))].append((valid_from, None))
        elif verb == "end_edge" and event[4] == edge_type:
            _, valid_to, src, dst, _type = event
            key = (ActorId.parse(src), ActorId.parse(dst))
            spans = intervals[key]
            for i in range(len(spans) - 1, -1, -1):
                if spans[i][1] is None:
                    spans[i] = (spans[i][0], valid_to)
                    break
    return dict(intervals)


def _valid_at(span: tuple[int, int | None], t: int) -> bool:
    start, end = span
    return start <= t and (end is None or t < end)


def reachable_at(
    intervals: dict[tuple[ActorId, ActorId], list[tuple[int, int | None]]],
    origin: ActorId,
    t: int,
) -> frozenset[ActorId]:
    """BFS closure over interval-valid edges; includes the origin."""
    adjacency: dict[ActorId, list[ActorId]] = defaultdict(list)
    for (src, dst), spans in intervals.items():
        if any(_valid_at(s, t) for s in spans):
            adjacency[src].append(dst)
    seen = {origin}
    frontier = [origin]
    while frontier:
        node = frontier.pop()
        for nxt in adjacency.get(node, ()):
            if nxt not in seen:
                seen.add(nxt)
                frontier.append(nxt)
    return frozenset(seen)


def stored_hourly_series(store, owner: ActorId, key: str, hours: int) -> np.ndarray:
    """Concatenate an owner's stored hourly segments into one dense array."""
    out = np.full(hours, np.nan)
    for record in store.timeline(owner, key):
        value = store.read_value(record)
        if not isinstance(value, TimeSeriesSegment) or value.resolution != HOUR:
            continue
        first = value.start // HOUR
        for i, sample in enumerate(value.samples):
            h = first + i
            if 0 <= h < hours:
                out[h] = sample
    return out


def reaggregation_oracle(
    graph: GraphRegistry, store, substations: list[ActorId], hours: int
) -> dict[ActorId, np.ndarray]:
    """Recompute every substation's hourly aggregate from the stored meter
    series and the feeds-edge event log (topology at measurement time)."""
    intervals = edge_intervals(graph.events, "feeds")
    meter_cache: dict[ActorId, np.ndarray] = {}
    result: dict[ActorId, np.ndarray] = {}
    for substation in substations:
        total = np.zeros(hours)
        for (src, meter), spans in sorted(intervals.items()):
            if src != substation or meter.kind != "meter":
                continue
            if meter not in meter_cache:
                meter_cache[meter] = stored_hourly_series(store, meter, "consumption", hours)
            series = meter_cache[meter]
            for start, end in spans:
                h0 = max(0, start // HOUR)
                h1 = hours if end is None else min(hours, end // HOUR)
                if h1 > h0:
                    block = series[h0:h1]
                    total[h0:h1] += np.where(np.isnan(block), 0.0, block)
        result[substation] = total
    return result


def affected_set_oracle(
    events: list[tuple], substations: list[ActorId], t: int
) -> tuple[tuple[ActorId, ...], tuple[ActorId, ...]]:
    """Symmetric difference of feeds-reachability at t-1 versus t."""
    intervals = edge_intervals(events, "feeds")
    subs: list[ActorId] = []
    meters: set[ActorId] = set()
    for substation in substations:
        before = reachable_at(intervals, substation, t - 1)
        after = reachable_at(intervals, substation, t)
        moved = before.symmetric_difference(after)
        if moved:
            subs.append(substation)
            meters.update(m for m in moved if m.kind == "meter")
    return tuple(sorted(subs)), tuple(sorted(meters))


def interval_join(
    timeline: list[tuple[int, object]], t: int
) -> object | None:
    """Value of the latest (time, value) entry with time <= t."""
    chosen = None
    for start, value in timeline:
        if start <= t:
            chosen = value
        else:
            break
    return chosen


def filtered_hour_of_day_means(
    samples: np.ndarray,
    start_hour: int,
    excluded: set[int],
) -> list[float | None]:
    """Per-hour-of-day means over absolute hours not in ``excluded``.

    ``samples[i]`` is the value for absolute hour ``start_hour + i``. Hours of
    day with no clean samples yield None.
    """
    sums = [0.0] * 24
    counts = [0] * 24
    for i, value in enumerate(samples):
        h = start_hour + i
        if h in excluded:
            continue
        hod = h % 24
        sums[hod] += float(value)
        counts[hod] += 1
    return [sums[h] / counts[h] if counts[h] else None for h in range(24)]
