"""Consumption baselines that respect the action log and identity segments.

A baseline is a per-hour-of-day mean of "normal" consumption. Because
demand-response commands deliberately bend consumption away from normal, any
sample inside a commanded interval must be excluded before averaging, and a
consumer baseline may only draw on readings taken while that consumer's
identity was attached to the meter.
"""

from __future__ import annotations

from ..clock import HOUR
from ..context import TimeSeriesSegment
from ..errors import AllExcluded
from ..ids import ActorId
from ..propagation import ActionLog
from .. import telemetry


def dr_intervals(log: ActionLog, actor: ActorId) -> list[tuple[int, int]]:
    return [
        (entry.params["start"], entry.params["end"])
        for entry in log.entries
        if entry.action == "dr_command" and entry.actor == actor
    ]


def baseline_excluding_actions(
    series: TimeSeriesSegment, log: ActionLog, actor: ActorId
) -> list[float]:
    """Per-hour-of-day mean of ``series`` excluding samples inside any
    demand-response interval affecting ``actor``."""
    telemetry.record("sim.baseline_excluding_actions")
    intervals = dr_intervals(log, actor)
    return baseline_excluding_intervals(series, intervals)


def baseline_excluding_intervals(
    series: TimeSeriesSegment, intervals: list[tuple[int, int]]
) -> list[float]:
    sums = [0.0] * 24
    counts = [0] * 24
    for i, value in enumerate(series.samples):
        t = series.start + i * series.resolution
        if any(start <= t < end for start, end in intervals):
            continue
        hod = (t // HOUR) % 24
        sums[hod] += value
        counts[hod] += 1
    for hod in range(24):
        if counts[hod] == 0:
            raise AllExcluded(f"no clean samples for hour of day {hod}")
    return [sums[h] / counts[h] for h in range(24)]


def plain_baseline(series: TimeSeriesSegment) -> list[float]:
    """Naive per-hour-of-day mean including any commanded intervals."""
    return baseline_excluding_intervals(series, [])


def segment_baseline(
    series: TimeSeriesSegment, window: tuple[int, int]
) -> list[float]:
    """Per-hour-of-day mean restricted to samples with window.start <= t < window.end."""
    start, end = window
    excluded = [(series.start, start), (end, series.start + len(series.samples) * series.resolution)]
    intervals = [(a, b) for a, b in excluded if b > a]
    return baseline_excluding_intervals(series, intervals)
