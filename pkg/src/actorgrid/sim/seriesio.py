"""Time-series CSV import/export: ``timestamp,value,unit`` rows."""

from __future__ import annotations

from ..context import TimeSeriesSegment
from ..errors import EmptySegment

HEADER = "timestamp,value,unit"


def segment_to_csv(segment: TimeSeriesSegment) -> str:
    lines = [HEADER]
    for i, value in enumerate(segment.samples):
        t = segment.start + i * segment.resolution
        lines.append(f"{t},{value!r},{segment.unit}")
    return "\n".join(lines) + "\n"


def csv_to_segment(text: str) -> TimeSeriesSegment:
    rows = [line for line in text.splitlines() if line.strip()]
    if rows and rows[0].strip() == HEADER:
        rows = rows[1:]
    if not rows:
        raise EmptySegment("CSV contains no samples")
    stamps: list[int] = []
    samples: list[float] = []
    unit = ""
    for row in rows:
        t_text, value_text, unit = row.split(",")
        stamps.append(int(t_text))
        samples.append(float(value_text))
    if len(stamps) > 1:
        resolution = stamps[1] - stamps[0]
        for a, b in zip(stamps, stamps[1:]):
            if b - a != resolution:
                raise ValueError("CSV timestamps are not uniformly spaced")
    else:
        resolution = 1
    return TimeSeriesSegment(stamps[0], resolution, samples, unit)
