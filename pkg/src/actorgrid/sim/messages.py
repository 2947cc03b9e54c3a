"""Message payload types exchanged by grid actors."""

from __future__ import annotations

from dataclasses import dataclass

from ..ids import ActorId


@dataclass(frozen=True)
class Reading:
    """One meter measurement (kWh over the hour starting at t)."""

    t: int
    kwh: float


@dataclass(frozen=True)
class DailyReadings:
    """A day of hourly meter measurements, reported at end of day."""

    day: int
    t0: int
    samples: tuple[float, ...]


@dataclass(frozen=True)
class DailySamples:
    """A day of weather-station samples at the station's native period."""

    day: int
    t0: int
    resolution: int
    samples: tuple[float, ...]


@dataclass(frozen=True)
class AggregationUpdate:
    """Meter -> substation: consumption points to fold into the aggregate."""

    meter: ActorId
    points: tuple[tuple[int, float], ...]


@dataclass(frozen=True)
class DrCommand:
    """Demand-response order: scale consumption by ``factor`` in [start, end)."""

    start: int
    end: int
    factor: float


@dataclass(frozen=True)
class ResolveWeather:
    """Ask a substation to re-resolve its nearby weather provider."""

    at: int
    max_sampling_period: int
