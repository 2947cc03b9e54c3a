"""Grid and consumption configuration.

The plain-text config format is line-based ``key = value`` pairs grouped
under ``[section]`` headers, one section per entity kind. ``[grid]`` and
``[consumption]`` appear once; ``[tie_switch]`` and ``[weather_station]``
repeat, one per entity::

    [grid]
    feeders = 3
    meters_per_feeder = 50
    days = 60

    [tie_switch]
    feeder_a = 0
    feeder_b = 1
    block_size = 25

    [weather_station]
    lat = 60.02
    lon = 10.0
    sampling_period_hours = 1

    [consumption]
    temp_coeff = 0.07
    comfort_temp = 21.0
    noise_sd = 0.32
    base_profile = 0.52,0.46,...   # 24 hourly values
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from ..clock import HOUR
from ..errors import InvalidSpec

# Typical residential hourly shape (kWh), morning and evening peaks.
DEFAULT_BASE_PROFILE = (
    0.52, 0.46, 0.42, 0.40, 0.40, 0.44, 0.60, 0.80,
    0.78, 0.70, 0.66, 0.64, 0.62, 0.60, 0.62, 0.68,
    0.82, 1.00, 1.10, 1.05, 0.95, 0.85, 0.72, 0.60,
)


@dataclass(frozen=True)
class TieSwitchSpec:
    """Normally-open switch between two feeders; when closed, a block of
    ``block_size`` meters moves from feeder_a's substation to feeder_b's.
    A zero block models a backup tie that re-parents nothing."""

    feeder_a: int
    feeder_b: int
    block_size: int


@dataclass(frozen=True)
class WeatherStationSpec:
    geo: tuple[float, float]
    sampling_period: int = HOUR


@dataclass(frozen=True)
class GridSpec:
    feeders: int
    meters_per_feeder: int
    tie_switches: tuple[TieSwitchSpec, ...] = ()
    weather_stations: tuple[WeatherStationSpec, ...] = ()
    days: int = 60
    seed: int = 42

    def validate(self) -> None:
        if self.feeders < 1:
            raise InvalidSpec("a grid needs at least one feeder")
        if self.meters_per_feeder < 1:
            raise InvalidSpec("each feeder needs at least one meter")
        if self.days < 1:
            raise InvalidSpec("simulation horizon must be at least one day")
        cursors = {f: self.meters_per_feeder for f in range(self.feeders)}
        for tie in self.tie_switches:
            for feeder in (tie.feeder_a, tie.feeder_b):
                if not 0 <= feeder < self.feeders:
                    raise InvalidSpec(f"tie switch references feeder {feeder}")
            if tie.feeder_a == tie.feeder_b:
                raise InvalidSpec("tie switch must join two distinct feeders")
            if tie.block_size < 0:
                raise InvalidSpec("tie switch block size cannot be negative")
            cursors[tie.feeder_a] -= tie.block_size
            if cursors[tie.feeder_a] < 0:
                raise InvalidSpec(
                    f"feeder {tie.feeder_a} has too few meters for its switch blocks"
                )
        for station in self.weather_stations:
            if station.sampling_period < HOUR:
                raise InvalidSpec("station sampling periods are hourly or coarser")
            if station.sampling_period % HOUR != 0:
                raise InvalidSpec("station sampling periods must be whole hours")

    def actor_count(self) -> int:
        return (
            self.feeders
            + self.feeders * self.meters_per_feeder
            + len(self.tie_switches)
            + len(self.weather_stations)
        )

    def block_allocations(self) -> list[tuple[int, int]]:
        """Per tie switch: (feeder_a-local start index, end index) of its
        movable block, allocated from the tail of feeder_a without overlap."""
        cursors = {f: self.meters_per_feeder for f in range(self.feeders)}
        blocks = []
        for tie in self.tie_switches:
            end = cursors[tie.feeder_a]
            start = end - tie.block_size
            blocks.append((start, end))
            cursors[tie.feeder_a] = start
        return blocks


@dataclass(frozen=True)
class ConsumptionParams:
    """Base-plus-discomfort consumption model.

    consumption[h] = base_profile[h mod 24]
                   + temp_coeff * |T(h) - comfort_temp|
                   + Gaussian(0, noise_sd), floored at zero.
    """

    base_profile: tuple[float, ...] = DEFAULT_BASE_PROFILE
    temp_coeff: float = 0.12
    comfort_temp: float = 21.0
    noise_sd: float = 0.30

    def validate(self) -> None:
        if len(self.base_profile) != 24:
            raise InvalidSpec("base_profile needs exactly 24 hourly values")
        if any(v < 0 for v in self.base_profile):
            raise InvalidSpec("base_profile values must be nonnegative")
        if self.noise_sd < 0:
            raise InvalidSpec("noise_sd must be nonnegative")


def demo_grid_spec(days: int = 60, seed: int = 42) -> GridSpec:
    """The reference 159-actor grid: 3 feeders x 50 meters, 4 tie switches,
    2 hourly weather stations."""
    return GridSpec(
        feeders=3,
        meters_per_feeder=50,
        tie_switches=(
            TieSwitchSpec(0, 1, 25),
            TieSwitchSpec(1, 2, 25),
            TieSwitchSpec(2, 0, 25),
            TieSwitchSpec(0, 2, 10),
        ),
        weather_stations=(
            WeatherStationSpec((60.02, 10.00), HOUR),
            WeatherStationSpec((60.18, 10.06), HOUR),
        ),
        days=days,
        seed=seed,
    )


def relationship_grid_spec(days: int = 60, seed: int = 42) -> GridSpec:
    """Demo grid variant for the relationship scenario: the second station is
    nearer to two substations but samples only daily, so the hourly-sampling
    predicate must skip it."""
    spec = demo_grid_spec(days=days, seed=seed)
    return replace(
        spec,
        weather_stations=(
            WeatherStationSpec((60.02, 10.00), HOUR),
            WeatherStationSpec((60.16, 10.03), 24 * HOUR),
        ),
    )


# -- plain-text config ---------------------------------------------------------

def _parse_value(raw: str):
    raw = raw.strip()
    try:
        return int(raw)
    except ValueError:
        pass
    try:
        return float(raw)
    except ValueError:
        return raw


def parse_config(text: str) -> dict:
    """Parse the sectioned key=value format into {section: [dict, ...]}."""
    sections: dict[str, list[dict]] = {}
    current: dict | None = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            name = line[1:-1].strip()
            current = {}
            sections.setdefault(name, []).append(current)
            continue
        if current is None:
            raise InvalidSpec(f"line {lineno}: key outside any section")
        key, sep, raw = line.partition("=")
        if not sep:
            raise InvalidSpec(f"line {lineno}: expected key = value")
        current[key.strip()] = _parse_value(raw)
    return sections


def grid_spec_from_config(text: str) -> tuple[GridSpec, ConsumptionParams]:
    sections = parse_config(text)
    grid_rows = sections.get("grid")
    if not grid_rows:
        raise InvalidSpec("config needs a [grid] section")
    grid = grid_rows[0]
    ties = tuple(
        TieSwitchSpec(int(row["feeder_a"]), int(row["feeder_b"]), int(row["block_size"]))
        for row in sections.get("tie_switch", [])
    )
    stations = tuple(
        WeatherStationSpec(
            (float(row["lat"]), float(row["lon"])),
            int(row.get("sampling_period_hours", 1)) * HOUR,
        )
        for row in sections.get("weather_station", [])
    )
    spec = GridSpec(
        feeders=int(grid["feeders"]),
        meters_per_feeder=int(grid["meters_per_feeder"]),
        tie_switches=ties,
        weather_stations=stations,
        days=int(grid.get("days", 60)),
        seed=int(grid.get("seed", 42)),
    )
    spec.validate()
    params = ConsumptionParams()
    cons_rows = sections.get("consumption")
    if cons_rows:
        row = cons_rows[0]
        profile = params.base_profile
        if "base_profile" in row:
            profile = tuple(float(v) for v in str(row["base_profile"]).split(","))
        params = ConsumptionParams(
            base_profile=profile,
            temp_coeff=float(row.get("temp_coeff", params.temp_coeff)),
            comfort_temp=float(row.get("comfort_temp", params.comfort_temp)),
            noise_sd=float(row.get("noise_sd", params.noise_sd)),
        )
    params.validate()
    return spec, params


def config_text(spec: GridSpec, params: ConsumptionParams) -> str:
    lines = [
        "[grid]",
        f"feeders = {spec.feeders}",
        f"meters_per_feeder = {spec.meters_per_feeder}",
        f"days = {spec.days}",
        f"seed = {spec.seed}",
    ]
    for tie in spec.tie_switches:
        lines += [
            "",
            "[tie_switch]",
            f"feeder_a = {tie.feeder_a}",
            f"feeder_b = {tie.feeder_b}",
            f"block_size = {tie.block_size}",
        ]
    for station in spec.weather_stations:
        lines += [
            "",
            "[weather_station]",
            f"lat = {station.geo[0]!r}",
            f"lon = {station.geo[1]!r}",
            f"sampling_period_hours = {station.sampling_period // HOUR}",
        ]
    lines += [
        "",
        "[consumption]",
        f"temp_coeff = {params.temp_coeff!r}",
        f"comfort_temp = {params.comfort_temp!r}",
        f"noise_sd = {params.noise_sd!r}",
        "base_profile = " + ",".join(repr(v) for v in params.base_profile),
    ]
    return "\n".join(lines) + "\n"
