"""Grid construction: spawn the actor population and wire the graph.

``build_grid`` produces a :class:`World` holding the runtime, graph, context
store and propagation engine with every substation, meter, switch and weather
station spawned, feeds/connected_to/nearby edges created, and subscriptions
wired (substations subscribe to their switches' state and their nearby
station's temperature).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..clock import DAY, HOUR, VirtualClock
from ..context import ContextStore, TimeSeriesSegment
from ..graph import GraphRegistry
from ..ids import ActorId
from ..propagation import PropagationEngine, ensure_aggregate_series
from ..recordio import RecordLog
from ..runtime import ActorRuntime
from . import synth
from .behaviors import AGGREGATE_POLICY, ALL_TABLES
from .config import ConsumptionParams, GridSpec
from .costmodel import CostModel
from .messages import DailyReadings, DailySamples


@dataclass
class World:
    spec: GridSpec
    params: ConsumptionParams
    clock: VirtualClock
    runtime: ActorRuntime
    graph: GraphRegistry
    store: ContextStore
    engine: PropagationEngine
    cost_model: CostModel
    substations: list[ActorId] = field(default_factory=list)
    meters: list[ActorId] = field(default_factory=list)
    meters_by_feeder: list[list[ActorId]] = field(default_factory=list)
    switches: list[ActorId] = field(default_factory=list)
    stations: list[ActorId] = field(default_factory=list)
    truth_weather: dict[ActorId, np.ndarray] = field(default_factory=dict)
    truth_consumption: dict[ActorId, np.ndarray] = field(default_factory=dict)
    meter_station: dict[ActorId, ActorId] = field(default_factory=dict)

    def substation_of_feeder(self, feeder: int) -> ActorId:
        return self.substations[feeder]

    def generate_truth(self, days: int | None = None) -> None:
        """Precompute ground-truth weather and consumption series.

        Each meter's consumption is driven by the station that was the nearby
        provider of its feeder's substation when the grid was built.
        """
        days = days if days is not None else self.spec.days
        seed = self.spec.seed
        for station in self.stations:
            if station not in self.truth_weather:
                segment = synth.synth_weather(station, days, seed)
                self.truth_weather[station] = np.asarray(segment.samples)
        for feeder, meters in enumerate(self.meters_by_feeder):
            substation = self.substations[feeder]
            nearby = self.graph.neighbors(substation, "nearby", 0)
            station = nearby[0] if nearby else self.stations[0]
            weather = TimeSeriesSegment(
                0, HOUR, [float(v) for v in self.truth_weather[station]], "C"
            )
            for meter in meters:
                if meter in self.truth_consumption:
                    continue
                segment = synth.synth_consumption(meter, weather, self.params, seed)
                self.truth_consumption[meter] = np.asarray(segment.samples)
                self.meter_station[meter] = station

    def prepare_aggregates(self, days: int | None = None) -> None:
        days = days if days is not None else self.spec.days
        for substation in self.substations:
            ensure_aggregate_series(self.store, substation, 0, days * 24, AGGREGATE_POLICY)

    def add_station(self, local_id: str, geo: tuple[float, float], sampling_period: int, at: int) -> ActorId:
        station = self.runtime.spawn(
            "weather-station",
            local_id,
            {},
            node_attrs={"geo": geo, "sampling_period": sampling_period},
        )
        self.stations.append(station)
        segment = synth.synth_weather(station, self.spec.days, self.spec.seed)
        self.truth_weather[station] = np.asarray(segment.samples)
        return station

    # -- scripted physical-world feeds ----------------------------------------

    def inject_weather_day(self, day: int) -> None:
        for station in self.stations:
            node = self.graph.node(station)
            if node.created_at > day * DAY:
                continue
            period = node.attrs["sampling_period"]
            step = period // HOUR
            hours = range(day * 24, (day + 1) * 24, step)
            samples = tuple(float(self.truth_weather[station][h]) for h in hours)
            self.runtime.inject(
                station,
                DailySamples(day, day * DAY, period, samples),
                at=(day + 1) * DAY,
            )

    def inject_readings_day(self, day: int) -> None:
        for meter in self.meters:
            series = self.truth_consumption[meter]
            samples = tuple(float(v) for v in series[day * 24 : (day + 1) * 24])
            self.runtime.inject(
                meter,
                DailyReadings(day, day * DAY, samples),
                at=(day + 1) * DAY,
            )


def build_grid(
    spec: GridSpec,
    params: ConsumptionParams | None = None,
    *,
    hot_min: float = 2.0,
    cold_max: float = 0.25,
    hot_cap_bytes: int = 64 * 1024 * 1024,
    snapshot_path: str | None = None,
    graph_log_path: str | None = None,
) -> World:
    """Spawn the actor population for ``spec`` and wire the relationship graph."""
    spec.validate()
    params = params if params is not None else ConsumptionParams()
    params.validate()

    clock = VirtualClock()
    graph = GraphRegistry(log=RecordLog(graph_log_path) if graph_log_path else None)
    runtime = ActorRuntime(clock, graph=graph, snapshot_log=RecordLog(snapshot_path))
    store = ContextStore(
        clock,
        hot_min=hot_min,
        cold_max=cold_max,
        hot_cap_bytes=hot_cap_bytes,
        owner_exists=runtime.has_actor,
    )
    runtime.context_store = store
    engine = PropagationEngine(runtime)
    cost_model = CostModel()
    runtime.cost_model = cost_model
    for table in ALL_TABLES:
        runtime.register_behavior(table)

    world = World(
        spec=spec,
        params=params,
        clock=clock,
        runtime=runtime,
        graph=graph,
        store=store,
        engine=engine,
        cost_model=cost_model,
    )

    # Substations sit on a line of latitude; geos only drive nearest-station
    # discovery, so any stable layout works.
    for feeder in range(spec.feeders):
        substation = runtime.spawn(
            "substation",
            f"s-{feeder:02d}",
            {"feeder": feeder},
            node_attrs={"geo": (60.0 + 0.1 * feeder, 10.0)},
        )
        world.substations.append(substation)

    index = 0
    for feeder in range(spec.feeders):
        feeder_meters: list[ActorId] = []
        for _ in range(spec.meters_per_feeder):
            meter = runtime.spawn(
                "meter",
                f"m-{index:04d}",
                {"unit": "kWh", "feeder": feeder},
                node_attrs={"feeder": feeder},
            )
            feeder_meters.append(meter)
            index += 1
        world.meters.extend(feeder_meters)
        world.meters_by_feeder.append(feeder_meters)
        substation = world.substations[feeder]
        for meter in feeder_meters:
            graph.add_edge(substation, meter, "feeds", 1.0, 0)

    for j, station_spec in enumerate(spec.weather_stations):
        station = runtime.spawn(
            "weather-station",
            f"ws-{j:02d}",
            {},
            node_attrs={
                "geo": station_spec.geo,
                "sampling_period": station_spec.sampling_period,
            },
        )
        world.stations.append(station)

    blocks = spec.block_allocations()
    for k, tie in enumerate(spec.tie_switches):
        start, end = blocks[k]
        block = world.meters_by_feeder[tie.feeder_a][start:end]
        sub_a = world.substations[tie.feeder_a]
        sub_b = world.substations[tie.feeder_b]
        switch = runtime.spawn(
            "switch",
            f"sw-{k:02d}",
            {
                "state": "open",
                "substation_a": str(sub_a),
                "substation_b": str(sub_b),
                "block": tuple(str(m) for m in block),
            },
        )
        world.switches.append(switch)
        graph.add_edge(switch, sub_a, "connected_to", 1.0, 0)
        graph.add_edge(switch, sub_b, "connected_to", 1.0, 0)
        graph.subscribe(sub_a, switch, "switch_state")
        graph.subscribe(sub_b, switch, "switch_state")

    def hourly_or_faster(attrs) -> bool:
        period = attrs.get("sampling_period")
        return period is not None and period <= HOUR

    for substation in world.substations:
        station = graph.find_service(substation, "weather-station", hourly_or_faster, 0)
        if station is not None:
            graph.add_edge(substation, station, "nearby", 1.0, 0)
            graph.subscribe(substation, station, "temperature")

    return world


def expected_node_count(spec: GridSpec) -> int:
    return spec.actor_count()


def expected_edge_count(spec: GridSpec) -> int:
    """feeds (one per meter) + connected_to (two per switch) + nearby (one per
    feeder, provided a qualifying station exists)."""
    has_hourly = any(s.sampling_period <= HOUR for s in spec.weather_stations)
    nearby = spec.feeders if has_hourly else 0
    return spec.feeders * spec.meters_per_feeder + 2 * len(spec.tie_switches) + nearby
