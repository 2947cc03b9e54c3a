"""Behavior tables for the grid entity kinds.

Handlers are pure: they read their own state and the graph's query surface,
and declare effects through the handler context. Kind-specific tables replace
any conditional on entity type at the dispatch site.
"""

from __future__ import annotations

from ..clock import HOUR
from ..context import RelevancePolicy
from ..errors import NoStateChange
from ..ids import ActorId
from ..propagation import Notification, SwitchToggle
from ..runtime import BehaviorTable, HandlerContext
from .messages import (
    AggregationUpdate,
    DailyReadings,
    DailySamples,
    DrCommand,
    Reading,
    ResolveWeather,
)

# Meter-level series and aggregates are retained at full resolution for the
# whole scenario horizon so historical re-aggregation stays possible.
CONSUMPTION_POLICY = RelevancePolicy(scope=frozenset({"analytics", "billing"}), period=None)
AGGREGATE_POLICY = RelevancePolicy(scope=frozenset({"analytics"}), period=None)
TEMPERATURE_POLICY = RelevancePolicy(scope=frozenset({"analytics"}), period=None)
IDENTITY_POLICY = RelevancePolicy(scope=frozenset({"analytics", "billing"}), period=None)
SWITCH_STATE_POLICY = RelevancePolicy(scope=frozenset({"analytics", "operations"}), period=None)


def _record_and_route(ctx: HandlerContext, t: int, kwh: float) -> dict[ActorId, list[tuple[int, float]]]:
    ctx.append_sample("consumption", kwh, "kWh", t, CONSUMPTION_POLICY)
    routed: dict[ActorId, list[tuple[int, float]]] = {}
    # Credit the reading to the parent that fed this meter when the reading
    # was taken, not whoever feeds it now.
    for parent in ctx.graph.in_neighbors(ctx.actor_id, "feeds", t):
        routed.setdefault(parent, []).append((t, kwh))
    return routed


def meter_reading(ctx: HandlerContext, msg: Reading) -> None:
    for parent, points in sorted(_record_and_route(ctx, msg.t, msg.kwh).items()):
        ctx.send(parent, AggregationUpdate(ctx.actor_id, tuple(points)))


def meter_daily_readings(ctx: HandlerContext, msg: DailyReadings) -> None:
    routed: dict[ActorId, list[tuple[int, float]]] = {}
    for i, kwh in enumerate(msg.samples):
        t = msg.t0 + i * HOUR
        for parent, points in _record_and_route(ctx, t, kwh).items():
            routed.setdefault(parent, []).extend(points)
    for parent in sorted(routed):
        ctx.send(parent, AggregationUpdate(ctx.actor_id, tuple(routed[parent])))


def meter_dr_command(ctx: HandlerContext, msg: DrCommand) -> None:
    commands = ctx.state.get("dr_commands", ())
    ctx.set_state("dr_commands", commands + ((msg.start, msg.end, msg.factor),))


def substation_aggregation(ctx: HandlerContext, msg: AggregationUpdate) -> None:
    for t, kwh in msg.points:
        ctx.series_add("aggregate_consumption", t, kwh)


def substation_notification(ctx: HandlerContext, msg: Notification) -> None:
    if msg.key == "switch_state":
        ctx.set_state("switch_events", ctx.state.get("switch_events", 0) + 1)
    elif msg.key == "temperature":
        t0, resolution, samples = msg.new_value
        for i, temp in enumerate(samples):
            ctx.append_sample(
                "temp_feature",
                temp,
                "C",
                t0 + i * resolution,
                TEMPERATURE_POLICY,
                resolution=resolution,
            )


def substation_resolve_weather(ctx: HandlerContext, msg: ResolveWeather) -> None:
    def samples_fast_enough(attrs) -> bool:
        period = attrs.get("sampling_period")
        return period is not None and period <= msg.max_sampling_period

    best = ctx.graph.find_service(ctx.actor_id, "weather-station", samples_fast_enough, msg.at)
    current = ctx.graph.neighbors(ctx.actor_id, "nearby", msg.at)
    if best is None or current == [best]:
        return
    for station in current:
        ctx.end_edge(ctx.actor_id, station, "nearby", msg.at)
        ctx.unsubscribe(station, "temperature")
    ctx.add_edge(ctx.actor_id, best, "nearby", 1.0, msg.at)
    ctx.subscribe(best, "temperature")
    ctx.set_state("weather_source", str(best))


def switch_toggle(ctx: HandlerContext, msg: SwitchToggle) -> None:
    old_state = ctx.state["state"]
    if old_state == msg.new_state:
        raise NoStateChange(f"{ctx.actor_id} is already {msg.new_state}")
    sub_a = ActorId.parse(ctx.state["substation_a"])
    sub_b = ActorId.parse(ctx.state["substation_b"])
    block = [ActorId.parse(m) for m in ctx.state["block"]]
    donor, receiver = (sub_a, sub_b) if msg.new_state == "closed" else (sub_b, sub_a)
    for meter in block:
        ctx.end_edge(donor, meter, "feeds", msg.at)
        ctx.add_edge(receiver, meter, "feeds", 1.0, msg.at)
    ctx.set_state("state", msg.new_state)
    ctx.put_context("switch_state", msg.new_state, msg.at, SWITCH_STATE_POLICY)
    ctx.publish("switch_state", old_state, msg.new_state)


def station_daily_samples(ctx: HandlerContext, msg: DailySamples) -> None:
    for i, temp in enumerate(msg.samples):
        ctx.append_sample(
            "temperature",
            temp,
            "C",
            msg.t0 + i * msg.resolution,
            TEMPERATURE_POLICY,
            resolution=msg.resolution,
        )
    ctx.publish("temperature", None, (msg.t0, msg.resolution, msg.samples))


METER_TABLE = BehaviorTable(
    "meter",
    {
        Reading: meter_reading,
        DailyReadings: meter_daily_readings,
        DrCommand: meter_dr_command,
    },
)

SUBSTATION_TABLE = BehaviorTable(
    "substation",
    {
        AggregationUpdate: substation_aggregation,
        Notification: substation_notification,
        ResolveWeather: substation_resolve_weather,
    },
)

SWITCH_TABLE = BehaviorTable("switch", {SwitchToggle: switch_toggle})

STATION_TABLE = BehaviorTable("weather-station", {DailySamples: station_daily_samples})

CONSUMER_TABLE = BehaviorTable("consumer", {})

ALL_TABLES = (METER_TABLE, SUBSTATION_TABLE, SWITCH_TABLE, STATION_TABLE, CONSUMER_TABLE)
