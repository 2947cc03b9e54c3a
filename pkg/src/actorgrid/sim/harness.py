"""Placement evaluation, cost evaluation, and the full reference run.

``run_all`` builds the demo grid, runs all four drift scenarios,
computes and evaluates a silo placement, charges a recorded message trace
against the latency model, and writes one report file per step plus a
summary. It also asserts that the run collectively touched every public
operation of the core modules.
"""

from __future__ import annotations

import statistics
from dataclasses import dataclass, field, replace
from pathlib import Path

from .. import telemetry
from ..clock import HOUR
from ..graph import dump_text
from ..ids import ActorId
from ..placement import (
    Assignment,
    brute_force_partition,
    cut_weight,
    partition,
    random_balanced_assignment,
    rebalance,
)
from . import seriesio
from .config import ConsumptionParams, GridSpec, config_text, demo_grid_spec
from .costmodel import CostModel, cost_report
from .report import ScenarioReport, fmt
from .scenarios import SCENARIO_NAMES, ScenarioConfig, drive, run_scenario
from .synth import synth_weather
from .world import build_grid, expected_edge_count, expected_node_count

PLACEMENT_TYPE_FILTER = ("feeds", "measures")
CONTROL_TYPE_FILTER = ("connected_to", "nearby")

# Every public operation of the core modules; the four scenarios plus the
# placement and cost steps must collectively invoke all of them.
REQUIRED_OPS = (
    "runtime.spawn",
    "runtime.send",
    "runtime.dispatch",
    "runtime.deactivate_idle",
    "runtime.activate",
    "runtime.persist_snapshot",
    "context.put",
    "context.get",
    "context.record_access",
    "context.classify_temperature",
    "context.maintain",
    "context.downsample",
    "graph.add_edge",
    "graph.end_edge",
    "graph.neighbors",
    "graph.traverse",
    "graph.find_service",
    "graph.subscribe",
    "graph.snapshot_at",
    "placement.partition",
    "placement.cut_weight",
    "placement.brute_force_partition",
    "placement.rebalance",
    "propagation.publish",
    "propagation.propagate_topology_change",
    "propagation.reaggregate",
)


def build_report(spec: GridSpec) -> ScenarioReport:
    """Build the grid and check the population against closed-form counts."""
    report = ScenarioReport("build")
    world = build_grid(spec)
    report.config_echo = [
        ("feeders", str(spec.feeders)),
        ("meters_per_feeder", str(spec.meters_per_feeder)),
        ("tie_switches", str(len(spec.tie_switches))),
        ("weather_stations", str(len(spec.weather_stations))),
        ("seed", str(spec.seed)),
    ]
    view = world.graph.snapshot_at(0)
    report.check(
        "node_count_matches_spec_formula",
        len(view.nodes) == expected_node_count(spec),
        f"nodes={len(view.nodes)} expected={expected_node_count(spec)}",
    )
    report.check(
        "edge_count_matches_spec_formula",
        len(view.edges) == expected_edge_count(spec),
        f"edges={len(view.edges)} expected={expected_edge_count(spec)}",
    )
    subscribed = all(
        world.graph.subscribers_of(switch, "switch_state") for switch in world.switches
    )
    report.check("substations_subscribe_to_their_switches", subscribed)
    report.metric("actors", len(view.nodes))
    report.metric("edges", len(view.edges))
    return report


def place_report(
    spec: GridSpec, seed: int, k: int, balance_tol: float
) -> tuple[ScenarioReport, Assignment]:
    """Partition the demo grid, compare against the exhaustive oracle on the
    small control subgraph, and rebalance after growing the grid by a feeder."""
    report = ScenarioReport("place")
    report.config_echo = [
        ("seed", str(seed)),
        ("k", str(k)),
        ("balance_tol", fmt(balance_tol)),
        ("type_filter", ",".join(PLACEMENT_TYPE_FILTER)),
    ]
    world = build_grid(spec)
    view = world.graph.snapshot_at(0)
    assignment, cut = partition(view, k, PLACEMENT_TYPE_FILTER, balance_tol, seed)
    cap = -(-len(view.nodes) // k) * (1 + balance_tol) + 1e-9
    report.check(
        "silo_sizes_within_balance_tolerance",
        max(assignment.sizes()) <= cap and min(assignment.sizes()) > 0,
        f"sizes={','.join(str(s) for s in assignment.sizes())}",
    )
    report.check(
        "refinement_trace_strictly_decreasing",
        all(b < a for a, b in zip(cut.objective_trace, cut.objective_trace[1:])),
        f"passes={len(cut.objective_trace)}",
    )
    recomputed = cut_weight(view, assignment, PLACEMENT_TYPE_FILTER)
    report.check(
        "cut_weight_recomputable_exactly",
        recomputed == cut.cut_weight,
        f"cut={cut.cut_weight!r}",
    )

    control_nodes = world.substations + world.switches + world.stations
    control = view.induced(control_nodes)
    heur_assignment, heur_cut = partition(control, 2, CONTROL_TYPE_FILTER, 0.0, seed)
    _oracle_assignment, oracle_cut = brute_force_partition(control, 2, CONTROL_TYPE_FILTER, 0.0)
    report.check(
        "control_subgraph_cut_within_1_5x_of_oracle",
        oracle_cut <= heur_cut.cut_weight <= 1.5 * oracle_cut,
        f"heuristic={heur_cut.cut_weight!r} oracle={oracle_cut!r}",
    )

    grown_spec = replace(spec, feeders=spec.feeders + 1)
    grown = build_grid(grown_spec)
    grown_view = grown.graph.snapshot_at(0)
    rebalanced, reb_cut = rebalance(
        grown_view, assignment, move_budget=60, type_filter=PLACEMENT_TYPE_FILTER, balance_tol=balance_tol
    )
    random_cuts = [
        cut_weight(
            grown_view,
            random_balanced_assignment(grown_view.nodes, k, seed * 1000 + i),
            PLACEMENT_TYPE_FILTER,
        )
        for i in range(100)
    ]
    mean_random = statistics.fmean(random_cuts)
    report.check(
        "rebalanced_cut_beats_mean_random_assignment",
        reb_cut.cut_weight <= mean_random,
        f"rebalanced={reb_cut.cut_weight!r} random_mean={mean_random!r}",
    )

    report.metric("cut_weight", cut.cut_weight)
    report.metric("silo_sizes", ",".join(str(s) for s in assignment.sizes()))
    report.metric("control_heuristic_cut", heur_cut.cut_weight)
    report.metric("control_oracle_cut", oracle_cut)
    report.metric("rebalanced_cut", reb_cut.cut_weight)
    report.metric("random_mean_cut", mean_random)
    return report, assignment


def cost_trace(
    spec: GridSpec, assignment: Assignment, trace_days: int = 10
) -> list[tuple]:
    """Record a message trace by driving the demo grid for ``trace_days``."""
    trace_spec = replace(spec, days=trace_days)
    world = build_grid(trace_spec)
    world.runtime.assignment = assignment.silos
    world.generate_truth()
    world.prepare_aggregates()
    drive(world, trace_days, readings=True, weather=True)
    world.runtime.deactivate_idle(0)
    return list(world.runtime.trace)


def cost_report_step(
    spec: GridSpec, seed: int, k: int, balance_tol: float, trace_days: int = 10
) -> ScenarioReport:
    report = ScenarioReport("cost")
    report.config_echo = [
        ("seed", str(seed)),
        ("k", str(k)),
        ("balance_tol", fmt(balance_tol)),
        ("trace_days", str(trace_days)),
    ]
    world = build_grid(spec)
    view = world.graph.snapshot_at(0)
    assignment, _cut = partition(view, k, PLACEMENT_TYPE_FILTER, balance_tol, seed)
    trace = cost_trace(spec, assignment, trace_days)
    model = CostModel()
    placed = cost_report(trace, assignment, model)
    random_totals = [
        cost_report(trace, random_balanced_assignment(view.nodes, k, seed * 7777 + i), model).total_ns
        for i in range(100)
    ]
    mean_random = statistics.fmean(random_totals)
    report.check(
        "partitioned_latency_strictly_below_random_mean",
        placed.total_ns < mean_random,
        f"partitioned={placed.total_ns} random_mean={mean_random!r}",
    )
    report.check(
        "charges_use_latency_table_constants",
        (model.local_ref, model.cross_silo_rtt, model.disk_seek, model.net_1k, model.ssd_4k)
        == (100, 500_000, 10_000_000, 10_000, 150_000),
    )
    report.metric("total_ns", placed.total_ns)
    report.metric("messages", placed.message_count)
    report.metric("cross_silo_messages", placed.cross_silo_count)
    report.metric("snapshots", placed.snapshot_count)
    report.metric("per_silo_messages", ",".join(str(c) for c in placed.per_silo_messages))
    report.metric("random_mean_total_ns", mean_random)
    report.metric("local_ref_ns", model.local_ref)
    report.metric("cross_silo_rtt_ns", model.cross_silo_rtt)
    report.metric("disk_seek_ns", model.disk_seek)
    return report


@dataclass
class RunResult:
    reports: dict[str, ScenarioReport] = field(default_factory=dict)
    files: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(report.passed for report in self.reports.values())


def run_all(
    out_dir: str | Path,
    seed: int,
    *,
    k: int = 3,
    balance_tol: float = 0.1,
    hot_min: float = 2.0,
    cold_max: float = 0.25,
    half_life: int = 24 * HOUR,
    params: ConsumptionParams | None = None,
) -> RunResult:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    params = params if params is not None else ConsumptionParams()
    result = RunResult()
    before = telemetry.snapshot()

    def emit(name: str, report: ScenarioReport) -> None:
        result.reports[name] = report
        path = out / f"{name}.report.txt"
        path.write_text(report.to_text())
        result.files.append(path.name)

    spec = demo_grid_spec(seed=seed)
    emit("build", build_report(spec))
    (out / "grid.graph").write_text(dump_text(build_grid(spec).graph))
    result.files.append("grid.graph")
    (out / "grid.config").write_text(config_text(spec, params))
    result.files.append("grid.config")
    station = ActorId("weather-station", "ws-00")
    (out / "weather_ws-00.csv").write_text(
        seriesio.segment_to_csv(synth_weather(station, 10, seed))
    )
    result.files.append("weather_ws-00.csv")

    for name in SCENARIO_NAMES:
        config = ScenarioConfig(
            seed=seed,
            params=params,
            hot_min=hot_min,
            cold_max=cold_max,
            half_life=half_life,
        )
        emit(name, run_scenario(name, config))

    place, assignment = place_report(spec, seed, k, balance_tol)
    emit("place", place)
    (out / "assignment.tsv").write_text(assignment.to_text())
    result.files.append("assignment.tsv")

    emit("cost", cost_report_step(spec, seed, k, balance_tol))

    touched = telemetry.ops_since(before)
    missing = sorted(set(REQUIRED_OPS) - touched)
    summary = ScenarioReport("summary")
    summary.config_echo = [("seed", str(seed)), ("k", str(k)), ("balance_tol", fmt(balance_tol))]
    for name, report in result.reports.items():
        summary.check(f"step_{name}", report.passed)
    summary.check(
        "scenarios_cover_all_module_operations",
        not missing,
        f"missing={','.join(missing) if missing else 'none'}",
    )
    summary.metric("operations_touched", len(touched & set(REQUIRED_OPS)))
    summary.metric("operations_required", len(REQUIRED_OPS))
    emit("summary", summary)
    return result
