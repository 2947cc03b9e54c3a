"""Command-line entry point.

Subcommands::

    actorgrid build    --out DIR [--spec CONFIG]
    actorgrid scenario --name NAME --seed N --out DIR [options]
    actorgrid place    --seed N --out DIR [--k K] [--balance-tol T]
    actorgrid cost     --seed N --out DIR [--k K] [--balance-tol T]
    actorgrid all      --seed N --out DIR [options]

Exit codes: 0 when every assertion passed, 1 when at least one failed,
2 on a usage or config error. Reports are the only data output and contain no
wall-clock content, so identical invocations produce identical bytes.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .clock import HOUR
from .errors import ActorGridError
from .sim import harness
from .sim.config import ConsumptionParams, demo_grid_spec, grid_spec_from_config
from .sim.scenarios import SCENARIO_NAMES, ScenarioConfig, default_spec, run_scenario

EXIT_OK = 0
EXIT_ASSERTION_FAILED = 1
EXIT_USAGE = 2


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="actorgrid",
        description="Virtual-actor smart-grid analytics: scenarios, placement, cost reports.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--spec", help="grid config file (key = value sections)")
        p.add_argument("--config", help="run config file; explicit flags win on conflict")
        p.add_argument("--seed", type=int, help="deterministic run seed")
        p.add_argument("--out", default="out", help="report output directory")
        p.add_argument("--k", type=int, help="silo count (default 3)")
        p.add_argument("--balance-tol", type=float, help="partition balance tolerance (default 0.1)")
        p.add_argument("--hot-min", type=float, help="hot-tier intensity threshold (default 2.0)")
        p.add_argument("--cold-max", type=float, help="cold-tier intensity threshold (default 0.25)")
        p.add_argument("--half-life", type=float, help="intensity half-life in hours (default 24)")

    common(sub.add_parser("build", help="build the grid and check population counts"))
    scenario = sub.add_parser("scenario", help="run one drift scenario")
    common(scenario)
    scenario.add_argument("--name", required=True, help=f"one of {', '.join(SCENARIO_NAMES)}")
    common(sub.add_parser("place", help="partition the grid and evaluate the cut"))
    common(sub.add_parser("cost", help="charge a recorded trace against the latency model"))
    common(sub.add_parser("all", help="build, all scenarios, placement and cost reports"))
    return parser


def _load_run_config(path: str) -> dict:
    from .sim.config import parse_config

    sections = parse_config(Path(path).read_text())
    rows = sections.get("run")
    return dict(rows[0]) if rows else {}


def _merged(args: argparse.Namespace, key: str, default):
    flag = getattr(args, key, None)
    if flag is not None:
        return flag
    if getattr(args, "config", None):
        value = _load_run_config(args.config).get(key)
        if value is not None:
            return type(default)(value) if default is not None else value
    return default


def run(argv: list[str] | None = None) -> int:
    parser = _parser()
    args = parser.parse_args(argv)

    try:
        seed = _merged(args, "seed", None)
        k = _merged(args, "k", 3)
        balance_tol = _merged(args, "balance_tol", 0.1)
        hot_min = _merged(args, "hot_min", 2.0)
        cold_max = _merged(args, "cold_max", 0.25)
        half_life = int(_merged(args, "half_life", 24.0) * HOUR)
        out = Path(args.out)

        if args.command != "build" and seed is None:
            parser.error("--seed is required for this command")

        params = ConsumptionParams()
        spec = None
        if args.spec:
            spec, params = grid_spec_from_config(Path(args.spec).read_text())

        if args.command == "build":
            out.mkdir(parents=True, exist_ok=True)
            build_spec = spec if spec is not None else demo_grid_spec(seed=seed if seed is not None else 42)
            report = harness.build_report(build_spec)
            (out / "build.report.txt").write_text(report.to_text())
            from .graph import dump_text
            from .sim.world import build_grid

            (out / "grid.graph").write_text(dump_text(build_grid(build_spec).graph))
            print(f"build: {'PASS' if report.passed else 'FAIL'}")
            return EXIT_OK if report.passed else EXIT_ASSERTION_FAILED

        if args.command == "scenario":
            if args.name not in SCENARIO_NAMES:
                parser.error(f"unknown scenario {args.name!r}; pick one of {', '.join(SCENARIO_NAMES)}")
            out.mkdir(parents=True, exist_ok=True)
            config = ScenarioConfig(
                seed=seed,
                spec=spec if spec is not None else default_spec(args.name, seed),
                params=params,
                hot_min=hot_min,
                cold_max=cold_max,
                half_life=half_life,
            )
            report = run_scenario(args.name, config)
            (out / f"{args.name}.report.txt").write_text(report.to_text())
            print(f"scenario {args.name}: {'PASS' if report.passed else 'FAIL'}")
            return EXIT_OK if report.passed else EXIT_ASSERTION_FAILED

        if args.command == "place":
            out.mkdir(parents=True, exist_ok=True)
            place_spec = spec if spec is not None else demo_grid_spec(seed=seed)
            report, assignment = harness.place_report(place_spec, seed, k, balance_tol)
            (out / "place.report.txt").write_text(report.to_text())
            (out / "assignment.tsv").write_text(assignment.to_text())
            print(f"place: {'PASS' if report.passed else 'FAIL'}")
            return EXIT_OK if report.passed else EXIT_ASSERTION_FAILED

        if args.command == "cost":
            out.mkdir(parents=True, exist_ok=True)
            cost_spec = spec if spec is not None else demo_grid_spec(seed=seed)
            report = harness.cost_report_step(cost_spec, seed, k, balance_tol)
            (out / "cost.report.txt").write_text(report.to_text())
            print(f"cost: {'PASS' if report.passed else 'FAIL'}")
            return EXIT_OK if report.passed else EXIT_ASSERTION_FAILED

        # all
        result = harness.run_all(
            out,
            seed,
            k=k,
            balance_tol=balance_tol,
            hot_min=hot_min,
            cold_max=cold_max,
            half_life=half_life,
            params=params,
        )
        for name, report in result.reports.items():
            print(f"{name}: {'PASS' if report.passed else 'FAIL'}")
        return EXIT_OK if result.passed else EXIT_ASSERTION_FAILED

    except ActorGridError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
