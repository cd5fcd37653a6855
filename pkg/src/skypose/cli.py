"""``skypose`` command line: simulate scenarios, track them, aggregate results.

Exit codes: 0 success, 2 config error, 3 data error, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import io
from .errors import ConfigError, DataError, FilterError, GeometryError, TrackingError
from .evaluation import AGGREGATE_FIELDS, MethodSummary, RunReport, aggregate
from .filter import FilterConfig
from .observation import Untrackable
from .pipeline import METHODS, PipelineConfig, noisy_vision, run_methods, track_vision
from .simulator import make_trajectory, render_mask, simulate_barometer, simulate_imu

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4

FRAMES_FILE = "frames.csv"
SUMMARY_FILE = "summary.csv"
EVENTS_FILE = "events.log"
AGGREGATE_FILE = "aggregate.csv"
PLOT_FILE = "plot_data.csv"
PLOT_HEADER = ("method", "metric", "rank", "value")

log = logging.getLogger(__name__)


def simulate_scenario(config: io.ScenarioConfig, out_dir) -> Path:
    """Generate truth, masks, IMU and barometer streams into ``out_dir/<name>``."""
    traj = make_trajectory(config.pattern, math.radians(config.speed_deg_s), config.duration_s,
                           config.rate_hz, config.seed, config.altitude_m)
    K = config.intrinsics
    masks = [render_mask(traj.orientation(i), K, config.size) for i in range(len(traj))]
    noise = config.noise_model()
    imu = simulate_imu(traj, noise)
    baro = simulate_barometer(traj, noise)
    return io.write_scenario(Path(out_dir) / config.name, config, traj, imu, baro, masks)


def parse_methods(text: str) -> list[str]:
    names = [m.strip() for m in text.split(",") if m.strip()]
    bad = [m for m in names if m not in METHODS]
    if bad:
        raise ConfigError(f"unknown method(s) {bad}; choose from {','.join(METHODS)}")
    if len(set(names)) != len(names):
        raise ConfigError("methods listed more than once")
    return names


def track_scenario(scenario: io.Scenario, methods, seed: int) -> tuple[RunReport, list[str]]:
    """Run each method over a loaded scenario; returns the report and event log lines."""
    cfg = scenario.config
    truth = scenario.truth
    report = RunReport(truth.t, truth.roll, truth.pitch)
    events: list[str] = []
    if not methods:
        return report, events
    pipe = PipelineConfig(
        filter=FilterConfig(seed=seed),
        skyline_sigma=math.radians(cfg.skyline_sigma_deg),
        ground_sigma=math.radians(cfg.ground_sigma_deg),
    )
    sky = ground = [None] * len(truth)
    if set(methods) & {"skyline", "ground", "fusion"}:
        sky, ground = track_vision(scenario.masks, truth.t, scenario.baro[:, 1], cfg.intrinsics, pipe)
        for obs in (*sky, *ground):
            if isinstance(obs, Untrackable):
                events.append(f"t={obs.timestamp:.3f}: {obs.source.value} untrackable: {obs.reason}")
        sky, ground = noisy_vision(sky, ground, pipe, seed)

    filters = []

    def keep_filter(pf, _est):
        if not filters:
            filters.append(pf)

    tracks = run_methods(methods, scenario.imu, sky, ground, pipe, on_fusion_step=keep_filter)
    for name in methods:
        report.add(name, tracks[name])
    for pf in filters:
        events.extend(f"fusion: {e}" for e in pf.events)
    return report, events


def write_report(report: RunReport, events, out_dir) -> Path:
    d = Path(out_dir)
    d.mkdir(parents=True, exist_ok=True)
    io.write_csv(d / FRAMES_FILE, report.frame_header(), report.frame_rows())
    io.write_csv(d / SUMMARY_FILE, MethodSummary.FIELDS, (s.row() for s in report.summaries.values()))
    (d / EVENTS_FILE).write_text("".join(e + "\n" for e in events))
    return d


def report_runs(paths, out_dir) -> Path:
    runs = []
    for p in paths:
        header, rows = io.read_rows(p)
        if tuple(header) != MethodSummary.FIELDS:
            raise DataError(f"{p}: not a summary CSV (expected header {','.join(MethodSummary.FIELDS)})")
        for row in rows:
            for key in MethodSummary.FIELDS[1:]:
                try:
                    if not math.isfinite(float(row[key])):
                        raise ValueError
                except (TypeError, ValueError):
                    raise DataError(f"{p}: bad value {row[key]!r} in column {key}") from None
        runs.append(rows)
    table = aggregate(runs)
    plot = []
    by_key: dict = {}
    for run in runs:
        for row in run:
            for metric in ("rmse_roll", "rmse_pitch"):
                by_key.setdefault((row["method"], metric), []).append(float(row[metric]))
    for (method, metric), values in sorted(by_key.items()):
        plot.extend((method, metric, k, v) for k, v in enumerate(sorted(values)))
    d = Path(out_dir)
    d.mkdir(parents=True, exist_ok=True)
    io.write_csv(d / AGGREGATE_FILE, AGGREGATE_FIELDS, table)
    io.write_csv(d / PLOT_FILE, PLOT_HEADER, plot)
    return d


def _cmd_simulate(args) -> int:
    if not args.config:
        raise ConfigError("simulate needs --config")
    config = io.load_config(args.config)
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    path = simulate_scenario(config, args.out or ".")
    print(path)
    return EXIT_OK


def _cmd_track(args) -> int:
    if not args.scenario_dir:
        raise ConfigError("track needs --scenario-dir")
    methods = parse_methods(args.methods)
    scenario = io.read_scenario(args.scenario_dir)
    seed = scenario.config.seed if args.seed is None else args.seed
    report, events = track_scenario(scenario, methods, seed)
    out = write_report(report, events, args.out or Path(args.scenario_dir) / "results")
    for s in report.summaries.values():
        print(f"{s.method}: rmse_roll={s.rmse_roll:.6f} rmse_pitch={s.rmse_pitch:.6f} "
              f"failure={int(s.failure)}")
    print(out)
    return EXIT_OK


def _cmd_report(args) -> int:
    if not args.runs:
        raise ConfigError("report needs at least one summary CSV")
    print(report_runs(args.runs, args.out or "."))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="skypose", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log filter events to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="generate a scenario directory from a config file")
    s.add_argument("--config", help="flat key = value scenario config")
    s.add_argument("--out", help="parent directory for the scenario (default: .)")
    s.add_argument("--seed", type=int, help="override the config seed")
    s.set_defaults(func=_cmd_simulate)

    t = sub.add_parser("track", help="run methods over a scenario and write frame/summary CSVs")
    t.add_argument("--scenario-dir", help="directory written by 'simulate'")
    t.add_argument("--methods", default=",".join(METHODS),
                   help=f"comma-separated subset of {','.join(METHODS)}; empty for none")
    t.add_argument("--out", help="output directory (default: <scenario-dir>/results)")
    t.add_argument("--seed", type=int, help="seed for vision noise and the filter (default: config seed)")
    t.set_defaults(func=_cmd_track)

    r = sub.add_parser("report", help="aggregate summary CSVs of several runs")
    r.add_argument("runs", nargs="*", help="summary.csv files")
    r.add_argument("--out", help="output directory (default: .)")
    r.set_defaults(func=_cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        with np.errstate(invalid="raise", divide="raise", over="raise"):
            return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (FilterError, GeometryError, TrackingError, FloatingPointError, ArithmeticError) as exc:
        print(f"numeric failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
