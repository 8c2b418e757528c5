#!/usr/bin/env python3
"""
Command-line harness for capture simulations.

Commands:
  run        simulate the configured populations and write statistics
  sweep      repeat a run over the values of one parameter
  calibrate  find the flow rate giving a target capture fraction
  fieldmap   write the single-wire force on a polar grid

Without a scenario file the bundled default scenario is used.

Exit codes:
  0: Success
  2: Invalid configuration, unresolvable sweep parameter or infeasible calibration bracket
  3: Failure while simulating or writing results

Usage:
  magsep run scenario.json --out results/
  magsep sweep scenario.json --param fluid.flow_rate --values "0.3 ml/h,0.7 ml/h" --out sweep/
  magsep calibrate scenario.json --target 0.95 --bracket "0.1 ml/h,2 ml/h"
  magsep fieldmap --species RBC-deoxy --out fieldmap.csv
"""

from __future__ import annotations

import argparse
from collections.abc import Callable, Sequence
from dataclasses import dataclass, replace
import json
import logging
import math
from pathlib import Path
from typing import Any

import numpy as np
import voluptuous as vol

from .config import ScenarioConfig, apply_parameter, bundled_document, load_config, read_document
from .const import (
    CALIBRATION_MIN_RELATIVE_WIDTH,
    CONF_COUNT,
    CONF_POPULATIONS,
    DEFAULT_CALIBRATION_TOLERANCE,
    FILE_CALIBRATION,
    FILE_SWEEP,
    FILE_SWEEP_STATS,
    RBC_DEOXY_LABEL,
    REFERENCE_TRAPPING_EFFICIENCY,
    CaptureRule,
    ExitCode,
)
from .ensemble import EnsembleStats, compare_species, run_ensemble, stats_to_dict
from .exceptions import CalibrationInfeasibleError, InvalidConfig
from .export import write_fieldmap, write_separation, write_stats, write_sweep, write_trajectories
from .magnetics import force_map
from .support import handle_magsep_errors, parse_quantity, write_json

_LOGGER = logging.getLogger(__name__)

Evaluator = Callable[[float], tuple[float, float, float]]


@dataclass(frozen=True, kw_only=True, slots=True)
class SweepSpec:
    """One swept parameter."""

    parameter: str
    values: tuple[Any, ...]
    count: int | None = None


@dataclass(frozen=True, kw_only=True, slots=True)
class CalibrationResult:
    """Outcome of a flow-rate calibration."""

    flow_rate: float
    estimate: float
    ci_low: float
    ci_high: float
    target: float
    iterations: int
    bracket: tuple[float, float]


def _load_document(config_path: Path | None) -> dict[str, Any]:
    return bundled_document() if config_path is None else read_document(config_path)


def _log_calibration_report(stats: EnsembleStats, rule: CaptureRule) -> None:
    if (entry := stats.species.get(RBC_DEOXY_LABEL)) is None:
        return
    _LOGGER.info(
        "%s capture fraction %.3f (CI %.3f-%.3f, %s rule) against reference trapping %.2f: gap %+.3f",
        RBC_DEOXY_LABEL,
        entry.capture_fraction,
        entry.ci_low,
        entry.ci_high,
        rule.value,
        REFERENCE_TRAPPING_EFFICIENCY,
        entry.capture_fraction - REFERENCE_TRAPPING_EFFICIENCY,
    )


def _run(config: ScenarioConfig, workers: int | None, *, trajectory_cap: int = 0) -> EnsembleStats:
    return run_ensemble(
        config.to_populations(),
        config.to_scenario(),
        config.master_seed,
        workers=workers,
        trajectory_cap=trajectory_cap,
    )


@handle_magsep_errors
def cmd_run(config_path: Path | None, output_dir: Path, workers: int | None = None) -> int:
    """Run the configured populations and write all result files."""
    config = load_config(_load_document(config_path))
    stats = _run(config, workers, trajectory_cap=config.trajectory_cap)
    write_stats(output_dir, stats)
    if len(stats.species) >= 2:
        labels = list(stats.species)
        captured, passed = (
            (RBC_DEOXY_LABEL, next(label for label in labels if label != RBC_DEOXY_LABEL))
            if RBC_DEOXY_LABEL in stats.species
            else (labels[0], labels[1])
        )
        write_separation(output_dir, compare_species(stats, captured, passed))
    if config.trajectory_cap > 0:
        trajectories = [t for group in stats.trajectories.values() for t in group]
        write_trajectories(output_dir, trajectories, config.trajectory_cap)
    _log_calibration_report(stats, config.limits.capture_rule)
    _LOGGER.info("Results written to %s", output_dir)
    return ExitCode.SUCCESS


def _with_count(document: dict[str, Any], count: int | None) -> dict[str, Any]:
    if count is None:
        return document
    for population in document.get(CONF_POPULATIONS, []):
        population[CONF_COUNT] = count
    return document


@handle_magsep_errors
def cmd_sweep(config_path: Path | None, sweep: SweepSpec, output_dir: Path, workers: int | None = None) -> int:
    """Run one ensemble per swept value and write sweep.csv in input order."""
    base = _load_document(config_path)
    configs = [
        load_config(_with_count(apply_parameter(base, sweep.parameter, value), sweep.count)) for value in sweep.values
    ]
    rows: list[tuple[Any, ...]] = []
    points: list[dict[str, Any]] = []
    for value, config in zip(sweep.values, configs, strict=True):
        _LOGGER.info("Sweep point %s=%s", sweep.parameter, value)
        stats = _run(config, workers)
        text = value if isinstance(value, str) else json.dumps(value)
        rows.extend(
            (
                sweep.parameter,
                text,
                label,
                entry.n_total,
                entry.n_captured,
                entry.capture_fraction,
                entry.ci_low,
                entry.ci_high,
            )
            for label, entry in stats.species.items()
        )
        points.append({"value": value, "stats": stats_to_dict(stats)})
    write_sweep(output_dir / FILE_SWEEP, rows)
    write_json(output_dir / FILE_SWEEP_STATS, {"parameter": sweep.parameter, "points": points})
    return ExitCode.SUCCESS


def _ensemble_evaluator(config: ScenarioConfig, label: str, workers: int | None) -> Evaluator:
    populations = [pop for pop in config.populations if pop.species == label]
    if not populations:
        raise InvalidConfig(CONF_POPULATIONS, f"no population of species {label}")
    single = replace(config, populations=tuple(populations))

    def evaluate(flow_rate: float) -> tuple[float, float, float]:
        point = replace(single, fluid=replace(single.fluid, flow_rate=flow_rate))
        entry = _run(point, workers).species[label]
        _LOGGER.info("Flow rate %.4g m^3/s: capture fraction %.3f", flow_rate, entry.capture_fraction)
        return entry.capture_fraction, entry.ci_low, entry.ci_high

    return evaluate


def calibrate_flow_rate(
    config: ScenarioConfig,
    *,
    target: float = REFERENCE_TRAPPING_EFFICIENCY,
    tolerance: float = DEFAULT_CALIBRATION_TOLERANCE,
    bracket: tuple[float, float],
    label: str = RBC_DEOXY_LABEL,
    workers: int | None = None,
    evaluate: Evaluator | None = None,
) -> CalibrationResult:
    """
    Find the flow rate whose capture fraction matches target by bisection.

    The target must lie between the capture fractions at the bracket endpoints,
    confidence intervals included. Bisection stops when the estimate is within
    tolerance or the bracket is narrower than 1% of its lower end; the last
    midpoint is returned with its estimate. An endpoint already within
    tolerance is returned without bisecting. The flow rate always lies inside
    the bracket.
    """
    if not 0.0 < target < 1.0:
        raise InvalidConfig("target", f"target must lie in (0, 1): {target}")
    q_lo, q_hi = sorted(bracket)
    if not q_lo > 0:
        raise InvalidConfig("bracket", f"flow rates must be positive: {bracket}")
    evaluate = evaluate or _ensemble_evaluator(config, label, workers)
    f_lo, f_hi = evaluate(q_lo), evaluate(q_hi)
    iterations = 2

    def result(flow_rate: float, estimate: tuple[float, float, float]) -> CalibrationResult:
        return CalibrationResult(
            flow_rate=flow_rate,
            estimate=estimate[0],
            ci_low=estimate[1],
            ci_high=estimate[2],
            target=target,
            iterations=iterations,
            bracket=(q_lo, q_hi),
        )

    for flow_rate, estimate in ((q_lo, f_lo), (q_hi, f_hi)):
        if abs(estimate[0] - target) <= tolerance:
            return result(flow_rate, estimate)
    if not min(f_lo[1], f_hi[1]) <= target <= max(f_lo[2], f_hi[2]):
        raise CalibrationInfeasibleError(
            f"target {target} not between capture fractions {f_lo[0]:.3f} [{f_lo[1]:.3f}, {f_lo[2]:.3f}] at "
            f"{q_lo:.4g} and {f_hi[0]:.3f} [{f_hi[1]:.3f}, {f_hi[2]:.3f}] at {q_hi:.4g}"
        )

    min_width = CALIBRATION_MIN_RELATIVE_WIDTH * q_lo
    lo, hi = q_lo, q_hi
    while True:
        mid = 0.5 * (lo + hi)
        f_mid = evaluate(mid)
        iterations += 1
        if abs(f_mid[0] - target) <= tolerance:
            break
        if (f_lo[0] - target) * (f_mid[0] - target) < 0:
            hi = mid
        else:
            lo, f_lo = mid, f_mid
        if hi - lo < min_width:
            break
    _LOGGER.info("Calibrated flow rate %.4g m^3/s after %i evaluations", mid, iterations)
    return result(mid, f_mid)


@handle_magsep_errors
def cmd_calibrate(
    config_path: Path | None,
    *,
    target: float,
    bracket: tuple[str, str],
    tolerance: float,
    label: str,
    output: Path,
    count: int | None = None,
    workers: int | None = None,
) -> int:
    """Calibrate the flow rate and write the result as JSON."""
    config = load_config(_with_count(_load_document(config_path), count))
    try:
        q_bracket = (parse_quantity(bracket[0], "flow_rate"), parse_quantity(bracket[1], "flow_rate"))
    except vol.Invalid as err:
        raise InvalidConfig("bracket", err.msg) from err
    calibration = calibrate_flow_rate(
        config, target=target, tolerance=tolerance, bracket=q_bracket, label=label, workers=workers
    )
    write_json(
        output,
        {
            "species": label,
            "flow_rate": calibration.flow_rate,
            "flow_rate_ml_per_h": calibration.flow_rate * 3600.0 * 1e6,
            "estimate": calibration.estimate,
            "ci_low": calibration.ci_low,
            "ci_high": calibration.ci_high,
            "target": calibration.target,
            "iterations": calibration.iterations,
            "bracket": list(calibration.bracket),
        },
    )
    return ExitCode.SUCCESS


@handle_magsep_errors
def cmd_fieldmap(
    config_path: Path | None,
    output: Path,
    label: str,
    *,
    r_range: tuple[float, float] = (1.1, 10.0),
    n_r: int = 32,
    n_phi: int = 32,
) -> int:
    """Write F_r and F_phi of one wire on a polar grid; radii are multiples of the half-width."""
    if not 1.0 < r_range[0] < r_range[1]:
        raise InvalidConfig("r_range", f"radii must satisfy 1 < r_min < r_max (in half-widths): {r_range}")
    if n_r < 1 or n_phi < 1:
        raise InvalidConfig("grid", f"n_r and n_phi must be at least 1: {n_r}, {n_phi}")
    config = load_config(_load_document(config_path))
    species = config.species_by_label(label)
    a = config.wires.half_width
    rows = force_map(
        species.magnetics,
        config.wires,
        config.field,
        radii=(np.geomspace(r_range[0], r_range[1], n_r) * a).tolist(),
        angles=np.linspace(-math.pi, math.pi, n_phi + 1)[1:].tolist(),
    )
    write_fieldmap(output, rows)
    return ExitCode.SUCCESS


def _parse_value(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _split_list(values: Sequence[str]) -> list[str]:
    """Return values, expanding a single comma-separated argument."""
    if len(values) == 1 and "," in values[0] and not isinstance(_parse_value(values[0]), list):
        return [part.strip() for part in values[0].split(",")]
    return list(values)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="magsep", description="Magnetophoretic cell capture simulator.")
    parser.add_argument("-v", "--verbose", action="store_true", help="Enable debug logging")
    commands = parser.add_subparsers(dest="command", required=True)

    def add_config(sub: argparse.ArgumentParser) -> None:
        sub.add_argument("config", type=Path, nargs="?", help="Scenario JSON (default: bundled scenario)")
        sub.add_argument("--config", dest="config_option", type=Path, help=argparse.SUPPRESS)

    def add_workers(sub: argparse.ArgumentParser) -> None:
        sub.add_argument("--workers", type=int, help="Worker processes (default: $MAGSEP_WORKERS or 1)")

    run = commands.add_parser("run", help="Run one ensemble")
    add_config(run)
    add_workers(run)
    run.add_argument("--out", "--output", dest="output", type=Path, required=True, help="Output directory")

    sweep = commands.add_parser("sweep", help="Sweep one parameter")
    add_config(sweep)
    add_workers(sweep)
    sweep.add_argument(
        "--param", "--parameter", dest="parameter", required=True, help="Dotted parameter path, e.g. fluid.flow_rate"
    )
    sweep.add_argument("--values", nargs="+", required=True, help="Values or one comma-separated list")
    sweep.add_argument("--count", type=int, help="Cells per population at every point")
    sweep.add_argument("--out", "--output", dest="output", type=Path, required=True, help="Output directory")

    calibrate = commands.add_parser("calibrate", help="Calibrate the flow rate")
    add_config(calibrate)
    add_workers(calibrate)
    calibrate.add_argument("--target", type=float, default=REFERENCE_TRAPPING_EFFICIENCY)
    calibrate.add_argument("--bracket", nargs="+", required=True, help="LOW,HIGH or LOW HIGH, unit strings allowed")
    calibrate.add_argument("--tolerance", type=float, default=DEFAULT_CALIBRATION_TOLERANCE)
    calibrate.add_argument("--species", default=RBC_DEOXY_LABEL)
    calibrate.add_argument("--count", type=int, help="Cells per population at every evaluation")
    calibrate.add_argument("--out", "--output", dest="output", type=Path, default=Path(FILE_CALIBRATION))

    fieldmap = commands.add_parser("fieldmap", help="Write the single-wire force map")
    add_config(fieldmap)
    fieldmap.add_argument("--species", default=RBC_DEOXY_LABEL)
    fieldmap.add_argument("--r-min", type=float, default=1.1, help="Smallest radius in half-widths")
    fieldmap.add_argument("--r-max", type=float, default=10.0, help="Largest radius in half-widths")
    fieldmap.add_argument("--n-r", type=int, default=32)
    fieldmap.add_argument("--n-phi", type=int, default=32)
    fieldmap.add_argument("--out", "--output", dest="output", type=Path, required=True, help="Output CSV")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    """Parse arguments and dispatch to a command."""
    parser = _build_parser()
    args = parser.parse_args(argv)
    if args.config is not None and args.config_option is not None and args.config != args.config_option:
        parser.error("the scenario was given twice with different paths")
    config_path: Path | None = args.config or args.config_option
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    if args.command == "run":
        return cmd_run(config_path, args.output, args.workers)
    if args.command == "sweep":
        return cmd_sweep(
            config_path,
            SweepSpec(
                parameter=args.parameter,
                values=tuple(_parse_value(v) for v in _split_list(args.values)),
                count=args.count,
            ),
            args.output,
            args.workers,
        )
    if args.command == "calibrate":
        if len(bracket := _split_list(args.bracket)) != 2:
            parser.error(f"--bracket needs LOW,HIGH, got {' '.join(args.bracket)}")
        return cmd_calibrate(
            config_path,
            target=args.target,
            bracket=(bracket[0], bracket[1]),
            tolerance=args.tolerance,
            label=args.species,
            output=args.output,
            count=args.count,
            workers=args.workers,
        )
    return cmd_fieldmap(
        config_path,
        args.output,
        args.species,
        r_range=(args.r_min, args.r_max),
        n_r=args.n_r,
        n_phi=args.n_phi,
    )
