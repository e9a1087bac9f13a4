"""Command-line interface.

Subcommands:
  profile   print per-layer sound speed and absorption for a scenario
  ping      trace a single source->receiver path and print TOF/TL/SNR
  localize  run one epoch's fix with a per-generation solver trace
  run       execute the full pipeline and write epochs.csv + summary.json

Exit codes: 0 success, 1 validation error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import math
import sys

import numpy as np

from .multilateration import ga_localize
from .pipeline import (
    epoch_times,
    ga_config_for_epoch,
    run_simulation,
    simulate_epoch,
    write_outputs,
)
from .propagation import (
    ChannelProfile,
    NoDirectPathError,
    link_budget,
    trace_refracted,
    trace_straight,
)
from .scenario import Scenario, ScenarioError, load_scenario

log = logging.getLogger(__name__)


def _parse_enu(text: str, option: str) -> np.ndarray:
    parts = text.split(",")
    if len(parts) != 3:
        raise ScenarioError(f"{option}: expected 'east,north,up', got {text!r}")
    try:
        return np.array([float(p) for p in parts])
    except ValueError:
        raise ScenarioError(f"{option}: expected three numbers, got {text!r}") from None


def _profile_for(scenario: Scenario) -> ChannelProfile:
    return ChannelProfile.from_column(scenario.column, scenario.carrier_frequency)


def _cmd_profile(args) -> int:
    scenario = load_scenario(args.scenario)
    profile = _profile_for(scenario)
    print(f"# {len(scenario.column)} layers, carrier {scenario.carrier_frequency} kHz")
    print("layer  z_top_m  z_bottom_m  sound_speed_m_s  absorption_db_km")
    b = profile.boundaries
    for i, (c, a) in enumerate(zip(profile.sound_speeds, profile.absorption)):
        print(f"{i:5d}  {b[i]!r}  {b[i + 1]!r}  {c!r}  {a!r}")
    return 0


def _cmd_ping(args) -> int:
    scenario = load_scenario(args.scenario)
    profile = _profile_for(scenario)
    src = _parse_enu(args.src, "--src")
    dst = _parse_enu(args.dst, "--dst")

    if scenario.channel.path_model == "refracted":
        horizontal = math.hypot(dst[0] - src[0], dst[1] - src[1])
        try:
            path = trace_refracted(profile, -src[2], -dst[2], horizontal)
        except NoDirectPathError as exc:
            print(f"no direct path: {exc}")
            return 0
    else:
        path = trace_straight(profile, src, dst)

    budget = link_budget(path, profile, scenario.channel)
    detected = budget.snr >= scenario.channel.detection_threshold
    print(f"path_model: {scenario.channel.path_model}")
    print(f"tof_s: {path.tof!r}")
    print(f"length_m: {path.total_length!r}")
    print(f"ray_parameter_s_per_m: {path.ray_parameter!r}")
    print(f"transmission_loss_db: {budget.transmission_loss!r}")
    print(f"snr_db: {budget.snr!r}")
    print(f"detected: {detected}")
    return 0


def _cmd_localize(args) -> int:
    scenario = load_scenario(args.scenario)
    profile = _profile_for(scenario)
    times = epoch_times(scenario)
    if not 0 <= args.epoch < len(times):
        raise ScenarioError(
            f"--epoch: must be within [0, {len(times) - 1}], got {args.epoch}"
        )
    if args.trace_every < 1:
        raise ScenarioError(f"--trace-every: must be >= 1, got {args.trace_every}")
    t = times[args.epoch]
    anchors_true = np.asarray(scenario.anchors_enu(), float)
    true_pos, anchors, measurements, _ = simulate_epoch(
        scenario, profile, anchors_true, args.epoch, t
    )
    print(f"epoch {args.epoch} (t={t!r} s): {len(measurements)} detections")
    for m in measurements:
        print(f"  anchor {m.anchor_id}: tof={m.tof_measured!r} s  snr={m.snr!r} dB")
    if len({m.anchor_id for m in measurements}) < 4:
        print("fewer than 4 detections; no fix possible at this epoch")
        return 0

    config = ga_config_for_epoch(scenario, args.epoch)

    def trace(gen, best, sigma):
        if gen % args.trace_every == 0:
            print(f"  gen {gen:4d}  best_fitness={best:.6e}  sigma={sigma:.3f} m")

    estimate = ga_localize(
        measurements, anchors, config, profile,
        path_model=scenario.channel.path_model, trace=trace,
    )
    e, n, u = (float(v) for v in estimate.position)
    print(f"fix: east={e!r} north={n!r} up={u!r}")
    print(f"best_fitness: {estimate.best_fitness!r}")
    print(f"population_dispersion_m: {estimate.population_dispersion!r}")
    print(f"generations_run: {estimate.generations_run}")
    print(f"error_vs_truth_m: {float(np.linalg.norm(estimate.position - true_pos))!r}")
    return 0


def _cmd_run(args) -> int:
    scenario = load_scenario(args.scenario)
    if args.seed is not None:
        scenario = dataclasses.replace(scenario, seed=args.seed)
    with open(args.scenario, "r", encoding="utf-8") as fh:
        scenario_text = fh.read()

    records, summary = run_simulation(scenario)
    paths = write_outputs(records, summary, args.out, scenario_text=scenario_text)
    print(f"epochs: {summary.epochs}  fixes: {summary.fix_epochs}  "
          f"gaps: {summary.gap_epochs}")
    if summary.rmse_raw is not None:
        print(f"rmse_raw_m: {summary.rmse_raw!r}")
    if summary.rmse_fused is not None:
        print(f"rmse_fused_m: {summary.rmse_fused!r}")
    print(f"wrote {paths['epochs']}")
    print(f"wrote {paths['summary']}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hydroloc",
        description="Underwater acoustic propagation and beacon localization.",
    )
    parser.add_argument(
        "-v", "--verbose", action="store_true", help="enable debug logging"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("profile", help="print per-layer sound speed and absorption")
    p.add_argument("scenario", help="scenario file")
    p.set_defaults(func=_cmd_profile)

    p = sub.add_parser("ping", help="trace one path and print TOF/TL/SNR")
    p.add_argument("scenario", help="scenario file")
    p.add_argument("--src", required=True, help="source ENU as 'east,north,up'")
    p.add_argument("--dst", required=True, help="receiver ENU as 'east,north,up'")
    p.set_defaults(func=_cmd_ping)

    p = sub.add_parser("localize", help="run a single epoch fix with a solver trace")
    p.add_argument("scenario", help="scenario file")
    p.add_argument("--epoch", type=int, default=0, help="epoch index (default 0)")
    p.add_argument(
        "--trace-every", type=int, default=10,
        help="print the solver trace every N generations (default 10)",
    )
    p.set_defaults(func=_cmd_localize)

    p = sub.add_parser("run", help="run the full pipeline and write outputs")
    p.add_argument("scenario", help="scenario file")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument(
        "--seed", type=int, default=None, help="override the scenario master seed"
    )
    p.set_defaults(func=_cmd_run)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except ScenarioError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        log.debug("unhandled failure", exc_info=True)
        print(f"error: {exc}", file=sys.stderr)
        return 2


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
