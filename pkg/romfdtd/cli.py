"""
Command-line interface.

Usage:
    python -m romfdtd run scenarios/cavity.json -o cavity.csv --spectrum cavity_fr.csv
    python -m romfdtd check scenarios/cavity.json
    python -m romfdtd compare scenarios/cavity.json
    python -m romfdtd radius scenarios/small_cavity.json

Exit codes: 0 success, 1 other error, 2 scenario rejected, 3 passivity
failure, 4 instability detected. Logs go to stderr, results to stdout.
"""
import argparse
import json
import math
import sys
from typing import Optional, Sequence

import numpy as np
from dotenv import load_dotenv

from romfdtd.config import get_settings
from romfdtd.errors import InstabilityError, PassivityError, RomFdtdError, ScenarioParseError
from romfdtd.fine.fine_system import check_passivity
from romfdtd.io.records_io import write_records, write_spectrum
from romfdtd.io.scenario_io import load_scenario
from romfdtd.monitoring import configure_logging, get_logger
from romfdtd.monitoring.metrics import render_metrics
from romfdtd.orchestration.postprocess import frequency_response, spectral_peaks
from romfdtd.orchestration.simulator import (
    amplification_spectral_radius,
    build_simulation,
    derive_all_fine,
    run,
)
from romfdtd.reduction.cfl_extension import generalized_singular_values

logger = get_logger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_PARSE = 2
EXIT_PASSIVITY = 3
EXIT_INSTABILITY = 4


def _print_json(payload: dict) -> None:
    print(json.dumps(payload, indent=2, default=float))


# ============ SUBCOMMANDS ============

def cmd_run(args) -> int:
    scenario = load_scenario(args.scenario)
    record = run(scenario)
    write_records(record, args.output or sys.stdout)
    if args.spectrum:
        write_spectrum(frequency_response(record, window=scenario.run.window), args.spectrum)
    return EXIT_OK


def cmd_check(args) -> int:
    scenario = load_scenario(args.scenario)
    sim = build_simulation(scenario, strict=False)
    passed = sim.dt <= sim.metadata["coarse_limit"]
    regions = []
    for model in sim.regions:
        report = check_passivity(model.reduced, sim.dt)
        values = generalized_singular_values(model.reduced)
        passed = passed and report.passed
        regions.append(
            {
                **model.summary(),
                **report.as_dict(),
                "s_max": float(values[0]) if values.size else 0.0,
                "singular_values": values[: args.top].tolist(),
            }
        )
    _print_json(
        {
            "scenario": scenario.name,
            "scheme": sim.scheme,
            "dt": sim.dt,
            "coarse_limit": sim.metadata["coarse_limit"],
            "scheme_limit": sim.metadata["scheme_limit"],
            "passed": passed,
            "regions": regions,
        }
    )
    if args.metrics:
        print(render_metrics())
    return EXIT_OK if passed else EXIT_PASSIVITY


def _peak_deviation(peaks: np.ndarray, reference: np.ndarray) -> float:
    if peaks.size == 0 or reference.size == 0:
        return math.nan
    nearest = peaks[np.argmin(np.abs(peaks[None, :] - reference[:, None]), axis=1)]
    return float(np.max(np.abs(nearest - reference) / reference))


def cmd_compare(args) -> int:
    scenario = load_scenario(args.scenario)
    proposed = run(scenario)

    # the oracle marches the same physical time at its own step
    oracle_sim = build_simulation(derive_all_fine(scenario))
    oracle = oracle_sim.march(math.ceil(proposed.n_steps * proposed.dt / oracle_sim.dt))

    probes = {}
    for probe_id in proposed.probe_ids:
        ours = frequency_response(proposed, probe_id, window=scenario.run.window)
        ref = frequency_response(oracle, probe_id, window=scenario.run.window)
        f_min = args.f_min
        peaks_ours = spectral_peaks(ours, f_min=f_min)
        peaks_ref = spectral_peaks(ref, f_min=f_min)
        probes[probe_id] = {
            "l2_relative": float(
                np.linalg.norm(ours.values - ref.values) / np.linalg.norm(ref.values)
            ),
            "peak_deviation": _peak_deviation(peaks_ours, peaks_ref),
            "peaks_hz": peaks_ours.tolist(),
            "oracle_peaks_hz": peaks_ref.tolist(),
        }
    _print_json(
        {
            "scenario": scenario.name,
            "dt": proposed.dt,
            "oracle_dt": oracle.dt,
            "probes": probes,
        }
    )
    return EXIT_OK


def cmd_radius(args) -> int:
    scenario = load_scenario(args.scenario)
    radius = amplification_spectral_radius(scenario, dt=args.dt)
    _print_json({"scenario": scenario.name, "radius": radius})
    return EXIT_OK


# ============ ENTRY POINT ============

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="romfdtd", description="2-D FDTD with embedded passive reduced-order fine regions"
    )
    parser.add_argument("--log-level", default=None, help="DEBUG, INFO, WARNING, ERROR")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="simulate and write probe records as CSV")
    p_run.add_argument("scenario")
    p_run.add_argument("-o", "--output", help="records CSV (stdout when omitted)")
    p_run.add_argument("--spectrum", help="also write the frequency response CSV here")
    p_run.set_defaults(handler=cmd_run)

    p_check = sub.add_parser("check", help="passivity report and CFL limits per region")
    p_check.add_argument("scenario")
    p_check.add_argument("--top", type=int, default=5, help="singular values to print")
    p_check.add_argument("--metrics", action="store_true", help="print Prometheus metrics")
    p_check.set_defaults(handler=cmd_check)

    p_compare = sub.add_parser("compare", help="proposed scheme against the all-fine oracle")
    p_compare.add_argument("scenario")
    p_compare.add_argument("--f-min", type=float, default=0.0, help="ignore peaks below (Hz)")
    p_compare.set_defaults(handler=cmd_compare)

    p_radius = sub.add_parser("radius", help="spectral radius of the one-step operator")
    p_radius.add_argument("scenario")
    p_radius.add_argument("--dt", type=float, default=None, help="time step override (s)")
    p_radius.set_defaults(handler=cmd_radius)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    load_dotenv()
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level or get_settings().log_level)

    try:
        return args.handler(args)
    except ScenarioParseError as exc:
        logger.error("❌ Scenario rejected", code=exc.code, location=exc.location, line=exc.line)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except PassivityError as exc:
        logger.error("❌ Passivity check failed", error=str(exc))
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PASSIVITY
    except InstabilityError as exc:
        logger.error("💥 Instability detected", step=exc.step)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INSTABILITY
    except (RomFdtdError, OSError, ValueError) as exc:
        logger.error("❌ Command failed", error=str(exc))
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
