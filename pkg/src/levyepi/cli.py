"""Command-line interface: ``levyepi {thresholds,simulate,ensemble,verify}``.

Exit codes: ``thresholds`` returns 0 for ExtinctionCertified, 1 for
PersistenceCertified and 2 for Indeterminate. ``verify`` returns 0 when every
check passes and 1 otherwise. Errors use 64 (usage or invalid scenario),
70 (simulation failure) and 74 (I/O failure).
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import replace

from . import __version__
from .checks import TARGETS, overall
from .engine import NegativityError, PositivityPolicy, simulate, write_jump_csv, write_trajectory_csv
from .estimators import ensemble_run
from .model import AssumptionError
from .scenario import ScenarioError, load_scenario, scenario_to_mapping
from .svg import write_svg
from .thresholds import ThresholdUndefinedError, Verdict, classify

EXIT_USAGE = 64
EXIT_SOFTWARE = 70
EXIT_IO = 74

VERDICT_CODES = {Verdict.EXTINCTION: 0, Verdict.PERSISTENCE: 1, Verdict.INDETERMINATE: 2}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage, which would read as "Indeterminate"
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _u64(text):
    value = int(text)
    if not 0 <= value < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must fit in 64 unsigned bits")
    return value


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    source = common.add_mutually_exclusive_group()
    source.add_argument("--preset", help="built-in scenario name")
    source.add_argument("--scenario", help="scenario file (dotted key = value lines)")
    common.add_argument("--seed", type=_u64, help="base seed (unsigned 64-bit)")
    common.add_argument("--dt", type=float, help="step size in days")
    common.add_argument("--t-end", type=float, help="horizon in days")
    common.add_argument("--record-stride", type=_positive_int, help="store every k-th grid point")
    common.add_argument("--positivity", choices=[p.value for p in PositivityPolicy],
                        help="handling of negative excursions")
    common.add_argument("--out", help="output path (default: stdout or a command-specific file)")
    common.add_argument("--workers", type=_positive_int,
                        help="parallel workers (default: LEVYEPI_WORKERS or CPU count)")

    parser = _Parser(prog="levyepi", description="Dengue SIR-SI model with Levy jumps.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sub.add_parser("thresholds", parents=[common], help="closed-form thresholds and verdict")

    sim = sub.add_parser("simulate", parents=[common], help="simulate one path to CSV")
    sim.add_argument("--path-index", type=int, default=0)
    sim.add_argument("--svg", help="also write a 4-panel SVG plot")
    sim.add_argument("--jumps-out", help="jump event CSV (default: <out>.jumps.csv)")

    ens = sub.add_parser("ensemble", parents=[common], help="ensemble statistics")
    ens.add_argument("--paths", type=_positive_int, default=100)
    ens.add_argument("--paths-csv", help="per-path metrics CSV")
    ens.add_argument("--aux", action="store_true", help="also average the auxiliary processes")
    ens.add_argument("--slln", action="store_true", help="also compute martingale diagnostics")

    ver = sub.add_parser("verify", parents=[common], help="run an acceptance check")
    ver.add_argument("--target", choices=sorted(TARGETS), required=True)
    ver.add_argument("--paths", type=_positive_int, default=100)
    return parser


def _scenario(args):
    try:
        scenario = load_scenario(args.scenario or args.preset or "table1-extinction")
        changes = {}
        if args.seed is not None:
            changes["seed"] = args.seed
        if args.dt is not None:
            changes["dt"] = args.dt
        if args.t_end is not None:
            changes["t_end"] = args.t_end
        if args.record_stride is not None:
            changes["record_stride"] = args.record_stride
        if args.positivity is not None:
            changes["positivity_policy"] = PositivityPolicy(args.positivity)
        if changes:
            scenario = replace(scenario, sim=replace(scenario.sim, **changes))
    except (ScenarioError, AssumptionError, ValueError) as exc:
        raise UsageError(str(exc)) from exc
    return scenario


def _metadata(scenario, **extra) -> dict:
    meta = {"version": __version__, "seed": scenario.sim.seed, "dt": scenario.sim.step,
            "t_end": scenario.sim.t_end}
    meta.update(extra)
    meta.update(scenario_to_mapping(scenario))
    return meta


def _clean(obj):
    # JSON has no NaN or infinity
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def _emit_json(payload: dict, out):
    text = json.dumps(_clean(payload), indent=2)
    if out:
        with open(out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def cmd_thresholds(args) -> int:
    scenario = _scenario(args)
    try:
        report = classify(scenario.model, scenario.noise, scenario.jumps, scenario.p)
    except ThresholdUndefinedError as exc:
        raise UsageError(str(exc)) from exc
    payload = report.to_dict()
    payload["metadata"] = _metadata(scenario)
    _emit_json(payload, args.out)
    if args.out:
        print(f"verdict: {report.verdict.value}  R0={report.r0:.6g}  kappa={report.kappa:.6g}  "
              f"r0_tilde={report.r0_tilde:.6g}")
    return VERDICT_CODES[report.verdict]


def cmd_simulate(args) -> int:
    scenario = _scenario(args)
    traj = simulate(scenario.model, scenario.noise, scenario.jumps, scenario.sim,
                    scenario.init, path_index=args.path_index)
    meta = _metadata(scenario, path_index=args.path_index, clamp_count=traj.clamp_count,
                     n_steps=traj.n_steps, digest=traj.brownian_increments_digest)
    out = args.out or "trajectory.csv"
    write_trajectory_csv(traj, out, meta)
    jumps_out = args.jumps_out or (out[:-4] if out.endswith(".csv") else out) + ".jumps.csv"
    write_jump_csv(traj, jumps_out, meta)
    if args.svg:
        write_svg(args.svg, traj.times, traj.states, metadata=meta)
    final = traj.states[-1]
    print(f"wrote {out} ({traj.times.size} rows) and {jumps_out} ({traj.jump_times.size} jumps); "
          f"final S={final[0]:.6g} I={final[1]:.6g} S_m={final[2]:.6g} I_m={final[3]:.6g}; "
          f"clamps={traj.clamp_count}")
    return 0


def cmd_ensemble(args) -> int:
    scenario = _scenario(args)
    summary = ensemble_run(scenario, args.paths, workers=args.workers, with_aux=args.aux,
                           with_slln=args.slln)
    payload = summary.to_dict()
    payload["metadata"].update(_metadata(scenario, n_paths=args.paths))
    _emit_json(payload, args.out)
    if args.paths_csv:
        summary.write_paths_csv(args.paths_csv)
    return 0


def cmd_verify(args) -> int:
    scenario = _scenario(args)
    check = TARGETS[args.target]
    try:
        if args.target == "tables":
            records = check(scenario)
        else:
            records = check(scenario, n_paths=args.paths, workers=args.workers)
    except (ValueError, ThresholdUndefinedError) as exc:
        raise UsageError(str(exc)) from exc
    passed = overall(records)
    payload = {"target": args.target, "passed": passed, "checks": records,
               "metadata": _metadata(scenario, n_paths=args.paths)}
    _emit_json(payload, args.out)
    return 0 if passed else 1


COMMANDS = {
    "thresholds": cmd_thresholds,
    "simulate": cmd_simulate,
    "ensemble": cmd_ensemble,
    "verify": cmd_verify,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.workers is None and os.environ.get("LEVYEPI_WORKERS"):
        try:
            if int(os.environ["LEVYEPI_WORKERS"]) < 1:
                raise ValueError
        except ValueError:
            print("levyepi: error: LEVYEPI_WORKERS must be a positive integer", file=sys.stderr)
            return EXIT_USAGE
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"levyepi: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NegativityError as exc:
        print(f"levyepi: simulation rejected: {exc}", file=sys.stderr)
        return EXIT_SOFTWARE
    except OSError as exc:
        print(f"levyepi: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
