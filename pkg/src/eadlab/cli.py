#!/usr/bin/env python3
"""
Command-line interface for eadlab

Exit codes: 0 success, 1 validation failure (bad config, failed model
check, oracle outside its domain), 2 runtime abort (extinction, blowup,
excessive replicate aborts, I/O), 64 usage error.
"""
import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from . import __version__
from .config import ConfigError, RuntimeSettings, configure_logging, load_config
from .errors import EadlabError, PreconditionError
from .exporters import ExportError, Table, get_exporter
from .exprdsl import ExprError
from .harness import FORMATS, ExperimentFailed, emit, run_plan
from .ibm import CacheCoherenceError, NegativeRateError, SimulationAbort, StopRules, run
from .metrics import distance_series
from .model import ModelViolationError, validate_model, validate_scaling
from .ode import OdeSolution, integrate_cead, integrate_lv, lv2_equilibrium
from .oracles import (
    BranchingParams,
    OracleError,
    bd_hitting_prob,
    biased_walk_ruin,
    chain_exit_prob,
    conditioned_time_ratio_bound,
    expected_absorption_time,
    extinction_time_cdf,
    invasion_prob_limit,
    occupation_laplace,
)
from .schemas import Config, ExperimentPlan
from .tss import rescaled_tss_path, simulate_tss
from .utils import format_number, replicate_rng

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_ABORT = 2
EXIT_USAGE = 64

ORACLE_DIGITS = 10


class UsageError(Exception):
    """Raised for malformed command lines"""
    pass


class _ArgumentParser(argparse.ArgumentParser):
    """argparse with usage errors mapped to exit code 64"""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _u64(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return value


def _float_list(text: str) -> List[float]:
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(
        prog="eadlab",
        description="EADLab: individual-based adaptive dynamics simulator and verifier"
    )
    parser.add_argument("--version", action="version", version=f"eadlab {__version__}")

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON configuration file")
    common.add_argument("--seed", type=_u64, help="Master seed (overrides the configuration)")
    common.add_argument("--out", type=Path, help="Output directory (default: current directory)")
    common.add_argument("--format", choices=FORMATS, default="csv", help="Output format")
    common.add_argument("--replicates", type=_positive_int, help="Number of replicates")
    common.add_argument("--workers", type=_positive_int, help="Worker processes (default EADLAB_WORKERS)")
    common.add_argument("--verbose", "-v", action="store_true", help="Debug logging")

    subparsers = parser.add_subparsers(dest="command", parser_class=_ArgumentParser)

    subparsers.add_parser("validate", parents=[common], help="Model and scaling report")

    ibm = subparsers.add_parser("simulate-ibm", parents=[common], help="Individual-based simulation")
    ibm.add_argument("--horizon", type=float, default=1.0, help="Horizon in rescaled time")
    ibm.add_argument("--grid", type=_positive_int, default=101, help="Output grid points")
    ibm.add_argument("--epsilon", type=float, default=1.0, help="Invasion threshold parameter")

    tss = subparsers.add_parser("simulate-tss", parents=[common], help="Trait substitution sequence")
    tss.add_argument("--sigma", type=float, help="Mutation scale (default: scaling.sigma)")
    tss.add_argument("--horizon", type=float, default=1.0, help="Horizon in rescaled time t*sigma^2")

    cead = subparsers.add_parser("integrate-cead", parents=[common], help="Canonical equation")
    cead.add_argument("--horizon", type=float, default=1.0)
    cead.add_argument("--dt", type=float, default=1e-3)

    lv = subparsers.add_parser("integrate-lv", parents=[common], help="Lotka-Volterra system")
    lv.add_argument("--traits", type=_float_list, required=True, help="Comma-separated traits")
    lv.add_argument("--z0", type=_float_list, required=True, help="Comma-separated initial densities")
    lv.add_argument("--horizon", type=float, default=10.0)
    lv.add_argument("--dt", type=float, default=1e-3)

    oracle = subparsers.add_parser("oracle", parents=[common], help="Evaluate a closed form")
    oracle.add_argument("name", choices=sorted(ORACLES))
    oracle.add_argument("args", nargs="*", help="Numeric arguments of the closed form")

    experiment = subparsers.add_parser("experiment", parents=[common], help="Run an experiment plan")
    experiment.add_argument("plan", type=Path, help="Configuration with an 'experiment' section")

    compare = subparsers.add_parser("compare", parents=[common], help="Sup-KR distance of a trajectory")
    compare.add_argument("--traj", type=Path, required=True, help="Trajectory atoms CSV (t, trait, count)")
    compare.add_argument("--cead", type=Path, required=True, help="CEAD path CSV (t, x)")

    return parser


# =====================================================================
# ORACLES
# =====================================================================

def _branching(b: float, d: float) -> BranchingParams:
    return BranchingParams(b=b, d=d)


def _oracle_hitting(b, d, j, k):
    return [bd_hitting_prob(_branching(b, d), j, k)]


def _oracle_limit(b, d, k):
    return list(invasion_prob_limit(_branching(b, d), k))


def _oracle_absorption(b, d, n, k):
    return [expected_absorption_time(_branching(b, d), n, k)]


def _oracle_ratio(eps, k):
    return [conditioned_time_ratio_bound(eps, k)]


def _oracle_cdf(b, d, n, t):
    return [extinction_time_cdf(_branching(b, d), n, t)]


def _oracle_laplace(b, d, lam):
    return [occupation_laplace(_branching(b, d), lam)]


def _oracle_chain(C1, C2, eps, sigma, K, a, M):
    return [chain_exit_prob(C1, C2, eps, sigma, K, a, M)]


def _oracle_walk(C, sigma, start, lo, hi):
    return [biased_walk_ruin(C, sigma, start, lo, hi)]


ORACLES: Dict[str, Tuple[Callable[..., List[float]], Sequence[Tuple[str, type]]]] = {
    "hitting-prob": (_oracle_hitting, (("b", float), ("d", float), ("j", int), ("k", int))),
    "invasion-limit": (_oracle_limit, (("b", float), ("d", float), ("k", int))),
    "absorption-time": (_oracle_absorption, (("b", float), ("d", float), ("n", int), ("k", int))),
    "time-ratio-bound": (_oracle_ratio, (("eps", float), ("k", float))),
    "extinction-cdf": (_oracle_cdf, (("b", float), ("d", float), ("n", int), ("t", float))),
    "occupation-laplace": (_oracle_laplace, (("b", float), ("d", float), ("lambda", float))),
    "chain-exit": (_oracle_chain, (("C1", float), ("C2", float), ("eps", float), ("sigma", float),
                                   ("K", int), ("a", int), ("M", float))),
    "biased-walk-ruin": (_oracle_walk, (("C", float), ("sigma", float), ("start", int), ("lo", int), ("hi", int))),
}


def _oracle_arguments(name: str, raw: Sequence[str], params: Sequence[Tuple[str, type]]) -> List[object]:
    if len(raw) != len(params):
        names = " ".join(param for param, _ in params)
        raise UsageError(f"oracle {name} takes {len(params)} arguments: {names}")
    values = []
    for text, (param, kind) in zip(raw, params):
        try:
            values.append(kind(text))
        except ValueError:
            expected = "an integer" if kind is int else "a number"
            raise UsageError(f"oracle {name}: {param} must be {expected}, got {text!r}") from None
    return values


def cmd_oracle(args, settings: RuntimeSettings) -> int:
    func, params = ORACLES[args.name]
    values = _oracle_arguments(args.name, args.args, params)
    try:
        results = func(*values)
    except ValueError as e:
        if isinstance(e, EadlabError):
            raise
        raise OracleError(str(e)) from e
    print(" ".join(f"{value:.{ORACLE_DIGITS}f}" for value in results))
    return EXIT_OK


# =====================================================================
# COMMANDS
# =====================================================================

def _require_config(args) -> Config:
    if args.config is None:
        raise UsageError(f"{args.command} needs --config")
    config = load_config(args.config)
    if args.seed is not None:
        config = config.model_copy(update={"seed": args.seed})
    return config


def _check_model(config: Config, settings: RuntimeSettings) -> None:
    report = validate_model(config.model_spec(), settings.grid_points)
    if not report.passed:
        names = ", ".join(check.name for check in report.failures())
        raise ModelViolationError(f"model fails validation: {names}")


def _out_dir(args) -> Path:
    return args.out if args.out is not None else Path(".")


def _export(table: Table, path: Path, fmt: str, **chart) -> Path:
    exporter = get_exporter(fmt)
    if fmt == "svg":
        return exporter.export(table, path, **chart)
    return exporter.export(table, path)


def cmd_validate(args, settings: RuntimeSettings) -> int:
    config = _require_config(args)
    spec = config.model_spec()
    report = validate_model(spec, settings.grid_points)
    scaling = validate_scaling(spec.scaling)
    if args.format == "json":
        document = {"model": report.model_dump(mode='json'), "passed": report.passed,
                    "scaling": scaling.model_dump(mode='json')}
        print(json.dumps(document, indent=2, allow_nan=False))
    else:
        print(f"Model checks on {report.grid_points} grid points")
        for check in report.checks:
            status = "PASS" if check.passed else ("WARN" if check.advisory else "FAIL")
            line = f"  [{status}] {check.name}"
            if check.message:
                line += f": {check.message}"
            print(line)
        if report.bounds is not None:
            bounds = report.bounds
            print(f"Bounds: b_max={format_number(bounds.b_max)} d_max={format_number(bounds.d_max)} "
                  f"c_min={format_number(bounds.c_min)} zbar_max={format_number(bounds.zbar_max)}")
        print(f"Scaling K={scaling.triple.K} u={format_number(scaling.triple.u)} "
              f"sigma={format_number(scaling.triple.sigma)} alpha={format_number(scaling.triple.alpha)}")
        for name in ("r1", "r2", "r3", "r4"):
            print(f"  {name} = {format_number(getattr(scaling, name))}")
        print(f"  regime consistent: {'yes' if scaling.regime_consistent else 'no'}")
        print("Model " + ("passes" if report.passed else "FAILS"))
    return EXIT_OK if report.passed else EXIT_INVALID


def cmd_simulate_ibm(args, settings: RuntimeSettings) -> int:
    config = _require_config(args)
    _check_model(config, settings)
    spec = config.model_spec()
    replicates = args.replicates or 1
    status = EXIT_OK
    for r in range(replicates):
        rng = replicate_rng(config.seed, 0, r)
        try:
            traj = run(spec, args.horizon, args.grid, rng, stop=StopRules(epsilon=args.epsilon),
                       resync_every=settings.resync_every)
        except SimulationAbort as e:
            logger.error(f"Replicate {r} aborted: {e}")
            traj, status = e.trajectory, EXIT_ABORT
            if traj is None:
                continue
        prefix = _out_dir(args) / f"ibm.{r}"
        _export(Table.from_frame(traj.atoms, "atoms"), Path(f"{prefix}.atoms.{args.format}"), args.format,
                x="t", ys=["count"], y_label="count")
        _export(Table.from_frame(traj.summary, "summary"), Path(f"{prefix}.summary.{args.format}"),
                args.format, x="t", ys=["mean_trait"], y_label="mean trait")
        _export(Table.from_frame(traj.events, "events"), Path(f"{prefix}.events.{args.format}"),
                args.format, x="t", ys=["trait"], y_label="trait")
        print(f"replicate {r}: {traj.stop_reason}, {traj.n_events} events, "
              f"final count {traj.final_count}")
    return status


def cmd_simulate_tss(args, settings: RuntimeSettings) -> int:
    config = _require_config(args)
    _check_model(config, settings)
    spec = config.model_spec()
    sigma = args.sigma if args.sigma is not None else spec.scaling.sigma
    if not 0 < sigma <= 1:
        raise UsageError("--sigma must lie in (0, 1]")
    for r in range(args.replicates or 1):
        rng = replicate_rng(config.seed, 0, r)
        path = rescaled_tss_path(simulate_tss(spec, spec.x0, sigma, args.horizon / sigma ** 2, rng))
        _export(Table.from_frame(path.to_frame(), f"TSS sigma={format_number(sigma)}"),
                _out_dir(args) / f"tss.{r}.{args.format}", args.format, x="t", ys=["x"], y_label="trait")
        print(f"replicate {r}: {path.n_jumps} jumps, final trait {format_number(path.final_state)}")
    return EXIT_OK


def cmd_integrate_cead(args, settings: RuntimeSettings) -> int:
    config = _require_config(args)
    _check_model(config, settings)
    spec = config.model_spec()
    solution = integrate_cead(spec, spec.x0, args.horizon, args.dt)
    _export(Table.from_frame(solution.to_frame(), "CEAD"), _out_dir(args) / f"cead.{args.format}", args.format,
            x="t", ys=["x"], y_label="trait")
    print(f"x({format_number(float(solution.times[-1]))}) = {format_number(float(solution.final_state[0]))} "
          f"({solution.terminal_reason.value})")
    return EXIT_OK


def cmd_integrate_lv(args, settings: RuntimeSettings) -> int:
    config = _require_config(args)
    spec = config.model_spec()
    if len(args.traits) != len(args.z0):
        raise UsageError("--traits and --z0 need the same length")
    solution = integrate_lv(spec, args.traits, args.z0, args.horizon, args.dt)
    _export(Table.from_frame(solution.to_frame(), "Lotka-Volterra"), _out_dir(args) / f"lv.{args.format}",
            args.format, x="t", y_label="density")
    final = " ".join(format_number(float(z)) for z in solution.final_state)
    print(f"z({format_number(float(solution.times[-1]))}) = {final} ({solution.terminal_reason.value})")
    if len(args.traits) == 2 and args.traits[0] != args.traits[1]:
        equilibrium = lv2_equilibrium(spec, args.traits[0], args.traits[1])
        print(f"equilibrium: {equilibrium.status.value}"
              + (f", stable={equilibrium.stable}" if equilibrium.z is not None else ""))
    return EXIT_ABORT if solution.terminal_reason.value == "blowup" else EXIT_OK


def cmd_experiment(args, settings: RuntimeSettings) -> int:
    config = load_config(args.plan)
    if args.seed is not None:
        config = config.model_copy(update={"seed": args.seed})
    if config.experiment is None:
        raise ConfigError("configuration has no experiment section", "/experiment")
    if args.replicates is not None:
        config = config.model_copy(update={
            "experiment": config.experiment.model_copy(update={"replicates": args.replicates})
        })
    plan = ExperimentPlan.from_config(config)
    workers = args.workers or settings.workers
    try:
        report = run_plan(plan, workers=workers, resync_every=settings.resync_every,
                          validation_grid=settings.grid_points)
    except ExperimentFailed as e:
        if e.report is not None:
            emit(e.report, _out_dir(args), args.format)
        raise
    for path in emit(report, _out_dir(args), args.format):
        if not path.name.endswith(".timings.json"):
            print(path.name)
    if report.trend is not None:
        verdict = "yes" if report.trend.strictly_decreasing else "no"
        print(f"{report.trend.statistic} strictly decreasing: {verdict}")
    return EXIT_OK


def _load_cead(path: Path) -> OdeSolution:
    frame = pd.read_csv(path)
    if "t" not in frame.columns or len(frame.columns) < 2:
        raise PreconditionError(f"{path}: expected columns t and x")
    value_column = "x" if "x" in frame.columns else frame.columns[1]
    return OdeSolution(frame["t"].to_numpy(dtype=np.float64),
                       frame[[value_column]].to_numpy(dtype=np.float64), labels=["x"])


def cmd_compare(args, settings: RuntimeSettings) -> int:
    config = _require_config(args)
    spec = config.model_spec()
    atoms = pd.read_csv(args.traj)
    missing = {"t", "trait", "count"} - set(atoms.columns)
    if missing:
        raise PreconditionError(f"{args.traj}: missing columns {', '.join(sorted(missing))}")
    cead = _load_cead(args.cead)
    series = distance_series(atoms, spec.scaling.K, cead, spec)
    distance = float(series["distance"].max()) if len(series) else 0.0
    if args.out is not None:
        _export(Table.from_frame(series, "KR distance"), _out_dir(args) / f"compare.{args.format}", args.format,
                x="t", ys=["distance"], y_label="KR distance")
    print(f"{distance:.{ORACLE_DIGITS}f}")
    return EXIT_OK


COMMANDS = {
    "validate": cmd_validate,
    "simulate-ibm": cmd_simulate_ibm,
    "simulate-tss": cmd_simulate_tss,
    "integrate-cead": cmd_integrate_cead,
    "integrate-lv": cmd_integrate_lv,
    "oracle": cmd_oracle,
    "experiment": cmd_experiment,
    "compare": cmd_compare,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Main CLI entry point; returns the exit code"""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        print(f"eadlab: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    if args.command is None:
        parser.print_help(sys.stderr)
        return EXIT_USAGE

    settings = RuntimeSettings.from_env()
    configure_logging("DEBUG" if args.verbose else settings.log_level, settings.log_file)

    try:
        return COMMANDS[args.command](args, settings)
    except UsageError as e:
        print(f"eadlab: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as e:
        print(f"eadlab: invalid configuration: {e}", file=sys.stderr)
        return EXIT_INVALID
    except (SimulationAbort, ExperimentFailed, CacheCoherenceError, NegativeRateError, ExportError) as e:
        print(f"eadlab: aborted: {e}", file=sys.stderr)
        return EXIT_ABORT
    except (ModelViolationError, OracleError, ExprError, PreconditionError) as e:
        print(f"eadlab: {e}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as e:
        print(f"eadlab: {e}", file=sys.stderr)
        return EXIT_ABORT


if __name__ == "__main__":
    sys.exit(main())
