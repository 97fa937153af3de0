"""
Experiment harness: IBM-vs-CEAD sweeps over scaling schedules, TSS-vs-CEAD
sweeps over sigma, single-mutant invasion Monte Carlo against branching
oracles, and the closed-form oracle suite.

Replicates run in worker processes when more than one worker is
requested. Every replicate draws from its own stream
SeedSequence([master_seed, schedule_index, replicate_index]) and results
are aggregated in replicate order, so reports do not depend on the
worker count.
"""

import logging
import math
import multiprocessing
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np

from .analytic import equilibrium_mass, invasion_prob_first_order
from .errors import EadlabError, PreconditionError
from .exporters import Table, get_exporter
from .ibm import SimulationAbort, StopRules, invasion_threshold, invasion_trial, run
from .ibm.simulate import DEFAULT_RESYNC_EVERY
from .metrics import distance_series
from .model import DEFAULT_GRID_POINTS, ModelViolationError, validate_model, validate_scaling
from .ode import OdeSolution, integrate_cead
from .oracles import (
    BranchingParams,
    biased_walk_ruin,
    bd_hitting_prob,
    chain_exit_prob,
    expected_absorption_time,
    extinction_time_cdf,
    mc_biased_walk,
    mc_birth_death,
    mc_chain_exit,
    mc_extinction_time,
    mc_occupation_laplace,
    occupation_laplace,
)
from .schemas import (
    ExperimentKind,
    ExperimentPlan,
    ExperimentReport,
    IbmCeadRow,
    InvasionRow,
    ModelSpec,
    OracleRow,
    PathPoint,
    ScalingTriple,
    TrendVerdict,
    TssCeadRow,
)
from .tss import rescaled_tss_path, simulate_tss
from .utils import (
    binomial_se,
    format_number,
    mean_sd_se,
    replicate_rng,
    strictly_decreasing,
    within_se,
    z_score,
)

logger = logging.getLogger(__name__)

MAX_ABORT_FRACTION = 0.5
FORMATS = ("csv", "json", "svg", "xlsx")

ROW_TYPES = {
    ExperimentKind.IBM_CEAD: IbmCeadRow,
    ExperimentKind.TSS_CEAD: TssCeadRow,
    ExperimentKind.INVASION_MC: InvasionRow,
    ExperimentKind.ORACLE_SUITE: OracleRow,
}


class ExperimentFailed(EadlabError):
    """Raised when more than half of the replicates of a schedule point abort"""

    def __init__(self, message: str, report: Optional[ExperimentReport] = None):
        self.report = report
        super().__init__(message)


# =====================================================================
# EXECUTION
# =====================================================================

def _map(worker: Callable[[dict], Any], tasks: List[dict], workers: int) -> List[Any]:
    """Apply a module-level worker to tasks, results in task order"""
    if workers <= 1 or len(tasks) <= 1:
        return [worker(task) for task in tasks]
    with multiprocessing.Pool(min(workers, len(tasks))) as pool:
        return pool.map(worker, tasks)


def _require_valid(spec: ModelSpec, grid_points: int) -> None:
    report = validate_model(spec, grid_points)
    if not report.passed:
        names = ", ".join(check.name for check in report.failures())
        raise ModelViolationError(f"model fails validation: {names}")


def _schedule_columns(index: int, triple: ScalingTriple) -> Dict[str, Any]:
    scaling = validate_scaling(triple)
    return {
        "index": index,
        "K": triple.K,
        "u": triple.u,
        "sigma": triple.sigma,
        "alpha": triple.alpha,
        "r1": scaling.r1,
        "r2": scaling.r2,
        "r3": scaling.r3,
        "r4": scaling.r4,
        "regime_consistent": scaling.regime_consistent,
    }


def _path_points(times: Sequence[float], reference: Sequence[float],
                 traits: List[List[float]], distances: List[List[float]]) -> List[PathPoint]:
    points = []
    for k, t in enumerate(times):
        mean, sd, _ = mean_sd_se([path[k] for path in traits])
        mean_distance, _, _ = mean_sd_se([path[k] for path in distances])
        points.append(PathPoint(t=float(t), reference=float(reference[k]), mean=mean, sd=sd,
                                mean_distance=mean_distance))
    return points


def _trend(statistic: str, rows: list, order_key: Callable) -> TrendVerdict:
    ordered = sorted(rows, key=order_key)
    values = [getattr(row, statistic) for row in ordered]
    return TrendVerdict(statistic=statistic, values=values, strictly_decreasing=strictly_decreasing(values))


# =====================================================================
# IBM VERSUS CEAD
# =====================================================================

def _ibm_replicate(task: dict) -> dict:
    """
    Module-level worker: one IBM replicate and its distance to the CEAD path.
    """
    spec: ModelSpec = task["spec"]
    cead: OdeSolution = task["cead"]
    rng = replicate_rng(task["master_seed"], task["index"], task["replicate"])
    try:
        traj = run(spec, task["horizon"], task["grid_points"], rng,
                   stop=StopRules(epsilon=task["epsilon"]), resync_every=task["resync_every"])
    except SimulationAbort as e:
        return {"replicate": task["replicate"], "status": type(e).__name__, "time": e.time}
    series = distance_series(traj.atoms, traj.K, cead, spec, times=traj.times)
    return {
        "replicate": task["replicate"],
        "status": "completed",
        "distance": float(series["distance"].max()),
        "distances": series["distance"].tolist(),
        "traits": traj.summary["mean_trait"].tolist(),
        "trait_end": float(traj.summary["mean_trait"].iloc[-1]),
        "invasions": traj.count_events("invasion"),
        "mutations": traj.tallies["mutant_births"],
        "events": traj.n_events,
    }


def run_ibm_cead(plan: ExperimentPlan, workers: int = 1,
                 resync_every: int = DEFAULT_RESYNC_EVERY,
                 validation_grid: int = DEFAULT_GRID_POINTS) -> ExperimentReport:
    """
    Replicated IBM runs against the canonical equation for every scaling triple.

    Aborted replicates are excluded from the distance statistics but
    counted; more than half aborted at one schedule point fails the
    experiment.

    Raises:
        ModelViolationError: If the model fails validation
        ExperimentFailed: On excessive aborts (partial report attached)
    """
    if plan.kind != ExperimentKind.IBM_CEAD:
        raise PreconditionError(f"plan kind is {plan.kind.value}, expected ibm-cead")
    settings = plan.settings
    _require_valid(plan.spec, validation_grid)
    report = ExperimentReport(name=plan.name, kind=plan.kind, master_seed=plan.master_seed,
                              replicates=plan.replicates)
    cead = integrate_cead(plan.spec, plan.spec.x0, settings.horizon, settings.dt)
    grid = np.linspace(0.0, settings.horizon, settings.grid_points)
    reference = [float(cead.value_at(t)[0]) for t in grid]

    for index, triple in enumerate(plan.schedule):
        started = time.perf_counter()
        spec = plan.spec.with_scaling(triple)
        logger.info(f"{plan.name}: schedule point {index} (K={triple.K}, sigma={triple.sigma:.6g})")
        tasks = [{
            "spec": spec, "cead": cead, "master_seed": plan.master_seed, "index": index,
            "replicate": r, "horizon": settings.horizon, "grid_points": settings.grid_points,
            "epsilon": settings.epsilon, "resync_every": resync_every,
        } for r in range(plan.replicates)]
        results = _map(_ibm_replicate, tasks, workers)

        done = [r for r in results if r["status"] == "completed"]
        aborted = [r for r in results if r["status"] != "completed"]
        for r in aborted:
            logger.info(f"{plan.name}: replicate {r['replicate']} at point {index} aborted ({r['status']})")
        if aborted:
            kinds = sorted({r["status"] for r in aborted})
            report.notes.append(f"schedule point {index}: {len(aborted)} of {len(results)} "
                                f"replicates aborted ({', '.join(kinds)})")

        mean_d, sd_d, se_d = mean_sd_se([r["distance"] for r in done])
        mean_x, _, se_x = mean_sd_se([r["trait_end"] for r in done])
        report.rows.append(IbmCeadRow(
            **_schedule_columns(index, triple),
            replicates=len(results),
            completed=len(done),
            aborted=len(aborted),
            mean_distance=mean_d,
            sd_distance=sd_d,
            se_distance=se_d,
            mean_trait_end=mean_x,
            se_trait_end=se_x,
            cead_trait_end=float(cead.final_state[0]),
            mean_invasions=mean_sd_se([r["invasions"] for r in done])[0],
            mean_mutations=mean_sd_se([r["mutations"] for r in done])[0],
            mean_events=mean_sd_se([r["events"] for r in done])[0],
        ))
        report.paths[index] = _path_points(grid, reference, [r["traits"] for r in done],
                                           [r["distances"] for r in done])
        report.timings[index] = time.perf_counter() - started

        if len(aborted) > MAX_ABORT_FRACTION * len(results):
            raise ExperimentFailed(
                f"{len(aborted)} of {len(results)} replicates aborted at schedule point {index}", report
            )

    report.trend = _trend("mean_distance", report.rows, lambda row: row.K)
    logger.info(f"{plan.name}: mean distance strictly decreasing in K: {report.trend.strictly_decreasing}")
    return report


# =====================================================================
# TSS VERSUS CEAD
# =====================================================================

def _tss_replicate(task: dict) -> dict:
    spec: ModelSpec = task["spec"]
    sigma = task["sigma"]
    rng = replicate_rng(task["master_seed"], task["index"], task["replicate"])
    path = simulate_tss(spec, spec.x0, sigma, task["horizon"] / sigma ** 2, rng)
    rescaled = rescaled_tss_path(path)
    grid = np.asarray(task["grid"])
    values = np.asarray(rescaled.value_at(grid), dtype=np.float64)
    deviation = np.abs(values - np.asarray(task["reference"]))
    return {
        "replicate": task["replicate"],
        "distance": float(deviation.max()),
        "distances": deviation.tolist(),
        "traits": values.tolist(),
        "endpoint": float(values[-1]),
        "jumps": path.n_jumps,
    }


def run_tss_cead(plan: ExperimentPlan, workers: int = 1,
                 validation_grid: int = DEFAULT_GRID_POINTS) -> ExperimentReport:
    """
    Rescaled substitution sequences against the canonical equation for every sigma.

    Each replicate runs to horizon/sigma^2, is rescaled by sigma^2 and
    compared by sup |X - x_t| over the output grid.
    """
    if plan.kind != ExperimentKind.TSS_CEAD:
        raise PreconditionError(f"plan kind is {plan.kind.value}, expected tss-cead")
    settings = plan.settings
    _require_valid(plan.spec, validation_grid)
    report = ExperimentReport(name=plan.name, kind=plan.kind, master_seed=plan.master_seed,
                              replicates=plan.replicates)
    cead = integrate_cead(plan.spec, plan.spec.x0, settings.horizon, settings.dt)
    grid = np.linspace(0.0, settings.horizon, settings.grid_points)
    reference = [float(cead.value_at(t)[0]) for t in grid]

    for index, sigma in enumerate(plan.sigmas):
        started = time.perf_counter()
        logger.info(f"{plan.name}: sigma point {index} (sigma={sigma:.6g})")
        tasks = [{
            "spec": plan.spec, "sigma": sigma, "master_seed": plan.master_seed, "index": index,
            "replicate": r, "horizon": settings.horizon, "grid": grid.tolist(), "reference": reference,
        } for r in range(plan.replicates)]
        results = _map(_tss_replicate, tasks, workers)

        mean_d, sd_d, se_d = mean_sd_se([r["distance"] for r in results])
        mean_x, sd_x, _ = mean_sd_se([r["endpoint"] for r in results])
        report.rows.append(TssCeadRow(
            index=index,
            sigma=sigma,
            replicates=len(results),
            mean_distance=mean_d,
            sd_distance=sd_d,
            se_distance=se_d,
            mean_endpoint=mean_x,
            sd_endpoint=sd_x,
            cead_endpoint=float(cead.final_state[0]),
            mean_jumps=mean_sd_se([r["jumps"] for r in results])[0],
        ))
        report.paths[index] = _path_points(grid, reference, [r["traits"] for r in results],
                                           [r["distances"] for r in results])
        report.timings[index] = time.perf_counter() - started

    report.trend = _trend("mean_distance", report.rows, lambda row: -row.sigma)
    logger.info(f"{plan.name}: mean deviation strictly decreasing in sigma: {report.trend.strictly_decreasing}")
    return report


# =====================================================================
# INVASION MONTE CARLO
# =====================================================================

def _invasion_chunk(task: dict) -> int:
    rng = replicate_rng(task["master_seed"], task["index"], task["chunk"])
    return sum(
        invasion_trial(task["spec"], task["trait"], rng, epsilon=task["epsilon"],
                       frozen_resident=task["frozen_resident"], resync_every=task["resync_every"])
        for _ in range(task["trials"])
    )


def _chunk_sizes(trials: int, chunks: int) -> List[int]:
    base, extra = divmod(trials, chunks)
    return [base + (1 if c < extra else 0) for c in range(chunks)]


def mutant_branching_params(spec: ModelSpec, y: float, x: float, resident_shift: float = 0.0) -> BranchingParams:
    """
    Linear branching approximation of a y-mutant line in an x-resident at equilibrium:
    birth b(y), death d(y) + c(y, x) (zbar(x) + resident_shift).
    """
    rates = spec.rates
    resident = max(equilibrium_mass(spec, x) + resident_shift, 0.0)
    return BranchingParams(b=rates.birth(y), d=rates.death(y) + rates.competition(y, x) * resident)


def run_invasion_mc(plan: ExperimentPlan, workers: int = 1,
                    resync_every: int = DEFAULT_RESYNC_EVERY,
                    validation_grid: int = DEFAULT_GRID_POINTS) -> ExperimentReport:
    """
    Single-mutant invasion probabilities against the branching oracle.

    For each scaling triple one mutant at x0 + sigma*h is injected into the
    monomorphic equilibrium (mutation off) and followed until its line
    reaches ceil(epsilon sigma K) or dies. Trials are split into a fixed
    number of chunks, each with its own stream.
    """
    if plan.kind != ExperimentKind.INVASION_MC:
        raise PreconditionError(f"plan kind is {plan.kind.value}, expected invasion-mc")
    settings = plan.settings
    _require_valid(plan.spec, validation_grid)
    report = ExperimentReport(name=plan.name, kind=plan.kind, master_seed=plan.master_seed,
                              replicates=plan.replicates)
    x = plan.spec.x0

    for index, triple in enumerate(plan.schedule):
        started = time.perf_counter()
        spec = plan.spec.with_scaling(triple)
        y = x + triple.sigma * settings.h
        if not spec.space.contains(y):
            raise PreconditionError(f"mutant trait {y!r} lies outside the trait space")
        threshold = invasion_threshold(spec, settings.epsilon)
        logger.info(f"{plan.name}: point {index}, mutant {y:.6g}, threshold {threshold}")
        tasks = [{
            "spec": spec, "trait": y, "master_seed": plan.master_seed, "index": index, "chunk": c,
            "trials": size, "epsilon": settings.epsilon, "frozen_resident": settings.frozen_resident,
            "resync_every": resync_every,
        } for c, size in enumerate(_chunk_sizes(settings.trials, settings.chunks)) if size > 0]
        successes = int(sum(_map(_invasion_chunk, tasks, workers)))

        trials = settings.trials
        rate = successes / trials
        oracle = bd_hitting_prob(mutant_branching_params(spec, y, x), 1, threshold)
        shift = settings.slack * settings.epsilon * triple.sigma
        band_lo = bd_hitting_prob(mutant_branching_params(spec, y, x, shift), 1, threshold)
        band_hi = bd_hitting_prob(mutant_branching_params(spec, y, x, -shift), 1, threshold)
        test_se = max(binomial_se(successes, trials), math.sqrt(oracle * (1.0 - oracle) / trials))
        report.rows.append(InvasionRow(
            **_schedule_columns(index, triple),
            h=settings.h,
            mutant_trait=y,
            threshold=threshold,
            trials=trials,
            successes=successes,
            success_rate=rate,
            se_rate=binomial_se(successes, trials),
            oracle=oracle,
            band_lo=band_lo,
            band_hi=band_hi,
            first_order=invasion_prob_first_order(spec, x, settings.h) * triple.sigma,
            z_score=z_score(rate, oracle, test_se),
            within_3se=within_se(rate, oracle, test_se),
        ))
        report.timings[index] = time.perf_counter() - started
    return report


# =====================================================================
# ORACLE SUITE
# =====================================================================

@dataclass(frozen=True)
class OracleCase:
    """One closed form and the parameters it is checked at"""
    oracle: str
    params: Dict[str, float]


STANDARD_CASES = [
    OracleCase("hitting-prob", {"b": 2.0, "d": 1.0, "j": 1, "k": 2}),
    OracleCase("hitting-prob", {"b": 1.0, "d": 1.0, "j": 3, "k": 10}),
    OracleCase("hitting-prob", {"b": 1.05, "d": 1.0, "j": 1, "k": 100}),
    OracleCase("hitting-prob", {"b": 0.0, "d": 1.0, "j": 1, "k": 5}),
    OracleCase("hitting-prob", {"b": 1.0, "d": 1.5, "j": 2, "k": 6}),
    OracleCase("hitting-prob", {"b": 1.5, "d": 1.0, "j": 5, "k": 20}),
    OracleCase("hitting-prob", {"b": 0.5, "d": 0.5, "j": 10, "k": 20}),
    OracleCase("hitting-prob", {"b": 2.0, "d": 0.5, "j": 1, "k": 50}),
    OracleCase("hitting-prob", {"b": 1.0, "d": 1.2, "j": 4, "k": 8}),
    OracleCase("hitting-prob", {"b": 3.0, "d": 1.0, "j": 1, "k": 3}),
    OracleCase("absorption-time", {"b": 2.0, "d": 1.0, "n": 1, "k": 2}),
    OracleCase("absorption-time", {"b": 1.0, "d": 1.5, "n": 3, "k": 10}),
    OracleCase("absorption-time", {"b": 1.05, "d": 1.0, "n": 1, "k": 20}),
    OracleCase("absorption-time", {"b": 2.0, "d": 1.0, "n": 5, "k": 5}),
    OracleCase("absorption-time", {"b": 0.5, "d": 1.0, "n": 2, "k": 8}),
    OracleCase("absorption-time", {"b": 1.5, "d": 1.0, "n": 10, "k": 30}),
    OracleCase("absorption-time", {"b": 1.0, "d": 2.0, "n": 5, "k": 20}),
    OracleCase("absorption-time", {"b": 3.0, "d": 1.0, "n": 2, "k": 10}),
    OracleCase("absorption-time", {"b": 1.0, "d": 0.8, "n": 1, "k": 15}),
    OracleCase("absorption-time", {"b": 0.2, "d": 1.0, "n": 1, "k": 4}),
    OracleCase("extinction-cdf", {"b": 1.0, "d": 1.2, "n": 5, "t": 10.0}),
    OracleCase("extinction-cdf", {"b": 1.5, "d": 1.0, "n": 2, "t": 3.0}),
    OracleCase("extinction-cdf", {"b": 0.001, "d": 1.0, "n": 1, "t": 1.0}),
    OracleCase("extinction-cdf", {"b": 1.0, "d": 2.0, "n": 1, "t": 0.0}),
    OracleCase("extinction-cdf", {"b": 2.0, "d": 1.0, "n": 1, "t": 1.0}),
    OracleCase("extinction-cdf", {"b": 1.0, "d": 1.5, "n": 3, "t": 2.0}),
    OracleCase("extinction-cdf", {"b": 0.5, "d": 1.0, "n": 10, "t": 5.0}),
    OracleCase("extinction-cdf", {"b": 2.0, "d": 1.0, "n": 3, "t": 50.0}),
    OracleCase("extinction-cdf", {"b": 1.0, "d": 3.0, "n": 20, "t": 1.0}),
    OracleCase("extinction-cdf", {"b": 1.2, "d": 1.0, "n": 1, "t": 20.0}),
    OracleCase("biased-walk-ruin", {"C": 1.0, "sigma": 0.1, "start": 20, "lo": 0, "hi": 40}),
    OracleCase("biased-walk-ruin", {"C": 0.5, "sigma": 0.05, "start": 5, "lo": 0, "hi": 20}),
    OracleCase("biased-walk-ruin", {"C": 0.0, "sigma": 0.1, "start": 3, "lo": 0, "hi": 10}),
    OracleCase("biased-walk-ruin", {"C": 1.0, "sigma": 0.1, "start": 10, "lo": 0, "hi": 10}),
    OracleCase("biased-walk-ruin", {"C": -1.0, "sigma": 0.1, "start": 15, "lo": 0, "hi": 20}),
    OracleCase("biased-walk-ruin", {"C": 2.0, "sigma": 0.05, "start": 2, "lo": 0, "hi": 10}),
    OracleCase("biased-walk-ruin", {"C": 0.3, "sigma": 0.1, "start": 7, "lo": 2, "hi": 12}),
    OracleCase("biased-walk-ruin", {"C": 1.0, "sigma": 0.01, "start": 50, "lo": 0, "hi": 100}),
    OracleCase("biased-walk-ruin", {"C": -0.5, "sigma": 0.2, "start": 4, "lo": 0, "hi": 8}),
    OracleCase("biased-walk-ruin", {"C": 4.0, "sigma": 0.1, "start": 1, "lo": 0, "hi": 5}),
    OracleCase("chain-exit", {"C1": 0.0, "C2": 0.0, "eps": 1.0, "sigma": 0.1, "K": 200, "a": 19, "M": 1.0}),
    OracleCase("chain-exit", {"C1": 1.0, "C2": 0.0, "eps": 1.0, "sigma": 0.1, "K": 200, "a": 5, "M": 2.0}),
    OracleCase("chain-exit", {"C1": 0.0, "C2": 1.0, "eps": 1.0, "sigma": 0.1, "K": 200, "a": 5, "M": 2.0}),
    OracleCase("chain-exit", {"C1": 1.0, "C2": 1.0, "eps": 1.0, "sigma": 0.1, "K": 200, "a": 10, "M": 1.0}),
    OracleCase("chain-exit", {"C1": 0.5, "C2": 0.0, "eps": 1.0, "sigma": 0.1, "K": 100, "a": 3, "M": 1.0}),
    OracleCase("chain-exit", {"C1": 2.0, "C2": 1.0, "eps": 0.5, "sigma": 0.2, "K": 100, "a": 4, "M": 1.0}),
    OracleCase("chain-exit", {"C1": 0.0, "C2": 0.5, "eps": 1.0, "sigma": 0.05, "K": 400, "a": 10, "M": 1.0}),
    OracleCase("chain-exit", {"C1": 1.0, "C2": 0.5, "eps": 1.0, "sigma": 0.1, "K": 300, "a": 15, "M": 1.0}),
    OracleCase("chain-exit", {"C1": 0.2, "C2": 0.0, "eps": 1.0, "sigma": 0.1, "K": 1000, "a": 50, "M": 1.0}),
    OracleCase("chain-exit", {"C1": 3.0, "C2": 0.0, "eps": 1.0, "sigma": 0.1, "K": 100, "a": 2, "M": 1.5}),
    OracleCase("occupation-laplace", {"b": 1.0, "d": 1.5, "lambda": 0.0}),
    OracleCase("occupation-laplace", {"b": 2.0, "d": 1.0, "lambda": 0.0}),
    OracleCase("occupation-laplace", {"b": 1.0, "d": 1.0, "lambda": 0.5}),
    OracleCase("occupation-laplace", {"b": 1.0, "d": 2.0, "lambda": 1.0}),
    OracleCase("occupation-laplace", {"b": 2.0, "d": 1.0, "lambda": 0.1}),
    OracleCase("occupation-laplace", {"b": 0.5, "d": 1.0, "lambda": 2.0}),
    OracleCase("occupation-laplace", {"b": 1.0, "d": 0.5, "lambda": 0.5}),
    OracleCase("occupation-laplace", {"b": 3.0, "d": 3.0, "lambda": 1.0}),
    OracleCase("occupation-laplace", {"b": 0.2, "d": 1.0, "lambda": 0.3}),
    OracleCase("occupation-laplace", {"b": 1.0, "d": 1.0, "lambda": 0.01}),
]


def oracle_cases(plan: ExperimentPlan) -> List[OracleCase]:
    """Standard cases plus the branching approximation of the plan's own model"""
    cases = list(STANDARD_CASES)
    spec = plan.spec
    sigma = spec.scaling.sigma
    x = spec.x0
    y = x + sigma if spec.space.contains(x + sigma) else x - sigma
    p = mutant_branching_params(spec, y, x)
    k = invasion_threshold(spec, plan.settings.epsilon)
    if p.b > 0 and k >= 2:
        cases.append(OracleCase("hitting-prob", {"b": p.b, "d": p.d, "j": 1, "k": k}))
    return cases


def _oracle_case(task: dict) -> dict:
    """Closed form, Monte Carlo estimate and the standard error used for the z-test"""
    case: OracleCase = task["case"]
    q = case.params
    rng = replicate_rng(task["master_seed"], task["index"], 0)
    trials = task["trials"]
    if case.oracle == "hitting-prob":
        p = BranchingParams(b=q["b"], d=q["d"])
        closed = bd_hitting_prob(p, int(q["j"]), int(q["k"]))
        empirical = mc_birth_death(p, int(q["j"]), (0, int(q["k"])), rng, trials).probability
        se = math.sqrt(closed * (1.0 - closed) / trials)
    elif case.oracle == "absorption-time":
        p = BranchingParams(b=q["b"], d=q["d"])
        closed = expected_absorption_time(p, int(q["n"]), int(q["k"]))
        estimate = mc_birth_death(p, int(q["n"]), (0, int(q["k"])), rng, trials)
        empirical, se = estimate.mean_time, estimate.mean_time_se
    elif case.oracle == "extinction-cdf":
        p = BranchingParams(b=q["b"], d=q["d"])
        closed = extinction_time_cdf(p, int(q["n"]), q["t"])
        empirical = mc_extinction_time(p, int(q["n"]), q["t"], rng, trials).probability
        se = math.sqrt(closed * (1.0 - closed) / trials)
    elif case.oracle == "biased-walk-ruin":
        args = (q["C"], q["sigma"], int(q["start"]), int(q["lo"]), int(q["hi"]))
        closed = biased_walk_ruin(*args)
        empirical = mc_biased_walk(*args, rng, trials).probability
        se = math.sqrt(closed * (1.0 - closed) / trials)
    elif case.oracle == "chain-exit":
        args = (q["C1"], q["C2"], q["eps"], q["sigma"], int(q["K"]), int(q["a"]), q["M"])
        closed = chain_exit_prob(*args)
        empirical = mc_chain_exit(*args, rng, trials).probability
        se = math.sqrt(closed * (1.0 - closed) / trials)
    elif case.oracle == "occupation-laplace":
        p = BranchingParams(b=q["b"], d=q["d"])
        closed = occupation_laplace(p, q["lambda"])
        empirical = mc_occupation_laplace(p, q["lambda"], rng, trials).probability
        se = math.sqrt(closed * (1.0 - closed) / trials)
    else:
        raise PreconditionError(f"unknown oracle {case.oracle!r}")
    return {"closed": closed, "empirical": empirical, "se": se}


def run_oracle_suite(plan: ExperimentPlan, workers: int = 1) -> ExperimentReport:
    """Closed forms against Monte Carlo, one row per case with a 3-SE verdict"""
    if plan.kind != ExperimentKind.ORACLE_SUITE:
        raise PreconditionError(f"plan kind is {plan.kind.value}, expected oracle-suite")
    report = ExperimentReport(name=plan.name, kind=plan.kind, master_seed=plan.master_seed,
                              replicates=plan.replicates)
    cases = oracle_cases(plan)
    started = time.perf_counter()
    tasks = [{"case": case, "master_seed": plan.master_seed, "index": index,
              "trials": plan.settings.trials} for index, case in enumerate(cases)]
    results = _map(_oracle_case, tasks, workers)
    for index, (case, result) in enumerate(zip(cases, results)):
        parameters = ", ".join(f"{key}={format_number(value)}" for key, value in case.params.items())
        within = within_se(result["empirical"], result["closed"], result["se"])
        if not within:
            logger.warning(f"Oracle {case.oracle} ({parameters}) outside 3 SE of Monte Carlo")
        report.rows.append(OracleRow(
            index=index,
            oracle=case.oracle,
            parameters=parameters,
            closed_form=result["closed"],
            empirical=result["empirical"],
            se=result["se"],
            trials=plan.settings.trials,
            z_score=z_score(result["empirical"], result["closed"], result["se"]),
            within_3se=within,
        ))
    report.timings[0] = time.perf_counter() - started
    return report


def run_plan(plan: ExperimentPlan, workers: int = 1,
             resync_every: int = DEFAULT_RESYNC_EVERY,
             validation_grid: int = DEFAULT_GRID_POINTS) -> ExperimentReport:
    """Dispatch on the plan kind"""
    logger.info(f"Running {plan.kind.value} plan '{plan.name}' (seed {plan.master_seed}, {workers} workers)")
    if plan.kind == ExperimentKind.IBM_CEAD:
        return run_ibm_cead(plan, workers, resync_every, validation_grid)
    if plan.kind == ExperimentKind.TSS_CEAD:
        return run_tss_cead(plan, workers, validation_grid)
    if plan.kind == ExperimentKind.INVASION_MC:
        return run_invasion_mc(plan, workers, resync_every, validation_grid)
    return run_oracle_suite(plan, workers)


# =====================================================================
# OUTPUT
# =====================================================================

def row_columns(kind: ExperimentKind) -> List[str]:
    """Fixed CSV header of a report kind"""
    return [name for name in ROW_TYPES[ExperimentKind(kind)].model_fields if name != "kind"]


def summary_table(report: ExperimentReport) -> Table:
    columns = row_columns(report.kind)
    return Table.from_records(columns, (row.model_dump(mode='json') for row in report.rows),
                              title=f"{report.name} ({report.kind.value})")


def path_table(report: ExperimentReport, index: int) -> Table:
    columns = list(PathPoint.model_fields)
    points = report.paths.get(index, [])
    return Table.from_records(columns, (point.model_dump() for point in points),
                              title=f"{report.name} point {index}")


def _row_table(report: ExperimentReport, index: int) -> Table:
    columns = row_columns(report.kind)
    rows = [row.model_dump(mode='json') for row in report.rows if row.index == index]
    return Table.from_records(columns, rows, title=f"{report.name} point {index}")


def _summary_chart(report: ExperimentReport) -> Dict[str, Any]:
    kind = report.kind
    if kind == ExperimentKind.IBM_CEAD:
        return {"x": "K", "ys": ["mean_distance"], "log_x": True, "log_y": True, "y_label": "sup KR distance"}
    if kind == ExperimentKind.TSS_CEAD:
        return {"x": "sigma", "ys": ["mean_distance"], "log_x": True, "log_y": True,
                "y_label": "sup |X - x|"}
    if kind == ExperimentKind.INVASION_MC:
        return {"x": "sigma", "ys": ["success_rate", "oracle", "first_order"], "log_x": True,
                "log_y": True, "y_label": "invasion probability"}
    return {"x": "index", "ys": ["closed_form", "empirical"], "y_label": "value"}


def _write(fmt: str, data: Any, path: Path, **chart) -> Path:
    exporter = get_exporter(fmt)
    if fmt == "svg":
        return exporter.export(data, path, **chart)
    return exporter.export(data, path)


def emit(report: ExperimentReport, out_dir: Path, fmt: str = "csv") -> List[Path]:
    """
    Write {name}.{index}.{fmt} per schedule point and {name}.summary.{fmt}.

    Per-point files hold the averaged trait paths (ibm-cead, tss-cead) or
    the point's row. The json summary is the full report and parses back
    with dict_to_report. Wall times go to {name}.timings.json, outside the
    compared files.

    Raises:
        ExportError: On I/O failure, with the offending path
    """
    if fmt not in FORMATS:
        raise PreconditionError(f"format must be one of {', '.join(FORMATS)}")
    out_dir = Path(out_dir)
    written = []
    with_paths = report.kind in (ExperimentKind.IBM_CEAD, ExperimentKind.TSS_CEAD)
    for row in report.rows:
        path = out_dir / f"{report.name}.{row.index}.{fmt}"
        if with_paths:
            table = path_table(report, row.index)
            written.append(_write(fmt, table, path, x="t", ys=["reference", "mean"], y_label="trait"))
        else:
            written.append(_write(fmt, _row_table(report, row.index), path, **_summary_chart(report)))

    summary_path = out_dir / f"{report.name}.summary.{fmt}"
    if fmt == "json":
        written.append(get_exporter("json").export(report, summary_path))
    elif fmt == "xlsx":
        sheets = {"summary": summary_table(report)}
        if with_paths:
            sheets.update({f"point {row.index}": path_table(report, row.index) for row in report.rows})
        written.append(get_exporter("xlsx").export(sheets, summary_path))
    else:
        written.append(_write(fmt, summary_table(report), summary_path, **_summary_chart(report)))

    timings = {str(index): seconds for index, seconds in sorted(report.timings.items())}
    written.append(get_exporter("json").export(timings, out_dir / f"{report.name}.timings.json"))
    logger.info(f"Wrote {len(written)} files for '{report.name}' to {out_dir}")
    return written
