"""
Driver of the individual-based simulation: initial states, single steps,
full runs with trajectory recording, and single-mutant invasion trials.

Trajectory times are rescaled: t_rescaled = t_model * K * u * sigma^2.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from ..analytic import equilibrium_mass
from ..errors import PreconditionError
from ..model import admissible_kernel_at, check_trait, empirical_bounds
from ..schemas import ModelSpec
from . import kernel
from .base import (
    EventKind,
    EventRecord,
    MassBlowup,
    NegativeRateError,
    PopulationExtinct,
    SimulationAbort,
)
from .state import PopulationState

logger = logging.getLogger(__name__)

DEFAULT_RESYNC_EVERY = 2 ** 16
NO_LIMIT = 2 ** 62
MASS_BOUND_FACTOR = 4.0
BOUNDS_GRID_POINTS = 1001

_KIND_NAMES = {
    kernel.CLONAL: EventKind.CLONAL_BIRTH,
    kernel.MUTANT: EventKind.MUTANT_BIRTH,
    kernel.DEATH: EventKind.DEATH,
}

ATOM_COLUMNS = ["t", "label", "trait", "count"]
SUMMARY_COLUMNS = ["t", "total_mass", "mean_trait", "L"]
EVENT_COLUMNS = ["t", "kind", "label", "parent_label", "trait", "h"]


@dataclass
class StopRules:
    """
    Stop rules of a run.

    Attributes:
        epsilon: Invasion threshold parameter; a label invades at ceil(epsilon*sigma*K)
        mass_bound: Abort when total mass reaches this; default 4*b_max/c_min
        max_events: Abort after this many events (None for no limit)
    """
    epsilon: float = 1.0
    mass_bound: Optional[float] = None
    max_events: Optional[int] = None


@dataclass
class EventRates:
    """Per-atom event rates (index-aligned with the state arrays) and their total"""
    clonal: np.ndarray
    mutant: np.ndarray
    death: np.ndarray
    total: float


@dataclass
class Trajectory:
    """
    Sampled path of the population measure.

    atoms has one row per (sample time, atom), summary one row per sample
    time and events one row per mutation, invasion and fixation.
    """
    atoms: pd.DataFrame
    summary: pd.DataFrame
    events: pd.DataFrame
    K: int
    time_scale: float
    tallies: Dict[str, int] = field(default_factory=dict)
    initial_count: int = 0
    final_count: int = 0
    stop_reason: str = "horizon"
    max_resync_deviation: float = 0.0

    @property
    def times(self) -> np.ndarray:
        return self.summary["t"].to_numpy()

    @property
    def n_events(self) -> int:
        return int(sum(self.tallies.values()))

    def count_events(self, kind: str) -> int:
        return int((self.events["kind"] == kind).sum())

    def measure_at(self, t: float) -> List[Tuple[float, float]]:
        """(trait, mass) atoms of the sample taken at time t"""
        rows = self.atoms[self.atoms["t"] == t]
        return [(float(x), float(c) / self.K) for x, c in zip(rows["trait"], rows["count"])]


@dataclass
class _KernelExit:
    status: int
    kind: int
    index: int
    label: int
    trait: float
    events: int


def invasion_threshold(spec: ModelSpec, epsilon: float) -> int:
    """ceil(epsilon * sigma * K), at least 1"""
    s = spec.scaling
    return max(1, int(math.ceil(epsilon * s.sigma * s.K - 1e-9)))


def mass_bound(spec: ModelSpec, grid_points: int = BOUNDS_GRID_POINTS) -> float:
    """A priori bound 4*b_max/c_min on the total mass"""
    bounds = empirical_bounds(spec, grid_points)
    return MASS_BOUND_FACTOR * bounds.b_max / bounds.c_min


def _advance(state: PopulationState, rng: np.random.Generator, t_stop: float, max_events: int,
             resync_every: int, threshold: int, mass_cap: float) -> _KernelExit:
    status, t, n, kind, index, label, trait, events, since = kernel.advance(
        rng, state.n, state.labels, state.traits, state.counts, state.birth, state.mut,
        state.death, state.comp, state.comp_sum, state.active, state.crossed, state.watched,
        float(state.K), float(state.t), float(t_stop), int(max_events), int(resync_every),
        int(state.since_resync), int(threshold), float(mass_cap), state.tallies,
    )
    state.t = float(t)
    state.n = int(n)
    state.since_resync = int(since)
    return _KernelExit(int(status), int(kind), int(index), int(label), float(trait), int(events))


# =====================================================================
# STATE CONSTRUCTION
# =====================================================================

def make_state(
    spec: ModelSpec,
    atoms: Sequence[Tuple[int, float, int]],
    K: Optional[int] = None,
    mutation: bool = True,
) -> PopulationState:
    """Build a state from explicit (label, trait, count) atoms"""
    state = PopulationState(spec.scaling.K if K is None else K)
    for label, trait, count in atoms:
        state.add_atom(spec, int(label), float(trait), int(count), mutation=mutation)
    return state


def init_monomorphic(spec: ModelSpec, K: Optional[int] = None, mutation: bool = True) -> PopulationState:
    """
    Single atom (label 0, x0) with count round(K * zbar(x0)).

    Raises:
        PreconditionError: If the rounded count is 0
    """
    K = spec.scaling.K if K is None else K
    count = int(math.floor(K * equilibrium_mass(spec, spec.x0) + 0.5))
    if count < 1:
        raise PreconditionError(f"K={K} gives an empty initial population (K*zbar < 0.5)")
    state = make_state(spec, [(0, spec.x0, count)], K=K, mutation=mutation)
    logger.debug(f"Monomorphic state at x0={spec.x0} with {count} individuals")
    return state


def inject_mutant(
    state: PopulationState,
    spec: ModelSpec,
    trait: float,
    count: int = 1,
    mutation: bool = True,
) -> int:
    """
    Add individuals of a new trait under a fresh label; returns the label.

    Injection is not a mutation event, so L is unchanged.
    """
    check_trait(spec, trait)
    label = state.next_label
    state.add_atom(spec, label, trait, count, mutation=mutation)
    return label


def event_rates(state: PopulationState, spec: Optional[ModelSpec] = None) -> EventRates:
    """
    Per-atom clonal-birth, mutant-birth and death rates.

    Frozen atoms get zero rates. The competition sum includes the focal
    individual.

    Raises:
        NegativeRateError: If a death rate is negative
    """
    n = state.n
    counts = state.counts[:n].astype(np.float64)
    active = state.active[:n]
    births = counts * state.birth[:n]
    per_capita_death = state.death[:n] + state.comp_sum[:n] / state.K
    if np.any(per_capita_death[active] < 0.0) or np.any(state.birth[:n][active] < 0.0):
        i = int(np.flatnonzero(active & ((per_capita_death < 0) | (state.birth[:n] < 0)))[0])
        raise NegativeRateError(f"negative event rate at trait {state.traits[i]!r}",
                                float(state.traits[i]))
    clonal = np.where(active, births * (1.0 - state.mut[:n]), 0.0)
    mutant = np.where(active, births * state.mut[:n], 0.0)
    death = np.where(active, counts * per_capita_death, 0.0)
    return EventRates(clonal, mutant, death, float(clonal.sum() + mutant.sum() + death.sum()))


# =====================================================================
# EVENTS
# =====================================================================

class _KernelCache:
    """Admissible jumps per parent trait"""

    def __init__(self, spec: ModelSpec):
        self.spec = spec
        self._cache: Dict[float, Tuple[np.ndarray, np.ndarray]] = {}

    def get(self, x: float) -> Tuple[np.ndarray, np.ndarray]:
        if x not in self._cache:
            choices = admissible_kernel_at(self.spec, x)
            hs = np.array([h for h, _ in choices], dtype=np.int64)
            cumulative = np.cumsum([w for _, w in choices])
            self._cache[x] = (hs, cumulative)
        return self._cache[x]


def _mutate(state: PopulationState, spec: ModelSpec, outcome: _KernelExit,
            rng: np.random.Generator, jumps: _KernelCache) -> EventRecord:
    """Execute a mutant birth selected by the kernel"""
    index = outcome.index
    parent_label, parent_trait = outcome.label, outcome.trait
    hs, cumulative = jumps.get(parent_trait)
    if hs.size == 0:
        # no admissible jump: the offspring keeps the parent trait
        state.tallies[kernel.MUTANT] -= 1
        state.tallies[kernel.CLONAL] += 1
        state.counts[index] += 1
        state.comp_sum[:state.n] += state.comp[:state.n, index]
        return EventRecord(state.t, EventKind.CLONAL_BIRTH, parent_label, parent_trait)
    draw = rng.random() * cumulative[-1]
    h = int(hs[min(int(np.searchsorted(cumulative, draw, side='right')), hs.size - 1)])
    new_trait = float(np.clip(parent_trait + spec.scaling.sigma * h, spec.space.lo, spec.space.hi))
    check_trait(spec, new_trait)
    label = state.next_label
    state.add_atom(spec, label, new_trait, 1)
    state.L += 1
    return EventRecord(state.t, EventKind.MUTANT_BIRTH, parent_label, parent_trait,
                       h=h, new_label=label, new_trait=new_trait)


def step(
    state: PopulationState,
    spec: ModelSpec,
    rng: np.random.Generator,
    resync_every: int = DEFAULT_RESYNC_EVERY,
) -> EventRecord:
    """
    Execute exactly one event.

    Raises:
        PopulationExtinct: If no event can happen (total rate 0)
        NegativeRateError: If a rate is negative
    """
    jumps = _KernelCache(spec)
    while True:
        outcome = _advance(state, rng, math.inf, 1, resync_every, NO_LIMIT, math.inf)
        if outcome.status == kernel.RESYNC:
            state.resync()
            continue
        if outcome.status == kernel.NEGATIVE_RATE:
            raise NegativeRateError(f"negative event rate at trait {outcome.trait!r}", outcome.trait)
        if outcome.status == kernel.MUTATION:
            return _mutate(state, spec, outcome, rng, jumps)
        if outcome.events == 0:
            raise PopulationExtinct("total event rate is zero", time=state.t)
        return EventRecord(state.t, _KIND_NAMES[outcome.kind], outcome.label, outcome.trait)


# =====================================================================
# RUNS
# =====================================================================

class _Recorder:
    def __init__(self, K: int, time_scale: float):
        self.K = K
        self.time_scale = time_scale
        self.atom_rows: List[tuple] = []
        self.summary_rows: List[tuple] = []
        self.event_rows: List[tuple] = []

    def snapshot(self, t: float, state: PopulationState) -> None:
        for label, trait, count in state.atoms():
            self.atom_rows.append((t, label, trait, count))
        mean = state.mean_trait()
        self.summary_rows.append((t, state.total_mass, float("nan") if mean is None else mean, state.L))

    def event(self, t_model: float, kind: str, label: int, parent_label: Optional[int],
              trait: float, h: Optional[int] = None) -> None:
        self.event_rows.append((t_model * self.time_scale, kind, label, parent_label, trait, h))

    def build(self, state: PopulationState, initial_count: int, reason: str) -> Trajectory:
        events = pd.DataFrame(self.event_rows, columns=EVENT_COLUMNS)
        for column in ("label", "parent_label", "h"):
            events[column] = events[column].astype("Int64")
        return Trajectory(
            atoms=pd.DataFrame(self.atom_rows, columns=ATOM_COLUMNS),
            summary=pd.DataFrame(self.summary_rows, columns=SUMMARY_COLUMNS),
            events=events,
            K=self.K,
            time_scale=self.time_scale,
            tallies={
                "clonal_births": int(state.tallies[kernel.CLONAL]),
                "mutant_births": int(state.tallies[kernel.MUTANT]),
                "deaths": int(state.tallies[kernel.DEATH]),
            },
            initial_count=initial_count,
            final_count=state.total_count,
            stop_reason=reason,
            max_resync_deviation=state.max_resync_deviation,
        )


def _output_grid(T_rescaled: float, grid: Union[int, Sequence[float]]) -> np.ndarray:
    if isinstance(grid, (int, np.integer)):
        if grid < 2:
            raise PreconditionError("output grid needs at least 2 points")
        return np.linspace(0.0, T_rescaled, int(grid))
    times = np.asarray(grid, dtype=np.float64)
    if times.size == 0 or times[0] < 0 or np.any(np.diff(times) <= 0):
        raise PreconditionError("output grid must be nonnegative and strictly increasing")
    return times[times <= T_rescaled]


def _pick_resident(state: PopulationState, invader_index: int) -> Optional[int]:
    """Index of the most numerous atom other than the invader (lowest label on ties)"""
    best = None
    for i in range(state.n):
        if i == invader_index:
            continue
        key = (-int(state.counts[i]), int(state.labels[i]))
        if best is None or key < best[0]:
            best = (key, i)
    return None if best is None else best[1]


def run(
    spec: ModelSpec,
    T_rescaled: float,
    grid: Union[int, Sequence[float]],
    rng: np.random.Generator,
    stop: Optional[StopRules] = None,
    state: Optional[PopulationState] = None,
    resync_every: int = DEFAULT_RESYNC_EVERY,
) -> Trajectory:
    """
    Simulate to the rescaled horizon and sample on the output grid.

    The model-time horizon is T_rescaled / (K u sigma^2). Mutation events
    are recorded, and so are invasions (a new label first reaching
    ceil(epsilon sigma K) individuals) and fixations (death of the
    invaded resident while the invader is still present).

    Args:
        spec: Validated model
        T_rescaled: Horizon in rescaled time
        grid: Number of uniform sample points on [0, T_rescaled] or explicit sample times
        rng: Random stream of this replicate
        stop: Stop rules (threshold epsilon, mass bound, event budget)
        state: Initial state, default init_monomorphic(spec)
        resync_every: Events between competition-sum resyncs

    Raises:
        PopulationExtinct: Total extinction (partial trajectory attached)
        MassBlowup: Total mass reached the bound (partial trajectory attached)
        SimulationAbort: Event budget exhausted
    """
    if T_rescaled <= 0:
        raise PreconditionError("horizon must be positive")
    stop = stop or StopRules()
    state = init_monomorphic(spec) if state is None else state
    time_scale = spec.scaling.time_scale
    grid_times = _output_grid(T_rescaled, grid)
    t0 = state.t
    model_times = t0 + grid_times / time_scale
    threshold = invasion_threshold(spec, stop.epsilon)
    bound = mass_bound(spec) if stop.mass_bound is None else stop.mass_bound
    mass_cap = bound * state.K
    budget = NO_LIMIT if stop.max_events is None else int(stop.max_events)

    # atoms present at the start never count as invaders
    state.crossed[:state.n] = True
    jumps = _KernelCache(spec)
    recorder = _Recorder(state.K, time_scale)
    initial_count = state.total_count
    residents: Dict[int, int] = {}
    used = 0

    def abort(error_type, message):
        trajectory = recorder.build(state, initial_count, error_type.__name__)
        return error_type(message, trajectory=trajectory, time=state.t * time_scale)

    def invaded(index: int, label: int, trait: float) -> None:
        state.crossed[index] = True
        resident = _pick_resident(state, index)
        resident_label = None if resident is None else int(state.labels[resident])
        recorder.event(state.t, "invasion", label, resident_label, trait)
        logger.debug(f"Label {label} invaded at t={state.t * time_scale:.6g}")
        if resident is not None:
            state.watched[resident] = True
            residents[resident_label] = label

    for t_rescaled, t_model in zip(grid_times, model_times):
        while state.t < t_model:
            outcome = _advance(state, rng, t_model, budget - used, resync_every, threshold, mass_cap)
            used += outcome.events
            status = outcome.status
            if status == kernel.HORIZON:
                break
            if status == kernel.RESYNC:
                state.resync()
            elif status == kernel.MUTATION:
                record = _mutate(state, spec, outcome, rng, jumps)
                if record.kind is EventKind.MUTANT_BIRTH:
                    recorder.event(state.t, "mutation", record.new_label, record.parent_label,
                                   record.new_trait, record.h)
                    logger.debug(f"Mutation {record.new_label} at trait {record.new_trait}")
                    # the kernel tests the threshold on clonal births only
                    if threshold <= 1:
                        invaded(state.index_of(record.new_label), record.new_label, record.new_trait)
                if state.total_count >= mass_cap:
                    raise abort(MassBlowup, f"total mass reached {bound:.6g}")
            elif status == kernel.THRESHOLD:
                invaded(outcome.index, outcome.label, outcome.trait)
            elif status == kernel.WATCH_EXTINCT:
                invader = residents.pop(outcome.label, None)
                if invader is not None:
                    index = state.index_of(invader)
                    if index is not None:
                        recorder.event(state.t, "fixation", invader, outcome.label,
                                       float(state.traits[index]))
                        logger.debug(f"Label {invader} fixed, resident {outcome.label} died out")
            elif status == kernel.EXTINCT:
                raise abort(PopulationExtinct, "population went extinct")
            elif status == kernel.BLOWUP:
                raise abort(MassBlowup, f"total mass reached {bound:.6g}")
            elif status == kernel.ABSORBED:
                state.t = float(model_times[-1])
                break
            elif status == kernel.NEGATIVE_RATE:
                raise NegativeRateError(f"negative event rate at trait {outcome.trait!r}", outcome.trait)
            elif status == kernel.MAX_EVENTS:
                raise abort(SimulationAbort, "event budget exhausted")
        recorder.snapshot(float(t_rescaled), state)

    return recorder.build(state, initial_count, "horizon")


def invasion_trial(
    spec: ModelSpec,
    trait: float,
    rng: np.random.Generator,
    epsilon: float = 1.0,
    frozen_resident: bool = False,
    max_events: Optional[int] = None,
    resync_every: int = DEFAULT_RESYNC_EVERY,
) -> bool:
    """
    One mutant at `trait` against the monomorphic equilibrium, mutation off.

    Returns True iff the mutant line reaches ceil(epsilon sigma K)
    individuals before dying out.
    """
    state = init_monomorphic(spec, mutation=False)
    state.crossed[:state.n] = True
    if frozen_resident:
        state.active[:state.n] = False
    label = inject_mutant(state, spec, trait, mutation=False)
    state.watched[state.index_of(label)] = True
    threshold = invasion_threshold(spec, epsilon)
    if threshold <= 1:
        return True
    budget = NO_LIMIT if max_events is None else int(max_events)
    used = 0
    while True:
        outcome = _advance(state, rng, math.inf, budget - used, resync_every, threshold, math.inf)
        used += outcome.events
        if outcome.status == kernel.THRESHOLD:
            return True
        if outcome.status in (kernel.WATCH_EXTINCT, kernel.EXTINCT, kernel.ABSORBED):
            return False
        if outcome.status == kernel.RESYNC:
            state.resync()
        elif outcome.status == kernel.NEGATIVE_RATE:
            raise NegativeRateError(f"negative event rate at trait {outcome.trait!r}", outcome.trait)
        elif outcome.status == kernel.MAX_EVENTS:
            raise SimulationAbort("event budget exhausted in invasion trial")
