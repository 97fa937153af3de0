"""
Trait substitution sequence: the jump process of successive invasions
in the large-population, rare-mutation limit, and its sigma^2 time
rescaling for comparison with the canonical equation.
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from .analytic import equilibrium_mass, invasion_fitness
from .errors import EadlabError, PreconditionError
from .model import admissible_kernel_at
from .schemas import ModelSpec

logger = logging.getLogger(__name__)


@dataclass
class JumpPath:
    """
    Right-continuous piecewise-constant path: the state is states[i] on
    [times[i], times[i+1]). times[0] is the start time (0) and horizon is
    where observation ended.
    """
    times: np.ndarray
    states: np.ndarray
    sigma: float
    horizon: float

    @property
    def n_jumps(self) -> int:
        return max(0, len(self.times) - 1)

    @property
    def is_empty(self) -> bool:
        return len(self.times) == 0

    @property
    def final_state(self) -> float:
        return float(self.states[-1])

    def value_at(self, t):
        """State at time(s) t (right-continuous lookup)"""
        if self.is_empty:
            raise ValueError("empty path has no values")
        index = np.searchsorted(self.times, t, side='right') - 1
        index = np.clip(index, 0, len(self.states) - 1)
        values = self.states[index]
        return float(values) if np.ndim(values) == 0 else values

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"t": self.times, "x": self.states})


def tss_rates(spec: ModelSpec, x: float, sigma: float) -> List[Tuple[int, float]]:
    """
    Jump rates of the substitution sequence at resident trait x.

    rate(h) = m(x) b(x) zbar(x) [f(x + sigma h, x)]_+ / b(x + sigma h) M(x, h)
    over admissible h, with the raw kernel weights M(x, h).
    """
    rates = spec.rates
    prefactor = rates.mutation(x) * rates.birth(x) * equilibrium_mass(spec, x)
    result = []
    for h, weight in admissible_kernel_at(spec, x, sigma=sigma, renormalize=False):
        y = x + sigma * h
        if prefactor == 0.0 or h == 0:
            result.append((h, 0.0))
            continue
        fitness = invasion_fitness(spec, y, x)
        result.append((h, prefactor * max(fitness, 0.0) / rates.birth(y) * weight))
    return result


def tss_total_rate(spec: ModelSpec, x: float, sigma: float) -> float:
    return math.fsum(rate for _, rate in tss_rates(spec, x, sigma))


def simulate_tss(
    spec: ModelSpec,
    x0: float,
    sigma: float,
    T: float,
    rng: np.random.Generator,
    max_jumps: Optional[int] = None,
) -> JumpPath:
    """
    Simulate the jump chain on [0, T]: exponential holding times at the
    total rate, jumps chosen proportionally to their rates. Stops early in
    an absorbing state (total rate 0).

    States are kept on the lattice x0 + sigma*k so repeated jumps do not
    accumulate rounding.
    """
    if sigma <= 0:
        raise PreconditionError("sigma must be positive")
    if not spec.space.contains(x0):
        raise PreconditionError(f"x0={x0} outside the trait space")
    cache: Dict[int, Tuple[np.ndarray, np.ndarray]] = {}
    times = [0.0]
    states = [float(x0)]
    position = 0
    t = 0.0
    while max_jumps is None or len(times) - 1 < max_jumps:
        x = x0 + sigma * position
        if position not in cache:
            jumps = tss_rates(spec, x, sigma)
            cache[position] = (
                np.array([h for h, _ in jumps], dtype=np.int64),
                np.array([r for _, r in jumps], dtype=np.float64),
            )
        hs, rates = cache[position]
        total = float(rates.sum())
        if not math.isfinite(total):
            raise EadlabError(f"TSS total rate is not finite at x={x}")
        if total <= 0.0:
            logger.debug(f"TSS absorbed at x={x}")
            break
        t += -math.log(1.0 - rng.random()) / total
        if t > T:
            break
        draw = rng.random() * total
        choice = min(int(np.searchsorted(np.cumsum(rates), draw, side='right')), hs.size - 1)
        while rates[choice] <= 0.0:
            choice -= 1
        h = int(hs[choice])
        target = x + sigma * h
        if invasion_fitness(spec, target, x) <= 0.0:
            raise EadlabError(f"realised TSS jump {x} -> {target} has non-positive fitness")
        position += h
        times.append(t)
        states.append(x0 + sigma * position)
    return JumpPath(np.array(times), np.array(states), sigma, float(T))


def rescaled_tss_path(path: JumpPath) -> JumpPath:
    """Same path on the time axis t * sigma^2"""
    if path.sigma <= 0:
        raise PreconditionError("sigma must be positive")
    factor = path.sigma ** 2
    return JumpPath(path.times * factor, path.states.copy(), path.sigma, path.horizon * factor)
