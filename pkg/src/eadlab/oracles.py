"""
Closed-form results for linear birth-death processes and biased random
walks, with Monte Carlo counterparts used to check them.

Geometric ratios (d/b)^j are evaluated through expm1/exp of j*log(d/b),
so levels k up to ~1e6 neither overflow nor cancel.
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.special import logsumexp

from .errors import EadlabError, PreconditionError

logger = logging.getLogger(__name__)

CRITICAL_TOL = 1e-12
MAX_LOG = 700.0


class OracleError(EadlabError, ValueError):
    """Raised for parameters outside an oracle's domain or numerically unusable"""
    pass


class UnsupportedCaseError(OracleError):
    """Raised for the critical case b = d where a closed form does not apply"""
    pass


class BranchingParams(BaseModel):
    """Per-individual birth rate b and death rate d"""
    model_config = ConfigDict(frozen=True, allow_inf_nan=False)

    b: float = Field(..., ge=0)
    d: float = Field(..., ge=0)

    @model_validator(mode='after')
    def check_positive_total(self):
        if self.b + self.d <= 0:
            raise ValueError("b + d must be positive")
        return self


@dataclass(frozen=True)
class McEstimate:
    """Monte Carlo estimate with binomial / CLT standard errors"""
    probability: float
    probability_se: float
    trials: int
    mean_time: Optional[float] = None
    mean_time_se: Optional[float] = None


# =====================================================================
# HITTING PROBABILITIES
# =====================================================================

def _ruin_ratio(log_r: float, j: int, k: int) -> float:
    """(r^j - 1) / (r^k - 1) for r = exp(log_r), stable for r near 1 and large k"""
    if abs(math.expm1(log_r)) < CRITICAL_TOL:
        return j / k
    if log_r < 0:
        value = math.expm1(j * log_r) / math.expm1(k * log_r)
    else:
        value = math.exp((j - k) * log_r) * math.expm1(-j * log_r) / math.expm1(-k * log_r)
    return min(1.0, max(0.0, value))


def bd_hitting_prob(p: BranchingParams, j: int, k: int) -> float:
    """
    P_j[tau_k < tau_0] = ((d/b)^j - 1) / ((d/b)^k - 1), j/k when b = d.

    Args:
        p: Birth and death rates
        j: Initial population, 0 <= j <= k
        k: Target level, k >= 1
    """
    if k < 1 or not 0 <= j <= k:
        raise PreconditionError(f"need 0 <= j <= k and k >= 1, got j={j}, k={k}")
    if j == 0:
        return 0.0
    if j == k:
        return 1.0
    if p.b == 0.0:
        return 0.0
    if p.d == 0.0:
        return 1.0
    return _ruin_ratio(math.log(p.d) - math.log(p.b), j, k)


def supercritical_escape_prob(p: BranchingParams, j: int, k: int) -> float:
    """P_j[tau_0 < tau_k], the complement of bd_hitting_prob"""
    return 1.0 - bd_hitting_prob(p, j, k)


def invasion_prob_limit(p: BranchingParams, k: int) -> Tuple[float, float]:
    """([b - d]_+ / b, 1/k): limit of P_1[tau_k < tau_0] and its error bound"""
    if p.b <= 0:
        raise PreconditionError("invasion_prob_limit needs b > 0")
    if k < 1:
        raise PreconditionError("k must be at least 1")
    return max(p.b - p.d, 0.0) / p.b, 1.0 / k


def biased_walk_ruin(C: float, sigma: float, start: int, lo: int, hi: int) -> float:
    """
    Probability that the walk with up-probability 1/2 + C*sigma hits hi before lo.
    """
    drift = C * sigma
    if not lo < hi or not lo <= start <= hi:
        raise PreconditionError(f"need lo <= start <= hi and lo < hi, got {lo}, {start}, {hi}")
    if abs(drift) >= 0.5:
        raise PreconditionError("|C * sigma| must be below 1/2")
    j, k = start - lo, hi - lo
    if j in (0, k):
        return float(j == k)
    up, down = 0.5 + drift, 0.5 - drift
    return _ruin_ratio(math.log(down) - math.log(up), j, k)


def chain_exit_prob(C1: float, C2: float, eps: float, sigma: float, K: int, a: int, M: float) -> float:
    """
    Probability that the chain with p(i, i+-1) = 1/2 -+ (C1 i/K - C2 eps sigma)
    started at a reaches N = ceil(M eps sigma K) before 0.

    h(a) = sum_{i<=a} prod_{j<i} rho_j / sum_{i<=N} prod_{j<i} rho_j with
    rho_j = p(j, j-1) / p(j, j+1), evaluated in log space.
    """
    N = int(math.ceil(M * eps * sigma * K - 1e-9))
    if N < 2 or not 0 < a < N:
        raise PreconditionError(f"need 0 < a < N = {N}")
    i = np.arange(1, N + 1, dtype=np.float64)
    shift = C1 * i / K - C2 * eps * sigma
    up, down = 0.5 - shift, 0.5 + shift
    if np.any(up <= 0.0) or np.any(up >= 1.0):
        bad = int(np.flatnonzero((up <= 0.0) | (up >= 1.0))[0]) + 1
        raise OracleError(f"transition probability outside (0, 1) at state {bad}")
    log_rho = np.log(down) - np.log(up)
    # log_prod[i-1] = sum_{j<i} log rho_j
    log_prod = np.concatenate(([0.0], np.cumsum(log_rho[:-1])))
    return float(np.exp(logsumexp(log_prod[:a]) - logsumexp(log_prod)))


# =====================================================================
# TIMES
# =====================================================================

def expected_absorption_time(p: BranchingParams, n: int, k: int) -> float:
    """
    E_n[tau_k ^ tau_0] from the variation-of-parameters closed form, b != d.

    Raises:
        UnsupportedCaseError: For b = d
        OracleError: If the closed form overflows or violates e_1 <= (1 + ln k)/b
    """
    if k < 1 or not 1 <= n <= k:
        raise PreconditionError(f"need 1 <= n <= k, got n={n}, k={k}")
    if p.b <= 0:
        raise PreconditionError("expected_absorption_time needs b > 0")
    if p.b == p.d:
        raise UnsupportedCaseError("critical case b = d has no closed form here")
    if n == k:
        return 0.0
    b, d = p.b, p.d
    log_r = math.log(d) - math.log(b) if d > 0 else -math.inf
    j = np.arange(1, k + 1, dtype=np.float64)
    if log_r < 0:
        r = math.exp(log_r)
        # (r^(k-j) - 1)(1 - r^n)/(r^k - 1)
        first = (np.power(r, k - j) - 1.0) * (-math.expm1(n * log_r)) / math.expm1(k * log_r)
        second = np.power(r, n - j[:n]) - 1.0
        value = (np.sum(first / j) + np.sum(second / j[:n])) / (b - d)
    else:
        if n * log_r > MAX_LOG:
            raise OracleError("absorption time closed form overflows for these parameters")
        s = math.exp(-log_r)
        # (r^(k-j) - 1)/(r^k - 1) = (s^j - s^k)/(1 - s^k)
        ratio = (np.power(s, j) - s ** k) / (-math.expm1(-k * log_r))
        first = ratio * (-math.expm1(n * log_r))
        second = np.expm1((n - j[:n]) * log_r)
        value = (np.sum(first / j) + np.sum(second / j[:n])) / (b - d)
    if not math.isfinite(value):
        raise OracleError("absorption time closed form is not finite")
    if n == 1:
        bound = (1.0 + math.log(k)) / b
        if value > bound * (1.0 + 1e-9):
            raise OracleError(f"e_1 = {value!r} exceeds (1 + ln k)/b = {bound!r}")
    return float(value)


def conditioned_time_ratio_bound(eps: float, k: float) -> float:
    """(1 + ln k) / eps"""
    if eps <= 0:
        raise PreconditionError("eps must be positive")
    if k < 1:
        raise PreconditionError("k must be at least 1")
    return (1.0 + math.log(k)) / eps


def extinction_time_cdf(p: BranchingParams, n: int, t: float) -> float:
    """
    P_n(tau_0 <= t) = ((d - d e^{(d-b)t}) / (b - d e^{(d-b)t}))^n for b != d.
    """
    if n < 1 or t < 0:
        raise PreconditionError("need n >= 1 and t >= 0")
    b, d = p.b, p.d
    if b == d:
        raise UnsupportedCaseError("critical case b = d has no closed form here")
    a = (d - b) * t
    if a < 0:
        ratio = d * (-math.expm1(a)) / (b - d * math.exp(a))
    else:
        ratio = d * math.expm1(-a) / (b * math.exp(-a) - d)
    ratio = min(1.0, max(0.0, ratio))
    return ratio ** n


def occupation_laplace(p: BranchingParams, lam: float) -> float:
    """
    Smallest root G of b G^2 - (b + d + lam) G + d = 0, computed as
    2d / (s + sqrt((b - d)^2 + lam (lam + 2(b + d)))) with s = b + d + lam.
    """
    if lam < 0:
        raise PreconditionError("lambda must be nonnegative")
    b, d = p.b, p.d
    s = b + d + lam
    return 2.0 * d / (s + math.sqrt((b - d) ** 2 + lam * (lam + 2.0 * (b + d))))


# =====================================================================
# MONTE CARLO
# =====================================================================

def _estimate(hits: np.ndarray, times: Optional[np.ndarray] = None) -> McEstimate:
    trials = hits.size
    prob = float(hits.mean())
    se = math.sqrt(prob * (1.0 - prob) / trials)
    if times is None:
        return McEstimate(prob, se, trials)
    time_se = float(times.std(ddof=1)) / math.sqrt(trials) if trials > 1 else 0.0
    return McEstimate(prob, se, trials, float(times.mean()), time_se)


def mc_birth_death(
    p: BranchingParams,
    n0: int,
    absorb: Tuple[int, int],
    rng: np.random.Generator,
    trials: int,
) -> McEstimate:
    """
    Simulate the linear birth-death chain from n0 until it hits absorb[0] or absorb[1].

    Returns the empirical probability of hitting the upper level and the
    mean absorption time. Paths advance in lockstep, one jump per sweep.
    """
    lo, hi = absorb
    if trials < 1:
        raise PreconditionError("trials must be at least 1")
    if not 0 <= lo <= n0 <= hi or lo >= hi:
        raise PreconditionError("need 0 <= lo <= n0 <= hi and lo < hi")
    position = np.full(trials, n0, dtype=np.int64)
    clock = np.zeros(trials)
    up_prob = p.b / (p.b + p.d)
    running = (position > lo) & (position < hi)
    while running.any():
        idx = np.flatnonzero(running)
        n = position[idx]
        clock[idx] += rng.exponential(1.0, idx.size) / ((p.b + p.d) * n)
        position[idx] = n + np.where(rng.random(idx.size) < up_prob, 1, -1)
        running[idx] = (position[idx] > lo) & (position[idx] < hi)
    return _estimate(position >= hi, clock)


def mc_extinction_time(
    p: BranchingParams, n: int, t: float, rng: np.random.Generator, trials: int
) -> McEstimate:
    """Empirical P_n(tau_0 <= t)"""
    if trials < 1 or n < 1 or t < 0:
        raise PreconditionError("need trials >= 1, n >= 1 and t >= 0")
    # above this size extinction has probability < 1e-15 and the path is dropped
    cap = np.iinfo(np.int64).max
    if p.b > p.d:
        cap = n + int(math.ceil(math.log(1e-15) / (math.log(p.d / p.b) if p.d > 0 else -math.inf)))
    population = np.full(trials, n, dtype=np.int64)
    clock = np.zeros(trials)
    running = np.ones(trials, dtype=bool)
    up_prob = p.b / (p.b + p.d)
    while running.any():
        idx = np.flatnonzero(running)
        size = population[idx]
        arrival = clock[idx] + rng.exponential(1.0, idx.size) / ((p.b + p.d) * size)
        moves = np.where(rng.random(idx.size) < up_prob, 1, -1)
        within = arrival <= t
        population[idx] = np.where(within, size + moves, size)
        clock[idx] = arrival
        running[idx] = within & (population[idx] > 0) & (population[idx] < cap)
    return _estimate(population == 0)


def mc_biased_walk(
    C: float, sigma: float, start: int, lo: int, hi: int, rng: np.random.Generator, trials: int
) -> McEstimate:
    """Empirical probability that the biased walk hits hi before lo"""
    if trials < 1:
        raise PreconditionError("trials must be at least 1")
    if not lo < hi or not lo <= start <= hi or abs(C * sigma) >= 0.5:
        raise PreconditionError("invalid walk parameters")
    up = 0.5 + C * sigma
    position = np.full(trials, start, dtype=np.int64)
    running = (position > lo) & (position < hi)
    while running.any():
        idx = np.flatnonzero(running)
        position[idx] += np.where(rng.random(idx.size) < up, 1, -1)
        running[idx] = (position[idx] > lo) & (position[idx] < hi)
    return _estimate(position >= hi)


def mc_chain_exit(
    C1: float, C2: float, eps: float, sigma: float, K: int, a: int, M: float,
    rng: np.random.Generator, trials: int,
) -> McEstimate:
    """Empirical probability that the state-dependent chain of chain_exit_prob reaches N before 0"""
    if trials < 1:
        raise PreconditionError("trials must be at least 1")
    N = int(math.ceil(M * eps * sigma * K - 1e-9))
    if N < 2 or not 0 < a < N:
        raise PreconditionError(f"need 0 < a < N = {N}")
    states = np.arange(N + 1, dtype=np.float64)
    up_prob = 0.5 - (C1 * states / K - C2 * eps * sigma)
    if np.any(up_prob[1:N] <= 0.0) or np.any(up_prob[1:N] >= 1.0):
        raise OracleError("transition probability outside (0, 1)")
    position = np.full(trials, a, dtype=np.int64)
    running = np.ones(trials, dtype=bool)
    while running.any():
        idx = np.flatnonzero(running)
        position[idx] += np.where(rng.random(idx.size) < up_prob[position[idx]], 1, -1)
        running[idx] = (position[idx] > 0) & (position[idx] < N)
    return _estimate(position >= N)


def mc_occupation_laplace(
    p: BranchingParams, lam: float, rng: np.random.Generator, trials: int
) -> McEstimate:
    """
    Empirical E_1[exp(-lam * integral of Z_t dt)].

    Each individual is killed at rate lam; the transform is the probability
    that the line dies out before any kill. Births, deaths and kills all
    scale with the population size, so the embedded chain does not depend
    on it.
    """
    if trials < 1 or lam < 0:
        raise PreconditionError("need trials >= 1 and lambda >= 0")
    total = p.b + p.d + lam
    kill, up = lam / total, p.b / total
    # a line at size n dies out before a kill with probability at most ratio^n
    ratio = 1.0 - kill
    if p.b > p.d:
        ratio = min(ratio, p.d / p.b)
    cap = np.iinfo(np.int64).max
    if ratio < 1.0:
        cap = 1 + int(math.ceil(math.log(1e-15) / math.log(ratio))) if ratio > 0 else 1
    population = np.ones(trials, dtype=np.int64)
    killed = np.zeros(trials, dtype=bool)
    running = population < cap
    while running.any():
        idx = np.flatnonzero(running)
        draw = rng.random(idx.size)
        killed[idx] = draw < kill
        population[idx] += np.where(draw < kill + up, 1, -1)
        running[idx] = ~killed[idx] & (population[idx] > 0) & (population[idx] < cap)
    return _estimate(~killed & (population == 0))
