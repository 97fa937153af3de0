"""
Population state of the individual-based model.

Individuals are aggregated into atoms (label, trait, count). Per-capita
rates and the competition matrix between atoms are cached in flat numpy
arrays that the event kernel updates in place.
"""

import logging
from typing import List, Optional, Tuple

import numpy as np

from ..schemas import ModelSpec
from .base import CacheCoherenceError

logger = logging.getLogger(__name__)

RESYNC_REL_TOL = 1e-9
INITIAL_CAPACITY = 8


class PopulationState:
    """
    Atoms of the population measure plus the mutation counter L.

    Attributes:
        K: Population scale; masses are counts / K
        L: Number of mutation events since initialisation
        t: Current model time (not rescaled)
        n: Number of atoms in use; arrays are valid on [:n]
    """

    def __init__(self, K: int, capacity: int = INITIAL_CAPACITY):
        self.K = int(K)
        self.L = 0
        self.t = 0.0
        self.n = 0
        self.next_label = 0
        self.tallies = np.zeros(3, dtype=np.int64)
        self.since_resync = 0
        self.max_resync_deviation = 0.0
        self._allocate(capacity)

    def _allocate(self, capacity: int) -> None:
        self.labels = np.zeros(capacity, dtype=np.int64)
        self.traits = np.zeros(capacity, dtype=np.float64)
        self.counts = np.zeros(capacity, dtype=np.int64)
        self.birth = np.zeros(capacity, dtype=np.float64)
        self.mut = np.zeros(capacity, dtype=np.float64)
        self.death = np.zeros(capacity, dtype=np.float64)
        self.comp = np.zeros((capacity, capacity), dtype=np.float64)
        self.comp_sum = np.zeros(capacity, dtype=np.float64)
        self.active = np.ones(capacity, dtype=np.bool_)
        self.crossed = np.zeros(capacity, dtype=np.bool_)
        self.watched = np.zeros(capacity, dtype=np.bool_)

    @property
    def capacity(self) -> int:
        return self.labels.shape[0]

    def _grow(self) -> None:
        old = {name: getattr(self, name) for name in (
            'labels', 'traits', 'counts', 'birth', 'mut', 'death', 'comp_sum',
            'active', 'crossed', 'watched')}
        old_comp = self.comp
        size = self.capacity
        self._allocate(2 * size)
        for name, values in old.items():
            getattr(self, name)[:size] = values
        self.comp[:size, :size] = old_comp

    # -----------------------------------------------------------------
    # Atom management
    # -----------------------------------------------------------------

    def add_atom(
        self,
        spec: ModelSpec,
        label: int,
        trait: float,
        count: int,
        mutation: bool = True,
        active: bool = True,
    ) -> int:
        """
        Append an atom and update competition sums; returns its index.

        With mutation=False the atom reproduces clonally only.
        """
        if count < 1:
            raise ValueError("atoms need a positive count")
        if self.n == self.capacity:
            self._grow()
        rates = spec.rates
        i = self.n
        self.labels[i] = label
        self.traits[i] = trait
        self.counts[i] = count
        self.birth[i] = rates.birth(trait)
        self.mut[i] = spec.scaling.u * rates.mutation(trait) if mutation else 0.0
        self.death[i] = rates.death(trait)
        self.active[i] = active
        self.crossed[i] = False
        self.watched[i] = False
        for j in range(i):
            self.comp[i, j] = rates.competition(trait, float(self.traits[j]))
            self.comp[j, i] = rates.competition(float(self.traits[j]), trait)
        self.comp[i, i] = rates.competition(trait, trait)
        self.n += 1
        self.comp_sum[i] = float(self.comp[i, :self.n] @ self.counts[:self.n])
        self.comp_sum[:i] += self.comp[:i, i] * count
        self.next_label = max(self.next_label, label + 1)
        return i

    def index_of(self, label: int) -> Optional[int]:
        hits = np.flatnonzero(self.labels[:self.n] == label)
        return int(hits[0]) if hits.size else None

    def freeze(self, label: int) -> None:
        """Stop all events of an atom while it keeps competing"""
        index = self.index_of(label)
        if index is None:
            raise KeyError(label)
        self.active[index] = False

    # -----------------------------------------------------------------
    # Observables
    # -----------------------------------------------------------------

    @property
    def total_count(self) -> int:
        return int(self.counts[:self.n].sum())

    @property
    def total_mass(self) -> float:
        return self.total_count / self.K

    def mean_trait(self) -> Optional[float]:
        total = self.total_count
        if total == 0:
            return None
        return float(self.counts[:self.n] @ self.traits[:self.n]) / total

    def atoms(self) -> List[Tuple[int, float, int]]:
        """(label, trait, count) sorted by label"""
        rows = [
            (int(self.labels[i]), float(self.traits[i]), int(self.counts[i]))
            for i in range(self.n)
        ]
        return sorted(rows)

    # -----------------------------------------------------------------
    # Cache coherence
    # -----------------------------------------------------------------

    def recompute_comp_sum(self) -> np.ndarray:
        """Competition sums sum_j c(x_i, x_j) n_j from scratch"""
        return self.comp[:self.n, :self.n] @ self.counts[:self.n].astype(np.float64)

    def resync(self, rel_tol: float = RESYNC_REL_TOL) -> float:
        """
        Compare the cached competition sums with a full recomputation and
        overwrite them.

        Raises:
            CacheCoherenceError: If any relative deviation exceeds rel_tol
        """
        fresh = self.recompute_comp_sum()
        cached = self.comp_sum[:self.n]
        # sums are in individual units; below one individual the error is taken as absolute
        scale = np.maximum(np.abs(fresh), 1.0)
        deviation = float(np.max(np.abs(cached - fresh) / scale)) if self.n else 0.0
        self.max_resync_deviation = max(self.max_resync_deviation, deviation)
        if deviation > rel_tol:
            raise CacheCoherenceError(
                f"competition sums drifted by {deviation:.3e} (relative) at t={self.t}"
            )
        self.comp_sum[:self.n] = fresh
        self.since_resync = 0
        logger.debug(f"Resync at t={self.t}: max relative deviation {deviation:.3e}")
        return deviation
