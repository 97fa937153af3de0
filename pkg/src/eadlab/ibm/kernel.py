"""
Event loop of the exact (Gillespie) simulation.

advance() runs events until something needs the caller's attention: the
stop time, a mutant birth (the new trait's rates come from the rate
expressions, which only Python can evaluate), a threshold crossing, the
death of a watched atom, extinction, mass blowup, the event budget or a
due cache resync.

The loop is compiled with numba when it is installed and runs as plain
Python otherwise. Both paths draw exactly two uniforms per event from the
same numpy Generator (waiting time by inversion, then the event by a
linear scan over atoms), so they consume the random stream identically.
"""

import logging

import numpy as np

logger = logging.getLogger(__name__)

try:
    from numba import njit
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - depends on the environment
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda func: func


# Exit statuses
HORIZON = 0
MUTATION = 1
THRESHOLD = 2
WATCH_EXTINCT = 3
EXTINCT = 4
BLOWUP = 5
MAX_EVENTS = 6
RESYNC = 7
ABSORBED = 8
NEGATIVE_RATE = 9

STATUS_NAMES = {
    HORIZON: "horizon",
    MUTATION: "mutation",
    THRESHOLD: "threshold",
    WATCH_EXTINCT: "watch-extinct",
    EXTINCT: "extinct",
    BLOWUP: "blowup",
    MAX_EVENTS: "max-events",
    RESYNC: "resync",
    ABSORBED: "absorbed",
    NEGATIVE_RATE: "negative-rate",
}

# Event kinds (tally indices)
NO_EVENT = -1
CLONAL = 0
MUTANT = 1
DEATH = 2


@njit(cache=True)
def remove_atom(i, n, labels, traits, counts, birth, mut, death, comp, comp_sum,
                active, crossed, watched):
    """Move the last atom into slot i; returns the new atom count"""
    last = n - 1
    if i != last:
        labels[i] = labels[last]
        traits[i] = traits[last]
        counts[i] = counts[last]
        birth[i] = birth[last]
        mut[i] = mut[last]
        death[i] = death[last]
        comp_sum[i] = comp_sum[last]
        active[i] = active[last]
        crossed[i] = crossed[last]
        watched[i] = watched[last]
        # row first, then column: comp[i, i] ends up as the old comp[last, last]
        for j in range(n):
            comp[i, j] = comp[last, j]
        for j in range(n):
            comp[j, i] = comp[j, last]
    counts[last] = 0
    comp_sum[last] = 0.0
    return last


@njit(cache=True)
def advance(rng, n, labels, traits, counts, birth, mut, death, comp, comp_sum,
            active, crossed, watched, K, t, t_stop, max_events, resync_every,
            since_resync, threshold, mass_cap, tallies):
    """
    Run events until an exit condition.

    Per-capita rates: clonal birth (1 - mut) * birth, mutant birth
    mut * birth, death death + comp_sum / K. Inactive atoms have no
    events but still compete.

    Returns:
        (status, t, n, kind, index, label, trait, events, since_resync)
        where index/label/trait describe the atom involved in the exit.
    """
    total = 0
    for i in range(n):
        total += counts[i]
    events = 0
    last_kind = NO_EVENT
    last_label = -1
    last_trait = 0.0
    while True:
        if events >= max_events:
            return MAX_EVENTS, t, n, last_kind, -1, last_label, last_trait, events, since_resync
        if since_resync >= resync_every:
            return RESYNC, t, n, NO_EVENT, -1, -1, 0.0, events, since_resync

        rate = 0.0
        for i in range(n):
            if active[i]:
                per_capita_death = death[i] + comp_sum[i] / K
                if per_capita_death < 0.0 or birth[i] < 0.0:
                    return NEGATIVE_RATE, t, n, NO_EVENT, i, labels[i], traits[i], events, since_resync
                rate += counts[i] * (birth[i] + per_capita_death)
        if rate <= 0.0:
            if total == 0:
                return EXTINCT, t, n, NO_EVENT, -1, -1, 0.0, events, since_resync
            return ABSORBED, t, n, NO_EVENT, -1, -1, 0.0, events, since_resync

        wait = -np.log(1.0 - rng.random()) / rate
        if t + wait > t_stop:
            return HORIZON, t_stop, n, NO_EVENT, -1, -1, 0.0, events, since_resync
        t += wait

        target = rng.random() * rate
        acc = 0.0
        chosen = -1
        kind = DEATH
        for i in range(n):
            if not active[i]:
                continue
            births = counts[i] * birth[i]
            acc += births * (1.0 - mut[i])
            if target < acc:
                chosen = i
                kind = CLONAL
                break
            acc += births * mut[i]
            if target < acc:
                chosen = i
                kind = MUTANT
                break
            acc += counts[i] * (death[i] + comp_sum[i] / K)
            if target < acc:
                chosen = i
                kind = DEATH
                break
        if chosen < 0:
            # rounding at the top of the scan: last active atom dies
            for i in range(n - 1, -1, -1):
                if active[i]:
                    chosen = i
                    break
            kind = DEATH

        events += 1
        since_resync += 1
        label = labels[chosen]
        trait = traits[chosen]
        last_kind = kind
        last_label = label
        last_trait = trait

        if kind == MUTANT:
            tallies[MUTANT] += 1
            return MUTATION, t, n, kind, chosen, label, trait, events, since_resync

        if kind == CLONAL:
            tallies[CLONAL] += 1
            counts[chosen] += 1
            total += 1
            for j in range(n):
                comp_sum[j] += comp[j, chosen]
            if total >= mass_cap:
                return BLOWUP, t, n, kind, chosen, label, trait, events, since_resync
            if not crossed[chosen] and counts[chosen] >= threshold:
                crossed[chosen] = True
                return THRESHOLD, t, n, kind, chosen, label, trait, events, since_resync
            continue

        tallies[DEATH] += 1
        counts[chosen] -= 1
        total -= 1
        for j in range(n):
            comp_sum[j] -= comp[j, chosen]
        if counts[chosen] == 0:
            was_watched = watched[chosen]
            n = remove_atom(chosen, n, labels, traits, counts, birth, mut, death, comp,
                            comp_sum, active, crossed, watched)
            if total == 0:
                return EXTINCT, t, n, kind, -1, label, trait, events, since_resync
            if was_watched:
                return WATCH_EXTINCT, t, n, kind, -1, label, trait, events, since_resync
