"""
Tests for the individual-based simulator.

Run with: pytest -q tests/test_ibm.py
"""

import numpy as np
import pandas as pd
import pytest

from eadlab.errors import PreconditionError
from eadlab.ibm import (
    CacheCoherenceError,
    EventKind,
    MassBlowup,
    PopulationExtinct,
    PopulationState,
    SimulationAbort,
    StopRules,
    event_rates,
    init_monomorphic,
    inject_mutant,
    invasion_threshold,
    invasion_trial,
    make_state,
    mass_bound,
    run,
    step,
)
from eadlab.schemas import ModelSpec, ScalingTriple
from eadlab.utils import replicate_rng


@pytest.fixture
def fast_spec(linear_birth_spec):
    """Small population with frequent mutations so runs stay short"""
    return linear_birth_spec.with_scaling(ScalingTriple(K=200, u=1e-3, sigma=0.1, alpha=0.2))


class TestPopulationState:
    """Test state construction and cached rates."""

    def test_init_monomorphic(self, linear_birth_spec):
        """Count is round(K * zbar(x0))."""
        state = init_monomorphic(linear_birth_spec)
        assert state.atoms() == [(0, 0.0, 500)]
        assert state.total_mass == pytest.approx(0.5)
        assert state.mean_trait() == 0.0
        assert state.L == 0

    def test_init_empty_population(self, linear_birth_doc):
        linear_birth_doc["rates"]["d"] = "0.9"
        spec = ModelSpec.model_validate(linear_birth_doc)
        with pytest.raises(PreconditionError):
            init_monomorphic(spec, K=4)

    def test_inject_mutant(self, linear_birth_spec):
        """Injection adds a fresh label without counting a mutation."""
        state = init_monomorphic(linear_birth_spec)
        label = inject_mutant(state, linear_birth_spec, 0.1)
        assert label == 1
        assert state.L == 0
        assert state.atoms() == [(0, 0.0, 500), (1, 0.1, 1)]
        assert state.comp_sum[:2] == pytest.approx([501.0, 501.0])

    def test_event_rates(self, linear_birth_spec):
        state = init_monomorphic(linear_birth_spec)
        rates = event_rates(state)
        assert rates.mutant[0] == pytest.approx(500 * 1e-5)
        assert rates.clonal[0] == pytest.approx(500 * (1 - 1e-5))
        assert rates.death[0] == pytest.approx(500 * (0.5 + 500 / 1000))
        assert rates.total == pytest.approx(1000.0)

    def test_frozen_atom_has_no_rates(self, linear_birth_spec):
        state = init_monomorphic(linear_birth_spec)
        label = inject_mutant(state, linear_birth_spec, 0.1)
        state.freeze(0)
        rates = event_rates(state)
        assert rates.total == pytest.approx(1.05 + 0.5 + 501 / 1000)
        with pytest.raises(KeyError):
            state.freeze(label + 5)

    def test_make_state(self, linear_birth_spec):
        state = make_state(linear_birth_spec, [(3, 0.2, 10), (7, 0.4, 20)], K=100)
        assert state.next_label == 8
        assert state.mean_trait() == pytest.approx((0.2 * 10 + 0.4 * 20) / 30)
        assert state.recompute_comp_sum() == pytest.approx([30.0, 30.0])

    def test_resync_detects_drift(self, linear_birth_spec):
        state = init_monomorphic(linear_birth_spec)
        state.comp_sum[0] += 1.0
        with pytest.raises(CacheCoherenceError):
            state.resync()

    def test_resync_after_steps(self, linear_birth_spec, rng):
        state = init_monomorphic(linear_birth_spec)
        for _ in range(200):
            step(state, linear_birth_spec, rng)
        state.resync()
        assert state.max_resync_deviation < 1e-9
        assert state.since_resync == 0


class TestStep:
    """Test single events."""

    def test_step_changes_one_count(self, linear_birth_spec, rng):
        state = init_monomorphic(linear_birth_spec)
        record = step(state, linear_birth_spec, rng)
        assert state.t > 0
        assert int(state.tallies.sum()) == 1
        if record.kind is EventKind.DEATH:
            assert state.total_count == 499
        else:
            assert state.total_count == 501

    def test_step_reproducible(self, linear_birth_spec):
        results = []
        for _ in range(2):
            state = init_monomorphic(linear_birth_spec)
            generator = np.random.default_rng(5)
            kinds = [step(state, linear_birth_spec, generator).kind for _ in range(50)]
            results.append((kinds, state.t, state.atoms()))
        assert results[0] == results[1]

    def test_mutant_birth(self, linear_birth_doc, rng):
        """With u m = 1 every birth is a mutation to x +- sigma."""
        linear_birth_doc["x0"] = 0.5
        linear_birth_doc["scaling"]["u"] = 1.0
        spec = ModelSpec.model_validate(linear_birth_doc)
        state = init_monomorphic(spec, K=10)
        while True:
            record = step(state, spec, rng)
            if record.kind is EventKind.MUTANT_BIRTH:
                break
        assert record.h in (-1, 1)
        assert record.new_trait == pytest.approx(0.5 + 0.1 * record.h)
        assert state.L == 1
        assert state.index_of(record.new_label) is not None

    def test_no_event_possible(self, linear_birth_spec, rng):
        state = init_monomorphic(linear_birth_spec)
        state.freeze(0)
        with pytest.raises(PopulationExtinct):
            step(state, linear_birth_spec, rng)


class TestRun:
    """Test full runs with trajectory recording."""

    def test_thresholds(self, linear_birth_spec):
        assert invasion_threshold(linear_birth_spec, 1.0) == 100
        assert invasion_threshold(linear_birth_spec, 0.5) == 50
        assert invasion_threshold(linear_birth_spec, 1e-6) == 1
        assert mass_bound(linear_birth_spec) == pytest.approx(6.0)

    def test_run_records_grid(self, fast_spec):
        traj = run(fast_spec, 0.2, 5, np.random.default_rng(1))
        assert traj.stop_reason == "horizon"
        assert traj.times == pytest.approx(np.linspace(0, 0.2, 5))
        assert traj.measure_at(0.0) == [(0.0, 0.5)]
        assert traj.summary["total_mass"].iloc[0] == pytest.approx(0.5)
        assert traj.initial_count == 100
        assert traj.final_count == int(traj.atoms[traj.atoms["t"] == traj.times[-1]]["count"].sum())
        assert (traj.atoms["count"] > 0).all()
        assert traj.n_events == sum(traj.tallies.values())
        assert traj.count_events("mutation") == traj.summary["L"].iloc[-1]
        assert traj.count_events("mutation") == traj.tallies["mutant_births"]

    def test_net_growth_matches_tallies(self, fast_spec):
        traj = run(fast_spec, 0.1, 3, np.random.default_rng(2))
        births = traj.tallies["clonal_births"] + traj.tallies["mutant_births"]
        assert traj.final_count - traj.initial_count == births - traj.tallies["deaths"]

    def test_run_reproducible(self, fast_spec):
        first = run(fast_spec, 0.1, 11, np.random.default_rng(3))
        second = run(fast_spec, 0.1, 11, np.random.default_rng(3))
        pd.testing.assert_frame_equal(first.atoms, second.atoms)
        pd.testing.assert_frame_equal(first.events, second.events)
        assert first.tallies == second.tallies

    def test_traits_on_lattice(self, fast_spec):
        """Every trait is x0 + sigma * (integer) inside the space."""
        traj = run(fast_spec, 0.2, 3, np.random.default_rng(4))
        steps = traj.atoms["trait"].to_numpy() / 0.1
        assert np.allclose(steps, np.round(steps))
        assert traj.atoms["trait"].between(0.0, 1.0).all()

    def test_explicit_grid(self, fast_spec):
        traj = run(fast_spec, 0.1, [0.0, 0.05, 0.1, 0.5], np.random.default_rng(5))
        assert traj.times == pytest.approx([0.0, 0.05, 0.1])

    def test_extinction(self, linear_birth_spec):
        """A single individual at K = 1 dies out."""
        spec = linear_birth_spec.with_scaling(ScalingTriple(K=1, u=1e-5, sigma=0.1, alpha=0.2))
        with pytest.raises(PopulationExtinct) as excinfo:
            run(spec, 1e-3, 3, np.random.default_rng(6), stop=StopRules(mass_bound=100.0))
        assert excinfo.value.trajectory is not None
        assert excinfo.value.trajectory.stop_reason == "PopulationExtinct"
        assert excinfo.value.trajectory.final_count == 0

    def test_mass_blowup(self, fast_spec):
        with pytest.raises(MassBlowup) as excinfo:
            run(fast_spec, 10.0, 3, np.random.default_rng(7), stop=StopRules(mass_bound=0.51))
        assert excinfo.value.trajectory.final_count >= 102

    def test_event_budget(self, fast_spec):
        with pytest.raises(SimulationAbort) as excinfo:
            run(fast_spec, 1.0, 3, np.random.default_rng(8), stop=StopRules(max_events=10))
        assert type(excinfo.value) is SimulationAbort
        assert excinfo.value.trajectory.n_events == 10

    def test_preconditions(self, fast_spec, rng):
        with pytest.raises(PreconditionError):
            run(fast_spec, 0.0, 3, rng)
        with pytest.raises(PreconditionError):
            run(fast_spec, 1.0, 1, rng)
        with pytest.raises(PreconditionError):
            run(fast_spec, 1.0, [0.5, 0.2], rng)


class TestInvasionTrial:
    """Test single-mutant invasion trials."""

    def test_threshold_one_always_invades(self, linear_birth_spec, rng):
        assert invasion_trial(linear_birth_spec, 0.1, rng, epsilon=1e-6)

    def test_returns_bool(self, linear_birth_spec, rng):
        outcome = invasion_trial(linear_birth_spec, 0.1, rng, epsilon=0.015)
        assert isinstance(outcome, bool)

    def test_frozen_resident_rate(self, linear_birth_spec):
        """Against a frozen resident the mutant line is a birth-death chain with b = 1.05, d = 1 + n/K."""
        generator = np.random.default_rng(11)
        trials = 2000
        successes = sum(
            invasion_trial(linear_birth_spec, 0.1, generator, frozen_resident=True)
            for _ in range(trials)
        )
        ratios = (1.0 + np.arange(1, 100) / 1000) / 1.05
        expected = 1.0 / (1.0 + np.cumprod(ratios).sum())
        se = np.sqrt(expected * (1 - expected) / trials)
        assert abs(successes / trials - expected) < 4 * se


class TestRunEvents:
    """Test invasion and fixation records and the in-run cache resync."""

    @pytest.fixture
    def strong_selection_spec(self, linear_birth_doc):
        """Steep birth gradient: a mutant at +sigma survives with probability about 1/3"""
        linear_birth_doc["rates"]["b"] = "1 + 5*x"
        linear_birth_doc["scaling"] = {"K": 200, "u": 0.01, "sigma": 0.1, "alpha": 0.2}
        return ModelSpec.model_validate(linear_birth_doc)

    def test_invasion_and_fixation_events(self, strong_selection_spec):
        traj = run(strong_selection_spec, 1.0, 5, np.random.default_rng(12))
        events = traj.events
        invasions = events[events["kind"] == "invasion"]
        fixations = events[events["kind"] == "fixation"]
        assert len(invasions) >= 1
        assert len(fixations) >= 1
        mutants = set(events.loc[events["kind"] == "mutation", "label"])
        assert set(invasions["label"]) <= mutants
        for _, row in fixations.iterrows():
            invaded_at = invasions.loc[invasions["label"] == row["label"], "t"]
            assert len(invaded_at) == 1
            assert invaded_at.iloc[0] <= row["t"]
            # parent_label of a fixation is the resident that died out
            assert row["parent_label"] not in set(traj.atoms.loc[traj.atoms["t"] == traj.times[-1], "label"])
        assert events["t"].is_monotonic_increasing

    def test_threshold_one_invades_at_birth(self, fast_spec):
        """With a threshold of one individual every new mutant invades at its own birth."""
        stop = StopRules(epsilon=1e-6)
        assert invasion_threshold(fast_spec, stop.epsilon) == 1
        traj = run(fast_spec, 0.2, 3, np.random.default_rng(13), stop=stop)
        events = traj.events
        mutations = events[events["kind"] == "mutation"].reset_index(drop=True)
        invasions = events[events["kind"] == "invasion"].reset_index(drop=True)
        assert len(mutations) > 0
        assert list(invasions["label"]) == list(mutations["label"])
        assert invasions["t"].to_numpy() == pytest.approx(mutations["t"].to_numpy())

    def test_resync_inside_run(self, coexistence_spec, monkeypatch):
        """A small resync interval forces repeated in-run checks of the competition sums."""
        spec = coexistence_spec.with_scaling(ScalingTriple(K=200, u=1e-2, sigma=0.1, alpha=0.2))
        calls = []
        original = PopulationState.resync

        def counting_resync(self, *args, **kwargs):
            calls.append(self.since_resync)
            return original(self, *args, **kwargs)

        monkeypatch.setattr(PopulationState, "resync", counting_resync)
        state = init_monomorphic(spec)
        traj = run(spec, 0.5, 3, np.random.default_rng(14), state=state, resync_every=64)
        assert traj.n_events > 64 * 10
        assert len(calls) >= traj.n_events // 64 - 1
        assert all(since == 64 for since in calls)
        assert state.since_resync < 64
        assert traj.max_resync_deviation < 1e-9
        fresh = state.recompute_comp_sum()
        cached = state.comp_sum[:state.n]
        assert np.max(np.abs(cached - fresh) / np.maximum(np.abs(fresh), 1.0)) < 1e-9


class TestRunStatistics:
    """Monte-Carlo behaviour of full runs."""

    def test_mass_stays_near_equilibrium_without_mutation(self, linear_birth_spec):
        """Without mutation the time-averaged mass over 100 time units is within 2/sqrt(K) of zbar."""
        state = init_monomorphic(linear_birth_spec, mutation=False)
        horizon = 100.0 * linear_birth_spec.scaling.time_scale
        traj = run(linear_birth_spec, horizon, 1001, np.random.default_rng(15), state=state)
        assert traj.count_events("mutation") == 0
        assert traj.atoms["label"].unique().tolist() == [0]
        mass = traj.summary["total_mass"].to_numpy()
        assert abs(mass.mean() - 0.5) <= 2.0 / np.sqrt(linear_birth_spec.scaling.K)

    @pytest.mark.slow
    def test_mass_fluctuation_band(self, linear_birth_spec):
        """
        At equilibrium the mass leaves zbar +- 4 sqrt(zbar/K) on at most 1% of sampled times.

        5000 time units is about 5e6 events, long enough for the out-of-band
        fraction (about 0.5%) to settle well below the bound.
        """
        K = linear_birth_spec.scaling.K
        zbar = 0.5
        state = init_monomorphic(linear_birth_spec, mutation=False)
        horizon = 5000.0 * linear_birth_spec.scaling.time_scale
        traj = run(linear_birth_spec, horizon, 50001, np.random.default_rng(16), state=state)
        mass = traj.summary["total_mass"].to_numpy()
        outside = np.abs(mass - zbar) > 4.0 * np.sqrt(zbar / K)
        assert outside.mean() <= 0.01

    @pytest.mark.slow
    def test_mean_trait_increases(self, linear_birth_spec):
        """
        Directional selection raises the mean trait in at least 18 of 20 replicates.

        K=300, sigma=0.1, u=1e-5 and master seed 42. A replicate keeps x0 only
        if no mutant survives; at T=1 that happens with probability about
        exp(-2.4), so the horizon is two rescaled time units.
        """
        spec = linear_birth_spec.with_scaling(ScalingTriple(K=300, u=1e-5, sigma=0.1, alpha=0.2))
        finals = []
        for replicate in range(20):
            traj = run(spec, 2.0, 3, replicate_rng(42, 0, replicate))
            finals.append(traj.summary["mean_trait"].iloc[-1])
        assert sum(final > spec.x0 for final in finals) >= 18
