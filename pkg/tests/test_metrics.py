"""
Tests for the Kantorovich-Rubinstein norm and trajectory distances.

Run with: pytest -q tests/test_metrics.py
"""

import numpy as np
import pandas as pd
import pytest

from eadlab.errors import PreconditionError
from eadlab.ibm import run
from eadlab.metrics import (
    SignedAtomicMeasure,
    distance_series,
    kr_bruteforce,
    kr_distance,
    kr_norm,
    reference_measure,
    traj_sup_distance,
)
from eadlab.ode import integrate_cead
from eadlab.schemas import ScalingTriple


def measure(*atoms):
    return SignedAtomicMeasure.from_atoms(atoms)


class TestSignedAtomicMeasure:
    """Test measure construction and arithmetic."""

    def test_merge_and_drop_zero(self):
        mu = measure((0.5, 1.0), (0.2, 0.3), (0.5, -1.0))
        assert mu.atoms == [(0.2, 0.3)]
        assert len(mu) == 1

    def test_sorted(self):
        mu = measure((0.9, 1.0), (0.1, 2.0))
        assert mu.positions.tolist() == [0.1, 0.9]

    def test_difference(self):
        mu = measure((0.0, 1.0), (1.0, 1.0)) - measure((1.0, 1.0))
        assert mu.atoms == [(0.0, 1.0)]

    def test_scaled_and_negated(self):
        mu = measure((0.0, 1.0), (1.0, -0.5))
        assert mu.scaled(2.0).weights.tolist() == [2.0, -1.0]
        assert (-mu).weights.tolist() == [-1.0, 0.5]
        assert mu.total_variation == pytest.approx(1.5)

    def test_empty(self):
        assert len(SignedAtomicMeasure.empty()) == 0


class TestKrNorm:
    """Test the LP evaluation of the KR norm."""

    def test_empty_and_single(self):
        assert kr_norm(SignedAtomicMeasure.empty()) == 0.0
        assert kr_norm(measure((0.3, -0.7))) == pytest.approx(0.7)

    def test_dipole_close(self):
        """Close opposite atoms: the Lipschitz constraint binds."""
        assert kr_norm(measure((0.0, 1.0), (0.3, -1.0))) == pytest.approx(0.3)

    def test_dipole_far(self):
        """Far opposite atoms: the sup bound binds."""
        assert kr_norm(measure((0.0, 1.0), (3.0, -1.0))) == pytest.approx(2.0)

    def test_unbalanced_dipole(self):
        assert kr_norm(measure((0.0, 1.0), (0.4, -0.5))) == pytest.approx(0.7)

    def test_three_atoms(self):
        assert kr_norm(measure((0.0, 1.0), (1.0, -2.0), (2.0, 1.0))) == pytest.approx(2.0)

    def test_positive_measure_is_total_mass(self):
        mu = measure((0.0, 0.2), (0.5, 0.3), (0.7, 0.5))
        assert kr_norm(mu) == pytest.approx(1.0)

    def test_homogeneous_and_symmetric(self, rng):
        mu = SignedAtomicMeasure.from_atoms(zip(rng.random(5), rng.normal(size=5)))
        assert kr_norm(mu.scaled(3.0)) == pytest.approx(3.0 * kr_norm(mu))
        assert kr_norm(-mu) == pytest.approx(kr_norm(mu))

    def test_distance_properties(self, rng):
        atoms = [SignedAtomicMeasure.from_atoms(zip(rng.random(4), rng.random(4))) for _ in range(3)]
        mu, nu, rho = atoms
        assert kr_distance(mu, mu) == pytest.approx(0.0, abs=1e-12)
        assert kr_distance(mu, nu) == pytest.approx(kr_distance(nu, mu))
        assert kr_distance(mu, rho) <= kr_distance(mu, nu) + kr_distance(nu, rho) + 1e-9

    def test_bounded_by_total_variation(self, rng):
        for _ in range(20):
            mu = SignedAtomicMeasure.from_atoms(zip(rng.random(6), rng.normal(size=6)))
            assert kr_norm(mu) <= mu.total_variation + 1e-9

    def test_matches_bruteforce(self, rng):
        """The LP agrees with a grid search over test functions."""
        step = 1e-3
        for _ in range(10):
            n = int(rng.integers(2, 7))
            mu = SignedAtomicMeasure.from_atoms(zip(rng.random(n) * 2, rng.normal(size=n)))
            exact = kr_norm(mu)
            grid = kr_bruteforce(mu, step)
            assert grid <= exact + 1e-9
            assert exact - grid <= len(mu) ** 2 * step * float(np.abs(mu.weights).max()) + 1e-9

    def test_bruteforce_limit(self):
        mu = SignedAtomicMeasure.from_atoms((i / 10, 1.0) for i in range(7))
        with pytest.raises(PreconditionError):
            kr_bruteforce(mu)


class TestTrajectoryDistance:
    """Test distances between simulated atoms and the reference path."""

    def test_reference_measure(self, linear_birth_spec):
        ref = reference_measure(linear_birth_spec, 0.2)
        assert ref.atoms == [(0.2, pytest.approx(0.6))]

    def test_distance_series(self, linear_birth_spec):
        cead = integrate_cead(linear_birth_spec, 0.0, T=1.0, dt=0.01)
        atoms = pd.DataFrame({"t": [0.0], "label": [0], "trait": [0.0], "count": [500]})
        series = distance_series(atoms, 1000, cead, linear_birth_spec, times=np.array([0.0, 1.0]))
        assert list(series.columns) == ["t", "x", "distance"]
        assert series["distance"].iloc[0] == pytest.approx(0.0, abs=1e-12)
        # no atoms sampled at t = 1: distance to the zero measure
        x1 = series["x"].iloc[1]
        assert x1 == pytest.approx(np.exp(0.125) - 1, abs=1e-6)
        assert series["distance"].iloc[1] == pytest.approx(0.5 * (1 + x1))

    def test_off_reference_atom(self, linear_birth_spec):
        """Right mass at the wrong trait costs the Lipschitz gap."""
        cead = integrate_cead(linear_birth_spec, 0.0, T=0.0, dt=0.01)
        atoms = pd.DataFrame({"t": [0.0], "trait": [0.1], "count": [500]})
        series = distance_series(atoms, 1000, cead, linear_birth_spec)
        assert series["distance"].iloc[0] == pytest.approx(0.5 * 0.1)

    def test_traj_sup_distance(self, linear_birth_spec):
        spec = linear_birth_spec.with_scaling(ScalingTriple(K=200, u=1e-3, sigma=0.1, alpha=0.2))
        traj = run(spec, 0.1, 6, np.random.default_rng(21))
        cead = integrate_cead(spec, spec.x0, T=0.1, dt=0.01)
        distance = traj_sup_distance(traj, cead, spec)
        series = distance_series(traj.atoms, traj.K, cead, spec, times=traj.times)
        assert distance == pytest.approx(series["distance"].max())
        assert 0.0 <= distance <= 2.0
