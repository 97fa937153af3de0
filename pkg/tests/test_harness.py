"""
Tests for the experiment harness: plan execution, aggregation and output files.

Run with: pytest -q tests/test_harness.py
"""

import json
from collections import Counter
from pathlib import Path

import pytest

from eadlab.config import load_config
from eadlab.errors import PreconditionError
from eadlab.harness import (
    STANDARD_CASES,
    ExperimentFailed,
    emit,
    mutant_branching_params,
    oracle_cases,
    row_columns,
    run_ibm_cead,
    run_invasion_mc,
    run_oracle_suite,
    run_plan,
    run_tss_cead,
)
from eadlab.oracles import bd_hitting_prob
from eadlab.schemas import ExperimentKind, ExperimentPlan
from eadlab.schemas.plan import Config
from eadlab.schemas.reports import dict_to_report, report_to_dict

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"


def make_plan(document: dict, experiment: dict, seed: int = 11) -> ExperimentPlan:
    config = Config.model_validate({**document, "experiment": experiment, "seed": seed})
    return ExperimentPlan.from_config(config)


@pytest.fixture
def oracle_plan(linear_birth_doc):
    return make_plan(linear_birth_doc, {"kind": "oracle-suite", "name": "oracles", "trials": 2000})


@pytest.fixture
def tss_plan(linear_birth_doc):
    return make_plan(linear_birth_doc, {
        "kind": "tss-cead", "name": "tss", "sigmas": [0.2, 0.1], "replicates": 4,
        "horizon": 0.5, "grid_points": 11, "dt": 0.001,
    })


@pytest.fixture
def invasion_plan(linear_birth_doc):
    return make_plan(linear_birth_doc, {
        "kind": "invasion-mc", "name": "invasion",
        "schedule": [{"K": 200, "u": 1e-5, "sigma": 0.1, "alpha": 0.2}],
        "trials": 200, "chunks": 4,
    })


@pytest.fixture
def ibm_plan(linear_birth_doc):
    return make_plan(linear_birth_doc, {
        "kind": "ibm-cead", "name": "ibm",
        "schedule": [{"K": 100, "u": 0.01, "sigma": 0.1, "alpha": 0.2}],
        "replicates": 2, "horizon": 0.2, "grid_points": 5,
    })


class TestPlanResolution:
    """Test turning configuration documents into plans."""

    def test_k_values_schedule(self, linear_birth_doc):
        plan = make_plan(linear_birth_doc, {"kind": "ibm-cead", "K_values": [200, 1000]})
        assert [triple.K for triple in plan.schedule] == [200, 1000]
        assert plan.schedule[1].sigma == pytest.approx(1000 ** -0.3)

    def test_default_schedule_is_model_scaling(self, oracle_plan):
        assert oracle_plan.schedule == [oracle_plan.spec.scaling]
        assert oracle_plan.kind == ExperimentKind.ORACLE_SUITE

    def test_ibm_needs_schedule(self, linear_birth_doc):
        with pytest.raises(ValueError):
            make_plan(linear_birth_doc, {"kind": "ibm-cead"})

    def test_wrong_kind_rejected(self, oracle_plan):
        with pytest.raises(PreconditionError):
            run_ibm_cead(oracle_plan)
        with pytest.raises(PreconditionError):
            run_tss_cead(oracle_plan)


class TestOracleSuite:
    """Test the closed-form versus Monte Carlo suite."""

    def test_cases_include_model_case(self, oracle_plan):
        """The plan's own model adds a hitting case with k = ceil(sigma K)."""
        cases = oracle_cases(oracle_plan)
        last = cases[-1]
        assert last.oracle == "hitting-prob"
        assert last.params["b"] == pytest.approx(1.05)
        assert last.params["d"] == pytest.approx(1.0)
        assert last.params["k"] == 100

    def test_ten_settings_per_oracle(self, oracle_plan):
        counts = Counter(case.oracle for case in STANDARD_CASES)
        assert set(counts) == {"hitting-prob", "absorption-time", "extinction-cdf",
                               "biased-walk-ruin", "chain-exit", "occupation-laplace"}
        assert all(count >= 10 for count in counts.values())
        assert len(oracle_cases(oracle_plan)) == len(STANDARD_CASES) + 1

    def test_edge_settings_are_exact(self, oracle_plan):
        """Degenerate settings give the same 0/1 answer in closed form and by simulation."""
        report = run_oracle_suite(oracle_plan)
        exact = {
            ("hitting-prob", "b=0.0, d=1.0, j=1, k=5"): 0.0,
            ("absorption-time", "b=2.0, d=1.0, n=5, k=5"): 0.0,
            ("extinction-cdf", "b=1.0, d=2.0, n=1, t=0.0"): 0.0,
            ("biased-walk-ruin", "C=1.0, sigma=0.1, start=10, lo=0, hi=10"): 1.0,
            ("occupation-laplace", "b=1.0, d=1.5, lambda=0.0"): 1.0,
        }
        rows = {(row.oracle, row.parameters): row for row in report.rows}
        for key, value in exact.items():
            assert rows[key].closed_form == pytest.approx(value, abs=1e-12)
            assert rows[key].empirical == value
        gamblers_ruin = rows[("chain-exit", "C1=0.0, C2=0.0, eps=1.0, sigma=0.1, K=200, a=19, M=1.0")]
        assert gamblers_ruin.closed_form == pytest.approx(19 / 20, abs=1e-12)
        supercritical = rows[("occupation-laplace", "b=2.0, d=1.0, lambda=0.0")]
        assert supercritical.closed_form == pytest.approx(0.5, abs=1e-12)

    def test_rows(self, oracle_plan):
        report = run_oracle_suite(oracle_plan)
        cases = oracle_cases(oracle_plan)
        assert len(report.rows) == len(cases)
        assert [row.index for row in report.rows] == list(range(len(cases)))
        first = report.rows[0]
        assert first.oracle == "hitting-prob"
        assert first.closed_form == pytest.approx(2.0 / 3.0)
        assert first.parameters == "b=2.0, d=1.0, j=1, k=2"
        assert all(row.trials == 2000 for row in report.rows)

    def test_mostly_within_three_se(self, oracle_plan):
        report = run_oracle_suite(oracle_plan)
        within = sum(row.within_3se for row in report.rows)
        assert within >= len(report.rows) - 2

    def test_deterministic(self, oracle_plan):
        """Same plan and seed give identical serialised reports."""
        first = report_to_dict(run_oracle_suite(oracle_plan))
        second = report_to_dict(run_oracle_suite(oracle_plan))
        assert first == second

    def test_seed_changes_estimates(self, linear_birth_doc):
        experiment = {"kind": "oracle-suite", "trials": 500}
        first = run_oracle_suite(make_plan(linear_birth_doc, experiment, seed=1))
        second = run_oracle_suite(make_plan(linear_birth_doc, experiment, seed=2))
        assert [r.empirical for r in first.rows] != [r.empirical for r in second.rows]

    @pytest.mark.slow
    def test_worker_count_invariant(self, oracle_plan):
        """Results do not depend on how many processes run the cases."""
        serial = report_to_dict(run_plan(oracle_plan, workers=1))
        parallel = report_to_dict(run_plan(oracle_plan, workers=2))
        assert serial == parallel

    @pytest.mark.slow
    def test_full_trials_within_three_se(self, linear_birth_doc):
        """10^5 paths per setting; at most one of the sixty-odd z-tests may land beyond 3 SE."""
        plan = make_plan(linear_birth_doc, {"kind": "oracle-suite", "name": "oracles", "trials": 100000})
        report = run_oracle_suite(plan, workers=2)
        outside = [row for row in report.rows if not row.within_3se]
        assert len(outside) <= 1
        assert all(row.trials == 100000 for row in report.rows)


class TestTssCead:
    """Test the rescaled TSS sweep over sigma."""

    def test_rows_and_paths(self, tss_plan):
        report = run_tss_cead(tss_plan)
        assert [row.sigma for row in report.rows] == [0.2, 0.1]
        for row in report.rows:
            assert row.replicates == 4
            assert row.mean_distance >= 0.0
            assert row.cead_endpoint == pytest.approx(report.rows[0].cead_endpoint)
        points = report.paths[0]
        assert len(points) == 11
        assert points[0].t == 0.0
        assert points[0].reference == pytest.approx(0.0)
        assert points[0].mean == pytest.approx(0.0)
        assert report.trend.statistic == "mean_distance"
        assert len(report.trend.values) == 2

    def test_timings_not_serialised(self, tss_plan):
        report = run_tss_cead(tss_plan)
        assert set(report.timings) == {0, 1}
        assert "timings" not in report_to_dict(report)

    @pytest.mark.slow
    def test_deviation_shrinks_with_sigma(self):
        """sigma in {0.04, 0.02, 0.01}, 100 replicates: strictly decreasing, at most 0.05 at sigma=0.01."""
        plan = ExperimentPlan.from_config(load_config(CONFIG_DIR / "tss_cead_plan.json"))
        assert plan.sigmas == [0.04, 0.02, 0.01]
        assert plan.replicates == 100
        report = run_tss_cead(plan, workers=4)
        assert report.trend.strictly_decreasing
        assert report.rows[-1].mean_distance <= 0.05


class TestInvasionMc:
    """Test single-mutant invasion against the branching oracle."""

    def test_branching_params(self, linear_birth_spec):
        """Mutant at 0.1 in a resident at 0 with mass 1/2."""
        p = mutant_branching_params(linear_birth_spec, 0.1, 0.0)
        assert p.b == pytest.approx(1.05)
        assert p.d == pytest.approx(1.0)
        shifted = mutant_branching_params(linear_birth_spec, 0.1, 0.0, resident_shift=0.1)
        assert shifted.d == pytest.approx(1.1)

    def test_row(self, invasion_plan):
        report = run_invasion_mc(invasion_plan)
        (row,) = report.rows
        assert row.threshold == 20
        assert row.mutant_trait == pytest.approx(0.1)
        assert 0 <= row.successes <= row.trials == 200
        assert row.success_rate == pytest.approx(row.successes / 200)
        p = mutant_branching_params(invasion_plan.spec, 0.1, 0.0)
        assert row.oracle == pytest.approx(bd_hitting_prob(p, 1, 20))
        assert row.band_lo <= row.oracle <= row.band_hi

    def test_mutant_outside_space(self, linear_birth_doc):
        plan = make_plan(linear_birth_doc, {"kind": "invasion-mc", "h": -1, "trials": 10})
        with pytest.raises(PreconditionError):
            run_invasion_mc(plan)

    @pytest.mark.slow
    def test_matches_branching_oracle(self, linear_birth_doc):
        """
        K=1000, sigma=0.1, epsilon=1, live resident: the invasion rate is within 3 SE of
        the branching oracle. 40000 trials keep the run short while the SE stays near 0.001.
        """
        plan = make_plan(linear_birth_doc, {
            "kind": "invasion-mc", "name": "invasion",
            "schedule": [{"K": 1000, "u": 1e-5, "sigma": 0.1, "alpha": 0.2}],
            "epsilon": 1.0, "trials": 40000, "chunks": 16,
        })
        (row,) = run_invasion_mc(plan, workers=4).rows
        assert row.threshold == 100
        assert row.within_3se
        assert row.oracle == pytest.approx(bd_hitting_prob(mutant_branching_params(plan.spec, 0.1, 0.0), 1, 100))

    @pytest.mark.slow
    def test_deleterious_mutant_rarely_invades(self, linear_birth_doc):
        """A mutant one step against the gradient reaches the threshold with probability below 1/threshold."""
        linear_birth_doc["x0"] = 0.5
        plan = make_plan(linear_birth_doc, {
            "kind": "invasion-mc", "name": "deleterious",
            "schedule": [{"K": 1000, "u": 1e-5, "sigma": 0.1, "alpha": 0.2}],
            "h": -1, "trials": 4000, "chunks": 4,
        })
        (row,) = run_invasion_mc(plan, workers=2).rows
        assert row.mutant_trait == pytest.approx(0.4)
        assert row.first_order == 0.0
        assert row.oracle < 1e-3
        assert row.success_rate <= 1.0 / row.threshold
        assert row.within_3se

    @pytest.mark.slow
    def test_halving_sigma_halves_rate(self):
        """
        At K=10^4 and epsilon=1 the threshold is large enough for the order-sigma law:
        halving sigma puts the invasion-rate ratio in [0.35, 0.65].
        """
        plan = ExperimentPlan.from_config(load_config(CONFIG_DIR / "invasion_halving_plan.json"))
        wide, narrow = run_invasion_mc(plan, workers=4).rows
        assert (wide.sigma, narrow.sigma) == (0.1, 0.05)
        assert (wide.threshold, narrow.threshold) == (1000, 500)
        assert 0.35 <= narrow.oracle / wide.oracle <= 0.65
        assert 0.35 <= narrow.success_rate / wide.success_rate <= 0.65


@pytest.mark.slow
class TestIbmCead:
    """Test replicated IBM runs against the canonical equation."""

    def test_report(self, ibm_plan):
        report = run_plan(ibm_plan)
        (row,) = report.rows
        assert row.replicates == 2
        assert row.completed + row.aborted == 2
        assert row.K == 100
        assert not row.regime_consistent
        assert len(report.paths[0]) == 5
        assert report.trend.values == [row.mean_distance]

    def test_excessive_aborts(self, linear_birth_doc):
        """A population of one dies out in every replicate."""
        plan = make_plan(linear_birth_doc, {
            "kind": "ibm-cead", "name": "tiny",
            "schedule": [{"K": 1, "u": 0.01, "sigma": 0.1, "alpha": 0.2}],
            "replicates": 2, "horizon": 0.1, "grid_points": 3,
        })
        with pytest.raises(ExperimentFailed) as excinfo:
            run_ibm_cead(plan)
        partial = excinfo.value.report
        assert partial is not None
        assert partial.rows[0].aborted == 2
        assert partial.notes

    def test_distance_shrinks_with_K(self):
        """
        K in {200, 500, 1000} with sigma = K^-0.3 and u = 0.1 sigma^1.2 / (K ln K):
        the mean sup-KR distance falls with K and drops by at least 30% from K=200 to K=1000.
        """
        plan = ExperimentPlan.from_config(load_config(CONFIG_DIR / "ibm_cead_plan.json"))
        assert [triple.K for triple in plan.schedule] == [200, 500, 1000]
        assert plan.master_seed == 7
        assert plan.replicates == 20
        report = run_ibm_cead(plan, workers=4)
        assert report.trend.strictly_decreasing
        first, _, last = (row.mean_distance for row in report.rows)
        assert last <= 0.7 * first


class TestEmit:
    """Test report files on disk."""

    def test_csv_files(self, oracle_plan, tmp_path):
        report = run_oracle_suite(oracle_plan)
        written = emit(report, tmp_path, "csv")
        names = {path.name for path in written}
        assert "oracles.0.csv" in names
        assert f"oracles.{len(report.rows) - 1}.csv" in names
        assert "oracles.summary.csv" in names
        assert "oracles.timings.json" in names
        header = (tmp_path / "oracles.summary.csv").read_text(encoding="utf-8").splitlines()[0]
        assert header == ",".join(row_columns(ExperimentKind.ORACLE_SUITE))

    def test_json_summary_parses_back(self, tss_plan, tmp_path):
        report = run_tss_cead(tss_plan)
        emit(report, tmp_path, "json")
        data = json.loads((tmp_path / "tss.summary.json").read_text(encoding="utf-8"))
        assert data == json.loads(json.dumps(report_to_dict(report)))
        assert dict_to_report(data).rows == report.rows

    def test_path_files(self, tss_plan, tmp_path):
        """tss-cead points write their averaged path tables."""
        report = run_tss_cead(tss_plan)
        emit(report, tmp_path, "csv")
        lines = (tmp_path / "tss.1.csv").read_text(encoding="utf-8").splitlines()
        assert lines[0] == "t,reference,mean,sd,mean_distance"
        assert len(lines) == 12

    def test_timings_sidecar(self, tss_plan, tmp_path):
        report = run_tss_cead(tss_plan)
        emit(report, tmp_path, "csv")
        timings = json.loads((tmp_path / "tss.timings.json").read_text(encoding="utf-8"))
        assert set(timings) == {"0", "1"}

    def test_svg_and_xlsx(self, invasion_plan, tmp_path):
        report = run_invasion_mc(invasion_plan)
        emit(report, tmp_path, "svg")
        emit(report, tmp_path, "xlsx")
        assert (tmp_path / "invasion.summary.svg").exists()
        assert (tmp_path / "invasion.0.xlsx").exists()

    def test_unknown_format(self, oracle_plan, tmp_path):
        report = run_oracle_suite(oracle_plan)
        with pytest.raises(PreconditionError):
            emit(report, tmp_path, "txt")
