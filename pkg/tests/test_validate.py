import numpy as np
import pytest
from scipy import optimize, stats

from instances import max_1d_problem
from scenario_cert.errors import DomainError
from scenario_cert.sampling import UniformBox
from scenario_cert.validate import (
    FAIL,
    INCONCLUSIVE,
    PASS,
    ExperimentConfig,
    band,
    clopper_pearson,
    error_distribution_check,
    estimate_violation,
    partition_check,
    run_experiment,
    worker_count,
)

U = UniformBox([0.0], [1.0])


def cp_by_root_finding(k, n, level):
    """Clopper-Pearson ends as roots of the binomial tails."""
    a = (1 - level) / 2
    lo = 0.0 if k == 0 else optimize.brentq(lambda p: stats.binom.sf(k - 1, n, p) - a, 1e-15, 1 - 1e-15, xtol=1e-15)
    hi = 1.0 if k == n else optimize.brentq(lambda p: stats.binom.cdf(k, n, p) - a, 1e-15, 1 - 1e-15, xtol=1e-15)
    return lo, hi


class TestEstimate:
    def test_constant_false(self):
        est = estimate_violation(lambda d: np.zeros(len(d), bool), U, 1000, seed=1)
        assert est.point == 0.0 and est.ci_low == 0.0

    def test_constant_true(self):
        est = estimate_violation(lambda d: np.ones(len(d), bool), U, 1000, seed=1)
        assert est.point == 1.0 and est.ci_high == 1.0

    def test_max_1d_solution(self):
        est = estimate_violation(lambda d: d[:, 0] > 0.9, U, 100_000, seed=2)
        assert est.ci_low <= 0.1 <= est.ci_high
        assert est.ci_low <= est.point <= est.ci_high

    def test_scalar_predicate_accepted(self):
        est = estimate_violation(lambda d: bool(d[0] > 0.5), U, 2000, seed=3)
        assert abs(est.point - 0.5) < 0.05

    def test_nonpositive_n(self):
        with pytest.raises(DomainError):
            estimate_violation(lambda d: d[:, 0] > 0.5, U, 0)

    @pytest.mark.parametrize("k,n", [(0, 50), (3, 50), (25, 50), (50, 50), (7, 1000)])
    def test_interval_matches_root_finding(self, k, n):
        np.testing.assert_allclose(clopper_pearson(k, n, 0.99), cp_by_root_finding(k, n, 0.99), atol=1e-10)

    def test_coverage(self):
        gen = np.random.default_rng(4)
        p, n = 0.03, 400
        hits = sum(lo <= p <= hi for lo, hi in (clopper_pearson(int(k), n) for k in gen.binomial(n, p, 1000)))
        assert hits >= 980


class TestExperiment:
    def test_exact_law(self):
        rep = run_experiment(ExperimentConfig(20, 0.1, trials=400, canonical_tag="max-1d", kind="exact"))
        assert rep.exact_law_value == pytest.approx(0.9**20)
        assert abs(rep.empirical_freq - 0.9**20) <= band(0.9**20, 400)
        assert rep.verdict == PASS and rep.used_trials == 400

    def test_deterministic(self):
        cfg = ExperimentConfig(10, 0.2, method="box", trials=50, canonical_tag="interval")
        assert run_experiment(cfg).violations == run_experiment(cfg).violations

    def test_threads_do_not_change_result(self, monkeypatch):
        cfg = ExperimentConfig(10, 0.2, trials=40, canonical_tag="max-1d")
        serial = run_experiment(cfg)
        monkeypatch.setenv("SCENARIO_CERT_THREADS", "4")
        assert worker_count(40) == 4
        assert run_experiment(cfg).violations == serial.violations

    def test_thread_cap_default(self, monkeypatch):
        monkeypatch.delenv("SCENARIO_CERT_THREADS", raising=False)
        assert worker_count(100) == 1

    def test_zero_trials(self):
        with pytest.raises(DomainError):
            ExperimentConfig(20, 0.1, trials=0, canonical_tag="max-1d")

    def test_method_must_match_problem(self):
        with pytest.raises(DomainError):
            ExperimentConfig(20, 0.1, method="cascade", canonical_tag="max-1d")

    def test_fail_detected(self, monkeypatch):
        # a bound far below the true frequency must be judged Fail
        from scenario_cert import validate

        monkeypatch.setattr(validate.bounds, "q", lambda *a, **k: 1e-6)
        # V ~ Beta(1, 5) has little mass near 0.5, so intervals rarely straddle epsilon
        cfg = ExperimentConfig(5, 0.5, trials=200, problem=max_1d_problem(), distribution=U, n_fresh=20_000)
        rep = run_experiment(cfg)
        assert rep.empirical_freq > 0.01 and rep.verdict == FAIL

    def test_monte_carlo_straddle_is_inconclusive(self):
        cfg = ExperimentConfig(
            20, 0.05, trials=40, problem=max_1d_problem(), distribution=U, n_fresh=500
        )
        rep = run_experiment(cfg)
        assert rep.exact_law_value is None
        assert rep.verdict == INCONCLUSIVE and rep.straddle_fraction > 0.01

    def test_monte_carlo_clear_case(self):
        cfg = ExperimentConfig(
            60, 0.3, trials=30, problem=max_1d_problem(), distribution=U, n_fresh=20_000
        )
        rep = run_experiment(cfg)
        assert rep.verdict == PASS and rep.empirical_freq == 0.0

    def test_vacuous_caveat(self):
        rep = run_experiment(ExperimentConfig(3, 0.1, trials=10, canonical_tag="max-1d"))
        assert rep.bound_value == 1.0 and any("vacuous" in c for c in rep.caveats)


class TestKS:
    @pytest.mark.parametrize("tag", ["max-1d", "interval"])
    def test_law(self, tag):
        rep = error_distribution_check(tag, trials=5000, seed=12345)
        assert rep.statistic < rep.critical_value
        assert rep.critical_value == pytest.approx(stats.kstwo.ppf(0.99, 5000))
        assert rep.verdict == PASS

    def test_single_trial_inconclusive(self):
        assert error_distribution_check("max-1d", trials=1).verdict == INCONCLUSIVE

    def test_wrong_d(self):
        with pytest.raises(DomainError):
            error_distribution_check("max-1d", d=2, trials=10)


class TestPartition:
    def test_max_1d(self):
        rep = partition_check("max-1d", 8, trials=30, seed=1)
        assert rep.consistent_counts == [1] * 30 and rep.counterexamples == []
        assert rep.verdict == PASS

    def test_interval(self):
        rep = partition_check("interval", 8, trials=20, seed=2)
        assert rep.consistent_counts == [1] * 20 and rep.verdict == PASS

    def test_m_equals_d(self):
        rep = partition_check("interval", 2, trials=5)
        assert rep.consistent_counts == [1] * 5

    def test_caps(self):
        with pytest.raises(DomainError):
            partition_check("max-1d", 13, trials=1)
        with pytest.raises(DomainError):
            partition_check("interval", 1, trials=1)
