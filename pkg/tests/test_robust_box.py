import logging

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from instances import random_box_problem
from scenario_cert import lp
from scenario_cert.bounds import BoundKind
from scenario_cert.canonical import get
from scenario_cert.errors import AssumptionViolation, DegenerateRemoval, DomainError
from scenario_cert.robust_box import (
    Box,
    corner_robust_lp,
    discard_box,
    fit_box,
    fit_box_support,
    robust_lp_over_box,
    solve_box_design,
)
from scenario_cert.scenario import ScenarioProblem, UncertainAffineConstraint, solve_scenario


def l1_box_oracle(samples):
    """Smallest box as the LP min sum(u - l) s.t. l <= delta_i <= u."""
    m, nd = samples.shape
    rows, rhs = [], []
    for i in range(m):
        for k in range(nd):
            lo_row, hi_row = np.zeros(2 * nd), np.zeros(2 * nd)
            lo_row[k] = 1.0  # l_k <= delta_ik
            hi_row[nd + k] = -1.0  # -u_k <= -delta_ik
            rows += [lo_row, hi_row]
            rhs += [samples[i, k], -samples[i, k]]
    cost = np.concatenate([-np.ones(nd), np.ones(nd)])
    sol = lp.solve(lp.LinearProgram(cost, np.array(rows), np.array(rhs)))
    return sol.x[:nd], sol.x[nd:]


def scan_support(samples):
    idx = set()
    for k in range(samples.shape[1]):
        col = samples[:, k].tolist()
        idx.add(col.index(min(col)))
        idx.add(col.index(max(col)))
    return tuple(sorted(idx))


def upper_bound_problem():
    # min -x s.t. x <= delta
    return ScenarioProblem([-1.0], [UncertainAffineConstraint([1.0], [[0.0]], 0.0, [-1.0])])


class TestFitBox:
    def test_two_points(self):
        b = fit_box([[0.0, 1.0], [1.0, 0.0]])
        assert b.lower == (0.0, 0.0) and b.upper == (1.0, 1.0)
        assert fit_box_support([[0.0, 1.0], [1.0, 0.0]]) == (0, 1)

    def test_single_sample(self):
        b = fit_box([[0.3, -0.2]])
        assert b.lower == b.upper == (0.3, -0.2)
        assert fit_box_support([[0.3, -0.2]]) == (0,)

    def test_matches_l1_program(self):
        s = np.random.default_rng(0).random((100, 3))
        lo, hi = l1_box_oracle(s)
        b = fit_box(s)
        np.testing.assert_allclose(b.lower, lo, atol=1e-9)
        np.testing.assert_allclose(b.upper, hi, atol=1e-9)

    def test_support_matches_scan(self):
        s = np.random.default_rng(1).random((100, 3))
        assert fit_box_support(s) == scan_support(s)

    def test_support_ties_lowest_index(self):
        s = np.array([[0.5], [0.1], [0.9], [0.1], [0.9]])
        assert fit_box_support(s) == (1, 2)

    def test_empty(self):
        with pytest.raises(DomainError):
            fit_box(np.zeros((0, 2)))
        with pytest.raises(DomainError):
            fit_box_support(np.zeros((0, 2)))

    def test_invalid_box(self):
        with pytest.raises(DomainError):
            Box([1.0], [0.0])


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**31), m=st.integers(1, 30), extra=st.integers(1, 10), nd=st.integers(1, 4))
def test_containment_monotone(seed, m, extra, nd):
    s = np.random.default_rng(seed).standard_normal((m + extra, nd))
    sub, sup = fit_box(s[:m]), fit_box(s)
    assert np.all(np.array(sup.lower) <= sub.lower) and np.all(np.array(sup.upper) >= sub.upper)
    assert np.all(sup.contains(s, tol=1e-12))


class TestRobustLp:
    def test_monotone_constraint(self):
        sol = robust_lp_over_box(upper_bound_problem(), Box([0.2], [0.7]))
        assert sol.x[0] == pytest.approx(0.2, abs=1e-12)

    def test_degenerate_box_is_single_scenario(self):
        gen = np.random.default_rng(3)
        p = random_box_problem(gen, 2, 2)
        d0 = gen.uniform(-1, 1, 2)
        a = robust_lp_over_box(p, Box(d0, d0))
        b, _ = solve_scenario(p, d0[None, :])
        np.testing.assert_allclose(a.x, b.x, atol=1e-9)
        assert a.objective == pytest.approx(b.objective, abs=1e-9)

    @pytest.mark.parametrize("seed", range(40))
    def test_matches_corner_enumeration(self, seed):
        gen = np.random.default_rng(seed)
        nd = int(gen.integers(1, 4))
        p = random_box_problem(gen, int(gen.integers(1, 4)), nd)
        box = fit_box(gen.uniform(-1, 1, (10, nd)))
        a, b = robust_lp_over_box(p, box), corner_robust_lp(p, box)
        assert a.objective == pytest.approx(b.objective, abs=1e-7)
        assert len(a.info["epigraph_t"]) == 2 * nd

    def test_infeasible_box(self):
        # x >= delta and x <= delta - 0.5 cannot both hold
        p = ScenarioProblem(
            [1.0],
            [
                UncertainAffineConstraint([-1.0], [[0.0]], 0.0, [1.0]),
                UncertainAffineConstraint([1.0], [[0.0]], 0.5, [-1.0]),
            ],
        )
        with pytest.raises(AssumptionViolation):
            robust_lp_over_box(p, Box([0.0], [1.0]))

    def test_dimension_mismatch(self):
        with pytest.raises(DomainError):
            robust_lp_over_box(upper_bound_problem(), Box([0.0, 0.0], [1.0, 1.0]))

    def test_spot_check_warning(self, caplog):
        nd = 13
        p = ScenarioProblem(
            [1.0],
            [UncertainAffineConstraint([-1.0], np.zeros((1, nd)), 0.0, np.full(nd, 0.1))],
        )
        with caplog.at_level(logging.WARNING, logger="scenario_cert.robust_box"):
            sol = robust_lp_over_box(p, Box(np.zeros(nd), np.ones(nd)))
        assert sol.x[0] == pytest.approx(1.3)
        assert "spot-checking" in caplog.text


class TestBoxDesign:
    def test_closed_form_beta(self):
        p = get("interval").problem()
        s = np.random.default_rng(5).random(50)
        _, box, cert = solve_box_design(p, s, epsilon=0.15)
        assert cert.d == 2 and cert.kind == BoundKind.exact()
        assert cert.beta == pytest.approx(stats.binom.cdf(1, 50, 0.15), rel=1e-10)
        assert box.lower[0] == s.min() and box.upper[0] == s.max()
        assert any("whole" in n or "every x" in n for n in cert.notes)

    def test_interval_solution(self):
        s = np.random.default_rng(6).random(20)
        sol, _, _ = solve_box_design(get("interval").problem(), s)
        lo, hi = s.min(), s.max()
        np.testing.assert_allclose(sol.x, [(lo + hi) / 2, (hi - lo) / 2], atol=1e-12)

    def test_too_few_samples(self):
        p = random_box_problem(np.random.default_rng(0), 2, 2)
        with pytest.raises(DomainError):
            solve_box_design(p, np.zeros((3, 2)), epsilon=0.1)

    def test_floyd_alternative(self):
        s = np.random.default_rng(7).random(50)
        _, _, cert = solve_box_design(get("interval").problem(), s, epsilon=0.15, kind=BoundKind.floyd())
        assert cert.beta == pytest.approx(1225 * 0.85**48, rel=1e-10)

    @pytest.mark.parametrize("seed", range(20))
    def test_compression_property(self, seed):
        gen = np.random.default_rng(100 + seed)
        nd = int(gen.integers(1, 4))
        p = random_box_problem(gen, int(gen.integers(1, 4)), nd)
        s = gen.uniform(-1, 1, (25, nd))
        sol, box, _ = solve_box_design(p, s)
        sup = list(fit_box_support(s))
        box2 = fit_box(s[sup])
        sol2 = robust_lp_over_box(p, box2)
        assert box2 == box
        np.testing.assert_allclose(sol2.x, sol.x, atol=1e-7)

    @pytest.mark.parametrize("seed", range(10))
    def test_violation_set_inside_box_complement(self, seed):
        gen = np.random.default_rng(200 + seed)
        nd = int(gen.integers(1, 4))
        p = random_box_problem(gen, int(gen.integers(1, 4)), nd)
        s = gen.uniform(-1, 1, (20, nd))
        sol, box, _ = solve_box_design(p, s)
        fresh = gen.uniform(-1, 1, (10_000, nd))
        violated = p.evaluate(sol.x, fresh) > lp.FEAS_TOL
        outside = ~box.contains(fresh)
        assert violated.sum() <= outside.sum()
        assert not np.any(violated & ~outside)


class TestDiscardBox:
    def test_one_dimensional_order_statistics(self):
        s = np.random.default_rng(9).random(60)
        sol, box, removed, cert = discard_box(get("interval").problem(), s, 1, epsilon=0.2)
        order = np.sort(s)
        # removing either extreme shrinks the width; the larger gap wins
        gap_lo, gap_hi = order[1] - order[0], order[-1] - order[-2]
        if gap_lo > gap_hi:
            assert removed == (int(np.argmin(s)),) and box.lower[0] == order[1]
        else:
            assert removed == (int(np.argmax(s)),) and box.upper[0] == order[-2]
        assert cert.kind == BoundKind.discard(1) and cert.r == 1

    def test_zero_rounds_match_design(self):
        s = np.random.default_rng(10).random(12)
        a, box_a, removed, _ = discard_box(get("interval").problem(), s, 0)
        b, box_b, _ = solve_box_design(get("interval").problem(), s)
        assert removed == () and box_a == box_b and np.array_equal(a.x, b.x)

    def test_duplicate_extremes(self):
        s = np.array([0.5, 0.9, 0.1, 0.9, 0.1, 0.3])
        with pytest.raises(DegenerateRemoval):
            discard_box(get("interval").problem(), s, 1)

    @pytest.mark.parametrize("seed", range(10))
    def test_trace_non_increasing(self, seed):
        gen = np.random.default_rng(300 + seed)
        nd = int(gen.integers(1, 3))
        p = random_box_problem(gen, 2, nd)
        s = gen.uniform(-1, 1, (20, nd))
        try:
            sol, box, removed, _ = discard_box(p, s, 2)
        except DegenerateRemoval:
            return
        trace = sol.info["objective_trace"]
        assert all(b <= a + 1e-9 for a, b in zip(trace, trace[1:]))
        assert not np.any(box.contains(s[list(removed)]))

    def test_preconditions(self):
        with pytest.raises(DomainError):
            discard_box(get("interval").problem(), [0.1, 0.2], 1)
        with pytest.raises(DomainError):
            discard_box(get("interval").problem(), [0.1, 0.2, 0.3], -1)
