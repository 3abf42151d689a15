import math

import mpmath
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import optimize, stats

from oracles import mp_log_choose, mp_q_value, ref_q, scan_sample_size
from scenario_cert import bounds
from scenario_cert.bounds import BoundKind
from scenario_cert.errors import DomainError, InfeasibleQuery

EPS_GRID = [0.01, 0.05, 0.1, 0.15, 0.25, 0.5, 0.9]
KINDS = ["floyd", "exact", "discard", "discard-unique"]


def rel_close(a, b, tol):
    return abs(a - b) <= tol * max(abs(b), 1e-300)


class TestLogChoose:
    @pytest.mark.parametrize("m,i", [(0, 0), (5, 0), (5, 5), (10, 3), (60, 30), (100, 7)])
    def test_small_matches_exact_integer(self, m, i):
        assert math.isclose(bounds.log_choose(m, i), math.log(math.comb(m, i)), rel_tol=1e-13, abs_tol=1e-13)

    @pytest.mark.parametrize("m,i", [(10**6, 3), (10**6, 5 * 10**5), (10**7, 2500), (3000, 1499)])
    def test_large_matches_mpmath(self, m, i):
        assert rel_close(bounds.log_choose(m, i), mp_log_choose(m, i), 1e-12)

    def test_rejects_i_above_m(self):
        with pytest.raises(DomainError):
            bounds.log_choose(3, 4)


class TestClosedForms:
    def test_exact_binomial_single_support(self):
        # with d = 1 the tail is (1 - eps)^m
        assert math.isclose(bounds.q_exact(44, 1, 0.1), 0.9**44, rel_tol=1e-13)
        assert math.isclose(bounds.q_exact(20, 1, 0.1), 0.9**20, rel_tol=1e-13)

    def test_box_example_two_terms(self):
        want = 0.85**50 + 50 * 0.15 * 0.85**49
        assert math.isclose(bounds.q_exact(50, 2, 0.15), want, rel_tol=1e-12)

    def test_floyd_at_m_equals_d_is_one(self):
        assert bounds.q_floyd(3, 3, 0.2) == 1.0

    def test_floyd_clamped(self):
        # C(30, 2) * 0.85^28 is about 4.6
        assert bounds.q_floyd(30, 2, 0.15) == 1.0
        assert bounds.log_q("floyd", 30, 2, 0.15) > 0

    def test_vc_needs_sample_floor(self):
        with pytest.raises(DomainError):
            bounds.q_vc(79, 1, 0.1)
        assert 0 <= bounds.q_vc(80, 1, 0.1) <= 1

    def test_large_m_no_overflow(self):
        m, d, eps = 10**6, 50, 1e-3
        want = mp_log_choose(m, d) + (m - d) * float(mpmath.log1p(-mpmath.mpf(eps)))
        lq = bounds.log_q("floyd", m, d, eps)
        assert rel_close(lq, want, 1e-12)
        assert bounds.q_floyd(m, d, eps) == pytest.approx(math.exp(want), rel=1e-9)
        # the linear-domain value underflows but the log stays finite
        assert bounds.log_q("exact", 10**7, 5, 0.01) < -1000
        assert bounds.q_exact(10**7, 5, 0.01) == 0.0

    @pytest.mark.parametrize("bad", [0.0, 1.0, -0.1, 1.5])
    def test_epsilon_domain(self, bad):
        with pytest.raises(DomainError):
            bounds.q_exact(10, 1, bad)

    def test_m_below_d_plus_r(self):
        with pytest.raises(DomainError):
            bounds.q_discard(4, 3, 2, 0.1)


class TestAgainstRationalOracle:
    @pytest.mark.parametrize("kind", KINDS)
    def test_grid(self, kind):
        worst = 0.0
        for m in range(1, 61, 3):
            for d in (1, 2, 3, 5):
                for r in (0, 1, 3) if "discard" in kind else (0,):
                    if m < d + r:
                        continue
                    for eps in EPS_GRID:
                        got = bounds.q(BoundKind.parse(kind, r), m, d, eps)
                        want = ref_q(kind, m, d, eps, r)
                        if want > 1e-280:
                            worst = max(worst, abs(got - want) / want)
        assert worst <= 1e-10

    def test_vc_grid(self):
        for eps in (0.1, 0.25, 0.5):
            for m in (math.ceil(8 / eps), 100, 400):
                for d in (1, 2, 4):
                    want = ref_q("vc", m, d, eps)
                    got = bounds.q_vc(m, d, eps)
                    assert rel_close(got, want, 1e-10)


class TestOrderingAndCollapse:
    def test_exact_below_floyd(self):
        for m in range(1, 121):
            for d in range(1, min(m, 8) + 1):
                for eps in EPS_GRID:
                    assert bounds.q_exact(m, d, eps) <= bounds.q_floyd(m, d, eps) * (1 + 1e-12)

    def test_discard_zero_collapses(self):
        for m in range(1, 80, 7):
            for d in range(1, min(m, 6) + 1):
                for eps in EPS_GRID:
                    assert abs(bounds.q_discard(m, d, 0, eps) - bounds.q_floyd(m, d, eps)) <= 1e-12
                    assert abs(bounds.q_discard_unique(m, d, 0, eps) - bounds.q_exact(m, d, eps)) <= 1e-12


@settings(max_examples=200, deadline=None)
@given(
    kind=st.sampled_from(KINDS),
    m=st.integers(1, 400),
    d=st.integers(1, 6),
    r=st.integers(0, 4),
    e1=st.floats(0.001, 0.999),
    e2=st.floats(0.001, 0.999),
)
def test_bounds_in_unit_interval_and_monotone(kind, m, d, r, e1, e2):
    r = r if "discard" in kind else 0
    if m < d + r:
        return
    k = BoundKind.parse(kind, r)
    lo, hi = min(e1, e2), max(e1, e2)
    q_lo, q_hi = bounds.q(k, m, d, lo), bounds.q(k, m, d, hi)
    assert 0.0 <= q_hi <= q_lo <= 1.0


class TestEpsilonFor:
    def test_against_root_finder(self):
        # independent inverse via scipy's binomial cdf and Brent's method
        eps = bounds.epsilon_for(100, 2, 0.01, "exact")
        ref = optimize.brentq(lambda e: stats.binom.cdf(1, 100, e) - 0.01, 1e-9, 1 - 1e-9, xtol=1e-14)
        assert abs(eps - ref) <= 1e-9

    @settings(max_examples=150, deadline=None)
    @given(
        kind=st.sampled_from(KINDS + ["vc"]),
        m=st.integers(1, 300),
        d=st.integers(1, 4),
        r=st.integers(0, 3),
        beta=st.floats(1e-8, 0.5),
    )
    def test_inverse_property(self, kind, m, d, r, beta):
        r = r if "discard" in kind else 0
        if m < d + r:
            return
        k = BoundKind.parse(kind, r)
        try:
            eps = bounds.epsilon_for(m, d, beta, k)
        except InfeasibleQuery:
            # then even epsilon near 1 is not enough
            if kind == "vc" and m <= 8:
                return
            assert bounds.q(k, m, d, 1 - 1e-12) > beta
            return
        assert bounds.q(k, m, d, eps) <= beta
        below = eps - 1e-9
        if below > 0 and (kind != "vc" or below >= 8 / m):
            assert bounds.q(k, m, d, below) > beta

    def test_infeasible_query(self):
        with pytest.raises(InfeasibleQuery):
            bounds.epsilon_for(3, 3, 0.01, "floyd")


class TestSampleSize:
    def test_single_support_exact(self):
        assert bounds.sample_size_for(1, 0.1, 0.01, "exact") == 44
        # 0.9^43 > 0.01 >= 0.9^44
        assert 0.9**43 > 0.01 >= 0.9**44

    @pytest.mark.parametrize("kind", KINDS + ["vc"])
    def test_linear_scan_oracle(self, kind):
        for d, eps, beta, r in [(1, 0.1, 0.05, 1), (2, 0.2, 1e-3, 2), (3, 0.3, 1e-6, 0), (4, 0.25, 0.1, 3)]:
            r = r if "discard" in kind else 0
            got = bounds.sample_size_for(d, eps, beta, BoundKind.parse(kind, r))
            want, _ = scan_sample_size(kind, d, eps, beta, r)
            assert got == want

    def test_cap(self):
        with pytest.raises(DomainError):
            bounds.sample_size_for(5, 1e-7, 1e-9, "floyd")

    def test_reaches_floor_directly(self):
        # a loose beta is met at the smallest admissible m
        m = bounds.sample_size_for(1, 0.9, 0.5, "exact")
        assert m == 1 and mp_q_value("exact", 1, 1, 0.9) <= 0.5


def test_certificate_query():
    assert bounds.CertificateQuery(44, 1, 0.1, 0.01, BoundKind.exact()).holds()
    assert not bounds.CertificateQuery(43, 1, 0.1, 0.01, BoundKind.exact()).holds()
    with pytest.raises(DomainError):
        bounds.CertificateQuery(2, 3, 0.1, 0.01, BoundKind.floyd())


def test_kind_parsing():
    assert BoundKind.parse("exact") == BoundKind.exact()
    assert BoundKind.parse("discard", 2).label == "discard(r=2)"
    assert BoundKind.from_dict(BoundKind.discard_unique(3).to_dict()) == BoundKind.discard_unique(3)
    with pytest.raises(DomainError):
        BoundKind.parse("nonsense")
    with pytest.raises(DomainError):
        BoundKind("floyd", 2)
