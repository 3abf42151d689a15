"""Confidence bounds q(m, epsilon) for compression-based certificates.

Every bound is evaluated in log space and only clamped to [0, 1] on the way
out.  ``log_q`` exposes the unclamped value for callers that need to compare
very small confidences (limit checks, bracket tests in the inverses).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DomainError, InfeasibleQuery

__all__ = [
    "BoundKind",
    "CertificateQuery",
    "log_choose",
    "log_q",
    "q",
    "q_floyd",
    "q_exact",
    "q_discard",
    "q_discard_unique",
    "q_vc",
    "epsilon_for",
    "sample_size_for",
    "MAX_SAMPLES",
]

MAX_SAMPLES = 10**7
EPSILON_TOL = 1e-9

# below this many factors the log-binomial is a compensated sum of logs,
# above it the lgamma difference is accurate enough relative to the result
_DIRECT_LOG_CHOOSE = 2000

_TAGS = ("floyd", "exact", "discard", "discard-unique", "vc")
_ALIASES = {
    "floyd": "floyd",
    "exact": "exact",
    "exact-binomial": "exact",
    "exactbinomial": "exact",
    "discard": "discard",
    "discard-unique": "discard-unique",
    "discard_unique": "discard-unique",
    "discardunique": "discard-unique",
    "vc": "vc",
}


@dataclass(frozen=True)
class BoundKind:
    """Selector for one of the implemented q(m, epsilon) families.

    ``r`` is the number of discarded samples and is only meaningful for the
    two discard variants; it is always zero otherwise.
    """

    tag: str
    r: int = 0

    def __post_init__(self):
        if self.tag not in _TAGS:
            raise DomainError(f"unknown bound kind {self.tag!r}")
        if not isinstance(self.r, int) or self.r < 0:
            raise DomainError(f"r must be a nonnegative integer, got {self.r!r}")
        if self.r and self.tag not in ("discard", "discard-unique"):
            raise DomainError(f"bound kind {self.tag!r} takes no r")

    @classmethod
    def floyd(cls):
        return cls("floyd")

    @classmethod
    def exact(cls):
        return cls("exact")

    @classmethod
    def discard(cls, r):
        return cls("discard", r)

    @classmethod
    def discard_unique(cls, r):
        return cls("discard-unique", r)

    @classmethod
    def vc(cls):
        return cls("vc")

    @classmethod
    def parse(cls, text, r=0):
        try:
            tag = _ALIASES[str(text).strip().lower()]
        except KeyError:
            raise DomainError(
                f"unknown bound kind {text!r}; expected one of {', '.join(_TAGS)}"
            ) from None
        return cls(tag, r if tag in ("discard", "discard-unique") else 0)

    @property
    def is_discard(self):
        return self.tag in ("discard", "discard-unique")

    @property
    def label(self):
        return f"{self.tag}(r={self.r})" if self.is_discard else self.tag

    def min_samples(self, d, epsilon=None):
        """Smallest m for which this kind's bound is defined."""
        if self.tag == "vc":
            if epsilon is None:
                raise DomainError("the VC bound's sample floor depends on epsilon")
            return max(1, math.ceil(8.0 / epsilon - 1e-12))
        return d + self.r

    def to_dict(self):
        return {"tag": self.tag, "r": self.r}

    @classmethod
    def from_dict(cls, data):
        return cls(data["tag"], int(data.get("r", 0)))


def _as_kind(kind, r=None):
    if isinstance(kind, BoundKind):
        if r is not None and r != kind.r:
            return BoundKind(kind.tag, r)
        return kind
    return BoundKind.parse(kind, 0 if r is None else r)


def _check_int(name, value, low=0):
    if isinstance(value, bool) or not isinstance(value, int):
        raise DomainError(f"{name} must be an integer, got {value!r}")
    if value < low:
        raise DomainError(f"{name} must be >= {low}, got {value}")


def _check_unit(name, value):
    if not (0.0 < value < 1.0):
        raise DomainError(f"{name} must lie in (0, 1), got {value!r}")


def log_choose(m, i):
    """Natural log of the binomial coefficient C(m, i)."""
    _check_int("m", m)
    _check_int("i", i)
    if i > m:
        raise DomainError(f"log_choose needs i <= m, got i={i}, m={m}")
    k = min(i, m - i)
    if k == 0:
        return 0.0
    if k <= _DIRECT_LOG_CHOOSE:
        # every factor (m - k + j) / j is >= 1, so the sum has no cancellation
        return math.fsum(math.log((m - k + j) / j) for j in range(1, k + 1))
    return math.lgamma(m + 1) - math.lgamma(k + 1) - math.lgamma(m - k + 1)


def _logsumexp(values):
    top = max(values)
    if top == -math.inf:
        return -math.inf
    return top + math.log(math.fsum(math.exp(v - top) for v in values))


def _log_binom_cdf(n, k, eps):
    """ln P(Bin(n, eps) <= k) for 0 <= k, by max-shifted summation."""
    if k >= n:
        return 0.0
    log_p = math.log(eps)
    log_1p = math.log1p(-eps)
    terms = []
    lc = 0.0
    for i in range(k + 1):
        terms.append(lc + i * log_p + (n - i) * log_1p)
        lc += math.log(n - i) - math.log(i + 1)
    return _logsumexp(terms)


def _log_binom_head(n, k):
    """ln sum_{i=0}^{k} C(n, i)."""
    k = min(k, n)
    terms = []
    lc = 0.0
    for i in range(k + 1):
        terms.append(lc)
        lc += math.log(n - i) - math.log(i + 1)
    return _logsumexp(terms)


def log_q(kind, m, d, epsilon, r=None):
    """Unclamped natural log of the bound selected by ``kind``."""
    kind = _as_kind(kind, r)
    _check_int("m", m, 1 if kind.tag != "floyd" else 0)
    _check_int("d", d, 0 if kind.tag in ("floyd", "discard", "vc") else 1)
    _check_unit("epsilon", epsilon)
    tag = kind.tag
    if tag == "vc":
        floor = kind.min_samples(d, epsilon)
        if m < floor:
            raise DomainError(
                f"VC bound needs m >= 8/epsilon = {8.0 / epsilon:g} "
                f"(i.e. m >= {floor}), got m={m}"
            )
        return math.log(2.0) + _log_binom_head(2 * m, d) - 0.5 * epsilon * m * math.log(2.0)
    if m < d + kind.r:
        raise DomainError(f"{kind.label} bound needs m >= d + r = {d + kind.r}, got m={m}")
    if tag == "floyd":
        return log_choose(m, d) + (m - d) * math.log1p(-epsilon)
    if tag == "exact":
        return _log_binom_cdf(m, d - 1, epsilon)
    if tag == "discard":
        return log_choose(m, d) + _log_binom_cdf(m - d, kind.r, epsilon)
    # discard-unique
    return log_choose(kind.r + d - 1, kind.r) + _log_binom_cdf(m, kind.r + d - 1, epsilon)


def _clamp(log_value):
    return 1.0 if log_value >= 0.0 else math.exp(log_value)


def q(kind, m, d, epsilon, r=None):
    """Bound value clamped to [0, 1]."""
    return _clamp(log_q(kind, m, d, epsilon, r))


def q_floyd(m, d, epsilon):
    """min(1, C(m, d) (1 - epsilon)^(m - d))."""
    return q(BoundKind.floyd(), m, d, epsilon)


def q_exact(m, d, epsilon):
    """Binomial lower tail P(Bin(m, epsilon) <= d - 1)."""
    return q(BoundKind.exact(), m, d, epsilon)


def q_discard(m, d, r, epsilon):
    return q(BoundKind.discard(r), m, d, epsilon)


def q_discard_unique(m, d, r, epsilon):
    return q(BoundKind.discard_unique(r), m, d, epsilon)


def q_vc(m, d_vc, epsilon):
    """One-sided constrained-failure bound; for comparison only."""
    return q(BoundKind.vc(), m, d_vc, epsilon)


def epsilon_for(m, d, beta, kind, r=None):
    """Smallest epsilon with q(m, epsilon) <= beta, by bisection.

    Raises
    ------
    InfeasibleQuery
        If even epsilon -> 1 leaves the bound above ``beta``.
    """
    kind = _as_kind(kind, r)
    _check_unit("beta", beta)
    log_beta = math.log(beta)
    hi = 1.0 - 1e-12
    if kind.tag == "vc":
        if m <= 8:
            raise InfeasibleQuery(f"VC bound needs m > 8 for any epsilon < 1, got m={m}")
        lo = 8.0 / m
        lq_lo = log_q(kind, m, d, lo)
        if lq_lo <= log_beta:
            return lo
    else:
        lo, lq_lo = 0.0, math.inf
    lq_hi = log_q(kind, m, d, hi)
    if lq_hi > log_beta:
        raise InfeasibleQuery(
            f"{kind.label} bound with m={m}, d={d} stays at "
            f"{_clamp(lq_hi):.6g} > beta={beta:g} for every epsilon < 1"
        )
    while hi - lo > 0.1 * EPSILON_TOL:
        mid = 0.5 * (lo + hi)
        lq_mid = log_q(kind, m, d, mid)
        # q must be decreasing in epsilon on the bracket
        if not (lq_hi - 1e-12 <= lq_mid <= lq_lo + 1e-12):
            raise AssertionError(
                f"{kind.label} bound not monotone in epsilon on [{lo}, {hi}]"
            )
        if lq_mid <= log_beta:
            hi, lq_hi = mid, lq_mid
        else:
            lo, lq_lo = mid, lq_mid
    return hi


def sample_size_for(d, epsilon, beta, kind, r=None):
    """Smallest m with q(m, epsilon) <= beta.

    The search doubles away from the kind's sample floor until the bound
    crosses ``beta``.  Bisection is used only when the bound is already
    decreasing at the left end of the bracket; otherwise (the rising head of
    the Floyd-type bounds) the bracket is scanned linearly.
    """
    kind = _as_kind(kind, r)
    _check_unit("epsilon", epsilon)
    _check_unit("beta", beta)
    _check_int("d", d, 0 if kind.tag in ("floyd", "discard", "vc") else 1)
    log_beta = math.log(beta)
    floor = kind.min_samples(d, epsilon)
    if kind.tag == "floyd" and floor == 0:
        floor = 1

    def lq(m):
        return log_q(kind, m, d, epsilon)

    if lq(floor) <= log_beta:
        return floor
    prev, step = floor, 1
    while True:
        m = floor + step
        if m >= MAX_SAMPLES:
            m = MAX_SAMPLES
            if lq(m) > log_beta:
                raise DomainError(
                    f"no sample size up to {MAX_SAMPLES} meets beta={beta:g} "
                    f"for {kind.label}, d={d}, epsilon={epsilon:g}"
                )
            break
        if lq(m) <= log_beta:
            break
        prev, step = m, step * 2

    lo, hi = prev, m
    if lq(lo + 1) <= lq(lo):
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if lq(mid) <= log_beta:
                hi = mid
            else:
                lo = mid
        return hi
    for cand in range(lo + 1, hi + 1):
        if lq(cand) <= log_beta:
            return cand
    return hi  # pragma: no cover - hi satisfies the bound by construction


@dataclass(frozen=True)
class CertificateQuery:
    m: int
    d: int
    epsilon: float
    beta: float
    kind: BoundKind

    def __post_init__(self):
        _check_int("m", self.m, 1)
        _check_int("d", self.d, 0)
        _check_unit("epsilon", self.epsilon)
        _check_unit("beta", self.beta)
        floor = self.kind.min_samples(self.d, self.epsilon)
        if self.m < floor:
            raise DomainError(f"{self.kind.label} needs m >= {floor}, got m={self.m}")

    def holds(self):
        return q(self.kind, self.m, self.d, self.epsilon) <= self.beta
