"""Registered one-dimensional problems with closed-form violation probabilities.

Each problem has a safe set that is an interval [lo, hi] of the scalar
uncertainty, so its violation probability is one minus the probability mass
of that interval.  These problems carry the exact-law checks in ``validate``.

``max-1d``
    min x  s.t.  delta - x <= 0.  Safe set (-inf, x].
``interval``
    min w  s.t.  |delta - c| <= w, x = (c, w).  Safe set [c - w, c + w].
``cascade-1d``
    Stage one is ``max-1d``; stage two is min y s.t. x - delta - y <= 0,
    so y = x - min delta.  Joint safe set [x - y, x].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from . import bounds
from .cascade import CoupledConstraint, SecondStageSpec, _stages
from .errors import DomainError
from .sampling import Empirical, GaussianDiag, UniformBox
from .scenario import (
    SampledProgram,
    ScenarioProblem,
    UncertainAffineConstraint,
    _require_optimal,
    as_samples,
)

__all__ = [
    "TAGS",
    "METHODS",
    "Canonical",
    "get",
    "violation_probability",
    "safe_interval",
    "exact_law",
    "compression_hypothesis",
]

METHODS = ("scenario", "discard", "box", "box-discard", "cascade", "cascade-discard")


def _max_1d():
    return ScenarioProblem([1.0], [UncertainAffineConstraint([-1.0], [[0.0]], 0.0, [1.0])])


def _interval():
    return ScenarioProblem(
        [0.0, 1.0],
        [
            UncertainAffineConstraint([-1.0, -1.0], [[0.0], [0.0]], 0.0, [1.0]),
            UncertainAffineConstraint([1.0, -1.0], [[0.0], [0.0]], 0.0, [-1.0]),
        ],
    )


def _cascade_stage_two():
    return SecondStageSpec([1.0], [CoupledConstraint([-1.0], [[0.0]], [[0.0]], [1.0], [-1.0], 0.0)])


@dataclass(frozen=True)
class Canonical:
    tag: str
    d: int
    methods: tuple

    def problem(self):
        return _interval() if self.tag == "interval" else _max_1d()

    def second_stage(self):
        return _cascade_stage_two() if self.tag == "cascade-1d" else None


_REGISTRY = {
    "max-1d": Canonical("max-1d", 1, ("scenario", "discard", "box", "box-discard")),
    "interval": Canonical("interval", 2, ("scenario", "discard", "box", "box-discard")),
    "cascade-1d": Canonical("cascade-1d", 2, ("cascade", "cascade-discard")),
}
TAGS = tuple(_REGISTRY)


def get(tag):
    try:
        return _REGISTRY[tag]
    except KeyError:
        raise DomainError(f"unregistered canonical problem {tag!r}; known: {', '.join(TAGS)}") from None


def _unpack(solution):
    if hasattr(solution, "y") and hasattr(solution, "x"):
        return np.atleast_1d(solution.x), np.atleast_1d(solution.y)
    if hasattr(solution, "x"):
        return np.atleast_1d(solution.x), None
    if isinstance(solution, tuple) and len(solution) == 2 and np.ndim(solution[0]) == 1:
        return np.atleast_1d(solution[0]), np.atleast_1d(solution[1])
    return np.atleast_1d(np.asarray(solution, dtype=float)), None


def safe_interval(tag, solution):
    """(lo, hi) such that the solution is violated exactly when delta is outside."""
    get(tag)
    x, y = _unpack(solution)
    if tag == "max-1d":
        return -np.inf, float(x[0])
    if tag == "interval":
        c, w = float(x[0]), float(x[1])
        return c - w, c + w
    if y is None:
        raise DomainError("the cascade problem needs both x and y")
    return float(x[0]) - float(y[0]), float(x[0])


def _mass(dist, lo, hi):
    """P(lo <= delta <= hi) for a scalar distribution."""
    if hi < lo:
        return 0.0
    if dist.n_delta != 1:
        raise DomainError("canonical problems have a scalar uncertainty")
    if isinstance(dist, UniformBox):
        a, b = dist.lower[0], dist.upper[0]
        lo, hi = min(max(lo, a), b), min(max(hi, a), b)
        return (hi - lo) / (b - a)
    if isinstance(dist, GaussianDiag):
        n = stats.norm(dist.mean[0], dist.stddev[0])
        return float(n.cdf(hi) - n.cdf(lo))
    if isinstance(dist, Empirical):
        t = dist.table[:, 0]
        return float(np.mean((t >= lo) & (t <= hi)))
    raise DomainError(f"no analytic violation law for {type(dist).__name__}")


def violation_probability(tag, solution, dist):
    """Exact P(delta violates the solution) for a canonical problem."""
    lo, hi = safe_interval(tag, solution)
    return float(min(1.0, max(0.0, 1.0 - _mass(dist, lo, hi))))


def exact_law(tag, method, m, epsilon, r=0, dist=None):
    """P^m{V > epsilon} in closed form, or None when no exact law is known.

    Laws hold for continuous distributions only.  Without discarding every
    canonical problem is fully supported, so V exceeds epsilon exactly when
    fewer than d samples fall in a set of mass epsilon.  For ``max-1d``
    the greedy discard removes the r largest samples, which shifts the
    count to r + 1.
    """
    can = get(tag)
    if dist is not None and isinstance(dist, Empirical):
        return None
    if method not in can.methods:
        return None
    if r == 0 and method in ("scenario", "box", "cascade"):
        return bounds.q_exact(m, can.d, epsilon)
    if tag == "max-1d" and method in ("discard", "box-discard"):
        return bounds.q_exact(m, r + 1, epsilon)
    return None


def compression_hypothesis(tag, samples):
    """Solution built from ``samples`` alone (x, or (x, y) for the cascade)."""
    can = get(tag)
    samples = as_samples(samples, 1)
    idx = range(samples.shape[0])
    if tag == "cascade-1d":
        _, s1, _, s2 = _stages(can.problem(), can.second_stage(), samples, idx)
        return s1.x, s2.x
    prog = SampledProgram.from_problem(can.problem(), samples)
    return _require_optimal(prog.solve(idx), "the compression program").x
