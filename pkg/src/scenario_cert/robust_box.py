"""Probabilistically robust design over a sample-fitted box.

The smallest axis-aligned box containing the samples is fitted first, then
the LP is made robust against every point of that box.  The box is fixed by
at most 2 n_delta extreme samples, so certificates use d = 2 n_delta.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass

import numpy as np

from . import lp
from .bounds import BoundKind
from .errors import AssumptionViolation, DegenerateRemoval, DomainError, SolverFailure
from .scenario import VIOL_TOL, as_samples, build_certificate

__all__ = [
    "CORNER_CHECK_MAX_DIM",
    "Box",
    "fit_box",
    "fit_box_support",
    "robust_lp_over_box",
    "corner_robust_lp",
    "solve_box_design",
    "discard_box",
]

log = logging.getLogger(__name__)

CORNER_CHECK_MAX_DIM = 12
_SPOT_CHECKS = 256

_WHOLE_REGION_NOTE = (
    "the guarantee holds for every x that is robustly feasible over the fitted box, "
    "not only the returned minimizer"
)


@dataclass(frozen=True)
class Box:
    lower: tuple
    upper: tuple

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lower, dtype=float))
        hi = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if lo.shape != hi.shape or lo.ndim != 1:
            raise DomainError("box bounds must be vectors of equal length")
        if np.any(lo > hi):
            raise DomainError("box needs lower <= upper componentwise")
        object.__setattr__(self, "lower", tuple(lo.tolist()))
        object.__setattr__(self, "upper", tuple(hi.tolist()))

    @property
    def n_delta(self):
        return len(self.lower)

    def contains(self, deltas, tol=0.0):
        """Membership of each row of ``deltas`` (closed box, widened by ``tol``)."""
        d = np.atleast_2d(deltas)
        lo, hi = np.array(self.lower), np.array(self.upper)
        return np.all((d >= lo - tol) & (d <= hi + tol), axis=1)

    def corners(self):
        lo, hi = np.array(self.lower), np.array(self.upper)
        bits = np.array(list(itertools.product((0, 1), repeat=lo.size)), dtype=bool)
        return np.where(bits, hi, lo)

    def to_dict(self):
        return {"lower": list(self.lower), "upper": list(self.upper)}


def fit_box(samples):
    """Smallest axis-aligned box containing every sample."""
    s = np.asarray(samples, dtype=float)
    if s.ndim == 1:
        s = s[:, None]
    if s.shape[0] == 0:
        raise DomainError("fit_box needs at least one sample")
    return Box(s.min(axis=0), s.max(axis=0))


def fit_box_support(samples):
    """Indices attaining each coordinate's min and max (first occurrence)."""
    s = np.asarray(samples, dtype=float)
    if s.ndim == 1:
        s = s[:, None]
    if s.shape[0] == 0:
        raise DomainError("fit_box_support needs at least one sample")
    idx = set(np.argmin(s, axis=0).tolist()) | set(np.argmax(s, axis=0).tolist())
    return tuple(sorted(int(i) for i in idx))


def _epigraph_lp(problem, box):
    """LP over (x, t) with t_jl >= w_jl(x) * lower_l and w_jl(x) * upper_l."""
    n, nd = problem.n_x, problem.n_delta
    lo, hi = np.array(box.lower), np.array(box.upper)
    unc = [c for c in problem.constraints if not c.deterministic]
    nt = len(unc) * nd
    rows, rhs = [], []
    for c in problem.constraints:
        if c.deterministic:
            rows.append(np.concatenate([c.f0, np.zeros(nt)]))
            rhs.append(-c.h0)
    for j, c in enumerate(unc):
        main = np.concatenate([c.f0, np.zeros(nt)])
        for l in range(nd):
            col = n + j * nd + l
            main[col] = 1.0
            # w_l(x) = F[:, l] . x + h_l, scaled by each end of the interval
            for end in (lo[l], hi[l]):
                row = np.zeros(n + nt)
                row[:n] = end * c.F[:, l]
                row[col] = -1.0
                rows.append(row)
                rhs.append(-end * c.h[l])
        rows.append(main)
        rhs.append(-c.h0)
    cost = np.concatenate([problem.cost, np.zeros(nt)])
    lower = np.concatenate([problem.var_lower, np.full(nt, -np.inf)])
    upper = np.concatenate([problem.var_upper, np.full(nt, np.inf)])
    A = np.array(rows).reshape(-1, n + nt)
    return lp.LinearProgram(cost, A, np.array(rhs), lower, upper)


def _check_corners(problem, box, x, seed=0):
    nd = problem.n_delta
    if nd <= CORNER_CHECK_MAX_DIM:
        pts = box.corners()
    else:
        log.warning(
            "n_delta=%d exceeds the corner-check cap %d; spot-checking %d random corners",
            nd, CORNER_CHECK_MAX_DIM, _SPOT_CHECKS,
        )
        gen = np.random.default_rng(seed)
        bits = gen.integers(0, 2, size=(_SPOT_CHECKS, nd)).astype(bool)
        pts = np.where(bits, np.array(box.upper), np.array(box.lower))
    worst = float(np.max(problem.evaluate(x, pts)))
    scale = max(1.0, float(np.max(np.abs(x), initial=0.0)))
    if worst > lp.FEAS_TOL * scale:
        raise SolverFailure(f"robust solution violates a box corner by {worst:.3e}")


def robust_lp_over_box(problem, box, refine=True):
    """Minimize cost . x subject to g(x, delta) <= 0 for all delta in ``box``."""
    if box.n_delta != problem.n_delta:
        raise DomainError(f"box has dimension {box.n_delta}, problem has n_delta={problem.n_delta}")
    prog = _epigraph_lp(problem, box)
    sol = lp.solve(prog, refine=refine, lex_coords=problem.n_x)
    if sol.status == lp.INFEASIBLE:
        raise AssumptionViolation("robust program over the box is infeasible")
    if sol.status == lp.UNBOUNDED:
        raise AssumptionViolation("robust program over the box is unbounded")
    x = sol.x[:problem.n_x]
    _check_corners(problem, box, x)
    sol.info["epigraph_t"] = sol.x[problem.n_x:].tolist()
    sol.x = x
    return sol


def corner_robust_lp(problem, box, refine=True):
    """Robust LP by enumerating every box corner as a scenario (test oracle)."""
    from .scenario import SampledProgram

    prog = SampledProgram.from_problem(problem, box.corners())
    return prog.solve(range(prog.m), refine=refine)


def solve_box_design(problem, samples, epsilon=None, beta=None, kind=None):
    """Fit the box, solve the robust LP over it and certify with d = 2 n_delta.

    The kind defaults to the exact binomial tail.  With neither ``epsilon``
    nor ``beta`` the certificate is omitted (``None``).
    """
    samples = as_samples(samples, problem.n_delta)
    m, d = samples.shape[0], 2 * problem.n_delta
    if m < d:
        raise DomainError(f"box design needs m >= 2 n_delta = {d}, got {m}")
    box = fit_box(samples)
    sol = robust_lp_over_box(problem, box)
    sol.info["box_support"] = list(fit_box_support(samples))
    cert = None
    if epsilon is not None or beta is not None:
        kind = BoundKind.exact() if kind is None else kind
        if isinstance(kind, BoundKind) and kind.is_discard:
            raise DomainError("no samples were discarded; use discard_box for discard kinds")
        cert = build_certificate(m, d, 0, kind, epsilon, beta, notes=[_WHOLE_REGION_NOTE])
    return sol, box, cert


def discard_box(problem, samples, r, epsilon=None, beta=None):
    """Greedy removal of ``r`` samples lying on facets of the fitted box.

    Each round re-fits the box without each facet sample and keeps the
    removal with the lowest robust objective (ties: lowest index).  Every
    removed sample must end up strictly outside the final box, which is
    what the discard certificate needs; otherwise DegenerateRemoval.
    """
    samples = as_samples(samples, problem.n_delta)
    m, d = samples.shape[0], 2 * problem.n_delta
    if r < 0:
        raise DomainError(f"r must be nonnegative, got {r}")
    if m < d + r:
        raise DomainError(f"box discarding needs m >= 2 n_delta + r = {d + r}, got {m}")
    kept = list(range(m))
    removed = []
    sol = robust_lp_over_box(problem, fit_box(samples))
    trace = [sol.objective]
    for _ in range(r):
        cands = [kept[i] for i in fit_box_support(samples[kept])]
        best, best_obj = None, np.inf
        for c in cands:
            rest = [k for k in kept if k != c]
            s = robust_lp_over_box(problem, fit_box(samples[rest]), refine=False)
            if best is None or s.objective < best_obj - 1e-12 * max(1.0, abs(best_obj)):
                best, best_obj = c, s.objective
        kept.remove(best)
        removed.append(best)
        sol = robust_lp_over_box(problem, fit_box(samples[kept]))
        if sol.objective > trace[-1] + 1e-9:
            raise SolverFailure(f"objective rose from {trace[-1]!r} to {sol.objective!r}")
        trace.append(sol.objective)
    box = fit_box(samples[kept])
    if removed:
        outside = ~box.contains(samples[removed], tol=VIOL_TOL)
        bad = [i for i, o in zip(removed, outside) if not o]
        if bad:
            raise DegenerateRemoval(f"removed samples {bad} still lie in the final box")
    sol.info["box_support"] = [kept[i] for i in fit_box_support(samples[kept])]
    sol.info["objective_trace"] = trace
    cert = None
    if epsilon is not None or beta is not None:
        kind = BoundKind.discard(r) if r else BoundKind.exact()
        cert = build_certificate(m, d, r, kind, epsilon, beta, notes=[_WHOLE_REGION_NOTE])
    return sol, box, tuple(removed), cert
