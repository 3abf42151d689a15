"""Scenario programs: solve, support constraints, compression, discarding.

A scenario program enforces every uncertain constraint at each drawn sample.
Its minimizer can be rebuilt from a small subset of the samples (the
compression set), and that is what the certificates in ``bounds`` pay for.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import bounds, lp
from .bounds import BoundKind
from .errors import (
    AssumptionViolation,
    DegenerateProblem,
    DegenerateRemoval,
    DomainError,
    SolverFailure,
)

__all__ = [
    "IMPROVE_TOL",
    "VIOL_TOL",
    "REPRODUCE_TOL",
    "UncertainAffineConstraint",
    "ScenarioProblem",
    "ConsistencyRecord",
    "Certificate",
    "SampledProgram",
    "solve_scenario",
    "support_constraints",
    "compression_set",
    "certify",
    "build_certificate",
    "as_samples",
    "discard",
    "violation_probability_exact_1d",
]

IMPROVE_TOL = 1e-7
VIOL_TOL = 1e-9
REPRODUCE_TOL = 1e-7


@dataclass
class UncertainAffineConstraint:
    """g(x, delta) = (f0 + F delta) . x + h0 + h . delta."""

    f0: np.ndarray
    F: np.ndarray
    h0: float
    h: np.ndarray

    def __post_init__(self):
        self.f0 = np.atleast_1d(np.asarray(self.f0, dtype=float))
        self.h = np.atleast_1d(np.asarray(self.h, dtype=float))
        self.F = np.asarray(self.F, dtype=float).reshape(self.f0.size, self.h.size)
        self.h0 = float(self.h0)

    @property
    def deterministic(self):
        return not (np.any(self.F) or np.any(self.h))

    def evaluate(self, x, deltas):
        """Constraint value at ``x`` for each row of ``deltas``."""
        deltas = np.atleast_2d(deltas)
        return self.f0 @ x + self.h0 + deltas @ (self.F.T @ x + self.h)

    def to_dict(self):
        return {"f0": self.f0.tolist(), "F": self.F.tolist(), "h0": self.h0, "h": self.h.tolist()}


@dataclass
class ScenarioProblem:
    """min cost . x over [var_lower, var_upper] s.t. max_j g_j(x, delta) <= 0."""

    cost: np.ndarray
    constraints: list
    var_lower: np.ndarray = None
    var_upper: np.ndarray = None
    n_delta: int = None

    def __post_init__(self):
        self.cost = np.atleast_1d(np.asarray(self.cost, dtype=float))
        n = self.cost.size
        if not self.constraints:
            raise DomainError("a scenario problem needs at least one constraint")
        self.constraints = list(self.constraints)
        nd = {c.h.size for c in self.constraints}
        if self.n_delta is None and len(nd) == 1:
            self.n_delta = nd.pop()
        for j, c in enumerate(self.constraints):
            if c.f0.size != n or c.h.size != self.n_delta:
                raise DomainError(
                    f"constraint {j} has shape (n_x={c.f0.size}, n_delta={c.h.size}); "
                    f"expected ({n}, {self.n_delta})"
                )
        lo = -np.inf if self.var_lower is None else self.var_lower
        hi = np.inf if self.var_upper is None else self.var_upper
        self.var_lower = np.broadcast_to(np.asarray(lo, dtype=float), (n,)).copy()
        self.var_upper = np.broadcast_to(np.asarray(hi, dtype=float), (n,)).copy()
        if np.any(self.var_lower > self.var_upper):
            raise DomainError("var_lower must not exceed var_upper")

    @property
    def n_x(self):
        return self.cost.size

    def evaluate(self, x, deltas):
        """max_j g_j(x, delta) for each row of ``deltas``."""
        x = np.asarray(x, dtype=float)
        return np.max([c.evaluate(x, deltas) for c in self.constraints], axis=0)

    def to_dict(self):
        return {
            "n_x": self.n_x,
            "n_delta": self.n_delta,
            "cost": self.cost.tolist(),
            "var_lower": [None if not np.isfinite(v) else v for v in self.var_lower],
            "var_upper": [None if not np.isfinite(v) else v for v in self.var_upper],
            "constraints": [c.to_dict() for c in self.constraints],
        }


@dataclass
class ConsistencyRecord:
    """Compression bookkeeping for one solved multisample.

    ``compression_indices`` is padded (lowest unused index first) up to
    ``d_apriori``; ``raw_compression_indices`` is what the support iteration
    actually found.
    """

    sample_count: int
    compression_indices: tuple
    support_indices: tuple
    d_apriori: int
    consistent: bool
    raw_compression_indices: tuple = ()
    removed_indices: tuple = ()
    objective_trace: tuple = ()
    reason: str = ""

    def to_dict(self):
        return {
            "sample_count": self.sample_count,
            "compression_indices": list(self.compression_indices),
            "raw_compression_indices": list(self.raw_compression_indices),
            "support_indices": list(self.support_indices),
            "d_apriori": self.d_apriori,
            "consistent": self.consistent,
            "removed_indices": list(self.removed_indices),
            "objective_trace": list(self.objective_trace),
            "reason": self.reason,
        }


@dataclass
class Certificate:
    """P^m{ violation probability > epsilon } <= beta."""

    m: int
    d: int
    r: int
    kind: BoundKind
    epsilon: float
    beta: float
    equality_claimed: bool = False
    notes: list = field(default_factory=list)
    requested_beta: float = None

    @property
    def vacuous(self):
        return self.beta >= 1.0

    def to_dict(self):
        return {
            "m": self.m,
            "d": self.d,
            "r": self.r,
            "kind": self.kind.to_dict(),
            "epsilon": self.epsilon,
            "beta": self.beta,
            "requested_beta": self.requested_beta,
            "equality_claimed": self.equality_claimed,
            "notes": list(self.notes),
        }


class SampledProgram:
    """An LP whose rows come in per-sample blocks plus a deterministic part.

    ``block_A[i]`` / ``block_b[i]`` hold the rows contributed by sample ``i``;
    constraints that do not depend on the sample are kept once in
    ``det_A`` / ``det_b`` and are never subject to compression or removal.
    """

    def __init__(self, cost, var_lower, var_upper, det_A, det_b, block_A, block_b):
        self.cost = np.asarray(cost, dtype=float)
        self.var_lower = var_lower
        self.var_upper = var_upper
        self.det_A = np.asarray(det_A, dtype=float).reshape(-1, self.cost.size)
        self.det_b = np.asarray(det_b, dtype=float).reshape(-1)
        self.block_A = np.asarray(block_A, dtype=float)
        self.block_b = np.asarray(block_b, dtype=float)
        self.m, self.k = self.block_b.shape

    @property
    def n(self):
        return self.cost.size

    @classmethod
    def from_problem(cls, problem, samples):
        samples = as_samples(samples, problem.n_delta)
        det = [c for c in problem.constraints if c.deterministic]
        unc = [c for c in problem.constraints if not c.deterministic]
        m = samples.shape[0]
        block_A = np.empty((m, len(unc), problem.n_x))
        block_b = np.empty((m, len(unc)))
        for j, c in enumerate(unc):
            block_A[:, j, :] = c.f0 + samples @ c.F.T
            block_b[:, j] = -c.h0 - samples @ c.h
        return cls(
            problem.cost,
            problem.var_lower,
            problem.var_upper,
            [c.f0 for c in det],
            [-c.h0 for c in det],
            block_A,
            block_b,
        )

    def lp(self, idx):
        idx = np.asarray(idx, dtype=np.intp)
        A = np.vstack([self.block_A[idx].reshape(-1, self.n), self.det_A])
        b = np.concatenate([self.block_b[idx].reshape(-1), self.det_b])
        return lp.LinearProgram(self.cost, A, b, self.var_lower, self.var_upper)

    def solve(self, idx, refine=True):
        return lp.solve(self.lp(idx), refine=refine)

    def active_samples(self, idx, sol):
        idx = np.asarray(idx, dtype=np.intp)
        n_block = idx.size * self.k
        rows = [r for r in sol.active_rows if r < n_block]
        return sorted({int(idx[r // self.k]) for r in rows})

    def residual(self, x, idx=None):
        """Largest row residual A x - b per sample (the sample's max_j g_j)."""
        A = self.block_A if idx is None else self.block_A[np.asarray(idx, dtype=np.intp)]
        b = self.block_b if idx is None else self.block_b[np.asarray(idx, dtype=np.intp)]
        if self.k == 0:
            return np.full(A.shape[0], -np.inf)
        return np.max(A @ x - b, axis=1)


def as_samples(samples, n_delta):
    arr = np.asarray(samples, dtype=float)
    if arr.size == 0:
        return arr.reshape(0, n_delta)
    if arr.ndim == 1:
        arr = arr.reshape(-1, n_delta) if n_delta != 1 else arr[:, None]
    if arr.ndim != 2 or arr.shape[1] != n_delta:
        raise DomainError(f"samples must have shape (m, {n_delta}), got {np.shape(samples)}")
    return arr


def _require_optimal(sol, what):
    if sol.status == lp.INFEASIBLE:
        raise AssumptionViolation(f"{what} is infeasible (feasible region must be nonempty)")
    if sol.status == lp.UNBOUNDED:
        raise AssumptionViolation(f"{what} is unbounded (a minimizer must exist)")
    return sol


def _support(prog, idx, sol):
    """Samples in ``idx`` whose removal strictly lowers the optimal value."""
    support = []
    idx = list(idx)
    for i in prog.active_samples(idx, sol):
        rest = [j for j in idx if j != i]
        s = prog.solve(rest, refine=False)
        if s.status == lp.UNBOUNDED or (
            s.optimal and s.objective < sol.objective - IMPROVE_TOL
        ):
            support.append(i)
    if len(support) > prog.n:
        raise DegenerateProblem(
            f"{len(support)} support constraints exceed the dimension bound {prog.n}"
        )
    return support


def _compress(prog, idx, sol, d_apriori, sample_count=None):
    """Iterate support restriction to a fixed point and verify consistency.

    Returns a ConsistencyRecord; ``consistent`` is False (with ``reason``)
    when the compressed program fails to reproduce ``sol``.
    """
    idx = sorted(int(i) for i in idx)
    m = prog.m if sample_count is None else sample_count
    full_support = _support(prog, idx, sol)
    current, cur_sol, support = idx, sol, full_support
    reason = ""
    while set(support) != set(current):
        current = sorted(support)
        cur_sol = prog.solve(current)
        if not cur_sol.optimal:
            reason = f"program on the support set {current} is {cur_sol.status}"
            break
        support = _support(prog, current, cur_sol)
    consistent = False
    if not reason:
        gap = float(np.max(np.abs(cur_sol.x - sol.x)))
        worst = float(np.max(prog.residual(cur_sol.x, idx), initial=-np.inf))
        if gap > REPRODUCE_TOL:
            reason = f"compressed solution differs from the full one by {gap:.3e}"
        elif worst > lp.FEAS_TOL:
            reason = f"compressed solution violates a sampled constraint by {worst:.3e}"
        else:
            consistent = True
    raw = tuple(current)
    padded = list(raw)
    if consistent:
        if len(raw) > d_apriori:
            raise DegenerateProblem(
                f"compression set of size {len(raw)} exceeds d = {d_apriori}"
            )
        for i in idx:
            if len(padded) >= d_apriori:
                break
            if i not in raw:
                padded.append(i)
        padded.sort()
    return ConsistencyRecord(
        sample_count=m,
        compression_indices=tuple(padded),
        support_indices=tuple(full_support),
        d_apriori=d_apriori,
        consistent=consistent,
        raw_compression_indices=raw,
        reason=reason,
    )


def solve_scenario(problem, samples):
    """Solve the sampled program and record its support/compression structure.

    Returns
    -------
    (LpSolution, ConsistencyRecord)
        The record has ``consistent=False`` when the multisample is degenerate
        (for example a duplicated extreme sample); ``compression_set`` raises
        in that case instead.
    """
    samples = as_samples(samples, problem.n_delta)
    if samples.shape[0] < 1:
        raise DomainError("solve_scenario needs at least one sample")
    prog = SampledProgram.from_problem(problem, samples)
    idx = range(samples.shape[0])
    sol = _require_optimal(prog.solve(idx), "the sampled program")
    return sol, _compress(prog, idx, sol, problem.n_x)


def support_constraints(problem, samples, solution):
    """Indices of samples whose removal strictly improves the objective.

    Samples with no active row are skipped: by convexity removing a slack
    constraint cannot move the optimum.
    """
    prog = SampledProgram.from_problem(problem, samples)
    return tuple(_support(prog, range(prog.m), solution))


def compression_set(problem, samples):
    """ConsistencyRecord for the multisample; raises on degenerate draws."""
    _, record = solve_scenario(problem, samples)
    if not record.consistent:
        raise DegenerateProblem(record.reason)
    return record


def build_certificate(m, d, r, kind=None, epsilon=None, beta=None, exact_support=False, notes=()):
    """Certificate for (m, d, r) with exactly one of ``epsilon`` / ``beta`` given.

    ``beta`` on the result is the bound evaluated at the returned epsilon, so
    it may sit slightly below a requested beta; the request is kept in
    ``requested_beta``.
    """
    if (epsilon is None) == (beta is None):
        raise DomainError("supply exactly one of epsilon and beta")
    if kind is None:
        kind = BoundKind.discard(r) if r else BoundKind.floyd()
    elif not isinstance(kind, BoundKind):
        kind = BoundKind.parse(kind, r)
    if kind.tag == "vc":
        raise DomainError("the VC bound is for comparison only and is never attached")
    if r and (not kind.is_discard or kind.r != r):
        raise DomainError(f"{r} samples were discarded; use a discard kind with r={r}")
    if not r and kind.is_discard and kind.r:
        raise DomainError(f"kind {kind.label} but no samples were discarded")
    notes = list(notes)
    if epsilon is None:
        epsilon = bounds.epsilon_for(m, d, beta, kind)
    value = bounds.q(kind, m, d, epsilon)
    equality = bool(exact_support) and kind.tag == "exact"
    if exact_support and not equality:
        notes.append("exact-support assertion ignored: only the exact binomial kind is an equality")
    if equality:
        notes.append("equality claimed on the caller's assertion of exactly d support constraints")
    if value >= 1.0:
        msg = f"vacuous certificate: {kind.label} bound with m={m}, d={d} is 1"
        warnings.warn(msg, stacklevel=3)
        notes.append(msg)
    return Certificate(
        m=m,
        d=d,
        r=r,
        kind=kind,
        epsilon=float(epsilon),
        beta=value,
        equality_claimed=equality,
        notes=notes,
        requested_beta=beta,
    )


def certify(record, epsilon=None, beta=None, kind=None, exact_support=False):
    """Attach a violation certificate to a consistent record.

    Exactly one of ``epsilon`` / ``beta`` is given; the other is computed.
    The kind defaults to Floyd, or to Discard(r) when samples were removed.
    ``exact_support`` asserts that the program has exactly d support
    constraints with probability one; it is only honoured for the exact
    binomial kind and is recorded as a claim, not checked.
    """
    if not record.consistent:
        raise DegenerateProblem(
            f"refusing to certify an inconsistent record: {record.reason or 'no reason given'}"
        )
    return build_certificate(
        record.sample_count,
        record.d_apriori,
        len(record.removed_indices),
        kind,
        epsilon,
        beta,
        exact_support,
    )


def _pick_removal(prog, kept, candidates):
    """Candidate whose removal gives the lowest objective (ties: lowest index)."""
    best, best_obj = None, np.inf
    for i in candidates:
        rest = [j for j in kept if j != i]
        s = prog.solve(rest, refine=False)
        if s.status == lp.UNBOUNDED:
            raise AssumptionViolation(
                f"removing sample {i} leaves an unbounded program; discarding needs a minimizer"
            )
        _require_optimal(s, f"the program without sample {i}")
        if best is None or s.objective < best_obj - 1e-12 * max(1.0, abs(best_obj)):
            best, best_obj = i, s.objective
    return best, best_obj


def discard(problem, samples, r):
    """Greedy sampling-and-discarding of ``r`` samples.

    Returns
    -------
    (LpSolution, tuple, ConsistencyRecord)
        Final solution, removed sample indices (in removal order) and the
        record of the kept samples.  Raises DegenerateRemoval if a removed
        sample ends up satisfied by the final solution.
    """
    samples = as_samples(samples, problem.n_delta)
    m = samples.shape[0]
    if r < 0:
        raise DomainError(f"r must be nonnegative, got {r}")
    if m < problem.n_x + r:
        raise DomainError(f"discarding r={r} needs m >= n_x + r = {problem.n_x + r}, got {m}")
    prog = SampledProgram.from_problem(problem, samples)
    kept = list(range(m))
    sol = _require_optimal(prog.solve(kept), "the sampled program")
    trace = [sol.objective]
    removed = []
    for _ in range(r):
        cands = prog.active_samples(kept, sol) or kept[:1]
        pick, _ = _pick_removal(prog, kept, cands)
        kept.remove(pick)
        removed.append(pick)
        sol = _require_optimal(prog.solve(kept), "the program after removal")
        if sol.objective > trace[-1] + 1e-9:
            raise SolverFailure(
                f"objective rose from {trace[-1]!r} to {sol.objective!r} after a removal"
            )
        trace.append(sol.objective)
    if removed:
        g = prog.residual(sol.x, removed)
        bad = [i for i, v in zip(removed, g) if not v > VIOL_TOL]
        if bad:
            raise DegenerateRemoval(
                f"removed samples {bad} are not violated by the final solution"
            )
    record = _compress(prog, kept, sol, problem.n_x, sample_count=m)
    record.removed_indices = tuple(removed)
    record.objective_trace = tuple(trace)
    return sol, tuple(removed), record


def violation_probability_exact_1d(problem_kind, solution, dist):
    """Exact violation probability for a registered canonical problem."""
    from .canonical import violation_probability

    return violation_probability(problem_kind, solution, dist)
