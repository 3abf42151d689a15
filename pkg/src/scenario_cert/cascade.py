"""Two-stage cascades of scenario programs sharing one multisample.

Stage one gives x_m.  Stage two is a scenario program in y whose constraints
depend on x_m and on the same samples.  The union of both stages' compression
sets compresses the pair, so the joint certificate uses d = n_x + n_y.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import lp
from .bounds import BoundKind
from .errors import (
    AssumptionViolation,
    DegenerateProblem,
    DegenerateRemoval,
    DomainError,
    FeasibilitySetF,
    PartialRemoval,
)
from .scenario import (
    IMPROVE_TOL,
    REPRODUCE_TOL,
    VIOL_TOL,
    SampledProgram,
    _compress,
    _require_optimal,
    as_samples,
    build_certificate,
)

__all__ = [
    "CoupledConstraint",
    "SecondStageSpec",
    "CascadeResult",
    "second_stage_program",
    "solve_second_stage",
    "solve_cascade",
    "joint_violation",
    "discard_cascade",
]

FEASIBILITY_CAVEAT = (
    "probabilities are conditional on multisamples for which the second stage is feasible"
)


@dataclass
class CoupledConstraint:
    """g(y, x, delta) = (a0 + A delta) . y + x' Q delta + q . x + s . delta + t."""

    a0: np.ndarray
    A: np.ndarray
    Q: np.ndarray
    q: np.ndarray
    s: np.ndarray
    t: float

    def __post_init__(self):
        self.a0 = np.atleast_1d(np.asarray(self.a0, dtype=float))
        self.q = np.atleast_1d(np.asarray(self.q, dtype=float))
        self.s = np.atleast_1d(np.asarray(self.s, dtype=float))
        self.A = np.asarray(self.A, dtype=float).reshape(self.a0.size, self.s.size)
        self.Q = np.asarray(self.Q, dtype=float).reshape(self.q.size, self.s.size)
        self.t = float(self.t)

    @property
    def deterministic(self):
        """True when the row does not depend on the sample."""
        return not (np.any(self.A) or np.any(self.Q) or np.any(self.s))

    def evaluate(self, y, x, deltas):
        deltas = np.atleast_2d(deltas)
        return self.a0 @ y + self.q @ x + self.t + deltas @ (self.A.T @ y + self.Q.T @ x + self.s)

    def to_dict(self):
        return {
            "a0": self.a0.tolist(),
            "A": self.A.tolist(),
            "Q": self.Q.tolist(),
            "q": self.q.tolist(),
            "s": self.s.tolist(),
            "t": self.t,
        }


@dataclass
class SecondStageSpec:
    """min cost_y . y over [y_lower, y_upper] s.t. max_j g_j(y, x, delta) <= 0."""

    cost_y: np.ndarray
    constraints: list
    y_lower: np.ndarray = None
    y_upper: np.ndarray = None

    def __post_init__(self):
        self.cost_y = np.atleast_1d(np.asarray(self.cost_y, dtype=float))
        n = self.cost_y.size
        if not self.constraints:
            raise DomainError("the second stage needs at least one constraint")
        self.constraints = list(self.constraints)
        shapes = {(c.q.size, c.s.size) for c in self.constraints}
        if len(shapes) != 1 or any(c.a0.size != n for c in self.constraints):
            raise DomainError("second-stage constraints have inconsistent dimensions")
        lo = -np.inf if self.y_lower is None else self.y_lower
        hi = np.inf if self.y_upper is None else self.y_upper
        self.y_lower = np.broadcast_to(np.asarray(lo, dtype=float), (n,)).copy()
        self.y_upper = np.broadcast_to(np.asarray(hi, dtype=float), (n,)).copy()
        if np.any(self.y_lower > self.y_upper):
            raise DomainError("y_lower must not exceed y_upper")

    @property
    def n_y(self):
        return self.cost_y.size

    @property
    def n_x(self):
        return self.constraints[0].q.size

    @property
    def n_delta(self):
        return self.constraints[0].s.size

    def evaluate(self, y, x, deltas):
        y, x = np.asarray(y, dtype=float), np.asarray(x, dtype=float)
        return np.max([c.evaluate(y, x, deltas) for c in self.constraints], axis=0)

    def to_dict(self):
        return {
            "n_y": self.n_y,
            "cost_y": self.cost_y.tolist(),
            "y_lower": [None if not np.isfinite(v) else v for v in self.y_lower],
            "y_upper": [None if not np.isfinite(v) else v for v in self.y_upper],
            "constraints": [c.to_dict() for c in self.constraints],
        }


@dataclass
class CascadeResult:
    x: np.ndarray
    y: np.ndarray
    cert: object
    first_support: tuple
    second_support: tuple
    union_compression: tuple
    raw_union: tuple = ()
    removed: tuple = ()
    objectives: tuple = ()
    objective_trace: tuple = ()
    caveats: list = field(default_factory=lambda: [FEASIBILITY_CAVEAT])

    def to_dict(self):
        return {
            "x": self.x.tolist(),
            "y": self.y.tolist(),
            "certificate": None if self.cert is None else self.cert.to_dict(),
            "first_support": list(self.first_support),
            "second_support": list(self.second_support),
            "union_compression": list(self.union_compression),
            "raw_union": list(self.raw_union),
            "removed": list(self.removed),
            "objectives": list(self.objectives),
            "objective_trace": list(self.objective_trace),
            "caveats": list(self.caveats),
        }


def second_stage_program(p2, x, samples):
    """Stage-two rows (a0 + A delta_i) . y <= -(x' Q delta_i + q . x + s . delta_i + t)."""
    samples = as_samples(samples, p2.n_delta)
    x = np.asarray(x, dtype=float)
    det = [c for c in p2.constraints if c.deterministic]
    unc = [c for c in p2.constraints if not c.deterministic]
    m = samples.shape[0]
    block_A = np.empty((m, len(unc), p2.n_y))
    block_b = np.empty((m, len(unc)))
    for j, c in enumerate(unc):
        block_A[:, j, :] = c.a0 + samples @ c.A.T
        block_b[:, j] = -(samples @ (c.Q.T @ x + c.s) + c.q @ x + c.t)
    return SampledProgram(
        p2.cost_y,
        p2.y_lower,
        p2.y_upper,
        [c.a0 for c in det],
        [-(c.q @ x + c.t) for c in det],
        block_A,
        block_b,
    )


def solve_second_stage(p2, x, samples, idx=None):
    """Solve stage two at ``x``; infeasibility raises FeasibilitySetF."""
    prog = second_stage_program(p2, x, samples)
    idx = range(prog.m) if idx is None else idx
    sol = prog.solve(idx)
    if sol.status == lp.INFEASIBLE:
        raise FeasibilitySetF(
            "the second stage is infeasible for this multisample; no certificate is issued"
        )
    return prog, _require_optimal(sol, "the second stage")


def _check_dims(p1, p2):
    if p2.n_x != p1.n_x or p2.n_delta != p1.n_delta:
        raise DomainError(
            f"second stage expects n_x={p2.n_x}, n_delta={p2.n_delta}; "
            f"stage one has n_x={p1.n_x}, n_delta={p1.n_delta}"
        )


def _stages(p1, p2, samples, idx):
    """Both stages on the samples ``idx``; returns (prog1, sol1, prog2, sol2)."""
    prog1 = SampledProgram.from_problem(p1, samples)
    sol1 = _require_optimal(prog1.solve(idx), "stage one")
    prog2, sol2 = solve_second_stage(p2, sol1.x, samples, idx)
    return prog1, sol1, prog2, sol2


def _analyse(p1, p2, samples, kept, m_total):
    """Compression and replay check for a cascade solved on ``kept``."""
    prog1, sol1, prog2, sol2 = _stages(p1, p2, samples, kept)
    rec1 = _compress(prog1, kept, sol1, p1.n_x, m_total)
    if not rec1.consistent:
        raise DegenerateProblem(f"stage one: {rec1.reason}")
    rec2 = _compress(prog2, kept, sol2, p2.n_y, m_total)
    if not rec2.consistent:
        raise DegenerateProblem(f"stage two: {rec2.reason}")
    union = sorted(set(rec1.raw_compression_indices) | set(rec2.raw_compression_indices))
    d = p1.n_x + p2.n_y
    if len(union) > d:
        raise DegenerateProblem(f"union compression of size {len(union)} exceeds d = {d}")
    try:
        _, r1, rprog2, r2 = _stages(p1, p2, samples, union)
    except (AssumptionViolation, FeasibilitySetF) as exc:
        raise DegenerateProblem(f"replay on the union compression set failed: {exc}") from exc
    gap = max(float(np.max(np.abs(r1.x - sol1.x))), float(np.max(np.abs(r2.x - sol2.x))))
    if gap > REPRODUCE_TOL:
        raise DegenerateProblem(f"replay differs from the full cascade by {gap:.3e}")
    worst = max(
        float(np.max(prog1.residual(r1.x, kept), initial=-np.inf)),
        float(np.max(rprog2.residual(r2.x, kept), initial=-np.inf)),
    )
    if worst > lp.FEAS_TOL:
        raise DegenerateProblem(f"replayed cascade violates a kept sample by {worst:.3e}")
    padded = list(union)
    for i in kept:
        if len(padded) >= d:
            break
        if i not in padded:
            padded.append(i)
    return CascadeResult(
        x=sol1.x,
        y=sol2.x,
        cert=None,
        first_support=rec1.support_indices,
        second_support=rec2.support_indices,
        union_compression=tuple(sorted(padded)),
        raw_union=tuple(union),
        objectives=(sol1.objective, sol2.objective),
    )


def _cert_kind(kind, r):
    if kind is None:
        return BoundKind.discard(r) if r else BoundKind.floyd()
    if not isinstance(kind, BoundKind):
        kind = BoundKind.parse(kind, r)
    if kind.tag not in ("floyd", "discard"):
        raise DomainError(
            f"cascades are certified with floyd or discard kinds only, not {kind.label}"
        )
    return kind


def solve_cascade(p1, p2, samples, epsilon=None, beta=None, kind=None):
    """Solve both stages on the same samples and certify the pair.

    With neither ``epsilon`` nor ``beta`` the certificate is omitted.
    """
    _check_dims(p1, p2)
    samples = as_samples(samples, p1.n_delta)
    m, d = samples.shape[0], p1.n_x + p2.n_y
    if m < d:
        raise DomainError(f"a cascade needs m >= n_x + n_y = {d}, got {m}")
    kind = _cert_kind(kind, 0)
    res = _analyse(p1, p2, samples, list(range(m)), m)
    if epsilon is not None or beta is not None:
        res.cert = build_certificate(m, d, 0, kind, epsilon, beta, notes=[FEASIBILITY_CAVEAT])
    return res


def joint_violation(x, y, p1, p2, delta):
    """True where stage one or stage two is violated (strictly) at ``delta``."""
    d = np.atleast_2d(np.asarray(delta, dtype=float))
    out = (p1.evaluate(x, d) > 0.0) | (p2.evaluate(y, x, d) > 0.0)
    return bool(out[0]) if np.ndim(delta) <= 1 and d.shape[0] == 1 else out


def discard_cascade(p1, p2, samples, r, target_stage=2, epsilon=None, beta=None):
    """Greedy removal judged by one stage's objective.

    A candidate (a sample active in either stage) is accepted only if the
    whole cascade re-run without it strictly lowers the objective of
    ``target_stage``.  Fewer than ``r`` acceptable removals raise
    PartialRemoval.
    """
    _check_dims(p1, p2)
    if target_stage not in (1, 2):
        raise DomainError(f"target_stage must be 1 or 2, got {target_stage}")
    samples = as_samples(samples, p1.n_delta)
    m, d = samples.shape[0], p1.n_x + p2.n_y
    if r < 0:
        raise DomainError(f"r must be nonnegative, got {r}")
    if m < d + r:
        raise DomainError(f"cascade discarding needs m >= n_x + n_y + r = {d + r}, got {m}")
    kept = list(range(m))
    prog1, sol1, prog2, sol2 = _stages(p1, p2, samples, kept)
    current = (sol1, sol2)[target_stage - 1].objective
    trace = [current]
    removed = []
    for _ in range(r):
        cands = sorted(set(prog1.active_samples(kept, sol1)) | set(prog2.active_samples(kept, sol2)))
        best, best_obj = None, current - IMPROVE_TOL
        for c in cands:
            rest = [k for k in kept if k != c]
            try:
                _, s1, _, s2 = _stages(p1, p2, samples, rest)
            except FeasibilitySetF:
                continue
            obj = (s1, s2)[target_stage - 1].objective
            if obj < best_obj - 1e-12 * max(1.0, abs(best_obj)):
                best, best_obj = c, obj
        if best is None:
            raise PartialRemoval(len(removed), r, tuple(removed))
        kept.remove(best)
        removed.append(best)
        prog1, sol1, prog2, sol2 = _stages(p1, p2, samples, kept)
        current = (sol1, sol2)[target_stage - 1].objective
        trace.append(current)
    if removed:
        viol = (prog1.residual(sol1.x, removed) > VIOL_TOL) | (
            prog2.residual(sol2.x, removed) > VIOL_TOL
        )
        bad = [i for i, v in zip(removed, viol) if not v]
        if bad:
            raise DegenerateRemoval(f"removed samples {bad} are not violated by the final cascade")
    res = _analyse(p1, p2, samples, kept, m)
    res.removed = tuple(removed)
    res.objective_trace = tuple(trace)
    if epsilon is not None or beta is not None:
        kind = BoundKind.discard(r) if r else BoundKind.floyd()
        res.cert = build_certificate(m, d, r, kind, epsilon, beta, notes=[FEASIBILITY_CAVEAT])
    return res
