"""Dense two-phase simplex with a lexicographic tie-break.

``solve`` returns the lexicographically smallest optimizer, which gives every
sampled program a unique, reproducible minimizer without perturbing the data.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import SolverFailure

__all__ = [
    "FEAS_TOL",
    "ACT_TOL",
    "LEX_TOL",
    "LinearProgram",
    "LpSolution",
    "solve",
    "lex_refine",
]

FEAS_TOL = 1e-8
ACT_TOL = 1e-7
LEX_TOL = 1e-9

_PIVOT_TOL = 1e-10
_PHASE1_TOL = 1e-9

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"


@dataclass
class LinearProgram:
    """min cost . x  s.t.  A x <= b,  var_lower <= x <= var_upper."""

    cost: np.ndarray
    A: np.ndarray
    b: np.ndarray
    var_lower: np.ndarray = None
    var_upper: np.ndarray = None

    def __post_init__(self):
        self.cost = np.asarray(self.cost, dtype=float).reshape(-1)
        n = self.cost.size
        if n < 1:
            raise ValueError("a linear program needs at least one variable")
        if not np.all(np.isfinite(self.cost)):
            raise ValueError("cost vector must be finite")
        self.A = np.asarray(self.A, dtype=float).reshape(-1, n)
        self.b = np.asarray(self.b, dtype=float).reshape(-1)
        if self.A.shape[0] != self.b.size:
            raise ValueError(f"{self.A.shape[0]} rows but {self.b.size} right-hand sides")
        lo = -np.inf if self.var_lower is None else self.var_lower
        hi = np.inf if self.var_upper is None else self.var_upper
        self.var_lower = np.broadcast_to(np.asarray(lo, dtype=float), (n,)).copy()
        self.var_upper = np.broadcast_to(np.asarray(hi, dtype=float), (n,)).copy()
        if np.any(self.var_lower > self.var_upper):
            raise ValueError("var_lower must not exceed var_upper")

    @classmethod
    def from_rows(cls, cost, rows, var_lower=None, var_upper=None):
        cost = np.asarray(cost, dtype=float)
        if rows:
            A = np.array([r[0] for r in rows], dtype=float)
            b = np.array([r[1] for r in rows], dtype=float)
        else:
            A, b = np.zeros((0, cost.size)), np.zeros(0)
        return cls(cost, A, b, var_lower, var_upper)

    @property
    def n(self):
        return self.cost.size

    @property
    def rows(self):
        return [(self.A[i], self.b[i]) for i in range(self.b.size)]

    def with_rows(self, A, b):
        return LinearProgram(self.cost, A, b, self.var_lower, self.var_upper)


@dataclass
class LpSolution:
    status: str
    x: np.ndarray = None
    objective: float = None
    active_rows: tuple = ()
    iterations: int = 0
    info: dict = field(default_factory=dict)

    @property
    def optimal(self):
        return self.status == OPTIMAL


def _standard_form(lp):
    """Map x = x0 + D z with z >= 0, and collect the rows in z."""
    n = lp.n
    lo, hi = lp.var_lower, lp.var_upper
    cols = []
    x0 = np.zeros(n)
    extra_rows = []  # (column index in z, bound) meaning z_col <= bound
    for j in range(n):
        if np.isfinite(lo[j]):
            x0[j] = lo[j]
            cols.append((j, 1.0))
            if np.isfinite(hi[j]):
                extra_rows.append((len(cols) - 1, hi[j] - lo[j]))
        elif np.isfinite(hi[j]):
            x0[j] = hi[j]
            cols.append((j, -1.0))
        else:
            cols.append((j, 1.0))
            cols.append((j, -1.0))
    nz = len(cols)
    D = np.zeros((n, nz))
    for k, (j, s) in enumerate(cols):
        D[j, k] = s
    Az = lp.A @ D
    bz = lp.b - lp.A @ x0
    if extra_rows:
        E = np.zeros((len(extra_rows), nz))
        eb = np.empty(len(extra_rows))
        for i, (k, bound) in enumerate(extra_rows):
            E[i, k] = 1.0
            eb[i] = bound
        Az = np.vstack([Az, E])
        bz = np.concatenate([bz, eb])
    return x0, D, Az, bz, lp.cost @ D


class _Tableau:
    """Working state of one simplex run, kept for the lexicographic passes."""

    def __init__(self, lp):
        self.lp = lp
        self.x0, self.D, Az, bz, self.cz = _standard_form(lp)
        mr, nz = Az.shape
        neg = bz < 0
        self.mr, self.nz, self.na = mr, nz, int(neg.sum())
        self.ncol = nz + mr + self.na
        self.sign = np.where(neg, -1.0, 1.0)
        self.Az, self.bz = Az, bz
        T = np.zeros((mr + 1, self.ncol + 1))
        T[:mr, :nz] = Az * self.sign[:, None]
        T[:mr, nz:nz + mr] = np.diag(self.sign)
        T[:mr, -1] = bz * self.sign
        basis = np.empty(mr, dtype=np.intp)
        art = nz + mr
        for i in range(mr):
            if neg[i]:
                T[i, art] = 1.0
                basis[i] = art
                art += 1
            else:
                basis[i] = nz + i
        self.T, self.basis = T, basis
        self.max_iter = 50 * (mr + self.ncol) + 1000
        self.iterations = 0
        self.scale = max(1.0, float(np.max(np.abs(bz)))) if mr else 1.0

    def _run(self, ncols):
        status, it = _kernels.simplex_loop(self.T, self.basis, ncols, _PIVOT_TOL, self.max_iter)
        self.iterations += it
        if status == _kernels.ITERATION_LIMIT:
            raise SolverFailure(f"simplex hit the iteration limit after {it} pivots")
        return status

    def _set_objective(self, c):
        T, mr = self.T, self.mr
        T[mr, :-1] = c
        T[mr, -1] = 0.0
        for i in range(mr):
            cb = c[self.basis[i]]
            if cb != 0.0:
                T[mr] -= cb * T[i]

    def phase_one(self):
        T, mr, nz = self.T, self.mr, self.nz
        if not self.na:
            return True
        art_rows = np.flatnonzero(self.sign < 0)
        T[mr, :] = -T[art_rows, :].sum(axis=0)
        T[mr, nz + mr:self.ncol] = 0.0
        self._run(self.ncol)
        if -T[mr, -1] > _PHASE1_TOL * self.scale:
            return False
        for i in range(mr):
            if self.basis[i] >= nz + mr:
                cand = np.flatnonzero(np.abs(T[i, :nz + mr]) > 1e-9)
                if cand.size:
                    _kernels.pivot(T, self.basis, i, int(cand[0]))
        # artificials never re-enter; zeroing keeps them out of later phases
        nonbasic_art = np.setdiff1d(np.arange(nz + mr, self.ncol), self.basis)
        T[:, nonbasic_art] = 0.0
        return True

    def phase_two(self):
        c = np.zeros(self.ncol)
        c[:self.nz] = self.cz
        return self._run_objective(c)

    def _run_objective(self, c):
        self._set_objective(c)
        return self._run(self.nz + self.mr)

    def restrict_to_optimal_face(self):
        """Fix at zero every nonbasic column whose reduced cost is positive."""
        rc = self.T[self.mr, :-1]
        drop = np.flatnonzero(rc > LEX_TOL)
        if drop.size:
            drop = np.setdiff1d(drop, self.basis)
            self.T[:, drop] = 0.0

    def lexicographic(self, n_coords):
        for k in range(n_coords):
            c = np.zeros(self.ncol)
            c[:self.nz] = self.D[k]
            status = self._run_objective(c)
            if status == _kernels.OPTIMAL:
                self.restrict_to_optimal_face()
            # an unbounded direction leaves coordinate k where it is

    def x(self):
        z = np.zeros(self.ncol)
        z[self.basis] = self.T[:self.mr, -1]
        x = self.x0 + self.D @ z[:self.nz]
        lp = self.lp
        if self.mr and np.max(lp.A @ x - lp.b, initial=0.0) > FEAS_TOL:
            x = self._polish()
        return x

    def _polish(self):
        """Recompute the basic solution from the original data."""
        mr, nz, ncol = self.mr, self.nz, self.ncol
        M = np.zeros((mr, ncol))
        M[:, :nz] = self.Az * self.sign[:, None]
        M[:, nz:nz + mr] = np.diag(self.sign)
        art = nz + mr
        for i in range(mr):
            if self.sign[i] < 0:
                M[i, art] = 1.0
                art += 1
        try:
            zb = np.linalg.solve(M[:, self.basis], self.bz * self.sign)
        except np.linalg.LinAlgError as exc:
            raise SolverFailure("numerically singular basis") from exc
        z = np.zeros(ncol)
        z[self.basis] = np.maximum(zb, 0.0)
        return self.x0 + self.D @ z[:nz]


def _simplex(lp, lex_coords=0):
    """Two-phase simplex; returns (status, x, iterations)."""
    tab = _Tableau(lp)
    if not tab.phase_one():
        return INFEASIBLE, None, tab.iterations
    if tab.phase_two() == _kernels.UNBOUNDED:
        return UNBOUNDED, None, tab.iterations
    if lex_coords:
        tab.restrict_to_optimal_face()
        tab.lexicographic(lex_coords)
    return OPTIMAL, tab.x(), tab.iterations


def _finish(lp, status, x, iters, info=None):
    if status != OPTIMAL:
        return LpSolution(status, iterations=iters, info=info or {})
    viol = float(np.max(lp.A @ x - lp.b, initial=0.0)) if lp.b.size else 0.0
    bviol = float(
        max(np.max(lp.var_lower - x, initial=0.0), np.max(x - lp.var_upper, initial=0.0))
    )
    if viol > FEAS_TOL or bviol > FEAS_TOL:
        raise SolverFailure(
            f"solution violates constraints by {max(viol, bviol):.3e} (> {FEAS_TOL:g})"
        )
    objective = float(lp.cost @ x)
    slack = lp.b - lp.A @ x if lp.b.size else np.zeros(0)
    active = tuple(int(i) for i in np.flatnonzero(slack <= ACT_TOL))
    return LpSolution(OPTIMAL, x, objective, active, iters, info or {})


def solve(lp, refine=True, lex_coords=None):
    """Solve ``lp``.

    Parameters
    ----------
    lp : LinearProgram
    refine : bool
        Return the lexicographically smallest optimizer instead of whichever
        vertex the simplex stops at.  Callers that only need the optimal value
        can switch this off.
    lex_coords : int, optional
        Number of leading coordinates to refine (default: all).
    """
    n_lex = 0
    if refine:
        n_lex = lp.n if lex_coords is None else min(lp.n, lex_coords)
    status, x, iters = _simplex(lp, n_lex)
    return _finish(lp, status, x, iters)


def lex_refine(lp, optimal_value, lex_coords=None):
    """Lexicographically smallest optimizer of ``lp``.

    Starting from an optimal tableau, every column with a positive reduced
    cost is fixed at zero (this pins the face of optimizers).  Coordinate
    x_1 is then minimized over that face, the face is pinned again, and so on
    through x_n.  No tolerance slack is added to the objective.
    """
    status, x, _ = _simplex(lp, lp.n if lex_coords is None else min(lp.n, lex_coords))
    if status != OPTIMAL:
        raise SolverFailure(f"lex_refine needs a solvable program, got {status}")
    value = float(lp.cost @ x)
    if abs(value - optimal_value) > 1e-7 * max(1.0, abs(optimal_value)):
        raise SolverFailure(
            f"supplied optimal value {optimal_value!r} disagrees with the solver ({value!r})"
        )
    return x
