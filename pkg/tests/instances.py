"""Random problem generators shared by the property and acceptance tests."""

import numpy as np

from scenario_cert.cascade import CoupledConstraint, SecondStageSpec
from scenario_cert.scenario import ScenarioProblem, UncertainAffineConstraint


def random_scenario_problem(gen, n_x, n_delta=None, n_c=2, bound=5.0):
    """Problem with x = 0 strictly feasible for every delta in [-1, 1]^n_delta.

    Each constraint reads (f0.x + h0) + delta.(F^T x + h) <= 0, so every
    sampled copy vanishes on the set where both brackets vanish.  When
    n_delta < n_x that set is generically nonempty and the sampled program is
    structurally degenerate; the default n_delta = n_x avoids it.

    Constraint offsets satisfy h0 <= -|h|_1 - 0.1, so g(0, delta) < 0 on the
    whole uncertainty box; the variable box keeps every sampled program
    bounded.  Continuous random data make the minimizer unique almost surely.
    """
    n_delta = n_x if n_delta is None else n_delta
    cons = []
    for _ in range(n_c):
        f0 = gen.standard_normal(n_x)
        F = gen.standard_normal((n_x, n_delta))
        h = gen.standard_normal(n_delta) * 0.5
        h0 = -np.abs(h).sum() - gen.uniform(0.1, 1.0)
        cons.append(UncertainAffineConstraint(f0, F, h0, h))
    return ScenarioProblem(gen.standard_normal(n_x), cons, -bound, bound)


def random_box_problem(gen, n_x, n_delta, n_c=2, bound=5.0):
    return random_scenario_problem(gen, n_x, n_delta, n_c, bound)


def max_1d_stage_two_mpc(alpha):
    """max y s.t. y >= delta and y <= x + alpha."""
    return SecondStageSpec(
        [-1.0],
        [
            CoupledConstraint([-1.0], [[0.0]], [[0.0]], [0.0], [1.0], 0.0),
            CoupledConstraint([1.0], [[0.0]], [[0.0]], [-1.0], [0.0], -alpha),
        ],
    )


def max_1d_problem():
    return ScenarioProblem([1.0], [UncertainAffineConstraint([-1.0], [[0.0]], 0.0, [1.0])])


def random_cascade(gen, n_x, n_y, bound=5.0):
    """Stage one from random_scenario_problem plus a coupled stage two.

    n_delta = max(n_x, n_y) keeps both stages nondegenerate.  The offsets t
    make y = 0 strictly feasible for every x in the stage-one box and every
    delta in [-1, 1]^n_delta, so stage two is always feasible.
    """
    nd = max(n_x, n_y)
    p1 = random_scenario_problem(gen, n_x, nd, bound=bound)
    cons = []
    for _ in range(2):
        a0 = gen.standard_normal(n_y)
        A = gen.standard_normal((n_y, nd))
        Q = gen.standard_normal((n_x, nd)) * 0.3
        q = gen.standard_normal(n_x) * 0.3
        s = gen.standard_normal(nd) * 0.5
        t = -bound * (np.abs(Q).sum() + np.abs(q).sum()) - np.abs(s).sum() - gen.uniform(0.1, 1.0)
        cons.append(CoupledConstraint(a0, A, Q, q, s, t))
    p2 = SecondStageSpec(gen.standard_normal(n_y), cons, -bound, bound)
    return p1, p2
