"""Monte Carlo checks of violation certificates.

``run_experiment`` repeats a design method over independent multisamples and
compares the frequency of {violation probability > epsilon} with the bound
(or with the exact law, when one is known).  ``error_distribution_check`` and
``partition_check`` probe the structural facts behind the exact laws.
"""

from __future__ import annotations

import itertools
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats

from . import bounds, canonical, lp
from .bounds import BoundKind
from .cascade import FEASIBILITY_CAVEAT, discard_cascade, solve_cascade
from .errors import (
    AssumptionViolation,
    DegenerateProblem,
    DegenerateRemoval,
    DomainError,
    FeasibilitySetF,
)
from .robust_box import discard_box, solve_box_design
from .sampling import GENERATOR, UniformBox, derive, rng
from .scenario import discard, solve_scenario

__all__ = [
    "PASS",
    "FAIL",
    "INCONCLUSIVE",
    "ViolationEstimate",
    "ExperimentConfig",
    "ExperimentReport",
    "KSReport",
    "PartitionReport",
    "clopper_pearson",
    "estimate_violation",
    "run_experiment",
    "error_distribution_check",
    "partition_check",
    "worker_count",
]

PASS, FAIL, INCONCLUSIVE = "Pass", "Fail", "Inconclusive"

N_FRESH = 100_000
CI_LEVEL = 0.99
BAND_SIGMAS = 3.0
STRADDLE_LIMIT = 0.01
KS_LEVEL = 0.99
MAX_PARTITION_M = 12
MAX_PARTITION_D = 3


def worker_count(n_tasks):
    """Threads for a trial loop, capped by SCENARIO_CERT_THREADS (default 1)."""
    try:
        cap = int(os.environ.get("SCENARIO_CERT_THREADS", "1"))
    except ValueError:
        cap = 1
    return max(1, min(cap, n_tasks))


def _map_trials(fn, n):
    """fn(k) for k < n, merged in trial order."""
    workers = worker_count(n)
    if workers == 1:
        return [fn(k) for k in range(n)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, range(n)))


@dataclass
class ViolationEstimate:
    point: float
    ci_low: float
    ci_high: float
    n_fresh: int
    level: float = CI_LEVEL

    def to_dict(self):
        return asdict(self)


def clopper_pearson(k, n, level=CI_LEVEL):
    """Exact two-sided binomial confidence interval for k successes in n."""
    if n <= 0 or not 0 <= k <= n:
        raise DomainError(f"need 0 <= k <= n and n > 0, got k={k}, n={n}")
    a = 1.0 - level
    lo = 0.0 if k == 0 else float(stats.beta.ppf(a / 2, k, n - k + 1))
    hi = 1.0 if k == n else float(stats.beta.ppf(1 - a / 2, k + 1, n - k))
    return lo, hi


def _count(evaluator, deltas):
    out = np.asarray(evaluator(deltas))
    if out.shape != (deltas.shape[0],):
        out = np.array([bool(evaluator(d)) for d in deltas])
    return int(np.count_nonzero(out))


def estimate_violation(evaluator, dist, n_fresh=N_FRESH, seed=0, level=CI_LEVEL, gen=None):
    """Fraction of ``n_fresh`` fresh draws on which ``evaluator`` is true.

    ``evaluator`` maps an (n, n_delta) array to n booleans; a scalar
    predicate on single samples is also accepted (slower).
    """
    if n_fresh < 1:
        raise DomainError(f"n_fresh must be positive, got {n_fresh}")
    gen = rng(seed) if gen is None else gen
    k = _count(evaluator, dist.sample(gen, n_fresh))
    lo, hi = clopper_pearson(k, n_fresh, level)
    return ViolationEstimate(k / n_fresh, lo, hi, n_fresh, level)


@dataclass
class ExperimentConfig:
    """One repeated-trial experiment.

    Either ``canonical_tag`` names a registered problem (its exact violation
    probability is used) or ``problem`` (and ``second_stage`` for cascades)
    is given and violations are estimated from ``n_fresh`` fresh samples.
    """

    m: int
    epsilon: float
    method: str = "scenario"
    trials: int = 2000
    seed: int = 12345
    r: int = 0
    kind: object = None
    canonical_tag: str = None
    problem: object = None
    second_stage: object = None
    distribution: object = None
    n_fresh: int = N_FRESH
    target_stage: int = 2

    def __post_init__(self):
        if self.method not in canonical.METHODS:
            raise DomainError(f"unknown method {self.method!r}; known: {', '.join(canonical.METHODS)}")
        if self.canonical_tag is not None:
            can = canonical.get(self.canonical_tag)
            if self.method not in can.methods:
                raise DomainError(f"method {self.method!r} does not apply to {self.canonical_tag!r}")
            self.problem = can.problem() if self.problem is None else self.problem
            self.second_stage = can.second_stage() if self.second_stage is None else self.second_stage
            if self.distribution is None:
                self.distribution = UniformBox([0.0], [1.0])
        if self.problem is None or self.distribution is None:
            raise DomainError("an experiment needs a problem and a distribution")
        if self.method.startswith("cascade") and self.second_stage is None:
            raise DomainError("cascade methods need a second stage")
        if not isinstance(self.trials, (int, np.integer)) or self.trials < 1:
            raise DomainError(f"trials must be a positive integer, got {self.trials!r}")
        if not 0.0 < self.epsilon < 1.0:
            raise DomainError(f"epsilon must lie in (0, 1), got {self.epsilon!r}")
        if self.kind is not None and not isinstance(self.kind, BoundKind):
            self.kind = BoundKind.parse(self.kind, self.r)

    @property
    def d(self):
        if self.method.startswith("box"):
            return 2 * self.problem.n_delta
        if self.method.startswith("cascade"):
            return self.problem.n_x + self.second_stage.n_y
        return self.problem.n_x

    @property
    def bound_kind(self):
        if self.kind is not None:
            return self.kind
        if self.r:
            return BoundKind.discard(self.r)
        return BoundKind.exact() if self.method == "box" else BoundKind.floyd()

    def to_dict(self):
        out = {
            "m": self.m,
            "epsilon": self.epsilon,
            "method": self.method,
            "trials": self.trials,
            "seed": self.seed,
            "r": self.r,
            "kind": None if self.kind is None else self.kind.to_dict(),
            "canonical_tag": self.canonical_tag,
            "n_fresh": self.n_fresh,
            "target_stage": self.target_stage,
            "distribution": self.distribution.to_dict(),
        }
        if self.canonical_tag is None:
            out["problem"] = self.problem.to_dict()
            if self.second_stage is not None:
                out["second_stage"] = self.second_stage.to_dict()
        return out


@dataclass
class ExperimentReport:
    trials: int
    m: int
    epsilon: float
    method: str
    empirical_freq: float
    bound_value: float
    exact_law_value: float = None
    verdict: str = INCONCLUSIVE
    caveats: list = field(default_factory=list)
    kind: str = ""
    d: int = 0
    r: int = 0
    used_trials: int = 0
    degenerate_trials: int = 0
    infeasible_trials: int = 0
    straddle_fraction: float = 0.0
    violations: list = field(default_factory=list)
    generator: str = GENERATOR

    def to_dict(self):
        return asdict(self)


def _run_method(cfg, samples):
    """Return (x, y) for one multisample; y is None outside cascades."""
    p, meth = cfg.problem, cfg.method
    if meth == "scenario":
        sol, rec = solve_scenario(p, samples)
        if not rec.consistent:
            raise DegenerateProblem(rec.reason)
        return sol.x, None
    if meth == "discard":
        sol, _, rec = discard(p, samples, cfg.r)
        if not rec.consistent:
            raise DegenerateProblem(rec.reason)
        return sol.x, None
    if meth == "box":
        sol, _, _ = solve_box_design(p, samples)
        return sol.x, None
    if meth == "box-discard":
        sol, _, _, _ = discard_box(p, samples, cfg.r)
        return sol.x, None
    if meth == "cascade":
        res = solve_cascade(p, cfg.second_stage, samples)
        return res.x, res.y
    res = discard_cascade(p, cfg.second_stage, samples, cfg.r, cfg.target_stage)
    return res.x, res.y


def _evaluator(cfg, x, y):
    if y is None:
        return lambda d: cfg.problem.evaluate(x, d) > 0.0
    return lambda d: (cfg.problem.evaluate(x, d) > 0.0) | (cfg.second_stage.evaluate(y, x, d) > 0.0)


def _trial(cfg, k):
    gen = rng(derive(cfg.seed, k))
    samples = cfg.distribution.sample(gen, cfg.m)
    try:
        x, y = _run_method(cfg, samples)
    except FeasibilitySetF:
        return ("infeasible", None, False)
    except (DegenerateProblem, DegenerateRemoval):
        return ("degenerate", None, False)
    if cfg.canonical_tag is not None:
        sol = x if y is None else (x, y)
        v = canonical.violation_probability(cfg.canonical_tag, sol, cfg.distribution)
        return ("ok", v, False)
    est = estimate_violation(_evaluator(cfg, x, y), cfg.distribution, cfg.n_fresh, gen=gen)
    straddle = est.ci_low <= cfg.epsilon <= est.ci_high
    return ("ok", est.point, straddle)


def band(p, trials):
    """Three binomial standard errors for a frequency of ``trials`` draws."""
    return BAND_SIGMAS * np.sqrt(max(p * (1.0 - p), 0.0) / trials)


def run_experiment(cfg):
    """Repeat ``cfg.method`` over ``cfg.trials`` multisamples and judge the bound."""
    if not isinstance(cfg, ExperimentConfig):
        raise DomainError("run_experiment expects an ExperimentConfig")
    results = _map_trials(lambda k: _trial(cfg, k), cfg.trials)
    vs = [v for s, v, _ in results if s == "ok"]
    n_deg = sum(s == "degenerate" for s, _, _ in results)
    n_inf = sum(s == "infeasible" for s, _, _ in results)
    n_straddle = sum(st for _, _, st in results)
    used = len(vs)
    kind = cfg.bound_kind
    bound_value = bounds.q(kind, cfg.m, cfg.d, cfg.epsilon)
    law = None
    if cfg.canonical_tag is not None:
        law = canonical.exact_law(
            cfg.canonical_tag, cfg.method, cfg.m, cfg.epsilon, cfg.r, cfg.distribution
        )
    caveats = []
    if cfg.method.startswith("cascade"):
        caveats.append(FEASIBILITY_CAVEAT)
    if n_inf:
        caveats.append(f"{n_inf} trials had an infeasible second stage and were excluded")
    if n_deg:
        caveats.append(f"{n_deg} trials were degenerate and were excluded")
    if bound_value >= 1.0:
        caveats.append("the bound is vacuous (equal to 1) at this configuration")
    straddle_frac = n_straddle / used if used else 0.0
    if used == 0:
        freq = float("nan")
        verdict = INCONCLUSIVE
        caveats.append("no usable trials")
    else:
        freq = sum(v > cfg.epsilon for v in vs) / used
        if law is not None:
            ok = abs(freq - law) <= band(law, used) + 1e-12
        else:
            ok = freq <= bound_value + band(bound_value, used) + 1e-12
        verdict = PASS if ok else FAIL
        if cfg.canonical_tag is None and straddle_frac > STRADDLE_LIMIT:
            verdict = INCONCLUSIVE
            caveats.append(
                f"the estimate's confidence interval contained epsilon in "
                f"{straddle_frac:.2%} of trials"
            )
    return ExperimentReport(
        trials=cfg.trials,
        m=cfg.m,
        epsilon=cfg.epsilon,
        method=cfg.method,
        empirical_freq=freq,
        bound_value=bound_value,
        exact_law_value=law,
        verdict=verdict,
        caveats=caveats,
        kind=kind.label,
        d=cfg.d,
        r=cfg.r,
        used_trials=used,
        degenerate_trials=n_deg,
        infeasible_trials=n_inf,
        straddle_fraction=straddle_frac,
        violations=[float(v) for v in vs],
    )


@dataclass
class KSReport:
    tag: str
    d: int
    trials: int
    statistic: float
    critical_value: float
    pvalue: float
    verdict: str

    def to_dict(self):
        return asdict(self)


def _check_d(tag, d):
    can = canonical.get(tag)
    if d is not None and d != can.d:
        raise DomainError(f"{tag!r} compresses to d={can.d}, not {d}")
    return can.d


def error_distribution_check(tag, d=None, trials=5000, seed=12345):
    """KS test of compression-hypothesis violations against F(a) = a**d.

    Each trial draws d uniform samples, builds the hypothesis from them alone
    and records its exact violation probability.
    """
    d = _check_d(tag, d)
    if trials < 1:
        raise DomainError(f"trials must be positive, got {trials}")
    dist = UniformBox([0.0], [1.0])

    def one(k):
        s = dist.sample(rng(derive(seed, k)), d)
        return canonical.violation_probability(tag, canonical.compression_hypothesis(tag, s), dist)

    vs = np.array(_map_trials(one, trials))
    if trials < 2:
        return KSReport(tag, d, trials, float("nan"), float("nan"), float("nan"), INCONCLUSIVE)
    res = stats.kstest(vs, lambda a: np.clip(a, 0.0, 1.0) ** d)
    crit = float(stats.kstwo.ppf(KS_LEVEL, trials))
    verdict = PASS if res.statistic < crit else FAIL
    return KSReport(tag, d, trials, float(res.statistic), crit, float(res.pvalue), verdict)


@dataclass
class PartitionReport:
    tag: str
    m: int
    d: int
    trials: int
    consistent_counts: list
    counterexamples: list
    verdict: str

    def to_dict(self):
        return asdict(self)


def _consistent(tag, hyp, samples):
    can = canonical.get(tag)
    if tag == "cascade-1d":
        x, y = hyp
        g = np.maximum(can.problem().evaluate(x, samples), can.second_stage().evaluate(y, x, samples))
    else:
        g = can.problem().evaluate(hyp, samples)
    return bool(np.max(g) <= lp.FEAS_TOL)


def partition_check(tag, m, trials=200, seed=12345):
    """Count, per multisample, the d-subsets whose hypothesis is consistent.

    Exactly one subset should qualify.  Trials with another count are
    reported as counterexamples (they may lie in a null set).
    """
    d = _check_d(tag, None)
    if not d <= m <= MAX_PARTITION_M or d > MAX_PARTITION_D:
        raise DomainError(f"partition check needs d <= m <= {MAX_PARTITION_M}, d <= {MAX_PARTITION_D}")
    if trials < 1:
        raise DomainError(f"trials must be positive, got {trials}")
    dist = UniformBox([0.0], [1.0])

    def one(k):
        s = dist.sample(rng(derive(seed, k)), m)
        hits = []
        for sub in itertools.combinations(range(m), d):
            try:
                hyp = canonical.compression_hypothesis(tag, s[list(sub)])
            except (AssumptionViolation, FeasibilitySetF):
                continue
            if _consistent(tag, hyp, s):
                hits.append(list(sub))
        return hits

    hits = _map_trials(one, trials)
    counts = [len(h) for h in hits]
    bad = [{"trial": k, "consistent_subsets": h} for k, h in enumerate(hits) if len(h) != 1]
    return PartitionReport(tag, m, d, trials, counts, bad, PASS if not bad else FAIL)
