"""Seeded i.i.d. uncertainty generators.

Streams are numpy ``PCG64`` generators keyed by a ``SeedSequence``.  Trial
``k`` of an experiment with master seed ``s`` draws from ``derive(s, k)``,
which packs the pair into one integer, so two trials never share a stream.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError

__all__ = [
    "GENERATOR",
    "DistributionSpec",
    "UniformBox",
    "GaussianDiag",
    "Empirical",
    "derive",
    "draw",
    "rng",
    "distribution_from_dict",
]

GENERATOR = "numpy.random.PCG64 via SeedSequence(entropy=seed)"

_TRIAL_BITS = 32


def derive(seed, trial_index):
    """Seed for trial ``trial_index`` of a run with master ``seed``.

    ``seed * 2**32 + trial_index`` is injective on pairs with
    ``0 <= trial_index < 2**32``; ``SeedSequence`` then hashes it into an
    independent stream.
    """
    if not (0 <= trial_index < 2**_TRIAL_BITS):
        raise DomainError(f"trial_index must lie in [0, 2**32), got {trial_index}")
    if seed < 0:
        raise DomainError(f"seed must be nonnegative, got {seed}")
    return (int(seed) << _TRIAL_BITS) | int(trial_index)


def rng(seed):
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed))))


class DistributionSpec:
    """Base class; subclasses implement ``sample(gen, m)``."""

    n_delta: int

    def sample(self, gen, m):  # pragma: no cover - abstract
        raise NotImplementedError

    def to_dict(self):  # pragma: no cover - abstract
        raise NotImplementedError


@dataclass(frozen=True)
class UniformBox(DistributionSpec):
    lower: tuple
    upper: tuple

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lower, dtype=float))
        hi = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if lo.shape != hi.shape or lo.ndim != 1:
            raise DomainError("uniform box bounds must be vectors of equal length")
        if not np.all(np.isfinite(lo)) or not np.all(np.isfinite(hi)):
            raise DomainError("uniform box bounds must be finite")
        if np.any(lo >= hi):
            raise DomainError("uniform box needs lower < upper componentwise")
        object.__setattr__(self, "lower", tuple(lo.tolist()))
        object.__setattr__(self, "upper", tuple(hi.tolist()))

    @property
    def n_delta(self):
        return len(self.lower)

    def sample(self, gen, m):
        lo, hi = np.array(self.lower), np.array(self.upper)
        return lo + (hi - lo) * gen.random((m, lo.size))

    def to_dict(self):
        return {"kind": "uniform_box", "lower": list(self.lower), "upper": list(self.upper)}


@dataclass(frozen=True)
class GaussianDiag(DistributionSpec):
    mean: tuple
    stddev: tuple

    def __post_init__(self):
        mu = np.atleast_1d(np.asarray(self.mean, dtype=float))
        sd = np.atleast_1d(np.asarray(self.stddev, dtype=float))
        if mu.shape != sd.shape or mu.ndim != 1:
            raise DomainError("gaussian mean and stddev must be vectors of equal length")
        if np.any(~(sd > 0)) or not np.all(np.isfinite(mu)):
            raise DomainError("gaussian stddev must be positive and the mean finite")
        object.__setattr__(self, "mean", tuple(mu.tolist()))
        object.__setattr__(self, "stddev", tuple(sd.tolist()))

    @property
    def n_delta(self):
        return len(self.mean)

    def sample(self, gen, m):
        return np.array(self.mean) + np.array(self.stddev) * gen.standard_normal((m, len(self.mean)))

    def to_dict(self):
        return {"kind": "gaussian_diag", "mean": list(self.mean), "stddev": list(self.stddev)}


@dataclass(frozen=True, eq=False)
class Empirical(DistributionSpec):
    """Resample rows of a fixed table with replacement."""

    table: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.table, dtype=float)
        if t.ndim == 1:
            t = t[:, None]
        if t.ndim != 2 or t.shape[0] == 0:
            raise DomainError("empirical sample table must be a nonempty 2-D table")
        t = t.copy()
        t.setflags(write=False)
        object.__setattr__(self, "table", t)

    @property
    def n_delta(self):
        return self.table.shape[1]

    def sample(self, gen, m):
        return self.table[gen.integers(0, self.table.shape[0], size=m)]

    def to_dict(self):
        return {"kind": "empirical", "samples": self.table.tolist()}


def draw(spec, m, seed):
    """``m`` i.i.d. draws from ``spec`` as an (m, n_delta) array."""
    if isinstance(m, bool) or not isinstance(m, (int, np.integer)) or m < 0:
        raise DomainError(f"m must be a nonnegative integer, got {m!r}")
    if m == 0:
        return np.zeros((0, spec.n_delta))
    return spec.sample(rng(seed), int(m))


def distribution_from_dict(data):
    kind = data.get("kind")
    if kind == "uniform_box":
        return UniformBox(data["lower"], data["upper"])
    if kind == "gaussian_diag":
        return GaussianDiag(data["mean"], data["stddev"])
    if kind == "empirical":
        return Empirical(data["samples"])
    raise DomainError(f"unknown distribution kind {kind!r}")
