"""Stochastic contextual-bandit simulators with exact benchmark regret.

Every round the environment realises the full reward vector, so the
counterfactual regret of the learner's distribution is exact. The random
stream always consumes 1 + |A| uniforms per round (one for the context, one
per action for the noise), which keeps streams aligned between adversary
variants under the same seed.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .core import Benchmark, ContextualFunctionClass, Dirac, as_distribution, benchmark_vertices
from .errors import ConfigurationError, DomainError, StructuralError

ENV_STREAM = 0
LEARNER_STREAM = 1
CLASS_STREAM = 2


def make_rng(seed: int, stream: int = ENV_STREAM) -> np.random.Generator:
    """Counter-based Philox generator keyed by (seed, stream)."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(stream)])))


@dataclass(frozen=True)
class Bernoulli:
    kind = "bernoulli"


@dataclass(frozen=True)
class UniformAdditive:
    width: float

    kind = "uniform_additive"

    def __post_init__(self):
        if not 0 <= self.width <= 2:
            raise ConfigurationError(f"noise width must lie in [0, 2], got {self.width}")


@dataclass(frozen=True)
class Corruption:
    """Corrupt at most `budget` rounds. The default flips R -> 1 - R in rounds 1..budget."""

    budget: int
    strategy: str = "flip"

    kind = "corruption"

    def __post_init__(self):
        if self.budget < 0:
            raise ConfigurationError("corruption budget must be nonnegative")
        if self.strategy not in ("flip", "zero_best"):
            raise ConfigurationError(f"unknown corruption strategy {self.strategy!r}")


@dataclass(frozen=True)
class Shift:
    """Context-distribution shift within the ratio band [D*/A, A D*].

    Odd rounds draw from D+ proportional to D* A^s(x), even rounds from D-
    proportional to D* A^-s(x), with s(x) = +1/2 on even context ids and
    -1/2 on odd ones. Dividing by the normaliser (itself within
    [A^-1/2, A^1/2]) keeps both distributions inside the band.
    """

    ratio: float
    schedule: str = "alternate"

    kind = "shift"

    def __post_init__(self):
        if self.ratio < 1:
            raise ConfigurationError(f"shift ratio must be at least 1, got {self.ratio}")
        if self.schedule not in ("alternate", "plus", "minus"):
            raise ConfigurationError(f"unknown shift schedule {self.schedule!r}")


Noise = Union[Bernoulli, UniformAdditive]
Adversary = Union[None, Corruption, Shift]


@dataclass
class Environment:
    context_dist: np.ndarray
    truth: np.ndarray  # (contexts, actions)
    benchmark: Benchmark = field(default_factory=Dirac)
    noise: Noise = field(default_factory=Bernoulli)
    adversary: Adversary = None
    misspec_deviation: float = 0.0

    def __post_init__(self):
        self.context_dist = as_distribution(self.context_dist, tol=1e-9)
        self.truth = np.array(self.truth, dtype=float, ndmin=2)
        if self.truth.shape[0] != self.context_dist.size:
            raise StructuralError("truth rows must match the number of contexts")
        if np.any(self.truth < 0) or np.any(self.truth > 1):
            raise StructuralError("truth entries must lie in [0, 1]")
        self._top = np.array(
            [(benchmark_vertices(self.benchmark, self.n_actions, x) @ self.truth[x]).max() for x in range(self.n_contexts)]
        )
        self._dists = self._shift_dists()

    @property
    def n_contexts(self) -> int:
        return self.truth.shape[0]

    @property
    def n_actions(self) -> int:
        return self.truth.shape[1]

    def _shift_dists(self) -> np.ndarray:
        d = self.context_dist
        if not isinstance(self.adversary, Shift) or self.adversary.ratio == 1:
            return d[None, :]
        s = np.where(np.arange(d.size) % 2 == 0, 0.5, -0.5)
        A = self.adversary.ratio
        plus = d * A**s
        minus = d * A ** (-s)
        return np.stack([plus / plus.sum(), minus / minus.sum()])

    def context_probs(self, t) -> np.ndarray:
        """Exact context distribution(s) for round(s) t (1-indexed)."""
        t = np.asarray(t)
        if self._dists.shape[0] == 1:
            return np.broadcast_to(self._dists[0], t.shape + (self.n_contexts,))
        sched = self.adversary.schedule
        if sched == "plus":
            which = np.zeros(t.shape, dtype=int)
        elif sched == "minus":
            which = np.ones(t.shape, dtype=int)
        else:
            which = (t + 1) % 2  # odd rounds -> D+
        return self._dists[which]

    def sample_block(self, t0: int, n: int, rng: np.random.Generator):
        """Rounds t0 .. t0 + n - 1: (contexts, reward matrix, corrupted flags)."""
        U = rng.random((n, 1 + self.n_actions))
        t = np.arange(t0, t0 + n)
        if self._dists.shape[0] == 1:
            cdf = np.cumsum(self._dists[0])
            x = np.minimum(np.searchsorted(cdf, U[:, 0], side="right"), self.n_contexts - 1)
        else:
            cdf = np.cumsum(self.context_probs(t), axis=1)
            x = np.minimum((U[:, :1] >= cdf).sum(axis=1), self.n_contexts - 1)
        mean = self.truth[x]
        if isinstance(self.noise, Bernoulli):
            R = (U[:, 1:] < mean).astype(float)
        else:
            R = np.clip(mean + self.noise.width * (U[:, 1:] - 0.5), 0.0, 1.0)
        corrupted = np.zeros(n, dtype=bool)
        if isinstance(self.adversary, Corruption) and self.adversary.budget > 0:
            corrupted = t <= self.adversary.budget
            if self.adversary.strategy == "flip":
                R[corrupted] = 1.0 - R[corrupted]
            else:
                best = np.argmax(mean, axis=1)
                rows = np.flatnonzero(corrupted)
                R[rows, best[rows]] = 0.0
        return x.astype(np.int64), R, corrupted

    def step(self, t: int, rng: np.random.Generator):
        x, R, c = self.sample_block(t, 1, rng)
        return int(x[0]), R[0], bool(c[0])

    def benchmark_value(self, x: int) -> float:
        return float(self._top[x])

    def instantaneous_regret(self, x: int, p) -> float:
        """max_lam E_lam f*(x, .) - E_p f*(x, .)."""
        p = np.asarray(p, dtype=float)
        return float(self._top[x] - p @ self.truth[x])

    def regret_block(self, x: np.ndarray, P: np.ndarray) -> np.ndarray:
        return self._top[x] - np.einsum("ij,ij->i", P, self.truth[x])


def realizable_environment(F: ContextualFunctionClass, context_dist=None, benchmark=None, noise=None, adversary=None) -> Environment:
    if F.star_index is None:
        raise ConfigurationError("realizable environment needs a class with star_index")
    if context_dist is None:
        context_dist = np.full(F.n_contexts, 1.0 / F.n_contexts)
    return Environment(
        context_dist=context_dist,
        truth=F.values[F.star_index],
        benchmark=benchmark or Dirac(),
        noise=noise or Bernoulli(),
        adversary=adversary,
    )


def make_misspecified(
    F: ContextualFunctionClass,
    B_target: float,
    member: Optional[int] = None,
    seed: int = 0,
    context_dist=None,
    benchmark=None,
    noise=None,
    adversary=None,
) -> Environment:
    """Truth = a class member perturbed entrywise by +-sqrt(B_target), then clipped.

    Every entry moves by at most sqrt(B), so for any policy the on-policy
    MSE of that member is at most B.
    """
    if not 0 <= B_target <= 1:
        raise DomainError(f"B_target must lie in [0, 1], got {B_target}")
    member = F.star_index if member is None else member
    if member is None:
        member = 0
    base = F.values[member]
    signs = np.where(make_rng(seed, CLASS_STREAM + 1).random(base.shape) < 0.5, -1.0, 1.0)
    truth = np.clip(base + math.sqrt(B_target) * signs, 0.0, 1.0)
    if context_dist is None:
        context_dist = np.full(F.n_contexts, 1.0 / F.n_contexts)
    return Environment(
        context_dist=context_dist,
        truth=truth,
        benchmark=benchmark or Dirac(),
        noise=noise or Bernoulli(),
        adversary=adversary,
        misspec_deviation=float(np.abs(truth - base).max()),
    )


def policy_misspecification(env: Environment, F: ContextualFunctionClass, max_policies: int = 100_000) -> float:
    """sup over deterministic policies of inf_f on-policy MSE, by enumeration."""
    X, K = env.n_contexts, env.n_actions
    if K**X > max_policies:
        raise DomainError(f"{K ** X} deterministic policies exceed the enumeration limit")
    sq = (F.values - env.truth[None]) ** 2  # (nf, X, K)
    worst = 0.0
    for pol in itertools.product(range(K), repeat=X):
        mse = (sq[:, np.arange(X), list(pol)] * env.context_dist[None]).sum(axis=1)
        worst = max(worst, float(mse.min()))
    return worst
