"""Shared domain types: action measures, function classes, benchmark sets.

Action measures are plain 1-d float arrays indexed by action id. A
"distribution" is a measure whose mass is 1 up to ``DIST_TOL``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence, Union

import numpy as np

from .errors import ConfigurationError, StructuralError

DIST_TOL = 1e-12


# ----------------------------------------------------------------------------
# measures
# ----------------------------------------------------------------------------


def as_measure(m, n_actions: Optional[int] = None) -> np.ndarray:
    """Validate a nonnegative measure and return it as a float array."""
    arr = np.asarray(m, dtype=float)
    if arr.ndim != 1:
        raise StructuralError(f"measure must be 1-d, got shape {arr.shape}")
    if n_actions is not None and arr.shape[0] != n_actions:
        raise StructuralError(f"measure has {arr.shape[0]} entries, expected {n_actions}")
    if np.any(arr < 0) or not np.all(np.isfinite(arr)):
        raise StructuralError("measure weights must be finite and nonnegative")
    return arr


def is_distribution(m, tol: float = DIST_TOL) -> bool:
    arr = np.asarray(m, dtype=float)
    return bool(arr.ndim == 1 and np.all(arr >= 0) and abs(arr.sum() - 1.0) <= tol)


def as_distribution(m, n_actions: Optional[int] = None, tol: float = DIST_TOL) -> np.ndarray:
    arr = as_measure(m, n_actions)
    if abs(arr.sum() - 1.0) > tol:
        raise StructuralError(f"not a distribution: total mass {arr.sum()!r}")
    return arr


def point_mass(a: int, n_actions: int) -> np.ndarray:
    out = np.zeros(n_actions)
    out[a] = 1.0
    return out


def uniform(n_actions: int) -> np.ndarray:
    return np.full(n_actions, 1.0 / n_actions)


def expected_value(m, g) -> float:
    """Return sum_a m(a) g(a)."""
    m = as_measure(m)
    g = np.asarray(g, dtype=float)
    if m.shape != g.shape:
        raise StructuralError(f"dimension mismatch: measure {m.shape} vs function {g.shape}")
    return float(m @ g)


# ----------------------------------------------------------------------------
# function classes
# ----------------------------------------------------------------------------


def _dedup_rows(values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Order-preserving row dedup. Returns (unique rows, map old row -> new row)."""
    _, first, inverse = np.unique(values, axis=0, return_index=True, return_inverse=True)
    inverse = np.asarray(inverse).reshape(-1)
    order = np.argsort(first)
    rank = np.empty_like(order)
    rank[order] = np.arange(order.size)
    return values[np.sort(first)], rank[inverse]


class FunctionClassSlice:
    """A finite class of reward functions over one action set.

    Rows are functions, columns are actions; duplicate rows are dropped at
    construction. ``remap`` sends an input row index to its deduplicated row.
    The unordered pair differences g_i - g_j (i < j) are precomputed because
    every coverage evaluation scans them.
    """

    __slots__ = ("values", "remap", "pairs", "diffs", "sq_diffs")

    def __init__(self, values):
        arr = np.array(values, dtype=float, ndmin=2)
        if arr.ndim != 2 or arr.shape[0] == 0 or arr.shape[1] == 0:
            raise StructuralError(f"function class needs shape (n_functions, n_actions), got {arr.shape}")
        if np.any(arr < 0.0) or np.any(arr > 1.0) or not np.all(np.isfinite(arr)):
            raise StructuralError("function values must lie in [0, 1]")
        vals, remap = _dedup_rows(arr)
        vals.setflags(write=False)
        self.values = vals
        self.remap = remap
        n = vals.shape[0]
        iu, ju = np.triu_indices(n, k=1)
        self.pairs = np.stack([iu, ju], axis=1)
        self.diffs = vals[iu] - vals[ju]
        self.sq_diffs = self.diffs**2

    @property
    def n_functions(self) -> int:
        return self.values.shape[0]

    @property
    def n_actions(self) -> int:
        return self.values.shape[1]

    def __len__(self) -> int:
        return self.n_functions

    def __getitem__(self, i):
        return self.values[i]

    def __repr__(self) -> str:
        return f"FunctionClassSlice(n_functions={self.n_functions}, n_actions={self.n_actions})"


def as_slice(G) -> FunctionClassSlice:
    return G if isinstance(G, FunctionClassSlice) else FunctionClassSlice(G)


class ContextualFunctionClass:
    """Finite class of f(x, a) stored as a tensor [function][context][action]."""

    def __init__(self, values, star_index: Optional[int] = None):
        arr = np.array(values, dtype=float)
        if arr.ndim != 3 or min(arr.shape) == 0:
            raise StructuralError(f"contextual class needs shape (F, X, A), got {arr.shape}")
        if np.any(arr < 0.0) or np.any(arr > 1.0):
            raise StructuralError("function values must lie in [0, 1]")
        if star_index is not None and not 0 <= star_index < arr.shape[0]:
            raise StructuralError(f"star_index {star_index} out of range")
        arr.setflags(write=False)
        self.values = arr
        self.star_index = star_index
        self._slices: dict[int, FunctionClassSlice] = {}

    @property
    def n_functions(self) -> int:
        return self.values.shape[0]

    @property
    def n_contexts(self) -> int:
        return self.values.shape[1]

    @property
    def n_actions(self) -> int:
        return self.values.shape[2]

    def __len__(self) -> int:
        return self.n_functions

    def slice(self, x: int) -> FunctionClassSlice:
        """The deduplicated class F_x; use ``.remap[f]`` to locate function f in it."""
        s = self._slices.get(x)
        if s is None:
            s = FunctionClassSlice(self.values[:, x, :])
            self._slices[x] = s
        return s

    @property
    def star(self) -> Optional[np.ndarray]:
        return None if self.star_index is None else self.values[self.star_index]


# ----------------------------------------------------------------------------
# benchmark sets
# ----------------------------------------------------------------------------


class _Benchmark:
    """Common vertex caching for benchmark sets."""

    def _vertex_cache(self) -> dict:
        cache = self.__dict__.get("_cache")
        if cache is None:
            cache = {}
            object.__setattr__(self, "_cache", cache)
        return cache

    def resolve(self, x: Optional[int] = None) -> "_Benchmark":
        return self


@dataclass(frozen=True, eq=False)
class Dirac(_Benchmark):
    """All point masses: standard regret."""

    kind = "dirac"

    def vertices(self, n_actions: int, x: Optional[int] = None) -> np.ndarray:
        cache = self._vertex_cache()
        if n_actions not in cache:
            v = np.eye(n_actions)
            v.setflags(write=False)
            cache[n_actions] = v
        return cache[n_actions]

    def contains(self, lam, tol: float = 1e-9) -> bool:
        lam = np.asarray(lam, dtype=float)
        return is_distribution(lam, tol) and bool(np.isclose(lam.max(), 1.0, atol=tol))

    def hull_contains(self, p, tol: float = 1e-9) -> bool:
        return is_distribution(p, tol)

    def n_actions_hint(self) -> Optional[int]:
        return None


@dataclass(frozen=True, eq=False)
class Smooth(_Benchmark):
    """h-smoothed distributions w.r.t. a base distribution mu: lambda(a) <= mu(a)/h."""

    h: float
    mu: np.ndarray = field(repr=False)

    kind = "smooth"

    def __post_init__(self):
        mu = as_distribution(self.mu, tol=1e-9)
        if not 0.0 < self.h <= 1.0:
            raise ConfigurationError(f"smoothing parameter h must lie in (0, 1], got {self.h}")
        if np.any(mu <= 0):
            raise ConfigurationError("smooth benchmark requires a strictly positive base measure")
        support = self.h * mu.size
        if abs(support - round(support)) > 1e-9 or round(support) < 1:
            raise ConfigurationError(f"h * |A| = {support} must be a positive integer")
        mu = mu.copy()
        mu.setflags(write=False)
        object.__setattr__(self, "mu", mu)

    @classmethod
    def uniform(cls, h: float, n_actions: int) -> "Smooth":
        return cls(h, uniform(n_actions))

    @property
    def cap(self) -> np.ndarray:
        return np.minimum(self.mu / self.h, 1.0)

    def vertices(self, n_actions: Optional[int] = None, x: Optional[int] = None) -> np.ndarray:
        if n_actions is not None and n_actions != self.mu.size:
            raise StructuralError(f"benchmark has {self.mu.size} actions, asked for {n_actions}")
        cache = self._vertex_cache()
        if "v" not in cache:
            cache["v"] = _capped_simplex_vertices(self.cap)
        return cache["v"]

    def contains(self, lam, tol: float = 1e-9) -> bool:
        lam = np.asarray(lam, dtype=float)
        return (
            lam.shape == self.mu.shape
            and is_distribution(lam, tol)
            and bool(np.all(lam <= self.mu / self.h + tol))
        )

    # the density-capped polytope is convex, so hull membership is membership
    hull_contains = contains

    def n_actions_hint(self) -> Optional[int]:
        return self.mu.size


def _capped_simplex_vertices(cap: np.ndarray) -> np.ndarray:
    """Vertices of {lam >= 0, sum lam = 1, lam <= cap}.

    A vertex saturates every coordinate but at most one: some set S sits at
    its cap, one coordinate j outside S takes the residual mass, the rest are
    zero. With uniform caps 1/k this is the uniform distribution on every
    k-subset.
    """
    n = cap.size
    if cap.sum() < 1.0 - 1e-12:
        raise ConfigurationError("caps admit no distribution")
    if n > 16:
        raise ConfigurationError(f"vertex enumeration over {n} actions is too large")
    found = []
    for r in range(n + 1):
        for S in itertools.combinations(range(n), r):
            mass = cap[list(S)].sum()
            if mass > 1.0 + 1e-12:
                continue
            resid = 1.0 - mass
            lam = np.zeros(n)
            lam[list(S)] = cap[list(S)]
            if resid <= 1e-12:
                found.append(lam)
                continue
            for j in range(n):
                if j in S or resid >= cap[j] - 1e-12:
                    continue
                v = lam.copy()
                v[j] = resid
                found.append(v)
    verts = np.unique(np.round(np.array(found), 14), axis=0)
    # lexicographic order with larger mass on low action ids first
    verts = verts[np.lexsort((-verts).T[::-1])]
    verts = verts / verts.sum(axis=1, keepdims=True)
    verts.setflags(write=False)
    return verts


@dataclass(frozen=True, eq=False)
class Explicit(_Benchmark):
    """A finite, explicitly listed family of distributions."""

    members: np.ndarray = field(repr=False)

    kind = "explicit"

    def __post_init__(self):
        arr = np.array(self.members, dtype=float, ndmin=2)
        if arr.ndim != 2 or arr.shape[0] == 0:
            raise ConfigurationError("explicit benchmark needs at least one member")
        for row in arr:
            if not is_distribution(row, 1e-9):
                raise ConfigurationError("explicit benchmark members must be distributions")
        arr = arr / arr.sum(axis=1, keepdims=True)
        arr.setflags(write=False)
        object.__setattr__(self, "members", arr)

    def vertices(self, n_actions: Optional[int] = None, x: Optional[int] = None) -> np.ndarray:
        if n_actions is not None and n_actions != self.members.shape[1]:
            raise StructuralError(f"benchmark has {self.members.shape[1]} actions, asked for {n_actions}")
        return self.members

    def contains(self, lam, tol: float = 1e-9) -> bool:
        lam = np.asarray(lam, dtype=float)
        return lam.shape == self.members.shape[1:] and bool(
            np.any(np.all(np.abs(self.members - lam) <= tol, axis=1))
        )

    def hull_contains(self, p, tol: float = 1e-7) -> bool:
        from scipy.optimize import linprog

        p = np.asarray(p, dtype=float)
        if p.shape != self.members.shape[1:] or not is_distribution(p, 1e-9):
            return False
        k = self.members.shape[0]
        res = linprog(
            np.zeros(k),
            A_eq=np.vstack([self.members.T, np.ones(k)]),
            b_eq=np.append(p, 1.0),
            bounds=[(0, None)] * k,
            method="highs",
        )
        if res.status == 0:
            return True
        # fall back to a residual test for near-feasible points
        from scipy.optimize import nnls

        w, resid = nnls(np.vstack([self.members.T, np.ones(k)]), np.append(p, 1.0))
        return resid <= tol

    def n_actions_hint(self) -> Optional[int]:
        return self.members.shape[1]


@dataclass(frozen=True, eq=False)
class PerContext(_Benchmark):
    """Context-dependent benchmark family Lambda_x."""

    by_context: Mapping[int, "Benchmark"]

    kind = "per_context"

    def resolve(self, x: Optional[int] = None) -> "_Benchmark":
        if x is None:
            raise StructuralError("per-context benchmark needs a context")
        try:
            inner = self.by_context[x]
        except KeyError:
            raise StructuralError(f"no benchmark registered for context {x}") from None
        return inner.resolve(x)

    def vertices(self, n_actions: Optional[int] = None, x: Optional[int] = None) -> np.ndarray:
        return self.resolve(x).vertices(n_actions, x)

    def contains(self, lam, tol: float = 1e-9, x: Optional[int] = None) -> bool:
        return self.resolve(x).contains(lam, tol)

    def hull_contains(self, p, tol: float = 1e-7, x: Optional[int] = None) -> bool:
        return self.resolve(x).hull_contains(p, tol)

    def n_actions_hint(self) -> Optional[int]:
        return None


Benchmark = Union[Dirac, Smooth, Explicit, PerContext]


def benchmark_vertices(bench: Benchmark, n_actions: int, x: Optional[int] = None) -> np.ndarray:
    """Extreme points of the benchmark family, one per row.

    Any convex function of lambda is maximised over co(Lambda) on this list.
    """
    return bench.resolve(x).vertices(n_actions, x)


def in_hull(bench: Benchmark, p, x: Optional[int] = None, tol: float = 1e-7) -> bool:
    """Whether p lies in co(Lambda), via the kind-specific test."""
    return bench.resolve(x).hull_contains(p, tol)


# ----------------------------------------------------------------------------
# certificates
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class DesignCertificate:
    """Output of the design solver.

    ``certified_value`` is the guaranteed min-max bound (10 S / gamma for the
    exploitative design, 10 S for pure exploration). ``vertex_weights`` are the
    mixture weights of ``p_star`` on the benchmark vertices.
    """

    p_star: np.ndarray
    certified_value: float
    iterations: int
    sec_bound_used: float
    vertex_weights: np.ndarray = field(repr=False, default=None)
    greedy_index: int = 0
    extrapolation_mass: float = 0.0
    step_clamps: int = 0


def function_rows(G: FunctionClassSlice, idx: Sequence[int]) -> np.ndarray:
    return G.values[np.asarray(idx)]
