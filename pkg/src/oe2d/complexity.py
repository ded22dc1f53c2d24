"""Brute-force and analytic evaluators for SEC, DOEC, DEC and the Eluder dimension.

Everything here is exhaustive over finite objects (vertex sequences, simplex
lattices, action subsets) and refuses to run past an explicit budget.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from typing import Callable, Optional, Sequence

import numpy as np

from .core import (
    Benchmark,
    Dirac,
    FunctionClassSlice,
    Smooth,
    as_slice,
    benchmark_vertices,
    point_mass,
)
from .coverage import coverage_of
from .design import _ghat_row
from .errors import DomainError, ResourceError, UnsupportedError

DEFAULT_GRID_CAP = 10_000_000
DEFAULT_SEQ_BUDGET = 20_000_000


@dataclass(frozen=True)
class GridSpec:
    resolution: int
    cap: int = DEFAULT_GRID_CAP

    def __post_init__(self):
        if self.resolution < 2:
            raise DomainError(f"grid resolution must be at least 2, got {self.resolution}")


# ----------------------------------------------------------------------------
# simplex lattices
# ----------------------------------------------------------------------------


def lattice_size(resolution: int, dim: int) -> int:
    return math.comb(resolution + dim - 1, dim - 1)


def simplex_lattice(resolution: int, dim: int, cap: int = DEFAULT_GRID_CAP) -> np.ndarray:
    """All points of the simplex with coordinates in {0, 1/r, ..., 1}, one per row."""
    size = lattice_size(resolution, dim)
    if size > cap:
        raise ResourceError(
            f"simplex lattice needs {size} points (resolution {resolution}, dim {dim}), cap is {cap}",
            budget="grid_cap",
            required=size,
            limit=cap,
        )
    if dim == 1:
        return np.ones((1, 1))
    # stars and bars: choose dim-1 bar positions among r + dim - 1 slots
    bars = np.array(list(combinations(range(resolution + dim - 1), dim - 1)), dtype=np.int64)
    ext = np.concatenate(
        [np.full((size, 1), -1), bars, np.full((size, 1), resolution + dim - 1)], axis=1
    )
    counts = np.diff(ext, axis=1) - 1
    return counts / resolution


# ----------------------------------------------------------------------------
# SEC
# ----------------------------------------------------------------------------


def sequence_extrapolation_sum(G, seq: Sequence, eps: float) -> float:
    """sum_i Coverage_{N eps}(lam_1 + ... + lam_i, lam_i; G) for one sequence.

    The covering measure at step i is the unnormalised prefix sum, which
    includes lam_i itself.
    """
    G = as_slice(G)
    seq = np.atleast_2d(np.asarray(seq, dtype=float))
    n = seq.shape[0]
    prefix = np.cumsum(seq, axis=0)
    return float(sum(coverage_of(prefix[i], seq[i : i + 1], G, n * eps)[0] for i in range(n)))


def _vertex_tables(G: FunctionClassSlice, V: np.ndarray):
    num = (G.diffs @ V.T) ** 2  # (pairs, nv)
    sq = G.sq_diffs @ V.T  # (pairs, nv): mass each vertex adds to a pair's denominator
    return num, sq


def _exhaustive_sec(num, sq, nv, n, reg, budget):
    """Max over all nv**n sequences of the n-term sum, chunked over sequences."""
    total = nv**n
    if total * num.shape[0] * n > budget * 50:
        raise ResourceError(
            f"exhaustive SEC search over {total} sequences of length {n} exceeds the budget",
            budget="sequence_budget",
            required=total,
            limit=budget,
        )
    best, best_seq = -1.0, None
    chunk = max(1, 2_000_000 // max(1, num.shape[0] * n))
    for start in range(0, total, chunk):
        ids = np.arange(start, min(total, start + chunk))
        digits = np.empty((ids.size, n), dtype=np.int64)
        rest = ids.copy()
        for i in range(n - 1, -1, -1):
            digits[:, i] = rest % nv
            rest //= nv
        den = reg + np.cumsum(sq[:, digits], axis=2)  # (pairs, chunk, n)
        ratio = num[:, digits] / den
        sums = ratio.max(axis=0).sum(axis=1)
        k = int(np.argmax(sums))
        if sums[k] > best:
            best, best_seq = float(sums[k]), digits[k].copy()
    return best, best_seq


def _beam_sec(num, sq, nv, n, reg, width):
    """Beam search keeping the `width` best prefixes of each length."""
    npair = num.shape[0]
    prefixes = np.zeros((1, 0), dtype=np.int64)
    den = np.full((1, npair), reg)
    score = np.zeros(1)
    for _ in range(n):
        nd = den[:, None, :] + sq.T[None, :, :]  # (beam, nv, pairs)
        gains = (num.T[None, :, :] / nd).max(axis=2)  # (beam, nv)
        cand = (score[:, None] + gains).ravel()
        order = np.argsort(-cand, kind="stable")[:width]
        b, v = np.divmod(order, nv)
        prefixes = np.concatenate([prefixes[b], v[:, None]], axis=1)
        den = nd[b, v]
        score = cand[order]
    return float(score[0]), prefixes[0]


def sec_lower_bound_search(
    G,
    bench: Benchmark,
    eps: float,
    n_max: int,
    x: Optional[int] = None,
    extra_sequences: Sequence = (),
    beam_width: int = 32,
    exhaustive_max: int = 4,
    budget: int = DEFAULT_SEQ_BUDGET,
    return_witness: bool = False,
):
    """Largest vertex-sequence sum of length <= n_max (a lower bound on SEC_eps).

    Exhaustive for lengths up to `exhaustive_max`, beam search beyond that.
    `extra_sequences` are evaluated as given (each with its own length for the
    regulariser) and folded into the max. With `return_witness` the
    maximising sequence is returned as vertex rows alongside the value.
    """
    if not eps > 0:
        raise DomainError(f"eps must be positive, got {eps!r}")
    if n_max < 1:
        raise DomainError(f"n_max must be at least 1, got {n_max}")
    G = as_slice(G)
    V = benchmark_vertices(bench, G.n_actions, x)
    best, witness = 0.0, V[:1]
    if G.n_functions >= 2:
        num, sq = _vertex_tables(G, V)
        nv = V.shape[0]
        for n in range(1, n_max + 1):
            if n <= exhaustive_max:
                val, seq = _exhaustive_sec(num, sq, nv, n, n * eps, budget)
            else:
                val, seq = _beam_sec(num, sq, nv, n, n * eps, beam_width)
            if val > best:
                best, witness = val, V[seq]
    for s in extra_sequences or ():
        val = sequence_extrapolation_sum(G, s, eps)
        if val > best:
            best, witness = val, np.atleast_2d(np.asarray(s, dtype=float))
    return (best, witness) if return_witness else best


def eluder_sec_bound(G, eps: float, edim: Optional[int] = None, corrected: bool = False) -> float:
    """16 Edim(G, sqrt(eps)) K^2 with K = ceil(log2(1/sqrt(eps))).

    The peeling argument behind this bound assumes Edim >= 1 and only buckets
    gaps above sqrt(eps); rounds whose gap is at most sqrt(eps) add at most 1
    in total. `corrected` returns 16 max(Edim, 1) K^2 + 1, which also holds
    when every pairwise gap is below sqrt(eps) (Edim = 0, SEC > 0).
    """
    K = math.ceil(math.log2(1.0 / math.sqrt(eps)))
    if edim is None:
        edim = eluder_dimension(G, math.sqrt(eps))
    if corrected:
        return float(16 * max(edim, 1) * K**2 + 1)
    return float(16 * edim * K**2)


def smooth_sec_bound(h: float, eps: float) -> float:
    return float(math.log1p(1.0 / eps) / h)


def sec_upper_bound(G, bench: Benchmark, eps: float, x: Optional[int] = None) -> float:
    """The analytic SEC bound for Dirac (Eluder) or Smooth benchmark sets."""
    if not eps > 0:
        raise DomainError(f"eps must be positive, got {eps!r}")
    b = bench.resolve(x)
    if isinstance(b, Dirac):
        return eluder_sec_bound(G, eps)
    if isinstance(b, Smooth):
        return smooth_sec_bound(b.h, eps)
    raise UnsupportedError(f"no analytic SEC bound for {type(b).__name__} benchmarks; use the brute-force search")


def analytic_sec_bound(G, bench: Benchmark, eps: float, x: Optional[int] = None) -> float:
    """The smallest analytic bound that applies to (G, Lambda).

    Dirac sets sit inside the (1/|A|)-smoothed set with uniform base, so for
    Dirac benchmarks the smooth bound |A| ln(1 + 1/eps) is valid too; the
    Eluder bound is only computed when it could be the smaller one.
    """
    G = as_slice(G)
    b = bench.resolve(x)
    if G.n_functions < 2:
        return 0.0
    if isinstance(b, Smooth):
        return smooth_sec_bound(b.h, eps)
    if isinstance(b, Dirac):
        smooth = smooth_sec_bound(1.0 / G.n_actions, eps)
        K = math.ceil(math.log2(1.0 / math.sqrt(eps)))
        # the corrected Eluder bound is at least 16 K^2 + 1
        if 16 * K**2 + 1 >= smooth:
            return smooth
        try:
            return min(smooth, eluder_sec_bound(G, eps, corrected=True))
        except ResourceError:
            return smooth
    raise UnsupportedError(f"no analytic SEC bound for {type(b).__name__} benchmarks")


# ----------------------------------------------------------------------------
# Eluder dimension
# ----------------------------------------------------------------------------


def eluder_dimension(G, eps_prime: float, budget: int = 200_000_000) -> int:
    """Exact Eluder dimension of G over its action set at scale eps_prime.

    Independence of a point from its predecessors depends only on the set of
    predecessors, so a dynamic program over action subsets finds the longest
    valid sequence for a fixed scale. The valid scales for a sequence form a
    union of intervals [norm, gap), so it suffices to try eps_prime itself and
    every achievable predecessor norm above it.
    """
    if eps_prime < 0:
        raise DomainError(f"eps_prime must be nonnegative, got {eps_prime}")
    G = as_slice(G)
    if G.n_functions < 2:
        return 0
    K = G.n_actions
    if K > 20:
        raise ResourceError(f"subset search over {K} actions is too large", budget="eluder_actions", required=K, limit=20)
    gaps = np.abs(G.diffs)  # (pairs, K)
    top = gaps.max()
    if top <= eps_prime:
        return 0
    n_sub = 1 << K
    bits = ((np.arange(n_sub)[:, None] >> np.arange(K)) & 1).astype(float)
    norms = np.sqrt(bits @ G.sq_diffs.T)  # (subsets, pairs)
    cands = np.unique(norms[(norms >= eps_prime) & (norms < top)])
    cands = np.concatenate([[eps_prime], cands])
    cost = cands.size * n_sub * K * G.diffs.shape[0]
    if cost > budget:
        raise ResourceError(
            f"Eluder search needs ~{cost:.3g} operations, budget is {budget}",
            budget="eluder_budget",
            required=cost,
            limit=budget,
        )
    popcount = bits.sum(axis=1).astype(int)
    levels = [np.flatnonzero(popcount == L) for L in range(K + 1)]
    free = bits == 0
    shift = 1 << np.arange(K)
    best = 0
    for e in cands:
        # indep[S, z]: some pair is e-close on S and e-far at z
        close = (norms <= e + 1e-12).astype(np.int32)
        far = (gaps > e).astype(np.int32)
        indep = ((close @ far) > 0) & free  # (subsets, K)
        reach = np.zeros(n_sub, dtype=bool)
        reach[0] = True
        depth = 0
        for L in range(K):
            S = levels[L][reach[levels[L]]]
            if S.size == 0:
                break
            depth = L
            s_idx, z_idx = np.nonzero(indep[S])
            if s_idx.size == 0:
                break
            reach[S[s_idx] | shift[z_idx]] = True
            depth = L + 1
        best = max(best, depth)
        if best == K:
            break
    return best


# ----------------------------------------------------------------------------
# DOEC and DEC on lattices
# ----------------------------------------------------------------------------


def _doec_values(W, V, g, G, gamma, eps):
    P = W @ V
    vals = V @ g
    top = vals.max()
    out = np.empty(W.shape[0])
    if G.n_functions < 2:
        return top - P @ g
    num = (G.diffs @ V.T) ** 2
    step = max(1, 4_000_000 // max(1, num.size))
    for s in range(0, P.shape[0], step):
        Ps = P[s : s + step]
        den = eps + Ps @ G.sq_diffs.T
        cov = np.max(num[None] / den[:, :, None], axis=1)  # (chunk, nv)
        out[s : s + step] = np.max(vals[None, :] - (Ps @ g)[:, None] + cov / gamma, axis=1)
    return out


def doec_bruteforce(
    g_hat_index,
    G,
    bench: Benchmark,
    gamma: float,
    eps: float,
    grid: GridSpec,
    x: Optional[int] = None,
    face: Optional[Sequence[int]] = None,
    return_argmin: bool = False,
):
    """Grid minimum of the DOEC objective over mixtures of benchmark vertices.

    `face` restricts the mixtures to the listed vertex indices; the result is
    then an upper bound on the full-lattice value (a sub-simplex of the
    lattice). With `return_argmin` the minimising distribution is returned too.
    """
    G = as_slice(G)
    g = _ghat_row(g_hat_index, G)
    V = benchmark_vertices(bench, G.n_actions, x)
    if face is not None:
        V = V[np.asarray(face)]
    W = simplex_lattice(grid.resolution, V.shape[0], grid.cap)
    vals = _doec_values(W, V, g, G, gamma, eps)
    k = int(np.argmin(vals))
    if return_argmin:
        return float(vals[k]), W[k] @ V
    return float(vals[k])


def dec_objective(p, g_hat_index, G, bench: Benchmark, gamma: float, x: Optional[int] = None) -> float:
    """max_{g* in G} E_p[max_lam E_lam g* - g*(a) - gamma (g_hat(a) - g*(a))^2]."""
    return float(_dec_values(np.atleast_2d(np.asarray(p, dtype=float)), g_hat_index, G, bench, gamma, x)[0])


def _dec_values(P, g_hat_index, G, bench, gamma, x=None):
    G = as_slice(G)
    g = _ghat_row(g_hat_index, G)
    V = benchmark_vertices(bench, G.n_actions, x)
    F = G.values  # (nf, K)
    best = (V @ F.T).max(axis=0)  # (nf,)
    loss = best[:, None] - F - gamma * (g[None, :] - F) ** 2  # (nf, K)
    return np.max(P @ loss.T, axis=1)


def dec_bruteforce(
    g_hat_index,
    G,
    bench: Benchmark,
    gamma: float,
    grid: GridSpec,
    x: Optional[int] = None,
    return_argmin: bool = False,
    face: Optional[Sequence[int]] = None,
):
    """Grid minimum of the DEC objective over the action simplex.

    `face` restricts p to the listed actions, giving an upper bound.
    """
    G = as_slice(G)
    if face is None:
        P = simplex_lattice(grid.resolution, G.n_actions, grid.cap)
    else:
        face = np.asarray(face)
        W = simplex_lattice(grid.resolution, face.size, grid.cap)
        P = np.zeros((W.shape[0], G.n_actions))
        P[:, face] = W
    vals = _dec_values(P, g_hat_index, G, bench, gamma, x)
    k = int(np.argmin(vals))
    if return_argmin:
        return float(vals[k]), P[k]
    return float(vals[k])


# ----------------------------------------------------------------------------
# cheating code
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class CheatingCode:
    """Actions a_0..a_{2^k-1} (ids 0..2^k-1) then the code actions b_0..b_{k-1}."""

    k: int
    n_actions: int
    G: FunctionClassSlice
    p_beta: Callable[[float, int], np.ndarray]

    @property
    def n_arms(self) -> int:
        return 2**self.k

    @property
    def code_actions(self) -> np.ndarray:
        return np.arange(self.n_arms, self.n_actions)

    def beta_star(self, gamma: float) -> float:
        return min(2.0 * math.sqrt(self.k / gamma), 1.0)

    def canonical_sequence(self) -> np.ndarray:
        """Point masses on a_0, ..., a_{2^k - 1} in order."""
        return np.eye(self.n_actions)[: self.n_arms]

    def doec_bound(self, gamma: float) -> float:
        return 4.0 * (math.sqrt(self.k / gamma) + self.k / gamma)

    def sec_floor(self, eps: float) -> float:
        return min(2.0 ** (self.k - 2), 1.0 / (2.0 * eps))


def cheating_code_instance(k: int) -> CheatingCode:
    if not isinstance(k, (int, np.integer)) or not 1 <= k <= 10:
        raise DomainError(f"cheating code needs an integer 1 <= k <= 10, got {k!r}")
    k = int(k)
    n_arms = 2**k
    n_actions = n_arms + k
    vals = np.zeros((n_arms, n_actions))
    vals[:, :n_arms] = np.eye(n_arms)
    ids = np.arange(n_arms)
    for l in range(k):
        vals[:, n_arms + l] = 0.5 * ((ids >> l) & 1)
    G = FunctionClassSlice(vals)

    def p_beta(beta: float, g_hat_index: int = 0) -> np.ndarray:
        if not 0.0 <= beta <= 1.0:
            raise DomainError(f"beta must lie in [0, 1], got {beta}")
        p = (1.0 - beta) * point_mass(int(g_hat_index), n_actions)
        p[n_arms:] += beta / k
        return p

    return CheatingCode(k=k, n_actions=n_actions, G=G, p_beta=p_beta)
