"""Exact coverage of one measure over another with respect to a finite class.

    Coverage_eps(p, q; G) = max_{g, g'} (E_q[g - g'])^2 / (eps + sum_a p(a) (g - g')^2(a))

p may be any nonnegative measure (the unnormalised form used inside the
design solver); q is a distribution. The ratio is symmetric in (g, g'), so
scanning unordered pairs is enough.
"""

from __future__ import annotations

import numpy as np

from .core import FunctionClassSlice, as_distribution, as_measure, as_slice
from .errors import DomainError, StructuralError


def _check_eps(eps: float) -> None:
    if not eps > 0:
        raise DomainError(f"eps must be positive, got {eps!r}")


def coverage(p, q, G, eps: float) -> float:
    G = as_slice(G)
    _check_eps(eps)
    p = as_measure(p, G.n_actions)
    q = as_distribution(q, G.n_actions)
    if G.n_functions < 2:
        return 0.0
    num = (G.diffs @ q) ** 2
    den = eps + G.sq_diffs @ p
    return float(np.max(num / den))


def worst_pair(p, q, G, eps: float) -> tuple[int, int, float]:
    """The ordered pair attaining the coverage, with the value.

    Each unordered pair is reported in the orientation where E_q[g - g'] >= 0
    (ascending ids when the mean gap is zero); among maximising pairs the
    lexicographically smallest oriented pair wins.
    """
    G = as_slice(G)
    _check_eps(eps)
    p = as_measure(p, G.n_actions)
    q = as_distribution(q, G.n_actions)
    if G.n_functions < 2:
        return 0, 0, 0.0
    gap = G.diffs @ q
    ratio = gap**2 / (eps + G.sq_diffs @ p)
    best = ratio.max()
    i, j = G.pairs[:, 0], G.pairs[:, 1]
    first = np.where(gap < 0, j, i)
    second = np.where(gap < 0, i, j)
    hit = np.flatnonzero(ratio == best)
    k = hit[np.lexsort((second[hit], first[hit]))[0]]
    return int(first[k]), int(second[k]), float(best)


def coverage_table(P, Q, G: FunctionClassSlice, eps: float) -> np.ndarray:
    """Coverage for every (row of P, row of Q) combination, shape (len(P), len(Q)).

    No validation; this is the hot path for the solver and the complexity lab.
    """
    P = np.atleast_2d(P)
    Q = np.atleast_2d(Q)
    if G.n_functions < 2:
        return np.zeros((P.shape[0], Q.shape[0]))
    num = (G.diffs @ Q.T) ** 2  # (pairs, nQ)
    den = eps + P @ G.sq_diffs.T  # (nP, pairs)
    out = np.empty((P.shape[0], Q.shape[0]))
    # chunk over P rows to bound the (nP, pairs, nQ) intermediate
    step = max(1, 4_000_000 // max(1, num.size))
    for s in range(0, P.shape[0], step):
        out[s : s + step] = np.max(num[None, :, :] / den[s : s + step, :, None], axis=1)
    return out


def coverage_of(p, Q, G: FunctionClassSlice, eps: float) -> np.ndarray:
    """Coverage of a single measure p over each row of Q."""
    if G.n_functions < 2:
        return np.zeros(np.atleast_2d(Q).shape[0])
    num = (G.diffs @ np.atleast_2d(Q).T) ** 2
    den = eps + G.sq_diffs @ p
    return np.max(num / den[:, None], axis=0)


def coverage_naive(p, q, G, eps: float) -> float:
    """Double loop over ordered pairs; reference oracle for tests."""
    vals = np.asarray(G.values if isinstance(G, FunctionClassSlice) else G, dtype=float)
    if vals.shape[1] != len(p) or vals.shape[1] != len(q):
        raise StructuralError("dimension mismatch")
    best = 0.0
    n, k = vals.shape
    for i in range(n):
        for j in range(n):
            num = 0.0
            den = eps
            for a in range(k):
                d = vals[i, a] - vals[j, a]
                num += q[a] * d
                den += p[a] * d * d
            best = max(best, num * num / den)
    return best
