"""Coordinate-descent solver for the exploitative F-design.

Given a reward estimate g_hat and a finite class G, the solver builds an
unnormalised measure p by repeatedly adding mass on the benchmark vertex that
is both rewarding and badly covered, stopping once no vertex violates

    -R(lam) + Coverage_eps(p, lam; G) / gamma <= 8 S / gamma,

where R(lam) = max_lam' E_lam' g_hat - E_lam g_hat and S upper-bounds the
sequential extrapolation coefficient. The leftover mass goes to the greedy
vertex. The resulting p* certifies an objective value of at most 10 S / gamma.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from .core import (
    Benchmark,
    DesignCertificate,
    Dirac,
    FunctionClassSlice,
    as_distribution,
    as_measure,
    as_slice,
    benchmark_vertices,
)
from .coverage import coverage_of
from .errors import CertificationFailure, ConfigurationError, StructuralError

TOL = 1e-9


class StepMode(str, Enum):
    FIXED_EPS = "fixed_eps"
    AGGRESSIVE_DIRAC = "aggressive_dirac"


@dataclass(frozen=True)
class SolverConfig:
    gamma: float
    eps: float
    sec_bound: float
    step_mode: StepMode = StepMode.FIXED_EPS
    max_iters_override: Optional[int] = None

    def __post_init__(self):
        if not self.gamma > 0:
            raise ConfigurationError(f"gamma must be positive, got {self.gamma}")
        if not 0 < self.eps < 1:
            raise ConfigurationError(f"eps must lie in (0, 1), got {self.eps}")
        if not self.sec_bound >= 0:
            raise ConfigurationError(f"sec_bound must be nonnegative, got {self.sec_bound}")
        object.__setattr__(self, "step_mode", StepMode(self.step_mode))

    @property
    def max_iters(self) -> int:
        if self.max_iters_override is not None:
            return int(self.max_iters_override)
        return iteration_cap(self.step_mode, self.eps, self.sec_bound)


def iteration_cap(step_mode, eps: float, sec_bound: float) -> int:
    if StepMode(step_mode) is StepMode.FIXED_EPS:
        # guard against 1/eps landing a hair under an integer
        return int(math.floor(1.0 / eps + 1e-9))
    return max(1, int(math.floor(32.0 * sec_bound)))


def _ghat_row(g_hat, G: FunctionClassSlice) -> np.ndarray:
    if np.isscalar(g_hat) or np.ndim(g_hat) == 0:
        idx = int(g_hat)
        if not 0 <= idx < G.n_functions:
            raise StructuralError(f"g_hat index {idx} outside class of size {G.n_functions}")
        return G.values[idx]
    row = np.asarray(g_hat, dtype=float)
    if row.shape != (G.n_actions,):
        raise StructuralError(f"g_hat has shape {row.shape}, expected ({G.n_actions},)")
    return row


def greedy_benchmark(g_hat, bench: Benchmark, x: Optional[int] = None, n_actions: Optional[int] = None) -> np.ndarray:
    g_hat = np.asarray(g_hat, dtype=float)
    V = benchmark_vertices(bench, n_actions or g_hat.size, x)
    return V[int(np.argmax(V @ g_hat))]


def best_response(p, g_hat, G, bench: Benchmark, gamma: float, eps: float, x: Optional[int] = None) -> np.ndarray:
    G = as_slice(G)
    p = as_measure(p, G.n_actions)
    g = _ghat_row(g_hat, G)
    V = benchmark_vertices(bench, G.n_actions, x)
    obj = V @ g + coverage_of(p, V, G, eps) / gamma
    return V[int(np.argmax(obj))]


def benchmark_regret(g_hat: np.ndarray, V: np.ndarray) -> np.ndarray:
    """R(lam) = max_lam' E_lam' g_hat - E_lam g_hat for each vertex row."""
    vals = V @ g_hat
    return vals.max() - vals


def _descend(g, G, V, gamma, eps, sec_bound, step_mode, cap, explore_only):
    """Shared loop. Returns (weights on vertices, iterations, clamps)."""
    nv = V.shape[0]
    vals = V @ g
    regret = vals.max() - vals
    weights = np.zeros(nv)
    mass = 0.0
    clamps = 0
    aggressive = step_mode is StepMode.AGGRESSIVE_DIRAC
    if G.n_functions < 2:
        num = np.zeros((1, nv))
        add = np.zeros((1, nv))
    else:
        num = (G.diffs @ V.T) ** 2  # (pairs, nv)
        add = G.sq_diffs @ V.T  # denominator increment per unit mass on each vertex
    den = np.full(num.shape[0], float(eps))
    for t in range(cap + 1):
        cov = np.max(num / den[:, None], axis=0)
        if explore_only:
            j = int(np.argmax(cov))
            violation = cov[j] - 8.0 * sec_bound
        else:
            j = int(np.argmax(vals + cov / gamma))
            violation = -regret[j] + cov[j] / gamma - 8.0 * sec_bound / gamma
        if violation <= 0:
            return weights, t, clamps
        if t == cap:
            raise CertificationFailure(
                f"no certificate within {cap} iterations at S={sec_bound:g}",
                last_iterate=weights @ V,
                violating=V[j].copy(),
                iterations=t,
                sec_bound=sec_bound,
            )
        if aggressive:
            step = 1.0 / (4.0 * cov[j]) if cov[j] > 0 else 1.0
            if step > 1.0 - mass:
                step = max(0.0, 1.0 - mass)
                clamps += 1
        else:
            step = eps
        weights[j] += step
        mass += step
        den = den + step * add[:, j]
    raise AssertionError("unreachable")


def _finish(weights, V, greedy_idx, t, clamps, value, sec_bound) -> DesignCertificate:
    w = weights.copy()
    extra = max(0.0, 1.0 - w.sum())
    w[greedy_idx] += extra
    w = w / w.sum()
    p_star = w @ V
    p_star = p_star / p_star.sum()
    p_star.setflags(write=False)
    return DesignCertificate(
        p_star=p_star,
        certified_value=value,
        iterations=t,
        sec_bound_used=sec_bound,
        vertex_weights=w,
        greedy_index=int(greedy_idx),
        extrapolation_mass=float(extra),
        step_clamps=clamps,
    )


def _check_mode(cfg_mode, bench, x):
    if StepMode(cfg_mode) is StepMode.AGGRESSIVE_DIRAC and not isinstance(bench.resolve(x), Dirac):
        raise ConfigurationError("the aggressive step size is only valid for Dirac benchmark sets")


def exploitative_f_design(g_hat_index, G, bench: Benchmark, cfg: SolverConfig, x: Optional[int] = None) -> DesignCertificate:
    G = as_slice(G)
    _check_mode(cfg.step_mode, bench, x)
    g = _ghat_row(g_hat_index, G)
    V = benchmark_vertices(bench, G.n_actions, x)
    weights, t, clamps = _descend(
        g, G, V, cfg.gamma, cfg.eps, cfg.sec_bound, cfg.step_mode, cfg.max_iters, explore_only=False
    )
    greedy_idx = int(np.argmax(V @ g))
    return _finish(weights, V, greedy_idx, t, clamps, 10.0 * cfg.sec_bound / cfg.gamma, cfg.sec_bound)


def pure_exploration_design(
    G,
    bench: Benchmark,
    eps: float,
    sec_bound: float,
    x: Optional[int] = None,
    step_mode: StepMode = StepMode.FIXED_EPS,
    max_iters_override: Optional[int] = None,
) -> DesignCertificate:
    """F-optimal design: the same descent with the reward terms dropped.

    The certificate is max_lam Coverage_eps(p*, lam) <= 10 S.
    """
    G = as_slice(G)
    step_mode = StepMode(step_mode)
    _check_mode(step_mode, bench, x)
    V = benchmark_vertices(bench, G.n_actions, x)
    cap = max_iters_override if max_iters_override is not None else iteration_cap(step_mode, eps, sec_bound)
    g = np.zeros(G.n_actions)
    weights, t, clamps = _descend(g, G, V, 1.0, eps, sec_bound, step_mode, cap, explore_only=True)
    return _finish(weights, V, 0, t, clamps, 10.0 * sec_bound, sec_bound)


def doec_objective(p, g_hat_index, G, bench: Benchmark, gamma: float, eps: float, x: Optional[int] = None) -> float:
    """max_lam [E_lam g_hat - E_p g_hat + Coverage_eps(p, lam)/gamma] for a measure p.

    Written as R(p) + max_lam (Coverage/gamma - R(lam)) with the extended
    regret R(p) = |p|_1 max_lam' E_lam' g_hat - E_p g_hat; the two forms agree
    on distributions.
    """
    G = as_slice(G)
    p = as_measure(p, G.n_actions)
    g = _ghat_row(g_hat_index, G)
    V = benchmark_vertices(bench, G.n_actions, x)
    vals = V @ g
    top = vals.max()
    r_p = p.sum() * top - p @ g
    return float(r_p + np.max(coverage_of(p, V, G, eps) / gamma - (top - vals)))


def certify(p, g_hat_index, G, bench: Benchmark, gamma: float, eps: float, x: Optional[int] = None) -> float:
    G = as_slice(G)
    as_distribution(p, G.n_actions, tol=1e-9)
    return doec_objective(p, g_hat_index, G, bench, gamma, eps, x)


def check_certificate(cert: DesignCertificate, g_hat_index, G, bench, gamma, eps, x=None) -> dict:
    """Recompute the LR / GC / value guarantees of a solver output.

    Returns a dict of booleans plus the measured quantities.
    """
    G = as_slice(G)
    g = _ghat_row(g_hat_index, G)
    V = benchmark_vertices(bench, G.n_actions, x)
    S = cert.sec_bound_used
    vals = V @ g
    reg_v = vals.max() - vals
    reg_p = float(vals.max() - cert.p_star @ g)
    cov = coverage_of(np.asarray(cert.p_star), V, G, eps)
    value = float(reg_p + np.max(cov / gamma - reg_v))
    return {
        "value": value,
        "lr_regret": reg_p,
        "max_gc_excess": float(np.max(cov - 8.0 * S - gamma * reg_v)),
        "value_ok": value <= 10.0 * S / gamma + TOL,
        "lr_ok": reg_p <= 2.0 * S / gamma + TOL,
        "gc_ok": bool(np.all(cov <= 8.0 * S + gamma * reg_v + TOL)),
    }
