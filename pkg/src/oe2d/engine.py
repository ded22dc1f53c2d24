"""Online learning loops: OE2D, SquareCB.F and the control baselines.

Within an epoch the OE2D policy depends on the round only through its
context, so each epoch is simulated as a block: designs are solved once per
observed context (the virtual-policy view) and actions are sampled with one
learner uniform per round. The environment stream is drawn up front from its
own generator, so every algorithm faces the same contexts and reward vectors
under a given seed.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Union

import numpy as np

from .complexity import analytic_sec_bound, sec_lower_bound_search
from .core import Benchmark, ContextualFunctionClass, Dirac, Smooth, benchmark_vertices
from .design import (
    SolverConfig,
    StepMode,
    check_certificate,
    exploitative_f_design,
    pure_exploration_design,
)
from .coverage import coverage_of
from .environments import ENV_STREAM, LEARNER_STREAM, Environment, make_rng
from .errors import CertificationFailure, ConfigurationError, UnsupportedError
from .regression import RunningLoss, regoff_bound, square_losses

GAMMA_CAP = 1e12


# ----------------------------------------------------------------------------
# schedules
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class GammaMode:
    """How gamma_m is set from the offline-regression bound.

    kind: standard | misspec | corruption | shift. `n_convention` picks the
    sample count fed to Reg_off for the standard form: "half" (tau_{m-1}/2),
    "window" (tau_{m-1} - tau_{m-2}) or "full" (tau_{m-1}); None picks the
    schedule's own convention. `horizon_inflated` uses ln(|F| T / delta).
    """

    kind: str = "standard"
    D: Optional[float] = None
    B: float = 0.0
    C: float = 0.0
    A: float = 1.0
    n_convention: Optional[str] = None
    horizon_inflated: bool = False

    def __post_init__(self):
        if self.kind not in ("standard", "misspec", "corruption", "shift"):
            raise ConfigurationError(f"unknown gamma mode {self.kind!r}")
        if self.n_convention not in (None, "half", "window", "full"):
            raise ConfigurationError(f"unknown n convention {self.n_convention!r}")


@dataclass(frozen=True)
class EpochSchedule:
    mode: str = "doubling"
    gamma_mode: GammaMode = field(default_factory=GammaMode)
    taus: tuple = ()
    eps: Optional[float] = None
    delta: float = 0.05

    def __post_init__(self):
        if self.mode not in ("doubling", "small_epoch", "custom"):
            raise ConfigurationError(f"unknown schedule mode {self.mode!r}")
        if self.mode == "custom":
            taus = tuple(int(t) for t in self.taus)
            if not taus or taus[0] < 1 or any(b <= a for a, b in zip(taus, taus[1:])):
                raise ConfigurationError("custom epoch boundaries must be positive and increasing")
            object.__setattr__(self, "taus", taus)
        if not 0 < self.delta <= 1:
            raise ConfigurationError("delta must lie in (0, 1]")

    def boundaries(self, T: int) -> np.ndarray:
        """tau_0 = 0 < tau_1 < ... < tau_M = T (the last boundary is clamped to T)."""
        if T < 1:
            raise ConfigurationError("horizon must be positive")
        if self.mode == "doubling":
            M = max(1, math.ceil(math.log2(T)))
            raw = [2**m for m in range(1, M + 1)]
        elif self.mode == "small_epoch":
            M = max(1, math.ceil(math.log2(math.log2(T)))) if T > 2 else 1
            raw = [math.floor(2 * T ** (1 - 2.0 ** (-m))) for m in range(1, M + 1)]
        else:
            raw = list(self.taus)
        taus = [0]
        for tau in raw:
            if tau >= T:
                break
            if tau > taus[-1]:
                taus.append(tau)
        taus.append(T)
        return np.array(taus, dtype=np.int64)

    def n_epochs(self, T: int) -> int:
        return len(self.boundaries(T)) - 1

    def eps_for(self, T: int) -> float:
        return self.eps if self.eps is not None else 1.0 / max(T, 2)

    def delta_m(self, m: int) -> float:
        return self.delta / (m * (m + 1))

    @property
    def default_convention(self) -> str:
        return "half" if self.mode == "doubling" else "window"


def default_scale(bench: Benchmark, n_actions: int, x: Optional[int] = 0) -> float:
    """D: |A| for Dirac, 1/h for Smooth."""
    b = bench.resolve(x)
    if isinstance(b, Dirac):
        return float(n_actions)
    if isinstance(b, Smooth):
        return 1.0 / b.h
    raise ConfigurationError("the DOEC scale D must be supplied for explicit benchmark sets")


def gamma_schedule(schedule: EpochSchedule, m: int, class_size: int, horizon: int, taus=None, D: Optional[float] = None) -> float:
    """gamma_m for epoch m (gamma_1 = 0)."""
    if m <= 1:
        return 0.0
    taus = schedule.boundaries(horizon) if taus is None else taus
    gm = schedule.gamma_mode
    D = gm.D if gm.D is not None else D
    if D is None:
        raise ConfigurationError("gamma schedule needs the scale D")
    prev = float(taus[m - 1])
    delta = schedule.delta
    log_term = math.log(class_size * horizon / delta)
    if gm.kind == "standard":
        conv = gm.n_convention or schedule.default_convention
        if conv == "half":
            n = prev / 2
        elif conv == "window":
            n = prev - float(taus[m - 2])
        else:
            n = prev
        reg = regoff_bound(class_size, 1, delta, horizon if gm.horizon_inflated else 1) / max(n, 1.0)
        value = math.sqrt(D / reg) if reg > 0 else GAMMA_CAP
    elif gm.kind == "misspec":
        denom = gm.B + log_term / prev
        value = math.sqrt(D / denom) if denom > 0 else GAMMA_CAP
    elif gm.kind == "corruption":
        denom = gm.C + log_term
        value = math.sqrt(D * prev / denom) if denom > 0 else GAMMA_CAP
    else:
        value = math.sqrt(prev * gm.A * D / log_term) if log_term > 0 else GAMMA_CAP
    return min(value, GAMMA_CAP)


# ----------------------------------------------------------------------------
# ledgers
# ----------------------------------------------------------------------------


@dataclass
class RunLedger:
    algorithm: str
    contexts: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    regrets: np.ndarray
    epochs: np.ndarray
    solver_iters: np.ndarray
    oracle_calls: int
    n_contexts: int
    policies: Optional[np.ndarray] = None
    meta: dict = field(default_factory=dict)
    oracle_cum: Optional[np.ndarray] = None  # oracle calls made up to and including round t

    @property
    def T(self) -> int:
        return self.regrets.size

    @property
    def t(self) -> np.ndarray:
        return np.arange(1, self.T + 1)

    @property
    def cum_regret(self) -> np.ndarray:
        return np.cumsum(self.regrets)

    @property
    def total_regret(self) -> float:
        return float(self.regrets.sum())


def per_context_regret(ledger: RunLedger, env: Optional[Environment] = None) -> dict:
    """Cumulative regret per context id; contexts never drawn map to 0."""
    n = env.n_contexts if env is not None else ledger.n_contexts
    sums = np.bincount(ledger.contexts, weights=ledger.regrets, minlength=n)
    return {x: float(sums[x]) for x in range(n)}


# ----------------------------------------------------------------------------
# design solving with escalation
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class SolverDefaults:
    """How the engine picks S and the step rule for each design solve.

    sec_bound: "analytic" (smallest applicable closed-form bound), "search"
    (brute-force vertex-sequence value, escalated on failure) or a number.
    """

    sec_bound: Union[str, float] = "analytic"
    step_mode: Optional[str] = None
    escalate: bool = True
    max_doublings: int = 10
    search_n_max: int = 3
    validate: bool = True


class _Designer:
    def __init__(self, F: ContextualFunctionClass, bench: Benchmark, eps: float, defaults: SolverDefaults):
        self.F = F
        self.bench = bench
        self.eps = eps
        self.d = defaults
        self._S: dict = {}
        self.escalations = 0

    def step_mode(self, x):
        if self.d.step_mode is not None:
            return StepMode(self.d.step_mode)
        return StepMode.AGGRESSIVE_DIRAC if isinstance(self.bench.resolve(x), Dirac) else StepMode.FIXED_EPS

    def sec_bound(self, x) -> float:
        if x not in self._S:
            G = self.F.slice(x)
            src = self.d.sec_bound
            if src == "analytic":
                S = analytic_sec_bound(G, self.bench, self.eps, x)
            elif src == "search":
                S = sec_lower_bound_search(G, self.bench, self.eps, self.d.search_n_max, x)
            else:
                S = float(src)
            self._S[x] = S
        return self._S[x]

    def solve(self, x: int, f_index: Optional[int], gamma: float):
        """Design for context x: pure exploration when gamma == 0."""
        G = self.F.slice(x)
        S = self.sec_bound(x)
        mode = self.step_mode(x)
        rounds = self.d.max_doublings + 1 if self.d.escalate else 1
        last = None
        for _ in range(rounds):
            try:
                if gamma <= 0:
                    cert = pure_exploration_design(G, self.bench, self.eps, S, x, step_mode=mode)
                    ok = not self.d.validate or self._explore_ok(cert, G, x, S)
                else:
                    g = int(G.remap[f_index])
                    cert = exploitative_f_design(g, G, self.bench, SolverConfig(gamma, self.eps, S, mode), x)
                    if self.d.validate:
                        chk = check_certificate(cert, g, G, self.bench, gamma, self.eps, x)
                        ok = chk["value_ok"] and chk["lr_ok"] and chk["gc_ok"]
                    else:
                        ok = True
                if ok:
                    self._S[x] = S  # later solves in this context start from the escalated bound
                    return cert
                last = CertificationFailure(f"certificate check failed at S={S:g}", last_iterate=cert.p_star, sec_bound=S)
            except CertificationFailure as e:
                last = e
            self.escalations += 1
            S = 2.0 * S if S > 0 else 1.0
        raise last

    def _explore_ok(self, cert, G, x, S):
        V = benchmark_vertices(self.bench, G.n_actions, x)
        return bool(np.all(coverage_of(np.asarray(cert.p_star), V, G, self.eps) <= 10.0 * S + 1e-9))


# ----------------------------------------------------------------------------
# shared helpers
# ----------------------------------------------------------------------------


def _sample_actions(P: np.ndarray, u: np.ndarray) -> np.ndarray:
    cdf = np.cumsum(P, axis=1)
    a = (cdf <= u[:, None]).sum(axis=1)
    # guard against a cdf ending a hair below 1: fall back to the last positive action
    over = a >= P.shape[1]
    if np.any(over):
        last = P.shape[1] - 1 - np.argmax(P[:, ::-1] > 0, axis=1)
        a[over] = last[over]
    return a.astype(np.int64)


def _streams(env: Environment, T: int, seed: int):
    x, R, corrupted = env.sample_block(1, T, make_rng(seed, ENV_STREAM))
    u = make_rng(seed, LEARNER_STREAM).random(T)
    return x, R, corrupted, u


def _check_class(env: Environment, F: ContextualFunctionClass):
    if F.n_contexts != env.n_contexts or F.n_actions != env.n_actions:
        raise ConfigurationError(
            f"class shape {F.values.shape[1:]} does not match environment ({env.n_contexts}, {env.n_actions})"
        )


class _Recorder:
    def __init__(self, T, K, record_policies):
        self.actions = np.zeros(T, dtype=np.int64)
        self.rewards = np.zeros(T)
        self.regrets = np.zeros(T)
        self.epochs = np.zeros(T, dtype=np.int64)
        self.iters = np.zeros(T, dtype=np.int64)
        self.policies = np.zeros((T, K)) if record_policies else None

    def block(self, lo, hi, m, P, iters, x, R, u, env):
        a = _sample_actions(P, u[lo:hi])
        self.actions[lo:hi] = a
        self.rewards[lo:hi] = R[np.arange(lo, hi), a]
        self.regrets[lo:hi] = env.regret_block(x[lo:hi], P)
        self.epochs[lo:hi] = m
        self.iters[lo:hi] = iters
        if self.policies is not None:
            self.policies[lo:hi] = P

    def ledger(self, name, x, calls, n_contexts, meta):
        if name == "squarecbf":
            cum = np.arange(1, x.size + 1, dtype=np.int64)
        elif name == "uniform":
            cum = np.zeros(x.size, dtype=np.int64)
        else:
            cum = self.epochs - 1
        return RunLedger(
            oracle_cum=cum,
            algorithm=name,
            contexts=x,
            actions=self.actions,
            rewards=self.rewards,
            regrets=self.regrets,
            epochs=self.epochs,
            solver_iters=self.iters,
            oracle_calls=calls,
            n_contexts=n_contexts,
            policies=self.policies,
            meta=meta,
        )


def _window_erm(F, x, a, r, lo, hi) -> int:
    pred = F.values[:, x[lo:hi], a[lo:hi]]
    return int(np.argmin(((pred - r[None, lo:hi]) ** 2).sum(axis=1)))


# ----------------------------------------------------------------------------
# algorithms
# ----------------------------------------------------------------------------


def oe2d_run(
    env: Environment,
    F: ContextualFunctionClass,
    bench: Optional[Benchmark] = None,
    schedule: Optional[EpochSchedule] = None,
    solver: Optional[SolverDefaults] = None,
    T: int = 1000,
    seed: int = 0,
    record_policies: bool = False,
) -> RunLedger:
    _check_class(env, F)
    bench = bench or env.benchmark
    schedule = schedule or EpochSchedule()
    solver = solver or SolverDefaults()
    taus = schedule.boundaries(T)
    eps = schedule.eps_for(T)
    D = schedule.gamma_mode.D if schedule.gamma_mode.D is not None else default_scale(bench, F.n_actions)
    designer = _Designer(F, bench, eps, solver)
    x, R, _, u = _streams(env, T, seed)
    rec = _Recorder(T, F.n_actions, record_policies)
    calls = 0
    gammas, fhats = [], []
    for m in range(1, len(taus)):
        lo, hi = int(taus[m - 1]), int(taus[m])
        if m == 1:
            f_idx, gamma = None, 0.0
        else:
            f_idx = _window_erm(F, x, rec.actions, rec.rewards, int(taus[m - 2]), lo)
            calls += 1
            gamma = gamma_schedule(schedule, m, F.n_functions, T, taus, D)
        gammas.append(gamma)
        fhats.append(f_idx)
        table = np.zeros((F.n_contexts, F.n_actions))
        iters = np.zeros(F.n_contexts, dtype=np.int64)
        for xc in np.unique(x[lo:hi]):
            cert = designer.solve(int(xc), f_idx, gamma)
            table[xc] = cert.p_star
            iters[xc] = cert.iterations
        xs = x[lo:hi]
        rec.block(lo, hi, m, table[xs], iters[xs], x, R, u, env)
    meta = {
        "taus": taus.tolist(),
        "gammas": gammas,
        "fhats": fhats,
        "eps": eps,
        "sec_bounds": {int(k): v for k, v in designer._S.items()},
        "escalations": designer.escalations,
    }
    return rec.ledger("oe2d", x, calls, F.n_contexts, meta)


def squarecbf_run(
    env: Environment,
    F: ContextualFunctionClass,
    bench: Optional[Benchmark] = None,
    gamma: float = 100.0,
    eps: Optional[float] = None,
    T: int = 1000,
    seed: int = 0,
    solver: Optional[SolverDefaults] = None,
    record_policies: bool = False,
) -> RunLedger:
    """Per round: FTL on the full prefix, then the exploitative design at fixed gamma."""
    _check_class(env, F)
    bench = bench or env.benchmark
    solver = solver or SolverDefaults()
    eps = eps if eps is not None else 1.0 / max(T, 2)
    designer = _Designer(F, bench, eps, solver)
    x, R, _, u = _streams(env, T, seed)
    rec = _Recorder(T, F.n_actions, record_policies)
    running = RunningLoss(F)
    cache: dict = {}
    calls = 0
    for i in range(T):
        f_idx = running.leader()
        calls += 1
        xc = int(x[i])
        key = (int(F.slice(xc).remap[f_idx]), xc)
        cert = cache.get(key)
        if cert is None:
            cert = designer.solve(xc, f_idx, gamma)
            cache[key] = cert
        rec.block(i, i + 1, 1, cert.p_star[None, :], cert.iterations, x, R, u, env)
        running.update(xc, int(rec.actions[i]), float(rec.rewards[i]))
    meta = {"gamma": gamma, "eps": eps, "sec_bounds": {int(k): v for k, v in designer._S.items()}}
    return rec.ledger("squarecbf", x, calls, F.n_contexts, meta)


def igw_distribution(f_row: np.ndarray, gamma: float) -> np.ndarray:
    """Inverse gap weighting: 1/(K + gamma gap) off the leader, the rest on it."""
    K = f_row.size
    best = int(np.argmax(f_row))
    p = 1.0 / (K + gamma * (f_row[best] - f_row))
    p[best] = 0.0
    p[best] = 1.0 - p.sum()
    return p


def igw_baseline_run(
    env: Environment,
    F: ContextualFunctionClass,
    T: int = 1000,
    schedule: Optional[EpochSchedule] = None,
    seed: int = 0,
    bench: Optional[Benchmark] = None,
    record_policies: bool = False,
) -> RunLedger:
    _check_class(env, F)
    bench = bench or env.benchmark
    if not isinstance(bench, Dirac):
        raise UnsupportedError("the inverse-gap-weighting baseline only supports Dirac benchmarks")
    schedule = schedule or EpochSchedule()
    taus = schedule.boundaries(T)
    D = schedule.gamma_mode.D if schedule.gamma_mode.D is not None else float(F.n_actions)
    x, R, _, u = _streams(env, T, seed)
    rec = _Recorder(T, F.n_actions, record_policies)
    calls = 0
    gammas = []
    for m in range(1, len(taus)):
        lo, hi = int(taus[m - 1]), int(taus[m])
        if m == 1:
            table = np.full((F.n_contexts, F.n_actions), 1.0 / F.n_actions)
            gamma = 0.0
        else:
            f_idx = _window_erm(F, x, rec.actions, rec.rewards, int(taus[m - 2]), lo)
            calls += 1
            gamma = gamma_schedule(schedule, m, F.n_functions, T, taus, D)
            table = np.stack([igw_distribution(F.values[f_idx, xc], gamma) for xc in range(F.n_contexts)])
        gammas.append(gamma)
        xs = x[lo:hi]
        rec.block(lo, hi, m, table[xs], 0, x, R, u, env)
    return rec.ledger("igw", x, calls, F.n_contexts, {"taus": taus.tolist(), "gammas": gammas})


def uniform_run(env: Environment, F: Optional[ContextualFunctionClass] = None, T: int = 1000, seed: int = 0, record_policies: bool = False) -> RunLedger:
    K = env.n_actions
    x, R, _, u = _streams(env, T, seed)
    rec = _Recorder(T, K, record_policies)
    rec.block(0, T, 1, np.full((T, K), 1.0 / K), 0, x, R, u, env)
    return rec.ledger("uniform", x, 0, env.n_contexts, {})


def greedy_run(
    env: Environment,
    F: ContextualFunctionClass,
    T: int = 1000,
    seed: int = 0,
    warmup: int = 2,
    bench: Optional[Benchmark] = None,
    record_policies: bool = False,
) -> RunLedger:
    """Uniform for `warmup` rounds, one ERM on that data, then play its greedy choice forever."""
    _check_class(env, F)
    bench = bench or env.benchmark
    K = F.n_actions
    warmup = min(warmup, T)
    x, R, _, u = _streams(env, T, seed)
    rec = _Recorder(T, K, record_policies)
    rec.block(0, warmup, 1, np.full((warmup, K), 1.0 / K), 0, x, R, u, env)
    calls = 0
    if warmup < T:
        f_idx = _window_erm(F, x, rec.actions, rec.rewards, 0, warmup)
        calls = 1
        table = np.zeros((F.n_contexts, K))
        for xc in range(F.n_contexts):
            V = benchmark_vertices(bench, K, xc)
            table[xc] = V[int(np.argmax(V @ F.values[f_idx, xc]))]
        rec.block(warmup, T, 2, table[x[warmup:]], 0, x, R, u, env)
    return rec.ledger("greedy", x, calls, F.n_contexts, {"warmup": warmup})


ALGORITHMS: dict[str, Callable] = {
    "oe2d": oe2d_run,
    "squarecbf": squarecbf_run,
    "igw": igw_baseline_run,
    "uniform": uniform_run,
    "greedy": greedy_run,
}


def run_batch(jobs: list, workers: int = 1) -> list:
    """Run (callable, kwargs) jobs, optionally on a process pool; order is preserved."""
    if workers <= 1 or len(jobs) <= 1:
        return [fn(**kw) for fn, kw in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futs = [pool.submit(fn, **kw) for fn, kw in jobs]
        return [f.result() for f in futs]
