"""Structural verification suites, one check per acceptance criterion.

Each check returns a `CheckResult`; `run_suite` groups them the way the CLI
exposes them. Instance generators are seeded so failures can be replayed
from the reported seed.
"""

from __future__ import annotations

import math
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import complexity as cx
from . import engine, instances
from .core import ContextualFunctionClass, Dirac, FunctionClassSlice, Smooth, benchmark_vertices, in_hull
from .coverage import coverage, coverage_naive, coverage_of
from .design import (
    SolverConfig,
    StepMode,
    best_response,
    certify,
    check_certificate,
    exploitative_f_design,
    iteration_cap,
)
from .environments import Corruption, Environment, Shift, make_misspecified, make_rng, policy_misspecification, realizable_environment
from .regression import Dataset, erm_offline

TOL = 1e-9


@dataclass
class CheckResult:
    criterion: int
    name: str
    passed: bool
    seconds: float = 0.0
    limit: float | None = None
    detail: dict = field(default_factory=dict)
    failures: list = field(default_factory=list)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        bits = ", ".join(f"{k}={_short(v)}" for k, v in self.detail.items())
        timing = f"{self.seconds:.1f}s" + (f"/{self.limit:.0f}s" if self.limit else "")
        return f"[{status}] criterion {self.criterion}: {self.name} ({timing}) {bits}"

    def to_dict(self) -> dict:
        return {
            "criterion": self.criterion,
            "name": self.name,
            "passed": self.passed,
            "seconds": round(self.seconds, 3),
            "limit": self.limit,
            "detail": {k: _jsonable(v) for k, v in self.detail.items()},
            "failures": [_jsonable(f) for f in self.failures[:50]],
        }


def _short(v):
    if isinstance(v, float):
        return f"{v:.4g}"
    return v


def _jsonable(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    return v


def _timed(criterion, name, limit, fn) -> CheckResult:
    t0 = time.perf_counter()
    ok, detail, failures = fn()
    dt = time.perf_counter() - t0
    within = limit is None or dt <= limit
    if not within:
        detail["over_time"] = True
    return CheckResult(criterion, name, bool(ok and within), dt, limit, detail, failures)


# ----------------------------------------------------------------------------
# instance generators
# ----------------------------------------------------------------------------


def _random_bench(rng, K):
    s = int(rng.integers(1, K + 1))
    return Smooth.uniform(s / K, K)


def certificate_instances(n=500, seed=101):
    """(instance seed, G, benchmark, gamma) with |A| in [2,5], |G| in [2,6]."""
    gammas = (1.0, 10.0, 100.0)
    for i in range(n):
        rng = make_rng(seed, i)
        K = int(rng.integers(2, 6))
        m = int(rng.integers(2, 7))
        G = FunctionClassSlice(rng.random((m, K)))
        bench = Dirac() if i % 2 == 0 else _random_bench(rng, K)
        yield i, G, bench, gammas[(i // 2) % 3]


# ----------------------------------------------------------------------------
# criteria 1 and 2
# ----------------------------------------------------------------------------


def _certificate_runs(n=500, eps=0.01):
    out = []
    for i, G, bench, gamma in certificate_instances(n):
        S = cx.analytic_sec_bound(G, bench, eps)
        modes = [StepMode.FIXED_EPS]
        if isinstance(bench, Dirac):
            modes.append(StepMode.AGGRESSIVE_DIRAC)
        for mode in modes:
            rec = {"seed": i, "mode": mode.value, "gamma": gamma, "S": S, "kind": type(bench).__name__}
            try:
                cert = exploitative_f_design(0, G, bench, SolverConfig(gamma, eps, S, mode))
            except Exception as e:  # noqa: BLE001 - every failure is reported
                rec["error"] = repr(e)
                out.append(rec)
                continue
            chk = check_certificate(cert, 0, G, bench, gamma, eps)
            chk["member"] = in_hull(bench, cert.p_star) and bool(np.all(cert.vertex_weights >= 0))
            rec.update(chk)
            rec["iterations"] = cert.iterations
            rec["cap"] = iteration_cap(mode, eps, S)
            out.append(rec)
    return out


def check_certificates(n=500) -> CheckResult:
    def body():
        runs = _certificate_runs(n)
        bad = [r for r in runs if "error" in r or not (r["value_ok"] and r["lr_ok"] and r["gc_ok"] and r["member"])]
        detail = {
            "instances": n,
            "solves": len(runs),
            "max_value_over_bound": max(r.get("value", 0) * r["gamma"] / (10 * r["S"]) for r in runs if "value" in r),
            "max_gc_excess": max(r.get("max_gc_excess", -np.inf) for r in runs),
        }
        return not bad, detail, bad

    return _timed(1, "DOEC certificate, LR and GC on 500 instances", 120, body)


def check_termination(n=500) -> CheckResult:
    def body():
        runs = [r for r in _certificate_runs(n) if "error" not in r]
        fixed = [r for r in runs if r["mode"] == "fixed_eps"]
        aggr = [r for r in runs if r["mode"] == "aggressive_dirac"]
        bad = [r for r in fixed if r["iterations"] > math.floor(1 / 0.01 + 1e-9)]
        bad += [r for r in aggr if r["iterations"] > max(1, math.floor(32 * r["S"]))]
        detail = {
            "fixed_runs": len(fixed),
            "max_fixed_iters": max(r["iterations"] for r in fixed),
            "aggressive_runs": len(aggr),
            "max_aggressive_iters": max(r["iterations"] for r in aggr),
        }
        return not bad and len(fixed) == n, detail, bad

    return _timed(2, "iteration caps floor(1/eps) and floor(32 S)", None, body)


# ----------------------------------------------------------------------------
# criterion 3
# ----------------------------------------------------------------------------


def check_dec_bridge(n=100, resolution=40, eps=0.01) -> CheckResult:
    def body():
        bad, gaps = [], []
        gammas = (1.0, 10.0, 100.0)
        for i in range(n):
            rng = make_rng(303, i)
            K = int(rng.integers(2, 4))
            G = FunctionClassSlice(rng.random((int(rng.integers(2, 6)), K)))
            bench = Dirac() if i % 2 == 0 else _random_bench(rng, K)
            gamma = gammas[i % 3]
            S = cx.analytic_sec_bound(G, bench, eps)
            cert = exploitative_f_design(0, G, bench, SolverConfig(gamma, eps, S))
            V = certify(cert.p_star, 0, G, bench, gamma, eps)
            rhs = V + 1 / gamma + gamma * eps
            dec = cx.dec_bruteforce(0, G, bench, gamma, cx.GridSpec(resolution))
            at_p = cx.dec_objective(cert.p_star, 0, G, bench, gamma)
            gaps.append(rhs - dec)
            if dec > rhs + 0.05 or at_p > rhs + TOL:
                bad.append({"seed": i, "dec": dec, "dec_at_pstar": at_p, "rhs": rhs})
        return not bad, {"instances": n, "min_slack": float(min(gaps))}, bad

    return _timed(3, "DEC <= certify + 1/gamma + gamma*eps", 300, body)


# ----------------------------------------------------------------------------
# criterion 4
# ----------------------------------------------------------------------------


def check_cheating_code(gamma=100.0, eps=0.01, resolution=20) -> CheckResult:
    def body():
        detail, bad = {}, []
        for k in (2, 3, 4):
            cc = cx.cheating_code_instance(k)
            sec = cx.sec_lower_bound_search(cc.G, Dirac(), eps, 2, extra_sequences=[cc.canonical_sequence()])
            canon = cx.sequence_extrapolation_sum(cc.G, cc.canonical_sequence(), eps)
            bound = cc.doec_bound(gamma)
            beta = cc.beta_star(gamma)
            # every hypothesis as g_hat, by the symmetry of the construction they agree
            pb = max(certify(cc.p_beta(beta, i), i, cc.G, Dirac(), gamma, eps) for i in range(cc.n_arms))
            face = [0] + list(cc.code_actions)
            grid = cx.doec_bruteforce(0, cc.G, Dirac(), gamma, eps, cx.GridSpec(resolution), face=face)
            detail[f"k{k}"] = {"sec": sec, "canonical": canon, "floor": cc.sec_floor(eps), "p_beta": pb, "bound": bound, "grid_face": grid}
            if k == 2:
                full = cx.doec_bruteforce(0, cc.G, Dirac(), gamma, eps, cx.GridSpec(resolution))
                detail["k2"]["grid_full"] = full
                if full > bound + 0.1:
                    bad.append({"k": 2, "grid_full": full})
            if sec < cc.sec_floor(eps):
                bad.append({"k": k, "sec": sec})
            if pb > bound + TOL:
                bad.append({"k": k, "p_beta": pb})
            if grid > bound + 0.1:
                bad.append({"k": k, "grid": grid})
        return not bad, detail, bad

    return _timed(4, "cheating code: SEC large, DOEC small", 120, body)


# ----------------------------------------------------------------------------
# criterion 5
# ----------------------------------------------------------------------------


def check_sec_bounds(n=200, n_max=6) -> CheckResult:
    eps_choices = (0.01, 0.05, 0.2)

    def body():
        bad, ratios = [], {"smooth": 0.0, "dirac": 0.0}
        corrected_bad, edim_zero = [], 0
        for i in range(n):
            for kind in ("smooth", "dirac"):
                rng = make_rng(505 if kind == "smooth" else 506, i)
                K = int(rng.integers(2, 6))
                G = FunctionClassSlice(rng.random((int(rng.integers(2, 7)), K)))
                eps = eps_choices[i % 3]
                bench = _random_bench(rng, K) if kind == "smooth" else Dirac()
                found = cx.sec_lower_bound_search(G, bench, eps, n_max)
                bound = cx.sec_upper_bound(G, bench, eps)
                ratios[kind] = max(ratios[kind], found / bound if bound > 0 else 0.0)
                if found > bound + TOL:
                    bad.append({"seed": i, "kind": kind, "eps": eps, "found": found, "bound": bound})
                if kind == "dirac":
                    edim = cx.eluder_dimension(G, math.sqrt(eps))
                    edim_zero += edim == 0
                    if found > cx.eluder_sec_bound(G, eps, edim, corrected=True) + TOL:
                        corrected_bad.append({"seed": i, "found": found})
        detail = {
            "instances_each": n,
            "max_ratio_smooth": ratios["smooth"],
            "max_ratio_dirac": ratios["dirac"],
            "literal_violations": len(bad),
            "dirac_edim_zero": edim_zero,
            "corrected_violations": len(corrected_bad),
        }
        return not bad, detail, bad + corrected_bad

    return _timed(5, "searched SEC below the analytic bounds", None, body)


# ----------------------------------------------------------------------------
# criterion 6
# ----------------------------------------------------------------------------


def check_oracle_calls() -> CheckResult:
    def body():
        F, env = instances.discrete_instance(n_functions=5, n_contexts=2, n_actions=3, seed=7)
        T1 = 2**14
        L1 = engine.oe2d_run(env, F, schedule=engine.EpochSchedule("doubling"), T=T1, seed=0)
        T2 = 10**4
        L2 = engine.oe2d_run(env, F, schedule=engine.EpochSchedule("small_epoch"), T=T2, seed=0)
        cap2 = math.ceil(math.log2(math.log2(T2)))
        T3 = 3000
        L3 = engine.squarecbf_run(env, F, gamma=10.0, T=T3, seed=0)
        detail = {
            "doubling_calls": L1.oracle_calls,
            "doubling_epochs": int(L1.epochs.max()),
            "small_epoch_calls": L2.oracle_calls,
            "small_epoch_cap": cap2,
            "squarecbf_calls": L3.oracle_calls,
            "squarecbf_T": T3,
        }
        ok = (
            L1.oracle_calls == 13
            and int(L1.oracle_cum[-1]) == 13
            and L1.oracle_calls == int(L1.epochs.max()) - 1
            and L2.oracle_calls <= cap2
            and L3.oracle_calls == T3
            and int(L3.oracle_cum[-1]) == T3
        )
        return ok, detail, [] if ok else [detail]

    return _timed(6, "offline/online oracle call counts", None, body)


# ----------------------------------------------------------------------------
# criteria 7 and 8: Monte-Carlo trends
# ----------------------------------------------------------------------------

SEEDS = tuple(range(20))
T_MC = 20000


def _half_ratio(ledgers) -> float:
    end = np.mean([L.cum_regret[-1] for L in ledgers])
    half = np.mean([L.cum_regret[L.T // 2 - 1] for L in ledgers])
    return float(end / half) if half > 0 else float("inf") if end > 0 else 1.0


def _mean_regret(ledgers) -> float:
    return float(np.mean([L.total_regret for L in ledgers]))


KNOWN_T = engine.EpochSchedule("small_epoch")


def check_regret_trends(seeds=SEEDS, T=T_MC) -> CheckResult:
    def body():
        oe, un, dbl = [], [], []
        for s in seeds:
            F, env = instances.discrete_instance(n_functions=20, n_contexts=4, n_actions=5, seed=s)
            oe.append(engine.oe2d_run(env, F, schedule=KNOWN_T, T=T, seed=s))
            un.append(engine.uniform_run(env, F, T=T, seed=s))
            dbl.append(engine.oe2d_run(env, F, schedule=engine.EpochSchedule("doubling"), T=T, seed=s))
        Fd, envd = instances.deceptive_instance()
        gr = [engine.greedy_run(envd, Fd, T=T, seed=s) for s in seeds]
        od = [engine.oe2d_run(envd, Fd, schedule=KNOWN_T, T=T, seed=s) for s in seeds]
        ratio = _mean_regret(oe) / _mean_regret(un)
        half = _half_ratio(oe)
        detail = {
            "oe2d_mean": _mean_regret(oe),
            "uniform_mean": _mean_regret(un),
            "ratio_to_uniform": ratio,
            "half_ratio": half,
            "greedy_deceptive": _mean_regret(gr),
            "oe2d_deceptive": _mean_regret(od),
            "info_doubling_ratio_to_uniform": _mean_regret(dbl) / _mean_regret(un),
            "info_doubling_half_ratio": _half_ratio(dbl),
        }
        ok = ratio <= 0.25 and half <= 1.6 and _mean_regret(gr) > _mean_regret(od)
        return ok, detail, [] if ok else [detail]

    return _timed(7, "regret trends vs uniform and greedy", 600, body)


def _corruption_runs(C, seeds, T):
    sched = engine.EpochSchedule("small_epoch", gamma_mode=engine.GammaMode("corruption", C=C))
    out, touched = [], 0
    for s in seeds:
        F, env = instances.discrete_instance(seed=s, adversary=Corruption(C))
        _, clean = instances.discrete_instance(seed=s)
        xa, Ra, _ = env.sample_block(1, T, make_rng(s))
        xb, Rb, _ = clean.sample_block(1, T, make_rng(s))
        touched = max(touched, int(np.sum((xa != xb) | np.any(Ra != Rb, axis=1))))
        out.append(engine.oe2d_run(env, F, schedule=sched, T=T, seed=s))
    return out, touched


def check_robustness(seeds=SEEDS, T=T_MC) -> CheckResult:
    def body():
        detail, bad = {}, []
        # (a) corruption
        means = []
        for C in (0, 50, 200):
            Ls, touched = _corruption_runs(C, seeds, T)
            means.append(_mean_regret(Ls))
            h = _half_ratio(Ls)
            detail[f"C{C}"] = {"mean": means[-1], "half_ratio": h, "corrupted_rounds": touched}
            if h > 1.6 or touched > C:
                bad.append({"C": C, "half_ratio": h, "touched": touched})
        if any(b < a for a, b in zip(means, means[1:])):
            bad.append({"corruption_means": means})
        # (b) shift
        for A in (1, 2, 4):
            sched = engine.EpochSchedule("small_epoch", gamma_mode=engine.GammaMode("shift", A=float(A)))
            Ls, band_ok = [], True
            for s in seeds:
                F, env = instances.discrete_instance(seed=s, adversary=Shift(float(A)))
                D = env.context_probs(np.arange(1, T + 1))
                star = env.context_dist[None, :]
                band_ok &= bool(np.all(D >= star / A - 1e-12) and np.all(D <= star * A + 1e-12))
                if A == 1:
                    band_ok &= bool(np.array_equal(D, np.broadcast_to(star, D.shape)))
                Ls.append(engine.oe2d_run(env, F, schedule=sched, T=T, seed=s))
            h = _half_ratio(Ls)
            detail[f"A{A}"] = {"mean": _mean_regret(Ls), "half_ratio": h, "band_ok": band_ok}
            if h > 1.6 or not band_ok:
                bad.append({"A": A, "half_ratio": h, "band_ok": band_ok})
        # (c) misspecification
        for B in (0.0, 0.01):
            sched = engine.EpochSchedule("small_epoch", gamma_mode=engine.GammaMode("misspec", B=B))
            same, worst, Ls = True, 0.0, []
            for s in seeds:
                F = instances.random_class(20, 4, 5, s)
                env = make_misspecified(F, B, seed=s)
                worst = max(worst, policy_misspecification(env, F))
                L = engine.oe2d_run(env, F, schedule=sched, T=T, seed=s)
                Ls.append(L)
                if B == 0.0:
                    ref = engine.oe2d_run(realizable_environment(F), F, schedule=sched, T=T, seed=s)
                    same &= all(
                        np.array_equal(getattr(L, k), getattr(ref, k))
                        for k in ("contexts", "actions", "rewards", "regrets", "epochs", "solver_iters")
                    )
            detail[f"B{B:g}"] = {"mean": _mean_regret(Ls), "policy_misspec": worst, "identical_to_realizable": same if B == 0 else None}
            if worst > B + 1e-12 or (B == 0.0 and not same):
                bad.append({"B": B, "policy_misspec": worst, "same": same})
        return not bad, detail, bad

    return _timed(8, "corruption, shift and misspecification", None, body)


# ----------------------------------------------------------------------------
# criterion 9
# ----------------------------------------------------------------------------


def _naive_best_response(p, g, vals, V, gamma, eps):
    best, arg = -np.inf, -1
    for j, lam in enumerate(V):
        obj = sum(lam[a] * g[a] for a in range(len(g))) + coverage_naive(p, lam, vals, eps) / gamma
        if obj > best:
            best, arg = obj, j
    return best, arg


def check_oracle_equivalence(n=1000) -> CheckResult:
    def body():
        bad = []
        counts = dict.fromkeys(("coverage", "erm", "best_response", "regret"), 0)
        for i in range(n):
            rng = make_rng(909, i)
            K = int(rng.integers(2, 5))
            m = int(rng.integers(1, 5))
            vals = rng.random((m, K))
            G = FunctionClassSlice(vals)
            p = rng.random(K) * rng.random()
            q = rng.dirichlet(np.ones(K))
            eps = float(10 ** rng.uniform(-2, 0))
            c1, c2 = coverage(p, q, G, eps), coverage_naive(p, q, vals, eps)
            counts["coverage"] += 1
            if abs(c1 - c2) > 1e-12:
                bad.append({"seed": i, "op": "coverage", "fast": c1, "naive": c2})
            # ERM
            X = int(rng.integers(1, 4))
            F = ContextualFunctionClass(rng.random((int(rng.integers(1, 6)), X, K)))
            n_obs = int(rng.integers(0, 12))
            data = Dataset(rng.integers(0, X, n_obs), rng.integers(0, K, n_obs), rng.random(n_obs))
            losses = [
                sum((F.values[f, data.contexts[j], data.actions[j]] - data.rewards[j]) ** 2 for j in range(n_obs))
                for f in range(F.n_functions)
            ]
            naive = min(range(F.n_functions), key=lambda f: (losses[f], f))
            counts["erm"] += 1
            if erm_offline(F, data) != naive:
                bad.append({"seed": i, "op": "erm"})
            # best response
            bench = Dirac() if i % 2 == 0 else _random_bench(rng, K)
            V = benchmark_vertices(bench, K)
            gamma = float(rng.choice([1.0, 10.0, 100.0]))
            g = G.values[0]
            lam = best_response(p, 0, G, bench, gamma, eps)
            fast = float(lam @ g + coverage_of(p, lam[None], G, eps)[0] / gamma)
            ref, _ = _naive_best_response(p, g, G.values, V, gamma, eps)
            counts["best_response"] += 1
            if abs(fast - ref) > 1e-12:
                bad.append({"seed": i, "op": "best_response", "fast": fast, "naive": ref})
            # instantaneous regret
            truth = rng.random((X, K))
            env = Environment(np.full(X, 1.0 / X), truth, benchmark=bench)
            x = int(rng.integers(0, X))
            pd = rng.dirichlet(np.ones(K))
            top = max(sum(v[a] * truth[x, a] for a in range(K)) for v in V)
            ref_r = top - sum(pd[a] * truth[x, a] for a in range(K))
            counts["regret"] += 1
            if abs(env.instantaneous_regret(x, pd) - ref_r) > 1e-12:
                bad.append({"seed": i, "op": "regret"})
        return not bad, {"instances": n, **counts}, bad

    return _timed(9, "fast paths match naive oracles", 30, body)


# ----------------------------------------------------------------------------
# criterion 10
# ----------------------------------------------------------------------------

REPRO_CONFIGS = (
    {"name": "repro-oe2d", "T": 600, "seeds": [0, 1], "algorithm": {"name": "oe2d"}},
    {
        "name": "repro-squarecbf",
        "T": 300,
        "seeds": [3],
        "instance": {"kind": "smooth", "n_functions": 6, "n_contexts": 2, "n_actions": 4},
        "benchmark": {"kind": "smooth", "h": 0.5},
        "algorithm": {"name": "squarecbf", "fixed_gamma": 20.0},
    },
    {
        "name": "repro-corrupt",
        "T": 400,
        "seeds": [5, 6],
        "environment": {"adversary": {"kind": "corruption", "budget": 30}},
        "algorithm": {"name": "oe2d", "schedule": {"mode": "small_epoch"}, "gamma": {"kind": "corruption", "C": 30}},
    },
)


def check_reproducibility(configs=REPRO_CONFIGS) -> CheckResult:
    from .artifacts import directory_digest
    from .cli import execute_run
    from .config import ExperimentConfig

    def body():
        bad, detail = [], {}
        with tempfile.TemporaryDirectory() as tmp:
            for raw in configs:
                cfg = ExperimentConfig.from_dict(raw)
                a = execute_run(cfg, Path(tmp) / "a")
                b = execute_run(cfg, Path(tmp) / "b")
                da, db = directory_digest(a), directory_digest(b)
                detail[cfg.name] = len(da)
                if da != db:
                    bad.append({"config": cfg.name})
        return not bad, detail, bad

    return _timed(10, "byte-identical artifacts on rerun", None, body)


# ----------------------------------------------------------------------------
# suites
# ----------------------------------------------------------------------------

SUITES: dict[str, list[Callable[[], CheckResult]]] = {
    "certificates": [check_certificates, check_termination],
    "complexity": [check_dec_bridge, check_cheating_code, check_sec_bounds],
    "regret": [check_oracle_calls, check_regret_trends],
    "robustness": [check_robustness],
    "oracles": [check_oracle_equivalence],
    "reproducibility": [check_reproducibility],
}
SUITES["all"] = [c for name in ("certificates", "complexity", "regret", "robustness", "oracles", "reproducibility") for c in SUITES[name]]


def run_suite(name: str) -> list[CheckResult]:
    if name not in SUITES:
        raise KeyError(name)
    results = [check() for check in SUITES[name]]
    return sorted(results, key=lambda r: r.criterion)
