import math

import numpy as np
import pytest

from oe2d import complexity as cx
from oe2d import engine, instances
from oe2d.core import ContextualFunctionClass, Dirac, Smooth, benchmark_vertices
from oe2d.coverage import coverage_of
from oe2d.design import certify
from oe2d.environments import Environment, UniformAdditive, realizable_environment
from oe2d.errors import CertificationFailure, ConfigurationError, UnsupportedError
from oe2d.regression import regoff_bound


def test_doubling_boundaries():
    taus = engine.EpochSchedule("doubling").boundaries(1024)
    assert taus.tolist() == [0] + [2**m for m in range(1, 11)]
    assert all(b >= 2 * a for a, b in zip(taus[1:], taus[2:]))


def test_doubling_clamps_last_epoch():
    taus = engine.EpochSchedule("doubling").boundaries(1000)
    assert taus[-1] == 1000 and taus[-2] == 512


def test_small_epoch_boundaries():
    T = 10**4
    taus = engine.EpochSchedule("small_epoch").boundaries(T)
    M = math.ceil(math.log2(math.log2(T)))
    raw = [math.floor(2 * T ** (1 - 2.0 ** (-m))) for m in range(1, M + 1)]
    assert taus.tolist() == [0] + [t for t in raw if t < T] + [T]


def test_custom_schedule_validation():
    with pytest.raises(ConfigurationError):
        engine.EpochSchedule("custom", taus=(5, 3))
    with pytest.raises(ConfigurationError):
        engine.EpochSchedule("weekly")


def test_gamma_first_epoch_is_zero():
    assert engine.gamma_schedule(engine.EpochSchedule(), 1, 20, 1000, D=5.0) == 0.0


def test_gamma_standard_value():
    sched = engine.EpochSchedule("doubling")
    taus = sched.boundaries(4096)
    m = int(np.flatnonzero(taus == 64)[0]) + 1  # tau_{m-1} = 64
    g = engine.gamma_schedule(sched, m, 20, 4096, taus, D=5.0)
    assert g == pytest.approx(math.sqrt(5.0 / regoff_bound(20, 32, 0.05)))
    assert g == pytest.approx(5.168, abs=1e-3)


def test_gamma_corruption_zero_is_inflated_standard():
    T = 5000
    taus = engine.EpochSchedule("doubling").boundaries(T)
    corr = engine.EpochSchedule("doubling", gamma_mode=engine.GammaMode("corruption", C=0.0))
    std = engine.EpochSchedule("doubling", gamma_mode=engine.GammaMode(n_convention="full", horizon_inflated=True))
    for m in range(2, len(taus)):
        a = engine.gamma_schedule(corr, m, 20, T, taus, D=5.0)
        b = engine.gamma_schedule(std, m, 20, T, taus, D=5.0)
        assert a == pytest.approx(b)


@pytest.mark.parametrize(
    "mode",
    [
        engine.GammaMode(),
        engine.GammaMode("misspec", B=0.01),
        engine.GammaMode("corruption", C=50),
        engine.GammaMode("shift", A=2.0),
    ],
)
@pytest.mark.parametrize("kind", ["doubling", "small_epoch"])
def test_gamma_nondecreasing(mode, kind):
    sched = engine.EpochSchedule(kind, gamma_mode=mode)
    T = 20000
    taus = sched.boundaries(T)
    g = [engine.gamma_schedule(sched, m, 20, T, taus, D=5.0) for m in range(1, len(taus))]
    assert all(b >= a for a, b in zip(g, g[1:]))


def test_default_scale():
    assert engine.default_scale(Dirac(), 5) == 5.0
    assert engine.default_scale(Smooth.uniform(0.5, 4), 4) == 2.0


def test_trivial_instance_zero_regret():
    F, env = instances.single_action_instance()
    L = engine.oe2d_run(env, F, T=1024, seed=0)
    assert L.total_regret == 0.0
    assert L.oracle_calls == engine.EpochSchedule().n_epochs(1024) - 1 == 9


def test_doubling_call_count_1024():
    F, env = instances.discrete_instance(n_functions=5, n_contexts=2, n_actions=3, seed=4)
    L = engine.oe2d_run(env, F, T=1024, seed=1)
    assert L.oracle_calls == 9
    assert int(L.epochs.max()) == 10


def test_cumulative_regret_monotone():
    F, env = instances.discrete_instance(seed=2)
    L = engine.oe2d_run(env, F, T=3000, seed=2)
    assert np.all(L.regrets >= -1e-12)
    assert np.all(np.diff(L.cum_regret) >= -1e-12)


def test_every_round_satisfies_low_regret():
    F, env = instances.discrete_instance(n_functions=8, n_contexts=3, n_actions=4, seed=5)
    L = engine.oe2d_run(env, F, T=4000, seed=5, record_policies=True)
    taus, gammas, fhats = L.meta["taus"], L.meta["gammas"], L.meta["fhats"]
    S = L.meta["sec_bounds"]
    for m in range(2, len(taus)):
        lo, hi = taus[m - 1], taus[m]
        for t in range(lo, hi):
            x = int(L.contexts[t])
            g = F.values[fhats[m - 1], x]
            top = (benchmark_vertices(Dirac(), 4) @ g).max()
            assert top - L.policies[t] @ g <= 2 * S[x] / gammas[m - 1] + 1e-9


def test_squarecbf_rounds_are_certified():
    F, env = instances.discrete_instance(n_functions=6, n_contexts=2, n_actions=3, seed=7)
    gamma = 30.0
    L = engine.squarecbf_run(env, F, gamma=gamma, T=400, seed=7, record_policies=True)
    assert L.oracle_calls == 400
    eps = L.meta["eps"]
    running = np.zeros(F.n_functions)
    for t in range(400):
        x = int(L.contexts[t])
        G = F.slice(x)
        f = int(np.argmin(running))
        S = L.meta["sec_bounds"][x]
        assert certify(L.policies[t], int(G.remap[f]), G, Dirac(), gamma, eps) <= 10 * S / gamma + 1e-9
        running += (F.values[:, x, L.actions[t]] - L.rewards[t]) ** 2


def test_oe2d_and_squarecbf_same_order():
    F, env = instances.discrete_instance(seed=1)
    a = engine.oe2d_run(env, F, T=5000, seed=1)
    b = engine.squarecbf_run(env, F, gamma=100.0, T=5000, seed=1)
    assert 0.1 <= a.total_regret / b.total_regret <= 10
    assert b.oracle_calls == 5000 and a.oracle_calls == engine.EpochSchedule().n_epochs(5000) - 1


def test_squarecbf_single_function_zero_regret():
    F, env = instances.single_action_instance()
    assert engine.squarecbf_run(env, F, T=50, seed=0).total_regret == 0.0


def test_igw_distribution_properties(rng):
    f = rng.random(5)
    np.testing.assert_allclose(engine.igw_distribution(f, 0.0), np.full(5, 0.2))
    for gamma in (1.0, 10.0, 1000.0):
        p = engine.igw_distribution(f, gamma)
        assert abs(p.sum() - 1) <= 1e-12
        assert p[np.argmax(f)] >= 1 / 5 - 1e-12


def test_igw_satisfies_gc_spot_check(rng):
    for _ in range(10):
        F = instances.random_class(5, 1, 4, int(rng.integers(1000)))
        G = F.slice(0)
        gamma, eps = 20.0, 0.01
        S = cx.analytic_sec_bound(G, Dirac(), eps)
        g = G.values[0]
        p = engine.igw_distribution(g, gamma)
        V = np.eye(4)
        cov = coverage_of(p, V, G, eps)
        assert np.all(cov <= 8 * S + gamma * (g.max() - V @ g) + 1e-9)


def test_igw_rejects_smooth():
    F, env = instances.smooth_instance()
    with pytest.raises(UnsupportedError):
        engine.igw_baseline_run(env, F, T=10)


def test_uniform_regret_half():
    F = ContextualFunctionClass(np.array([[[1.0, 0.0]]]), star_index=0)
    L = engine.uniform_run(realizable_environment(F), F, T=100, seed=0)
    np.testing.assert_allclose(L.regrets, 0.5)


def test_uniform_regret_linear():
    F, env = instances.discrete_instance(seed=3)
    L = engine.uniform_run(env, F, T=20000, seed=3)
    first = L.cum_regret[9999] / 10000
    second = (L.cum_regret[-1] - L.cum_regret[9999]) / 10000
    assert abs(second / first - 1) <= 0.05


def test_greedy_noiseless_zero_after_warmup():
    F = ContextualFunctionClass(np.array([[[0.9, 0.1]], [[0.1, 0.9]]]), star_index=0)
    env = realizable_environment(F, noise=UniformAdditive(0.0))
    L = engine.greedy_run(env, F, T=200, seed=4, warmup=2)
    assert L.regrets[2:].sum() == 0.0


def test_greedy_fails_on_deceptive_instance():
    F, env = instances.deceptive_instance()
    locked = [engine.greedy_run(env, F, T=200, seed=s).regrets[-1] > 0 for s in range(40)]
    assert 0.2 <= np.mean(locked) <= 0.8


def test_per_context_regret_identities():
    F, env = instances.discrete_instance(n_contexts=3, seed=6)
    L = engine.oe2d_run(env, F, T=2000, seed=6)
    pc = engine.per_context_regret(L, env)
    assert sum(pc.values()) == pytest.approx(L.total_regret)
    F1, env1 = instances.discrete_instance(n_contexts=1, seed=6)
    L1 = engine.oe2d_run(env1, F1, T=500, seed=6)
    assert engine.per_context_regret(L1)[0] == pytest.approx(L1.total_regret)
    env2 = realizable_environment(F, context_dist=[0.5, 0.5, 0.0])
    L2 = engine.uniform_run(env2, F, T=300, seed=1)
    assert engine.per_context_regret(L2, env2)[2] == 0.0


def test_escalation_recovers_from_small_bound():
    F, env = instances.discrete_instance(seed=0)
    L = engine.oe2d_run(env, F, solver=engine.SolverDefaults(sec_bound=0.0), T=1000, seed=0)
    assert L.meta["escalations"] > 0
    assert all(v > 0 for v in L.meta["sec_bounds"].values())


def test_no_escalation_raises():
    F, env = instances.discrete_instance(seed=0)
    with pytest.raises(CertificationFailure):
        engine.oe2d_run(env, F, solver=engine.SolverDefaults(sec_bound=0.0, escalate=False), T=1000, seed=0)


def test_smooth_run_and_search_bound():
    F, env = instances.smooth_instance(seed=2)
    L = engine.oe2d_run(env, F, solver=engine.SolverDefaults(sec_bound="search"), T=2000, seed=2)
    assert L.total_regret >= 0
    assert L.oracle_calls == engine.EpochSchedule().n_epochs(2000) - 1


def test_runs_are_deterministic():
    F, env = instances.discrete_instance(seed=8)
    a = engine.oe2d_run(env, F, T=1500, seed=8)
    b = engine.oe2d_run(env, F, T=1500, seed=8)
    for k in ("contexts", "actions", "rewards", "regrets", "epochs", "solver_iters"):
        np.testing.assert_array_equal(getattr(a, k), getattr(b, k))


def test_class_shape_mismatch():
    F, _ = instances.discrete_instance(n_actions=3)
    env = Environment([1.0], [[0.5, 0.5]])
    with pytest.raises(ConfigurationError):
        engine.oe2d_run(env, F, T=10)


def test_run_batch_pool_matches_serial():
    F, env = instances.discrete_instance(seed=9)
    jobs = [(engine.uniform_run, {"env": env, "F": F, "T": 300, "seed": s}) for s in range(3)]
    a = engine.run_batch(jobs, 1)
    b = engine.run_batch(jobs, 2)
    for u, v in zip(a, b):
        np.testing.assert_array_equal(u.regrets, v.regrets)
