import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from oe2d import complexity as cx
from oe2d.core import Dirac, FunctionClassSlice, Smooth, in_hull
from oe2d.coverage import coverage, coverage_naive
from oe2d.design import SolverConfig, StepMode, check_certificate, exploitative_f_design, iteration_cap
from oe2d.environments import Shift, make_rng, realizable_environment
from oe2d import instances
from oe2d.regression import Dataset, RunningLoss, erm_offline

unit = st.floats(0.0, 1.0, allow_nan=False)


@st.composite
def classes(draw, max_f=5, max_a=4):
    K = draw(st.integers(2, max_a))
    m = draw(st.integers(1, max_f))
    vals = draw(arrays(float, (m, K), elements=unit))
    return FunctionClassSlice(vals)


@st.composite
def class_and_measures(draw):
    G = draw(classes())
    K = G.n_actions
    p = draw(arrays(float, K, elements=st.floats(0.0, 5.0)))
    q = draw(arrays(float, K, elements=st.floats(0.0, 1.0)))
    q = q / q.sum() if q.sum() > 0 else np.full(K, 1.0 / K)
    return G, p, q


@given(class_and_measures(), st.floats(1e-3, 2.0))
@settings(max_examples=150, deadline=None)
def test_coverage_matches_naive(data, eps):
    G, p, q = data
    assert abs(coverage(p, q, G, eps) - coverage_naive(p, q, G.values, eps)) <= 1e-10 * max(1.0, coverage(p, q, G, eps))


@given(class_and_measures(), st.floats(1e-3, 1.0))
@settings(max_examples=100, deadline=None)
def test_coverage_bounded_and_antitone(data, eps):
    G, p, q = data
    c = coverage(p, q, G, eps)
    assert 0.0 <= c <= 1.0 / eps + 1e-12
    assert coverage(p + 0.5, q, G, eps) <= c + 1e-12
    assert coverage(p, q, G, 2 * eps) <= c + 1e-12


@given(classes(max_f=6, max_a=5), st.sampled_from([1.0, 10.0, 100.0]), st.booleans(), st.integers(0, 5))
@settings(max_examples=80, deadline=None)
def test_solver_certifies(G, gamma, smooth, ghat):
    K = G.n_actions
    bench = Smooth.uniform(1 / K * max(1, K // 2), K) if smooth else Dirac()
    eps = 0.01
    S = cx.analytic_sec_bound(G, bench, eps)
    g = ghat % G.n_functions
    cert = exploitative_f_design(g, G, bench, SolverConfig(gamma, eps, S))
    chk = check_certificate(cert, g, G, bench, gamma, eps)
    assert chk["value_ok"] and chk["lr_ok"] and chk["gc_ok"]
    assert in_hull(bench, cert.p_star)
    assert cert.iterations <= iteration_cap(StepMode.FIXED_EPS, eps, S)


@given(classes(max_f=4, max_a=3), st.integers(2, 8))
@settings(max_examples=40, deadline=None)
def test_doec_grid_refines(G, r):
    a = cx.doec_bruteforce(0, G, Dirac(), 10.0, 0.05, cx.GridSpec(r))
    b = cx.doec_bruteforce(0, G, Dirac(), 10.0, 0.05, cx.GridSpec(2 * r))
    assert b <= a + 1e-12


@given(classes(max_f=4, max_a=3), st.floats(0.01, 0.5))
@settings(max_examples=40, deadline=None)
def test_sec_search_under_corrected_eluder_bound(G, eps):
    found = cx.sec_lower_bound_search(G, Dirac(), eps, 4)
    assert found <= cx.eluder_sec_bound(G, eps, corrected=True) + 1e-9
    assert found <= G.n_actions * np.log1p(1 / eps) + 1e-9


@given(st.integers(0, 10_000), st.integers(0, 25))
@settings(max_examples=50, deadline=None)
def test_running_loss_equals_batch_erm(seed, n):
    rng = make_rng(seed)
    F = instances.random_class(4, 2, 3, seed)
    d = Dataset(rng.integers(0, 2, n), rng.integers(0, 3, n), rng.random(n))
    run = RunningLoss(F)
    for x, a, r in zip(d.contexts, d.actions, d.rewards):
        run.update(int(x), int(a), float(r))
    assert run.leader() == erm_offline(F, d)


@given(st.floats(1.0, 20.0), arrays(float, 4, elements=st.floats(0.05, 1.0)), st.integers(1, 200))
@settings(max_examples=60, deadline=None)
def test_shift_band_property(A, w, t):
    F = instances.random_class(2, 4, 2, 0)
    env = realizable_environment(F, context_dist=w / w.sum(), adversary=Shift(A))
    D = env.context_probs(np.array([t]))[0]
    assert np.all(D >= env.context_dist / A - 1e-12)
    assert np.all(D <= env.context_dist * A + 1e-12)
