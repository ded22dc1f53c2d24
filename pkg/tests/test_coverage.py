import numpy as np
import pytest

from oe2d.core import FunctionClassSlice, point_mass
from oe2d.coverage import coverage, coverage_naive, coverage_of, coverage_table, worst_pair
from oe2d.errors import DomainError

ZERO_ONE = FunctionClassSlice([[0.0, 0.0], [1.0, 1.0]])


def test_single_function_has_zero_coverage():
    G = FunctionClassSlice([[0.3, 0.6]])
    assert coverage([0.5, 0.5], [0.2, 0.8], G, 0.1) == 0.0
    assert worst_pair([0.5, 0.5], [0.2, 0.8], G, 0.1) == (0, 0, 0.0)


def test_zero_one_pair_formula():
    d = point_mass(0, 2)
    assert coverage(d, d, ZERO_ONE, 1.0) == pytest.approx(0.5)


def test_worst_pair_tie_break():
    d = point_mass(0, 2)
    assert worst_pair(d, d, ZERO_ONE, 1.0) == (1, 0, 0.5)


def test_matches_double_loop(rng):
    G = FunctionClassSlice(rng.random((5, 4)))
    p = rng.random(4)
    q = rng.dirichlet(np.ones(4))
    assert abs(coverage(p, q, G, 0.05) - coverage_naive(p, q, G.values, 0.05)) <= 1e-12


def test_worst_pair_value_matches_coverage(rng):
    G = FunctionClassSlice(rng.random((6, 3)))
    p, q = rng.random(3), rng.dirichlet(np.ones(3))
    i, j, v = worst_pair(p, q, G, 0.01)
    assert v == pytest.approx(coverage(p, q, G, 0.01), abs=1e-12)
    d = G.values[i] - G.values[j]
    assert (q @ d) >= 0
    assert v == pytest.approx((q @ d) ** 2 / (0.01 + p @ d**2), abs=1e-12)


def test_eps_must_be_positive():
    with pytest.raises(DomainError):
        coverage([1.0, 0.0], [1.0, 0.0], ZERO_ONE, 0.0)


def test_table_and_vector_forms(rng):
    G = FunctionClassSlice(rng.random((4, 3)))
    P = rng.random((5, 3))
    Q = rng.dirichlet(np.ones(3), size=7)
    tab = coverage_table(P, Q, G, 0.1)
    ref = np.array([[coverage(p, q, G, 0.1) for q in Q] for p in P])
    np.testing.assert_allclose(tab, ref, atol=1e-12)
    np.testing.assert_allclose(coverage_of(P[0], Q, G, 0.1), ref[0], atol=1e-12)


def test_more_measure_means_less_coverage(rng):
    G = FunctionClassSlice(rng.random((4, 3)))
    p, q = rng.random(3), rng.dirichlet(np.ones(3))
    assert coverage(2 * p, q, G, 0.1) <= coverage(p, q, G, 0.1) + 1e-12
