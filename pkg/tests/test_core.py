import itertools

import numpy as np
import pytest

from oe2d.core import (
    ContextualFunctionClass,
    Dirac,
    Explicit,
    FunctionClassSlice,
    PerContext,
    Smooth,
    as_distribution,
    benchmark_vertices,
    expected_value,
    in_hull,
    point_mass,
)
from oe2d.errors import ConfigurationError, StructuralError


def test_expected_value_point_mass():
    assert expected_value(point_mass(0, 2), [0.3, 0.7]) == pytest.approx(0.3)


def test_expected_value_zero_measure():
    assert expected_value(np.zeros(3), [0.2, 0.5, 0.9]) == 0.0


def test_expected_value_matches_loop(rng):
    g = rng.random(6)
    m = np.full(6, 0.5)
    assert expected_value(m, g) == pytest.approx(sum(0.5 * v for v in g), abs=1e-12)


def test_negative_measure_rejected():
    with pytest.raises(StructuralError):
        expected_value([-0.1, 1.1], [0.0, 1.0])


def test_distribution_tolerance():
    as_distribution([0.5, 0.5 + 5e-13])
    with pytest.raises(StructuralError):
        as_distribution([0.5, 0.5 + 1e-9])


def test_slice_dedups_and_remaps():
    G = FunctionClassSlice([[0.1, 0.2], [0.3, 0.4], [0.1, 0.2]])
    assert G.n_functions == 2
    assert list(G.remap) == [0, 1, 0]
    assert G.pairs.tolist() == [[0, 1]]


def test_slice_rejects_out_of_range():
    with pytest.raises(StructuralError):
        FunctionClassSlice([[0.1, 1.2]])


def test_contextual_slice_and_star():
    vals = np.array([[[0.1, 0.2], [0.5, 0.5]], [[0.1, 0.2], [0.4, 0.6]]])
    F = ContextualFunctionClass(vals, star_index=1)
    assert F.slice(0).n_functions == 1
    assert F.slice(1).n_functions == 2
    np.testing.assert_array_equal(F.star, vals[1])
    with pytest.raises(StructuralError):
        ContextualFunctionClass(vals, star_index=5)


def test_dirac_vertices():
    np.testing.assert_array_equal(Dirac().vertices(3), np.eye(3))


def test_smooth_h_one_single_vertex_is_uniform():
    V = Smooth.uniform(1.0, 4).vertices(4)
    np.testing.assert_allclose(V, np.full((1, 4), 0.25))


def test_smooth_h_one_over_k_is_dirac():
    # the density cap mu/h is 1, so every point mass is admissible
    V = Smooth.uniform(0.25, 4).vertices(4)
    assert {tuple(v) for v in V} == {tuple(e) for e in np.eye(4)}


def test_smooth_half_vertices_are_pair_uniforms():
    V = Smooth.uniform(0.5, 4).vertices(4)
    expected = set()
    for s in itertools.combinations(range(4), 2):
        v = np.zeros(4)
        v[list(s)] = 0.5
        expected.add(tuple(v))
    assert {tuple(v) for v in V} == expected


def test_smooth_nonuniform_vertices_respect_cap():
    b = Smooth(0.5, [0.1, 0.2, 0.3, 0.4])
    V = b.vertices(4)
    assert np.all(V <= b.cap + 1e-12)
    np.testing.assert_allclose(V.sum(axis=1), 1.0)
    assert all(b.contains(v) for v in V)


def test_smooth_validation():
    with pytest.raises(ConfigurationError):
        Smooth.uniform(0.3, 4)
    with pytest.raises(ConfigurationError):
        Smooth(0.5, [0.0, 1.0])


def test_explicit_members_and_hull():
    b = Explicit([[0.5, 0.5, 0.0], [0.0, 0.5, 0.5]])
    assert in_hull(b, [0.25, 0.5, 0.25])
    assert not in_hull(b, [1.0, 0.0, 0.0])
    with pytest.raises(ConfigurationError):
        Explicit([[0.5, 0.6]])


def test_per_context_resolution():
    b = PerContext({0: Dirac(), 1: Smooth.uniform(1.0, 2)})
    assert benchmark_vertices(b, 2, 0).shape == (2, 2)
    np.testing.assert_allclose(benchmark_vertices(b, 2, 1), [[0.5, 0.5]])


def test_dirac_hull_is_simplex():
    assert in_hull(Dirac(), [0.2, 0.3, 0.5])
