import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from reeblab.flows import (CAT_MAP, InvalidPointError, LensFlow, LensSpaceParams, ProductFlow,
                           RotationFlow, SuspensionFlow, SuspensionParams, ellipsoid,
                           flow_from_dict, lens, torus_distance)
from reeblab.io import SchemaError

from conftest import PHI

LENS_PHI = LensFlow(lens((2, 1), (1.0, PHI)))


def test_params_validation():
    with pytest.raises(ValueError):
        lens((1, 0), (1.0, 2.0))
    with pytest.raises(ValueError):
        LensSpaceParams((2, 1), (1.0, -1.0))
    with pytest.raises(ValueError):
        SuspensionParams(((1, 1), (0, 1)))
    with pytest.raises(ValueError):
        SuspensionParams(((2, 1), (1, 2)))
    p = lens((3, 1, 2), (1.0, 2.0, 5.0))
    assert p.m == 2 and p.q0 == 3
    np.testing.assert_allclose(p.tilde, [3.0, 1.0, 3.0])


def test_round_sphere_period(rng):
    f = LensFlow(ellipsoid(1, 1))
    x = f.sample(rng, 20)
    assert np.max(f.distance(f.evolve(x, 2 * math.pi), x)) < 1e-12


def test_lens_half_period(rng):
    f = LensFlow(lens((2, 1), (1.0, 1.0)))
    x = f.sample(rng, 20)
    assert np.max(f.distance(f.evolve(x, math.pi), x)) < 1e-12


def test_axis_orbit():
    f = LensFlow(ellipsoid(1.0, PHI))
    x = np.array([1.0, 0.0, 0.0, 0.0])
    for t in (0.3, 2.0, 17.5):
        np.testing.assert_allclose(f.evolve(x, t), [math.cos(t), math.sin(t), 0, 0], atol=1e-12)


def test_lens_distance_examples(rng):
    f = LensFlow(lens((2, 1), (1.0, 1.0)))
    x = f.sample(rng, 10)
    assert np.all(f.distance(x, x) == 0)
    assert np.max(f.distance(x, -x)) < 1e-12
    e = LensFlow(ellipsoid(1, 1))
    assert e.distance(np.array([1.0, 0, 0, 0]), np.array([0, 0, 1.0, 0])) == pytest.approx(
        math.sqrt(2))


def test_invalid_point():
    with pytest.raises(InvalidPointError):
        LENS_PHI.evolve(np.array([2.0, 0, 0, 0]), 1.0)


def test_sampler_contract():
    f = LensFlow(ellipsoid(1.0, PHI))
    a = f.sample(np.random.default_rng(3), 5)
    b = f.sample(np.random.default_rng(3), 5)
    assert np.array_equal(a, b)
    x = f.sample(np.random.default_rng(0), 10_000)
    z = x[:, 0::2] ** 2 + x[:, 1::2] ** 2
    assert abs(np.mean(z @ np.array([1.0, PHI])) - 1) < 1e-12
    r = LensFlow(ellipsoid(1, 1)).sample(np.random.default_rng(0), 10_000)
    assert abs(np.mean(r[:, 0] ** 2 + r[:, 1] ** 2) - 0.5) < 0.02


def test_shortest_period():
    assert LENS_PHI.shortest_period == pytest.approx(math.pi / PHI)
    assert LensFlow(ellipsoid(1, 1)).shortest_period == pytest.approx(2 * math.pi)


@pytest.mark.parametrize("flow", [LENS_PHI, LensFlow(ellipsoid(1.0, 2.0 ** 0.5, 3.0 ** 0.5)),
                                  SuspensionFlow(), RotationFlow(0.3)])
def test_group_law(flow):
    rng = np.random.default_rng(1)
    x = flow.sample(rng, 1000)
    s = rng.uniform(0, 5, 1000)
    t = rng.uniform(0, 5, 1000)
    a = flow.evolve(flow.evolve(x, s), t)
    b = flow.evolve(x, s + t)
    assert np.max(flow.distance(a, b)) < 1e-10
    assert np.max(flow.distance(flow.evolve(x, np.zeros(1000)), x)) < 1e-15


@pytest.mark.parametrize("flow", [LENS_PHI, SuspensionFlow()])
def test_distance_axioms(flow):
    rng = np.random.default_rng(2)
    x, y = flow.sample(rng, 2000), flow.sample(rng, 2000)
    np.testing.assert_allclose(flow.distance(x, y), flow.distance(y, x), atol=1e-14)
    assert np.all(flow.distance(x, y) >= 0)


def test_lens_triangle(rng):
    x, y, z = (LENS_PHI.sample(rng, 2000) for _ in range(3))
    d = LENS_PHI.distance
    assert np.all(d(x, z) <= d(x, y) + d(y, z) + 1e-12)


def test_lens_isometry(rng):
    x, y = LENS_PHI.sample(rng, 500), LENS_PHI.sample(rng, 500)
    t = rng.uniform(0, 100, 500)
    np.testing.assert_allclose(LENS_PHI.distance(LENS_PHI.evolve(x, t), LENS_PHI.evolve(y, t)),
                               LENS_PHI.distance(x, y), atol=1e-12)


def test_periodicity_criterion(rng):
    f = LensFlow(lens((3, 1), (1.0, 2.0)), )
    x = f.sample(rng, 50)
    for t in np.linspace(0.1, 20, 200):
        periodic = f.is_periodic_time(t, tol=1e-9)
        moved = np.max(f.distance(f.evolve(x, t), x))
        assert periodic == (moved < 1e-8)
    assert f.is_periodic_time(2 * math.pi)


def test_suspension_examples():
    f = SuspensionFlow()
    np.testing.assert_allclose(f.evolve(np.array([0.0, 0.0, 0.3]), 1.0), [0, 0, 0.3], atol=1e-15)
    p = np.array([0.1, 0.0, 0.0])
    np.testing.assert_array_equal(f.evolve(p, 0.0), p)
    np.testing.assert_allclose(f.evolve(p, 1.0), [0.2, 0.1, 0.0], atol=1e-15)


def test_suspension_unstable_expansion(rng):
    f = SuspensionFlow()
    lam = CAT_MAP.expansion
    u = CAT_MAP.unstable_direction
    x = f.sample(rng, 200)
    x[:, 2] = 0.5
    y = x.copy()
    y[:, :2] = np.mod(y[:, :2] + 1e-6 * u, 1.0)
    ratio = f.distance(f.evolve(x, 1.0), f.evolve(y, 1.0)) / f.distance(x, y)
    assert np.all((ratio > 0.9 * lam) & (ratio < 1.1 * lam))


def test_torus_distance():
    assert torus_distance(np.array([0.05, 0.0]), np.array([0.95, 0.0])) == pytest.approx(0.1)


def test_product_and_rotation(rng):
    r = RotationFlow(0.25)
    assert r.shortest_period == 4.0
    p = ProductFlow(SuspensionFlow(), r)
    x = p.sample(rng, 10)
    assert x.shape == (10, 4)
    assert np.allclose(p.distance(p.evolve(x, 0.0), x), 0)


def test_flow_from_dict():
    f = flow_from_dict({"kind": "lens", "q": [2, 1], "a": [1, PHI]})
    assert isinstance(f, LensFlow) and f.params.q0 == 2
    g = flow_from_dict({"kind": "suspension", "matrix": [[2, 1], [1, 1]]})
    assert isinstance(g, SuspensionFlow)
    with pytest.raises(SchemaError) as e:
        flow_from_dict({"kind": "lens", "a": [-1, 2]})
    assert len(e.value.fields) >= 2


@settings(max_examples=40, deadline=None)
@given(st.floats(0, 50), st.floats(0, 50), st.integers(0, 2 ** 31))
def test_lens_group_law_property(s, t, seed):
    x = LENS_PHI.sample(np.random.default_rng(seed), 1)
    a = LENS_PHI.evolve(LENS_PHI.evolve(x, s), t)
    assert LENS_PHI.distance(a, LENS_PHI.evolve(x, s + t))[0] < 1e-10


@settings(max_examples=40, deadline=None)
@given(st.floats(0, 6), st.integers(0, 2 ** 31))
def test_suspension_roof_range(t, seed):
    f = SuspensionFlow()
    y = f.evolve(f.sample(np.random.default_rng(seed), 4), t)
    assert np.all((y[:, 2] >= 0) & (y[:, 2] < 1)) and np.all((y[:, :2] >= 0) & (y[:, :2] < 1))
