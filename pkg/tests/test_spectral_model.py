import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from reeblab.io import SchemaError
from reeblab.spectral_model import (CombinatorialBudget, EigenvalueStream, EmptyStream,
                                    ModelParams, OutsideGap, bump, eval_v_poly,
                                    eval_v_threshold, gaussian, landau_box_spectrum,
                                    odd_gaussian, progression_stream, quantile_stream,
                                    synthesize_stream, thresholds, u0_density)


def test_model_params():
    p = ModelParams((2.0, 1.0))
    assert p.mu == (1.0, 2.0) and p.m == 2 and p.n == 5 and p.det == 2.0
    with pytest.raises(ValueError):
        ModelParams((1.0, -1.0))


def test_threshold_examples():
    t = thresholds(ModelParams((1.0,)), 3)
    np.testing.assert_allclose(t.values, [math.sqrt(2), 2, math.sqrt(6)])
    assert list(t.multiplicities) == [1, 1, 1]
    t = thresholds(ModelParams((1.0, 1.0)), 2.5)
    np.testing.assert_allclose(t.Lambdas, [1, 2])
    assert list(t.multiplicities) == [2, 3]


def test_threshold_invariants():
    p = ModelParams((1.0, math.sqrt(2), 2.5))
    t = thresholds(p, 12)
    assert t.values[0] == pytest.approx(math.sqrt(2 * p.mu[0]))
    assert t.multiplicities.sum() == t.enumerated
    assert np.all(np.diff(t.values) > 1e-12)
    with pytest.raises(ValueError):
        thresholds(p, 0.5)
    with pytest.raises(CombinatorialBudget):
        thresholds(ModelParams((1e-3,) * 4), 10.0)


def test_eval_v_poly():
    std = lambda s: math.exp(-s * s / 2) / math.sqrt(2 * math.pi)
    assert eval_v_poly(0, std) == pytest.approx(1, abs=1e-10)
    assert eval_v_poly(1, gaussian()) == pytest.approx(0, abs=1e-12)
    assert eval_v_poly(2, lambda s: math.exp(-s * s / 2)) == pytest.approx(math.sqrt(2 * math.pi))


def test_eval_v_threshold_closed_form():
    val = eval_v_threshold(0, 0, 0, 0.5, lambda s: math.exp(-s * s / 2))
    assert val == pytest.approx(math.sqrt(2 * math.pi) * math.exp(-0.5), abs=1e-6)


def test_eval_v_threshold_support_and_parity():
    assert eval_v_threshold(1, 2, 1, 2.0, bump(1.5)) == 0.0
    assert eval_v_threshold(0, 2, 1, 0.5, odd_gaussian()) == pytest.approx(0, abs=1e-12)
    with pytest.raises(ValueError):
        eval_v_threshold(0, 0, -1, 1.0, gaussian())


@pytest.mark.parametrize("a", [1, 2, 3])
@pytest.mark.parametrize("b,c", [(0, 0), (1, 1), (2, 0), (1, 2)])
def test_integration_by_parts(a, b, c):
    phi = gaussian(0.3, 0.7)
    lhs = eval_v_threshold(a, b, c, 0.4, phi)
    rhs = -eval_v_threshold(a - 1, b, c, 0.4, phi.derivative())
    assert abs(lhs - rhs) <= 1e-8


def test_eval_v_threshold_linear():
    f, g = gaussian(0.2), gaussian(-0.5, 2.0)
    fg = lambda s: 2 * f(s) - 3 * g(s)
    lhs = eval_v_threshold(0, 1, 1, 0.3, fg)
    rhs = 2 * eval_v_threshold(0, 1, 1, 0.3, f) - 3 * eval_v_threshold(0, 1, 1, 0.3, g)
    assert lhs == pytest.approx(rhs, abs=1e-9)


@pytest.mark.parametrize("mu", [(1.0,), (1.0, 2.0), (0.5,), (1.0, 1.0, 3.0), (0.7, 2.2)])
def test_u0_at_zero(mu):
    p = ModelParams(mu)
    assert u0_density(p, 0.0) == p.det / (4 * math.pi) ** (p.n / 2)


def test_u0_values_and_parity():
    assert u0_density(ModelParams((1.0,)), 0.0) == pytest.approx(0.0224484, rel=1e-5)
    assert u0_density(ModelParams((1.0, 2.0)), 0.0) == pytest.approx(0.00357277, rel=1e-5)
    p = ModelParams((1.0, 2.0))
    lam = np.linspace(-1.4, 1.4, 101)
    np.testing.assert_array_equal(u0_density(p, lam), u0_density(p, -lam))
    with pytest.raises(OutsideGap):
        u0_density(p, 1.5)


def test_gap_profile_flat_against_box_oracle():
    # the enumerated box spectrum has no eigenvalue density variation inside the gap
    p = ModelParams((1.0,))
    ev = landau_box_spectrum(p, 200.0, [40], 3.0)
    edges = np.linspace(-1.2, 1.2, 7)
    counts, _ = np.histogram(ev, edges)
    assert counts.max() - counts.min() <= 2 * 40
    # excited branches only start at sqrt(2 mu_1): the gap holds the lowest branch alone
    gap = ev[np.abs(ev) < math.sqrt(2)]
    xi = 2 * math.pi * np.arange(-50, 51) / 200.0
    assert len(gap) == 40 * np.count_nonzero(np.abs(xi) < math.sqrt(2))


def test_synthesize_examples():
    s = synthesize_stream({"kind": "progression", "a": 0.25, "cutoff": 3})
    np.testing.assert_allclose(s.expanded(), [-2.75, -1.75, -0.75, 0.25, 1.25, 2.25])
    u = synthesize_stream({"kind": "uniform", "support": [-1, 1], "N": 4})
    np.testing.assert_allclose(u.expanded(), [-0.75, -0.25, 0.25, 0.75])
    sym = progression_stream(0.5, 4)
    np.testing.assert_array_equal(sym.expanded(), sym.negate().expanded())
    with pytest.raises(EmptyStream):
        synthesize_stream({"kind": "density", "rho": 0.1, "support": [0, 1]})
    with pytest.raises(ValueError):
        synthesize_stream({"kind": "nope"})


def test_quantile_density():
    s = quantile_stream(lambda x: 2 * x, (0, 1), 1000)
    assert np.median(s.expanded()) == pytest.approx(math.sqrt(0.5), abs=1e-3)


def test_stream_roundtrip_and_schema():
    s = EigenvalueStream(np.array([1.0, -0.5, 1.0, 0.0]), None, 2.0, "x")
    assert list(s.eigenvalues) == [-0.5, 0.0, 1.0] and list(s.multiplicities) == [1, 1, 2]
    assert s.kernel_dim() == 1 and len(s) == 4
    t = EigenvalueStream.from_json(s.to_json())
    np.testing.assert_array_equal(t.expanded(), s.expanded())
    with pytest.raises(SchemaError) as e:
        EigenvalueStream.from_dict({"eigenvalues": ["a"], "cutoff": -1, "multiplicities": [0]})
    assert len(e.value.fields) == 3
    with pytest.raises(ValueError):
        EigenvalueStream(np.array([3.0]), None, 2.0)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-10, 10, allow_nan=False), min_size=1, max_size=30))
def test_stream_sorted_and_negation(vals):
    s = EigenvalueStream.from_values(vals)
    ev = s.expanded()
    assert np.all(np.diff(ev) >= 0) and len(ev) == len(vals)
    np.testing.assert_array_equal(np.sort(-ev), s.negate().expanded())
