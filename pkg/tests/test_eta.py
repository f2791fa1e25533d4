import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from reeblab.eta import (DegenerateFamily, ProgressionSmallT, eta_erfc, eta_full_from_stream,
                         eta_zeta_progression, hurwitz_crosscheck, planted_family,
                         reduced_eta, remainder_experiment)
from reeblab.spectral_model import EigenvalueStream, progression_stream


def test_erfc_examples():
    assert eta_erfc(progression_stream(0.5, 20)).value == 0.0
    assert eta_erfc(EigenvalueStream.from_values([0.0])).value == 0.0
    assert eta_erfc(EigenvalueStream.from_values([1.0])).value == pytest.approx(0.157299207050285,
                                                                               abs=1e-15)


def test_zeta_examples():
    assert eta_zeta_progression(0.5).value == 0.0
    assert eta_zeta_progression(0.25).value == 0.5
    assert eta_zeta_progression(0.75).value == -0.5
    assert eta_zeta_progression(0.25, 10).parts["mpmath"] == pytest.approx(0.5, abs=1e-15)
    for bad in (0.0, 1.0, -0.2, 1.5):
        with pytest.raises(ValueError):
            eta_zeta_progression(bad)


@pytest.mark.parametrize("a", [0.25, 0.1, 1 / 3, 0.5, 0.9])
def test_full_matches_hurwitz(a):
    s = progression_stream(a, 1e4)
    r = eta_full_from_stream(s, ProgressionSmallT())
    assert abs(r.value - (1 - 2 * a)) <= 1e-3
    assert not r.small_t_omitted


@pytest.mark.parametrize("c", [0.3, 2.0, 7.5])
def test_scale_invariance_progressions(c):
    s = progression_stream(0.25, 1e3)
    base = eta_full_from_stream(s, ProgressionSmallT()).value
    scaled = eta_full_from_stream(s.scale(c), ProgressionSmallT()).value
    assert scaled == pytest.approx(base, abs=1e-12)
    a, _ = ProgressionSmallT().parameters(s.scale(c))
    assert eta_zeta_progression(a).value == pytest.approx(eta_zeta_progression(0.25).value, abs=1e-12)


def test_erfc_not_scale_invariant():
    s = progression_stream(0.25, 100)
    assert abs(eta_erfc(s.scale(3.0)).value - eta_erfc(s).value) > 1e-3


def test_no_provider_flags_omission():
    r = eta_full_from_stream(progression_stream(0.5, 10))
    assert r.value == 0.0 and r.small_t_omitted


def test_provider_rejects_non_progression():
    with pytest.raises(ValueError):
        ProgressionSmallT()(EigenvalueStream.from_values([0.1, 0.3, 1.0]))


def test_reduced_eta_counts_kernel():
    s = EigenvalueStream.from_values([0.0, 0.0, 1.0, -2.0])
    e = eta_erfc(s)
    assert reduced_eta(s, e) == pytest.approx(0.5 * (2 + e.value))


def test_hurwitz_crosscheck():
    for a in (0.25, 0.4):
        chk = hurwitz_crosscheck(a, 1e4)
        assert chk.ok


def test_tail_bound_reported():
    r = eta_erfc(progression_stream(0.25, 3))
    assert 0 < r.tail_bound < 1e-3


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-8, 8, allow_nan=False), max_size=40))
def test_antisymmetry_exact(vals):
    s = EigenvalueStream.from_values(vals, cutoff=10)
    assert eta_erfc(s.negate()).value == -eta_erfc(s).value


@settings(max_examples=20, deadline=None)
@given(st.floats(0.01, 0.99))
def test_progression_antisymmetry(a):
    s = progression_stream(a, 50)
    p = ProgressionSmallT()
    assert eta_full_from_stream(s.negate(), p).value == pytest.approx(
        -eta_full_from_stream(s, p).value, abs=1e-14)


HS = np.logspace(-3, -1, 7)


def test_planted_power_family():
    fam = planted_family(lambda h: 0.7 * h ** (1 / 3), lead=0.3)
    rep = remainder_experiment(fam, HS, lead=0.3, nu=2)
    assert abs(rep.exponent - 1 / 3) <= 0.05
    assert rep.constant == pytest.approx(0.7, rel=1e-6)
    assert rep.preferred == "power"


def test_planted_log_family():
    fam = planted_family(lambda h: 0.7 / abs(math.log(h)), lead=0.3)
    rep = remainder_experiment(fam, HS, lead=0.3, mode="log")
    assert rep.residual_log < rep.residual_power and rep.preferred == "log"


def test_planted_zero_family():
    rep = remainder_experiment(planted_family(lambda h: 0.0, lead=0.3), HS, lead=0.3, nu=2)
    assert abs(rep.constant) < 1e-9


def test_planted_stream_has_plateaus():
    s = planted_family(lambda h: 0.0, lead=0.3, plateau_times=(2.0,))(0.01)
    ev = s.expanded()
    assert not np.any((np.abs(ev) > 1.5) & (np.abs(ev) < 2.5))


def test_degenerate_family():
    fam = planted_family(lambda h: h)
    with pytest.raises(DegenerateFamily):
        remainder_experiment(fam, [0.1, 0.1, 0.01], nu=2)
    with pytest.raises(ValueError):
        remainder_experiment(fam, HS, mode="power")
