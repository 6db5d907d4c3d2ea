"""Core formulas: competition potential, isolated growth, admissibility."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import plantfield as pf

# Frozen reference values, computed independently with 50-digit arithmetic.
POTENTIAL_AT_01_02_05 = 0.17116523778307008
POTENTIAL_AT_03_01_00 = 0.036771521545203052
SELF_POTENTIAL_AT_02 = 0.23104906018664844
GROWTH_01_075_105_T2 = 0.58600913568322504
GROWTH_01_075_105_T07 = 0.28540699347950749
GROWTH_028_09_03_T5 = 0.6935801712876632


@pytest.fixture(scope="module")
def p():
    return pf.ModelParams(s_m=0.05, R_M=3.0, sigma_x=0.5, sigma_r=1.32)


def test_potential_matches_frozen_oracle(p):
    got = pf.competition_potential(p, 0.1, 0.2, 0.5)
    assert got == pytest.approx(POTENTIAL_AT_01_02_05, rel=1e-15)
    got = pf.competition_potential(p, 0.3, 0.1, 0.0)
    assert got == pytest.approx(POTENTIAL_AT_03_01_00, rel=1e-15)


def test_potential_self_value(p):
    # A plant against its own copy at distance zero: the tanh term is
    # exactly 1, leaving log(s/s_m) / (2 R_M).
    s = 0.2
    got = pf.competition_potential(p, s, s, 0.0)
    assert got == pytest.approx(SELF_POTENTIAL_AT_02, rel=1e-15)
    assert got == pytest.approx(math.log(s / p.s_m) / (2.0 * p.R_M), rel=1e-14)


def test_potential_log_form_agrees(p, rng):
    s = np.exp(rng.uniform(np.log(p.s_m), np.log(p.max_size), 200))
    sp = np.exp(rng.uniform(np.log(p.s_m), np.log(p.max_size), 200))
    d = rng.uniform(0.0, 3.0, 200)
    direct = pf.competition_potential(p, s, sp, d)
    logged = pf.log_potential(p, np.log(s / p.s_m), np.log(sp / p.s_m), d)
    assert np.max(np.abs(direct - logged)) < 1e-12


def test_potential_broadcasts_and_scalar_type(p):
    out = pf.competition_potential(p, 0.1, np.array([0.1, 0.2, 0.3]), 0.0)
    assert out.shape == (3,)
    assert isinstance(pf.competition_potential(p, 0.1, 0.2, 0.5), float)


def test_potential_rejects_nonpositive_sizes(p):
    with pytest.raises(ValueError):
        pf.competition_potential(p, 0.0, 0.2, 0.5)
    with pytest.raises(ValueError):
        pf.competition_potential(p, 0.1, -0.2, 0.5)


@settings(deadline=None, max_examples=200)
@given(
    r1=st.floats(1e-6, 3.0 - 1e-6),
    r2=st.floats(1e-6, 3.0 - 1e-6),
    d=st.floats(0.0, 10.0),
)
def test_potential_stays_in_unit_interval(r1, r2, d):
    p = pf.ModelParams(s_m=0.05, R_M=3.0, sigma_x=0.5, sigma_r=1.32)
    s1 = p.s_m * math.exp(r1)
    s2 = p.s_m * math.exp(r2)
    c = pf.competition_potential(p, s1, s2, d)
    assert 0.0 <= c <= 1.0


def test_potential_monotonicity(p):
    # Farther neighbours press less; bigger neighbours press more; a
    # bigger self feels less pressure.
    base = pf.competition_potential(p, 0.1, 0.3, 0.5)
    assert pf.competition_potential(p, 0.1, 0.3, 1.0) < base
    assert pf.competition_potential(p, 0.1, 0.4, 0.5) > base
    assert pf.competition_potential(p, 0.2, 0.3, 0.5) < base


def test_growth_matches_frozen_oracle(p):
    tr = pf.PlantTraits(x=np.zeros(2), S=0.75, gamma=1.05)
    assert pf.gompertz_closed_form(tr, p, 0.1, 2.0) == pytest.approx(
        GROWTH_01_075_105_T2, rel=1e-15
    )
    assert pf.gompertz_closed_form(tr, p, 0.1, 0.7) == pytest.approx(
        GROWTH_01_075_105_T07, rel=1e-15
    )
    tr2 = pf.PlantTraits(x=np.zeros(2), S=0.9, gamma=0.3)
    assert pf.gompertz_closed_form(tr2, p, 0.28, 5.0) == pytest.approx(
        GROWTH_028_09_03_T5, rel=1e-15
    )


def test_growth_limits(p):
    tr = pf.PlantTraits(x=np.zeros(2), S=0.75, gamma=1.05)
    assert pf.gompertz_closed_form(tr, p, 0.1, 0.0) == pytest.approx(0.1, rel=1e-14)
    assert pf.gompertz_closed_form(tr, p, 0.1, 200.0) == pytest.approx(0.75, rel=1e-12)
    frozen = pf.PlantTraits(x=np.zeros(2), S=0.75, gamma=0.0)
    assert pf.gompertz_closed_form(frozen, p, 0.1, 7.3) == pytest.approx(0.1, rel=1e-14)


def test_growth_matches_numeric_integration(p):
    tr = pf.PlantTraits(x=np.zeros(2), S=0.8, gamma=0.7)
    s0 = 0.12

    def rhs(t, y):
        return np.array([tr.gamma * y[0] * (math.log(tr.S / p.s_m) - math.log(y[0] / p.s_m))])

    sol = pf.solve_ode(rhs, 0.0, 6.0, np.array([s0]), rel_tol=1e-11, abs_tol=1e-13)
    for t in (0.5, 1.7, 3.0, 6.0):
        assert sol(t)[0] == pytest.approx(
            pf.gompertz_closed_form(tr, p, s0, t), rel=1e-8
        )


@settings(deadline=None, max_examples=100)
@given(
    s0=st.floats(0.06, 0.49),
    S=st.floats(0.5, 1.0),
    gamma=st.floats(0.01, 2.0),
    t=st.floats(0.0, 20.0),
)
def test_growth_stays_between_start_and_cap(s0, S, gamma, t):
    p = pf.ModelParams(s_m=0.05, R_M=3.0, sigma_x=0.5, sigma_r=1.32)
    tr = pf.PlantTraits(x=np.zeros(2), S=S, gamma=gamma)
    s = pf.gompertz_closed_form(tr, p, s0, t)
    lo, hi = min(s0, S), max(s0, S)
    assert lo - 1e-12 <= s <= hi + 1e-12


def test_gronwall_bound_solves_linear_comparison():
    env = pf.GronwallEnvelope(a=2.0, b=0.5, y0=1.0)
    # y' = a - b y through y0 has the exact solution a/b + (y0-a/b)e^{-bt}
    for t in (0.0, 0.3, 1.0, 4.0):
        expected = 4.0 + (1.0 - 4.0) * math.exp(-0.5 * t)
        assert pf.gronwall_bound(env, t) == pytest.approx(expected, rel=1e-14)
    assert pf.gronwall_bound(env, 0.0, direction="lower") == pytest.approx(1.0)
    with pytest.raises(ValueError):
        pf.gronwall_bound(env, 1.0, direction="sideways")
    with pytest.raises(ValueError):
        pf.GronwallEnvelope(a=1.0, b=0.0, y0=1.0)


def _traits(S=0.75, gamma=1.0, x=(0.0, 0.0)):
    return pf.PlantTraits(x=np.asarray(x, dtype=float), S=S, gamma=gamma)


def test_admissibility_accepts_valid_population(p):
    verdict = pf.validate_initial_config(p, [_traits(), _traits(S=0.9)], [0.1, 0.2])
    assert verdict
    assert verdict.index is None


def test_admissibility_flags_each_violation(p):
    bad_cap = pf.validate_initial_config(
        p, [_traits(), _traits(S=1.5)], [0.1, 0.1]
    )
    assert not bad_cap and bad_cap.index == 1
    assert "asymptotic" in bad_cap.reason

    bad_rate = pf.validate_initial_config(
        p, [_traits(gamma=0.0), _traits()], [0.1, 0.1]
    )
    assert not bad_rate and bad_rate.index == 0
    assert "growth rate" in bad_rate.reason

    bad_size = pf.validate_initial_config(
        p, [_traits(), _traits()], [0.1, 0.8]
    )
    assert not bad_size and bad_size.index == 1
    assert "initial size" in bad_size.reason

    at_minimum = pf.validate_initial_config(p, [_traits(), _traits()], [0.05, 0.1])
    assert not at_minimum and at_minimum.index == 0


def test_admissibility_raises_on_malformed_input(p):
    with pytest.raises(ValueError):
        pf.validate_initial_config(p, [_traits()], [0.1, 0.2])
    with pytest.raises(ValueError):
        pf.validate_initial_config(p, [_traits()], [0.1])


def test_params_validation():
    with pytest.raises(ValueError):
        pf.ModelParams(s_m=0.0, R_M=3.0, sigma_x=0.5, sigma_r=1.32)
    with pytest.raises(ValueError):
        pf.ModelParams(s_m=0.05, R_M=-1.0, sigma_x=0.5, sigma_r=1.32)
    p = pf.ModelParams(s_m=0.05, R_M=3.0, sigma_x=0.5, sigma_r=1.32)
    assert p.max_size == pytest.approx(0.05 * math.exp(3.0), rel=1e-15)


def test_traits_validation():
    with pytest.raises(ValueError):
        pf.PlantTraits(x=np.zeros(3), S=0.75, gamma=1.0)
    with pytest.raises(ValueError):
        pf.PlantTraits(x=np.zeros(2), S=-0.1, gamma=1.0)
    with pytest.raises(ValueError):
        pf.PlantTraits(x=np.zeros(2), S=0.75, gamma=-0.5)
