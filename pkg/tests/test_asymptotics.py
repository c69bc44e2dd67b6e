import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from kpztail.asymptotics import (
    ZETA_PRIME_MINUS_ONE,
    AsymptoticBreakdown,
    dlogq_ds_asymptotic,
    dlogq_dT_asymptotic,
    kpz_tail_bracket,
    log_q_asymptotic,
    log_q_expansion_fixed_T,
    naive_estimate,
    q_of,
    rate_phi,
    rate_phi_direct,
)
from kpztail.asymptotics import tw_tail_expansion
from kpztail.errors import DomainError, DominanceNotEstablished
from kpztail.kernels import Params

PI = math.pi


def _phi_mp(y):
    """Rate function straight from its definition, at the caller's precision."""
    y = mpmath.mpf(y)
    p = mpmath.pi
    return (4 / (15 * p**6) * (1 + p**2 * y) ** mpmath.mpf(2.5) - 4 / (15 * p**6)
            - 2 / (3 * p**4) * y - y**2 / (2 * p**2))


def _phi_oracle(y):
    # the definition cancels ~3 log10(1/y) digits for small y; pay for them
    extra = 0 if y == 0 or y >= 1 else int(-3 * math.log10(y))
    with mpmath.workdps(40 + extra):
        return float(_phi_mp(y))


def _t2phi_mp(s, T):
    T = mpmath.mpf(T)
    return T**2 * _phi_mp(mpmath.mpf(s) / T ** (mpmath.mpf(2) / 3))


def _asym_q(s, T):
    return log_q_asymptotic(Params(s, T)).total


# -- constants and phi ------------------------------------------------------


def test_zeta_prime_constant_provenance():
    with mpmath.workdps(30):
        assert abs(ZETA_PRIME_MINUS_ONE - float(mpmath.zeta(-1, derivative=1))) <= 1e-17


def test_phi_vanishes_to_second_order():
    assert rate_phi(0.0) == 0.0
    h = 1e-4
    assert abs((rate_phi(h) - rate_phi(0.0)) / h) <= 1e-8
    h = 1e-8
    assert abs((rate_phi(2 * h) - 2 * rate_phi(h) + rate_phi(0.0)) / h**2) <= 1e-8


def test_phi_small_and_large_y():
    assert abs(rate_phi(0.01) / (0.01**3 / 12) - 1) <= 0.05
    assert abs(rate_phi(1e4) / (4 / (15 * PI) * 1e4**2.5) - 1) <= 0.05


def test_phi_domain():
    with pytest.raises(DomainError):
        rate_phi(-1e-3)


@settings(max_examples=80, deadline=None)
@given(y=st.floats(0, 1e8))
def test_phi_matches_definition(y):
    assert rate_phi(y) == pytest.approx(_phi_oracle(y), rel=1e-13, abs=1e-300)


def test_phi_direct_form_agrees_where_well_conditioned():
    for y in (0.5, 3.0, 100.0):
        assert rate_phi_direct(y) == pytest.approx(rate_phi(y), rel=1e-11)


def test_phi_convex_on_grid():
    ys = np.linspace(0, 10, 100)
    vals = np.array([rate_phi(y) for y in ys])
    assert np.min(vals[2:] - 2 * vals[1:-1] + vals[:-2]) >= -1e-10


def test_q_of_no_cancellation():
    assert q_of(1e-20) == pytest.approx(PI**2 * 1e-20 / 2, rel=1e-15)


# -- log Q asymptotics ------------------------------------------------------


def test_breakdown_total_is_sum():
    b = AsymptoticBreakdown.from_terms(a=1.0, b=1e-17, c=-1.0)
    assert b.total == 1e-17
    for fn in (log_q_asymptotic, log_q_expansion_fixed_T, dlogq_ds_asymptotic, dlogq_dT_asymptotic):
        r = fn(Params(7.0, 2.0))
        assert r.total == pytest.approx(math.fsum(r.terms.values()), rel=1e-15)


def test_log_q_asymptotic_terms():
    p = Params(8.0, 3.0)
    r = log_q_asymptotic(p)
    y = 8.0 / 3.0 ** (2 / 3)
    assert list(r.terms) == ["T2_phi", "sqrt_correction"]
    assert r.terms["T2_phi"] == pytest.approx(-9.0 * rate_phi(y), rel=1e-15)
    assert r.terms["sqrt_correction"] == pytest.approx(-math.sqrt(1 + PI**2 * y) / 6, rel=1e-15)


def test_T2_phi_scales_as_T_squared():
    y = 2.5
    vals = [log_q_asymptotic(Params(y * T ** (2 / 3), T)).terms["T2_phi"] / T**2 for T in (0.5, 2.0, 30.0)]
    assert max(vals) - min(vals) <= 1e-14 * abs(vals[0])


def test_asymptotic_vs_fixed_T_at_100():
    p = Params(100.0, 1.0)
    a = log_q_asymptotic(p).total
    assert abs(a - log_q_expansion_fixed_T(p).total) <= 0.05 * abs(a)


def test_fixed_T_terms_at_six():
    r = log_q_expansion_fixed_T(Params(6.0, 1.0)).terms
    # listed to the displayed digits; compare within one unit of the last one
    expect = {"s52": (-7.486, 1e-3), "s2": (1.824, 1e-3), "s32": (-0.316, 1e-3),
              "s1": (0.0411, 1e-4), "s12_pi": (-1.282, 1e-3), "s12_pi5": (-0.0040, 1e-4)}
    assert list(r) == list(expect)
    for k, (v, unit) in expect.items():
        assert r[k] == pytest.approx(v, abs=unit)
    assert r["s52"] == naive_estimate(Params(6.0, 1.0))


@settings(max_examples=50, deadline=None)
@given(s=st.floats(1e-3, 1e5), T=st.floats(1e-3, 1e4))
def test_fixed_T_sign_pattern(s, T):
    signs = [math.copysign(1, v) for v in log_q_expansion_fixed_T(Params(s, T)).terms.values()]
    assert signs == [-1, 1, -1, 1, -1, -1]


def test_naive_estimate():
    assert naive_estimate(Params(1.0, 1.0)) == pytest.approx(-4 / (15 * PI), rel=1e-15)
    assert abs(naive_estimate(Params(1e4, 1.0)) / _asym_q(1e4, 1.0) - 1) <= 0.1


def test_crossover_to_cubic():
    s, y = 3.0, 1e-4
    T = (s / y) ** 1.5
    t2 = log_q_asymptotic(Params(s, T)).terms["T2_phi"]
    assert abs(t2 / (-(s**3) / 12) - 1) <= 0.05


# -- Tracy-Widom tail -------------------------------------------------------


def test_tw_tail_at_six():
    r = tw_tail_expansion(6.0)
    expect = -18 - math.log(6) / 8 + math.log(2) / 24 + ZETA_PRIME_MINUS_ONE
    assert r.total == pytest.approx(expect, abs=1e-14)
    assert list(r.terms) == ["tw_cubic", "tw_log", "tw_const"]


@pytest.mark.parametrize("s", [2.0, 3.0, 10.0])
def test_tw_cubic_dominates(s):
    t = tw_tail_expansion(s).terms
    assert abs(t["tw_cubic"]) > abs(t["tw_log"]) and abs(t["tw_cubic"]) > abs(t["tw_const"])


# -- tail bracket -----------------------------------------------------------


def test_bracket_at_ten():
    b = kpz_tail_bracket(Params(10.0, 1.0), 0.1, _asym_q)
    assert b.lower_A <= b.upper_B
    assert b.s_tilde == pytest.approx(10 + 3.1 * math.log(10), rel=1e-15)
    assert b.upper_B == pytest.approx(_asym_q(10.0, 1.0) + 1, rel=1e-15)
    assert b.lower_A == pytest.approx(math.log(2) + _asym_q(b.s_tilde, 1.0), rel=1e-15)


def test_bracket_width_scaling():
    ratios = []
    for s in (10.0, 30.0, 100.0):
        b = kpz_tail_bracket(Params(s, 1.0), 0.1, _asym_q)
        ratios.append((b.upper_B - b.lower_A) / (s**1.5 * math.log(s)))
    assert max(ratios) <= 2 * min(ratios)


def test_bracket_dominance_failure_is_explicit():
    with pytest.raises(DominanceNotEstablished):
        kpz_tail_bracket(Params(1.1, 1.0), 0.1, _asym_q)


def test_bracket_rejects_inverted_bounds():
    # a q_eval that grows with s would give lower > upper
    with pytest.raises(DominanceNotEstablished):
        kpz_tail_bracket(Params(5.0, 1.0), 0.1, lambda s, T: s)


def test_bracket_validation():
    with pytest.raises(DomainError):
        kpz_tail_bracket(Params(1.0, 1.0), 0.1, _asym_q)
    with pytest.raises(DomainError):
        kpz_tail_bracket(Params(4.0, 1.0), 0.0, _asym_q)


@settings(max_examples=30, deadline=None)
@given(s=st.floats(1.01, 500), T=st.floats(0.1, 50), eps=st.floats(0.01, 2))
def test_bracket_never_silently_invalid(s, T, eps):
    try:
        b = kpz_tail_bracket(Params(s, T), eps, _asym_q)
    except DominanceNotEstablished:
        return
    assert b.lower_A <= b.upper_B
    assert b.s_tilde > s


# -- derivative asymptotics -------------------------------------------------


def _mp_diff_T(s, T):
    with mpmath.workdps(50):
        return float(mpmath.diff(lambda t: _t2phi_mp(s, t), mpmath.mpf(T)))


def _mp_diff_s(s, T):
    with mpmath.workdps(50):
        return float(mpmath.diff(lambda x: _t2phi_mp(x, T), mpmath.mpf(s)))


GRID = [(s, T) for s in np.linspace(1, 100, 5) for T in np.linspace(0.5, 10, 5)]


@pytest.mark.parametrize("s,T", GRID)
def test_derivative_identities(s, T):
    dT = dlogq_dT_asymptotic(Params(s, T)).terms
    ds = dlogq_ds_asymptotic(Params(s, T)).terms
    assert abs(dT["q5"] + dT["q4"] + _mp_diff_T(s, T)) <= 1e-8 * max(1.0, abs(dT["q5"]))
    assert abs(ds["q3"] + ds["q2"] + _mp_diff_s(s, T)) <= 1e-8 * max(1.0, abs(ds["q3"]))


def test_derivative_identity_float_central_difference():
    s, T = 4.0, 1.5
    f = lambda s_, T_: T_**2 * rate_phi(s_ / T_ ** (2 / 3))  # noqa: E731
    h = 1e-5
    fd_T = (f(s, T + h) - f(s, T - h)) / (2 * h)
    fd_s = (f(s + h, T) - f(s - h, T)) / (2 * h)
    dT = dlogq_dT_asymptotic(Params(s, T)).terms
    ds = dlogq_ds_asymptotic(Params(s, T)).terms
    assert abs(dT["q5"] + dT["q4"] + fd_T) <= 1e-9
    assert abs(ds["q3"] + ds["q2"] + fd_s) <= 1e-9


def test_dT_sign_and_scaling():
    assert dlogq_dT_asymptotic(Params(10.0, 1.0)).total < 0
    y = 3.0
    vals = [dlogq_dT_asymptotic(Params(y * T ** (2 / 3), T)).terms["q5"] / T for T in (0.5, 4.0, 50.0)]
    assert max(vals) - min(vals) <= 1e-13 * abs(vals[0])


def test_ds_terms_at_five():
    t = dlogq_ds_asymptotic(Params(5.0, 1.0)).terms
    assert t["q3"] == pytest.approx(-1.55, abs=5e-3)
    assert t["q2"] == pytest.approx(-0.381, abs=1e-3)
    assert t["inv_sqrt"] == pytest.approx(-0.117, abs=1e-3)


def test_ds_integrates_to_fixed_T_expansion():
    s0, s1 = 5.0, 20.0
    integral = integrate.quad(lambda s: dlogq_ds_asymptotic(Params(s, 1.0)).total, s0, s1)[0]
    diff = log_q_expansion_fixed_T(Params(s1, 1.0)).total - log_q_expansion_fixed_T(Params(s0, 1.0)).total
    assert abs(integral - diff) <= 5 * math.log(s1) ** 2


@pytest.mark.parametrize("fn", [log_q_asymptotic, log_q_expansion_fixed_T, dlogq_ds_asymptotic, dlogq_dT_asymptotic])
def test_positive_s_required(fn):
    with pytest.raises(DomainError):
        fn(Params(-1.0, 1.0))
