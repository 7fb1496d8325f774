"""Stepsize / switch-probability / batch / bound calculators against hand-derived values."""

import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from marina_sim.numcore import UsageError
from marina_sim.theory import (
    TheoryInputs,
    lyapunov,
    recommended_batch,
    recommended_p,
    theoretical_bound,
    theoretical_stepsize,
)


# ---------------------------------------------------------------------------
# stepsizes


def test_marina_omega_zero_is_inverse_L():
    inp = TheoryInputs(L=1.0, omega=0.0, n=5)
    for p in (0.1, 0.5, 1.0):
        assert theoretical_stepsize("marina", inp, p) == 1.0


def test_marina_hand_value():
    # (1-p) omega / (p n) = 0.75*3/(0.25*3) = 3 -> 1/(2(1+sqrt(3)))
    inp = TheoryInputs(L=2.0, omega=3.0, n=3)
    got = theoretical_stepsize("marina", inp, 0.25)
    assert got == pytest.approx(1.0 / (2.0 * (1.0 + math.sqrt(3.0))))
    assert got == pytest.approx(0.18301, abs=1e-5)


def test_vr_fs_hand_value():
    inp = TheoryInputs(L=1.0, calL=1.0, omega=0.0, n=1, b_prime=1)
    assert theoretical_stepsize("vr_fs", inp, 0.5) == pytest.approx(0.5)


def test_pp_degenerate_is_inverse_L():
    inp = TheoryInputs(L=4.0, omega=0.0, n=3, r=3)
    assert theoretical_stepsize("pp", inp, 1.0) == pytest.approx(0.25)


def test_pl_variants_cap_at_p_over_2mu():
    inp = TheoryInputs(L=1.0, omega=0.0, n=1, mu=10.0)
    # 1/L = 1 but p/(2 mu) = 0.005 binds
    assert theoretical_stepsize("marina_pl", inp, 0.1) == pytest.approx(0.005)


def test_pl_factor_two_inside_sqrt():
    inp = TheoryInputs(L=1.0, omega=8.0, n=2, mu=1e-9)
    p = 0.5
    plain = theoretical_stepsize("marina", inp, p)
    pl = theoretical_stepsize("marina_pl", inp, p)
    # (1-p) omega/(p n) = 4 -> 1/(1+2); doubled -> 1/(1+sqrt(8))
    assert plain == pytest.approx(1.0 / 3.0)
    assert pl == pytest.approx(1.0 / (1.0 + math.sqrt(8.0)))


def test_stepsize_input_validation():
    inp = TheoryInputs(L=1.0)
    with pytest.raises(UsageError):
        theoretical_stepsize("marina", inp, 0.0)
    with pytest.raises(UsageError):
        theoretical_stepsize("nope", inp, 0.5)
    with pytest.raises(UsageError):
        theoretical_stepsize("marina", TheoryInputs(L=0.0), 0.5)
    with pytest.raises(UsageError):
        theoretical_stepsize("marina_pl", TheoryInputs(L=1.0, mu=None), 0.5)


@settings(max_examples=80, deadline=None)
@given(
    st.sampled_from(["marina", "vr_fs", "vr_online", "pp"]),
    st.floats(0.01, 1.0),
    st.floats(0.0, 50.0),
    st.integers(1, 64),
)
def test_stepsize_monotone_in_omega_and_p(variant, p, omega, n):
    base = dict(L=1.5, calL=1.0, n=n, r=n, b_prime=2)
    lo = theoretical_stepsize(variant, TheoryInputs(omega=omega, **base), p)
    hi = theoretical_stepsize(variant, TheoryInputs(omega=omega + 1.0, **base), p)
    assert hi <= lo * (1 + 1e-12)  # nonincreasing in omega
    if p < 1.0:
        bigger_p = theoretical_stepsize(variant, TheoryInputs(omega=omega, **base), min(1.0, p * 1.5))
        assert bigger_p >= lo * (1 - 1e-12)  # nondecreasing in p


@settings(max_examples=50, deadline=None)
@given(st.floats(0.01, 1.0), st.floats(0.1, 20.0), st.integers(1, 32))
def test_vr_at_zero_calL_matches_marina(p, omega, n):
    marina = theoretical_stepsize("marina", TheoryInputs(L=2.0, omega=omega, n=n), p)
    vr = theoretical_stepsize("vr_fs", TheoryInputs(L=2.0, calL=0.0, omega=omega, n=n), p)
    # 1/(L(1+s)) == 1/(L + L s) identically
    assert vr == pytest.approx(marina, rel=1e-12)


def test_stepsize_nondecreasing_in_n():
    for n in range(1, 10):
        a = theoretical_stepsize("marina", TheoryInputs(L=1.0, omega=5.0, n=n), 0.2)
        b = theoretical_stepsize("marina", TheoryInputs(L=1.0, omega=5.0, n=n + 1), 0.2)
        assert b >= a


# ---------------------------------------------------------------------------
# recommended p and b


def test_recommended_p_marina():
    inp = TheoryInputs(L=1.0, zeta=1.0, d=100)
    assert recommended_p("marina", inp) == pytest.approx(0.01)


def test_recommended_p_identity_is_one():
    inp = TheoryInputs(L=1.0, zeta=20.0, d=20)
    assert recommended_p("marina", inp) == 1.0


def test_recommended_p_vr_fs():
    inp = TheoryInputs(L=1.0, zeta=1.0, d=10, m=9, b_prime=1)
    assert recommended_p("vr_fs", inp) == pytest.approx(0.1)


def test_recommended_p_vr_online():
    inp = TheoryInputs(L=1.0, zeta=5.0, d=10, b=7, b_prime=1)
    assert recommended_p("vr_online", inp) == pytest.approx(0.125)


def test_recommended_p_pp():
    inp = TheoryInputs(L=1.0, zeta=10.0, d=10, n=4, r=4)
    assert recommended_p("pp", inp) == 1.0
    inp2 = TheoryInputs(L=1.0, zeta=1.0, d=10, n=4, r=2)
    assert recommended_p("pp", inp2) == pytest.approx(0.05)


def test_recommended_batch_nonconvex():
    assert recommended_batch("nonconvex", TheoryInputs(L=1.0, sigma_sq=1.0, n=10, eps=0.1)) == 10


def test_recommended_batch_zero_noise():
    assert recommended_batch("nonconvex", TheoryInputs(L=1.0, sigma_sq=0.0, n=10, eps=0.1)) == 1


def test_recommended_batch_pl():
    inp = TheoryInputs(L=1.0, sigma_sq=1.0, n=10, mu=0.1, eps=0.01)
    assert recommended_batch("pl", inp) == 100


def test_recommended_batch_validation():
    with pytest.raises(UsageError):
        recommended_batch("nonconvex", TheoryInputs(L=1.0, eps=0.0))
    with pytest.raises(UsageError):
        recommended_batch("bogus", TheoryInputs(L=1.0, eps=0.1))


# ---------------------------------------------------------------------------
# bounds


def test_bound_nonconvex_hand_value():
    inp = TheoryInputs(L=1.0, omega=0.0, delta0=1.0)
    assert theoretical_bound("marina", inp, 0.5, 100, 1.0) == pytest.approx(0.04)


def test_bound_inverse_proportional_in_gamma_K():
    inp = TheoryInputs(L=1.0, omega=0.0, delta0=3.0)
    b1 = theoretical_bound("marina", inp, 0.5, 100, 1.0)
    assert theoretical_bound("marina", inp, 0.25, 100, 1.0) == pytest.approx(2 * b1)
    assert theoretical_bound("marina", inp, 0.5, 200, 1.0) == pytest.approx(b1 / 2)


def test_bound_pl_hand_value():
    inp = TheoryInputs(L=1.0, omega=0.0, mu=1.0, delta0=1.0)
    # gamma mu = 0.1 -> 0.9^10; use gamma below the cap p/(2 mu)
    got = theoretical_bound("marina_pl", inp, 0.1, 10, 1.0)
    assert got == pytest.approx(0.9**10)
    assert got == pytest.approx(0.348678, abs=1e-6)


def test_bound_online_hand_value():
    inp = TheoryInputs(L=1.0, omega=0.0, calL=0.0, n=1, b=10, sigma_sq=1.0, delta0=0.0)
    assert theoretical_bound("vr_online", inp, 0.5, 2, 0.5) == pytest.approx(0.2)


def test_bound_warns_when_gamma_exceeds_max():
    inp = TheoryInputs(L=1.0, omega=0.0, delta0=1.0)
    with pytest.warns(UserWarning):
        theoretical_bound("marina", inp, 5.0, 10, 1.0)


# ---------------------------------------------------------------------------
# Lyapunov


def test_lyapunov_exact_gradient():
    assert lyapunov(0.7, 0.0, 0.3, 0.5) == pytest.approx(0.7)


def test_lyapunov_nonconvex_coefficient():
    assert lyapunov(1.0, 4.0, 0.5, 0.5, mode="nonconvex") == pytest.approx(3.0)


def test_lyapunov_pl_coefficient():
    assert lyapunov(1.0, 4.0, 0.5, 0.5, mode="pl") == pytest.approx(5.0)


def test_lyapunov_rejects_unknown_mode():
    with pytest.raises(UsageError):
        lyapunov(1.0, 1.0, 0.5, 0.5, mode="bogus")
