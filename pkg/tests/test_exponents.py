import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conereg.errors import DisconnectedLinkError
from conereg.exponents import (
    UNBOUNDED, Regime, check_suspension_invariance, exponent_report, holder_exponent,
    indicial_exponent, indicial_exponents, nu1_from_lambda1, nu_of_space, parse_p,
    suspension_lambda1,
)
from conereg.links import Circle, RoundSphere, Suspension, link_spectrum


def bisect_nu1(lam, ell, tol=1e-15):
    """Independent oracle: bisection on nu (ell - 1 + nu) - lam over [0, 1]."""
    if lam >= ell:
        return 1.0
    lo, hi = 0.0, 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if mid * (ell - 1 + mid) < lam:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@pytest.mark.parametrize("lam,ell,expected", [(5, 5, 1.0), (0.25, 1, 0.5), (0.75, 2, 0.5)])
def test_nu1_examples(lam, ell, expected):
    assert nu1_from_lambda1(lam, ell) == pytest.approx(expected, abs=1e-14)
    assert bisect_nu1(lam, ell) == pytest.approx(expected, abs=1e-12)


def test_nu1_rejects_nonpositive():
    with pytest.raises(DisconnectedLinkError):
        nu1_from_lambda1(0.0, 2)


@settings(max_examples=300, deadline=None)
@given(st.floats(1e-6, 50.0), st.integers(1, 12))
def test_nu1_matches_bisection(lam, ell):
    assert abs(nu1_from_lambda1(lam, ell) - bisect_nu1(lam, ell)) < 1e-10


@settings(max_examples=200, deadline=None)
@given(st.floats(1e-6, 30.0), st.floats(1e-6, 30.0), st.integers(1, 8))
def test_nu1_monotone_and_clamped(a, b, ell):
    lo, hi = sorted((a, b))
    assert nu1_from_lambda1(lo, ell) <= nu1_from_lambda1(hi, ell)
    if lo >= ell:
        assert nu1_from_lambda1(lo, ell) == 1.0


@settings(max_examples=300, deadline=None)
@given(st.floats(1e-9, 1e3), st.integers(2, 12))
def test_quadratic_inversion_exact(lam, n):
    nu = indicial_exponent(lam, n)
    assert abs(nu * (n - 2 + nu) - lam) <= 1e-12 * lam


@pytest.mark.parametrize("lam,n,expected", [(0, 5, 0.0), (1, 2, 1.0), (0.75, 3, 0.5)])
def test_indicial_examples(lam, n, expected):
    assert indicial_exponent(lam, n) == pytest.approx(expected, abs=1e-15)


def test_indicial_exponents_of_spectrum():
    spec = link_spectrum(RoundSphere(2), count=9)
    nus = indicial_exponents(spec)
    assert np.allclose(nus, [0, 1, 1, 1, 2, 2, 2, 2, 2])


def test_holder_examples():
    r = holder_exponent(1.0, 3, UNBOUNDED)
    assert r.mu == 1.0 and r.regime is Regime.LOG_LIPSCHITZ
    assert holder_exponent(0.5, 3, 3).mu == pytest.approx(0.5)
    r = holder_exponent(0.9, 4, 4)
    assert r.mu == pytest.approx(0.5) and r.regime is Regime.HOLDER_MU
    assert r.limited_by == "potential"
    assert holder_exponent(0.5, 2, "inf").regime is Regime.HOLDER_NU


def test_holder_rejects_small_p():
    with pytest.raises(ValueError):
        holder_exponent(0.5, 4, 2)
    with pytest.raises(ValueError):
        holder_exponent(0.5, 4, 1.5)


def test_holder_report_fields():
    r = holder_exponent(0.5, 3, 6, metric_gamma=0.7)
    assert r.gamma_bar == pytest.approx(min(0.7, 2 - 0.5))
    assert r.delta == pytest.approx(0.5)
    d = holder_exponent(0.5, 3).to_dict()
    assert d["p_potential"] == "inf" and d["regime"] == "Holder_nu"


@settings(max_examples=200, deadline=None)
@given(st.floats(0.01, 1.0), st.integers(2, 8), st.floats(0.51, 50.0))
def test_regime_stable_under_p_jitter(nu, n, p_over):
    p = p_over * n + 1e-6
    base = holder_exponent(nu, n, p)
    for dp in (-1e-9, 1e-9):
        other = holder_exponent(nu, n, p + dp)
        assert other.regime == base.regime
        if abs(nu - (1 - n / (2 * p))) > 1e-7:
            assert other.limited_by == base.limited_by


def test_exponent_report_on_links():
    r = exponent_report(Circle(4 * math.pi))
    assert r.nu1 == pytest.approx(0.5) and r.regime is Regime.HOLDER_NU
    assert exponent_report(RoundSphere(2)).regime is Regime.LOG_LIPSCHITZ
    assert exponent_report(Circle(2 * math.pi), 2).mu == pytest.approx(0.5)
    # a 12.566 circumference is slightly shorter than 4 pi
    assert exponent_report(Circle(12.566)).nu1 == pytest.approx(0.5, abs=1e-4)


def test_nu_of_space_is_minimum():
    links = [Circle(2 * math.pi), Circle(4 * math.pi), RoundSphere(2)]
    assert nu_of_space(links) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        nu_of_space([])


def test_parse_p():
    assert parse_p("inf") == UNBOUNDED and parse_p("Infinity") == UNBOUNDED
    assert parse_p("3") == 3.0


@pytest.mark.parametrize("mu1,n,k,expected", [(1, 3, 1, 2.0), (0.25, 3, 1, 0.75), (0.25, 4, 2, 1.25)])
def test_suspension_lambda1_examples(mu1, n, k, expected):
    assert suspension_lambda1(mu1, n, k) == pytest.approx(expected, abs=1e-14)


def test_suspension_lambda1_range():
    with pytest.raises(ValueError):
        suspension_lambda1(1.0, 3, 2)
    with pytest.raises(ValueError):
        suspension_lambda1(1.0, 3, 0)


@pytest.mark.parametrize("L,k,expected", [(4 * math.pi, 1, 0.5), (2 * math.pi, 1, 1.0),
                                          (4 * math.pi, 2, 0.5)])
def test_suspension_invariance_examples(L, k, expected):
    chk = check_suspension_invariance(Circle(L), k)
    assert chk.nu_base == pytest.approx(expected)
    assert chk.gap <= 1e-12


@pytest.mark.parametrize("L", [2 * math.pi, 3 * math.pi, 4 * math.pi, 6 * math.pi])
@pytest.mark.parametrize("k", [1, 2, 3])
def test_suspension_invariance_discretized(L, k):
    assert check_suspension_invariance(Circle(L), k, method="closed").gap <= 1e-10
    assert check_suspension_invariance(Circle(L), k, method="discretized").gap <= 1e-3


def test_closed_form_matches_discretized_suspension_spectrum():
    base = Circle(3 * math.pi)
    closed = suspension_lambda1(link_spectrum(base, count=2).lambda1, 4, 2)
    disc = link_spectrum(Suspension(base, 2), count=2).lambda1
    assert disc == pytest.approx(closed, abs=1e-8)


def test_suspension_dimension_mismatch():
    with pytest.raises(ValueError):
        check_suspension_invariance(Circle(1.0), 1, n=5)
