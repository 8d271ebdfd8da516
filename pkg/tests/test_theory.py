import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from pint4th import theory

# frozen from 30-digit mpmath evaluations of the closed forms
RHO_LINCH_FULLY = 1.041895273370333e-3
RHO_LINCH_CONT = 1.041895189931648e-3
C1_EXAMPLE = 0.4018775720164609
RHO_CH_FULLY = 4.034991445818135e-3
RHO_CH_SEMI = 9.130994838295425e-3


def test_biharmonic_continuous():
    assert theory.rho_biharmonic_continuous(1e-3, 1.0, 0.0) == pytest.approx(1e-3 / 0.999)
    assert theory.rho_biharmonic_continuous(1e-3, 1.0, 50.0) == pytest.approx(0.0, abs=1e-300)
    assert theory.rho_biharmonic_continuous(0.5, 0.0, 3.0) == pytest.approx(1.0)
    two = theory.rho_biharmonic_continuous(0.1, 1.0, 1.0, xi_min=1.0)
    q = 0.1 * math.exp(-2.0)
    assert two == pytest.approx(q / (1 - q))


def test_general_fourth_continuous():
    q = 0.1 * math.exp(-2.0)
    assert theory.rho_general_fourth_continuous(0.1, 1.0, 1.0) == pytest.approx(q / (1 - q))


def test_discrete_simple():
    assert theory.rho_discrete_simple(0.001) == pytest.approx(1.001001e-3)
    assert theory.rho_discrete_simple(0.25) == pytest.approx(1 / 3)
    with pytest.raises(ValueError):
        theory.rho_discrete_simple(0.5)


def test_linch_continuous():
    r = theory.rho_linch_continuous(1e-3, 1.0, 0.1, 0.2)
    assert r.regime == "amplifying" and not r.vacuous
    assert r.value == pytest.approx(RHO_LINCH_CONT, rel=1e-12)
    assert r.prefactor == pytest.approx(math.exp(0.04))
    assert theory.rho_linch_continuous(1e-3, 1.0, 0.1, 0.0).value == pytest.approx(1e-3 / 0.999)
    big = theory.rho_linch_continuous(1e-3, 1.0, 100.0, 0.2).value
    assert big == pytest.approx(1e-3 / 0.999, rel=1e-6)
    with pytest.raises(ValueError):
        theory.rho_linch_continuous(0.6, 1.0, 0.1, 0.2)


def test_linch_continuous_2d_and_vacuous():
    r2 = theory.rho_linch_continuous(1e-3, 1.0, 0.1, 0.2, dim=2)
    assert r2.prefactor == pytest.approx(math.exp(0.08))
    vac = theory.rho_linch_continuous(0.4, 1.0, 0.01, 0.5)
    assert vac.vacuous and vac.value == math.inf


def test_linch_semidiscrete():
    r = theory.rho_linch_semidiscrete(1e-3, 1.0, 0.1, 0.2)
    assert r.value == pytest.approx(RHO_LINCH_CONT, rel=1e-12)
    assert theory.rho_linch_semidiscrete(1e-3, 1.0, 0.1, 0.0).value == pytest.approx(1e-3 / 0.999)
    small_T = theory.rho_linch_semidiscrete(1e-3, 1e-8, 0.1, 0.2).value
    assert small_T == pytest.approx(1e-3 / 0.999, rel=1e-6)


def test_linch_fully_discrete():
    assert theory.rho_linch_fully_discrete(1e-3, 1e-4, 10000, 0.1, 0.2, 1.0) == pytest.approx(
        RHO_LINCH_FULLY, rel=1e-12)
    assert theory.rho_linch_fully_discrete(1e-3, 1e-4, 10000, 0.1, 0.0, 1.0) == pytest.approx(
        1e-3 / 0.999)
    huge = theory.rho_linch_fully_discrete(1e-3, 1e-8, 100, 10.0, 0.2, 0.5)
    assert huge == pytest.approx(1e-3 / 0.999, rel=1e-9)


def test_stability_function():
    assert theory.stability_function(1.0, 0.5) == pytest.approx(1 / 1.5)
    assert theory.stability_function(0.5, 0.5) == pytest.approx(0.75 / 1.25)


@pytest.mark.parametrize("T,eps,beta", [(1.0, 0.1, 0.2), (0.5, 0.2, 0.4), (2.0, 0.05, 0.1)])
def test_extremum_locations(T, eps, beta):
    z = np.linspace(0, 4 * beta**2 * math.sqrt(T) / eps**2, 200001)
    g = -(eps**2) * z**2 + beta**2 * math.sqrt(T) * z
    z_star = beta**2 * math.sqrt(T) / (2 * eps**2)
    assert abs(z[np.argmax(g)] - z_star) <= z[1] - z[0]
    zc = np.linspace(-4 * beta**2 * T / eps**2, 0, 200001)
    gc = eps**2 / T * zc**2 + beta**2 * zc
    assert abs(zc[np.argmin(gc)] + beta**2 * T / (2 * eps**2)) <= zc[1] - zc[0]


def test_ch_constants():
    c = theory.ch_constants(0.0, 0.1, 1.0, 0.1, 11, 0.1, 10)
    assert c.c_star == 0.0
    assert c.L == pytest.approx(16 * 0.01 / (math.sqrt(11) * 1e-4))
    assert theory.ch_constants(11.0, math.sqrt(0.05), 1.0, 0.1, 11, 0.1, 10).c_star == pytest.approx(308.0)
    bad = theory.ch_constants(11.0, 0.01, 1.0, 0.1, 11, 0.1, 10)
    assert not bad.L_valid and math.isnan(bad.C1)
    with_alpha = theory.ch_constants(0.0, 0.1, 1.0, 0.1, 11, 0.1, 10, alpha=0.01)
    assert with_alpha.gamma == pytest.approx(0.01 / 0.99)


def test_ch_factors():
    assert theory.rho_ch_fully_discrete(0.01, 1.0, 0.1, 10) == pytest.approx(RHO_CH_FULLY, rel=1e-12)
    assert math.sqrt((1 / 1.2) ** 10) == pytest.approx(C1_EXAMPLE, rel=1e-14)
    assert theory.rho_ch_fully_discrete(0.01, 0.0, 0.1, 10) == pytest.approx(0.01 / 0.99)
    assert theory.rho_ch_fully_discrete(0.01, 1.0, 1e12, 10) == pytest.approx(0.0, abs=1e-40)
    assert theory.rho_ch_semidiscrete(0.01, 1.0, 0.1) == pytest.approx(RHO_CH_SEMI, rel=1e-12)
    assert theory.rho_ch_semidiscrete(0.01, 1.0, 0.0) == pytest.approx(0.01 / 0.99)
    assert theory.rho_ch_semidiscrete(0.01, 1e6, 1.0) == 0.0
    with pytest.raises(ValueError):
        theory.rho_ch_semidiscrete(1.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        theory.rho_ch_semidiscrete(0.1, -1.0, 1.0)


@given(a=st.floats(1e-6, 0.45), b=st.floats(1e-6, 0.45))
def test_monotone_in_alpha(a, b):
    lo, hi = sorted((a, b))
    if hi - lo < 1e-9:
        return
    assert theory.rho_discrete_simple(lo) < theory.rho_discrete_simple(hi)
    assert (theory.rho_linch_fully_discrete(lo, 1e-3, 100, 0.1, 0.2, 1.0)
            < theory.rho_linch_fully_discrete(hi, 1e-3, 100, 0.1, 0.2, 1.0))
    assert theory.rho_ch_semidiscrete(lo, 1.0, 0.1) < theory.rho_ch_semidiscrete(hi, 1.0, 0.1)
    assert (theory.rho_linch_continuous(lo, 1.0, 0.3, 0.2).value
            < theory.rho_linch_continuous(hi, 1.0, 0.3, 0.2).value)


def test_bound_helpers():
    assert theory.bound_sequence(0.1, 2.0, 3) == pytest.approx([0.2, 0.02, 0.002])
    assert theory.predicted_iterations(1e-3, 1.0, 1e-10) == 4
    assert theory.predicted_iterations(1e-3, 1e-12, 1e-10) == 0
    assert theory.predicted_iterations(1.5, 1.0, 1e-10) == math.inf
