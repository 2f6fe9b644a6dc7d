import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import special

from l2torsion import heatzeta as hz
from l2torsion.errors import (
    AsymptoticsMismatch,
    BadTable,
    DivergentTail,
    IllConditionedFit,
    IndexOutOfRange,
    MissingKappas,
)


def c_oracle(i, n, h=1e-20):
    # complex-step derivative of 1 / (Gamma(s) (s - (n-i)/2)) at s = 0
    s = 1j * h
    return (special.rgamma(s) / (s - (n - i) / 2)).imag / h


def test_c_coeff_diagonal_is_euler_gamma():
    for n in range(8):
        assert hz.c_coeff(n, n) == pytest.approx(0.5772156649, abs=1e-10)


@pytest.mark.parametrize("n", range(8))
def test_c_coeff_matches_oracle(n):
    for i in range(n):
        assert hz.c_coeff(i, n) == pytest.approx(2 / (i - n), abs=1e-15)
        assert hz.c_coeff(i, n) == pytest.approx(c_oracle(i, n), abs=1e-8)


def test_c_coeff_range():
    with pytest.raises(IndexOutOfRange):
        hz.c_coeff(3, 2)
    with pytest.raises(IndexOutOfRange):
        hz.c_coeff(-1, 2)


@given(st.floats(0.05, 50.0))
@settings(max_examples=25, deadline=None)
def test_exponential_identity(mu):
    # zeta'(0) + tail for a single eigenvalue mu is -ln mu
    m = hz.exponential_model(mu)
    z = hz.small_time_zeta_derivative(m, 1).value + hz.large_time_integral(m, 1).value
    assert z == pytest.approx(-math.log(mu), abs=1e-8)


@pytest.mark.parametrize("L", [0.5, 1.0, math.pi])
def test_circle_cancellation(L):
    b = hz.log_torsion(hz.circle_model(L))
    ref = 2 * L / math.sqrt(4 * math.pi)
    assert b.zeta_derivatives[1] == pytest.approx(-ref, abs=1e-12)
    assert b.tails[1] == pytest.approx(ref, abs=1e-12)
    assert abs(b.total) < 1e-8


def test_torsion_scales_with_volume():
    t, h = hz.h3_table()
    m1 = hz.plancherel_model({1: (t, h)}, 3, 1.0)
    m2 = hz.plancherel_model({1: (t, h)}, 3, 2.0)
    a, b = hz.log_torsion(m1).total, hz.log_torsion(m2).total
    assert b == pytest.approx(2 * a, rel=1e-6)
    assert hz.log_torsion(m2).per_volume(2.0) == pytest.approx(a, rel=1e-6)


def test_fit_kappa_exact():
    t = np.geomspace(1e-4, 1e-2, 16)
    th = 2 * t**-0.5 + 3
    k = hz.fit_kappa(t, th, 1).kappas
    assert k == pytest.approx([2, 3], abs=1e-9)


def test_fit_kappa_h3():
    t = np.asarray(hz.FIT_TIMES)
    k = hz.fit_kappa(t, hz.h3_local_trace(t), 3).kappas
    assert k[0] == pytest.approx((4 * math.pi) ** -1.5, rel=1e-6)


def test_fit_kappa_too_few_points():
    with pytest.raises(IllConditionedFit):
        hz.fit_kappa([1e-3, 2e-3], [1.0, 1.0], 3)


def test_missing_kappas():
    with pytest.raises(MissingKappas):
        hz.HeatTraceModel(1, {1: lambda t: 1.0}, {1: [1.0]})


def test_weyl_mismatch():
    t = np.geomspace(1e-4, 10, 60)
    m = hz.HeatTraceModel(3, {1: hz.TraceTable(t, np.exp(-t))}, {1: [0.0, 0.0, 0.0, 1.0]}, weyl=True)
    with pytest.raises(AsymptoticsMismatch):
        hz.log_torsion(m)


def test_divergent_tail():
    m = hz.HeatTraceModel(1, {1: lambda t: 1.0}, {1: [0.0, 1.0]})
    with pytest.raises(DivergentTail):
        hz.large_time_integral(m, 1)


def test_table_tail_power_law():
    t = np.geomspace(1e-3, 100, 200)
    tab = hz.TraceTable(t, t**-1.5)
    assert tab(1000.0) == pytest.approx(1000.0**-1.5, rel=1e-6)


def test_bad_tables():
    with pytest.raises(BadTable):
        hz.TraceTable([1, 2, 3], [1, 1, 1])
    with pytest.raises(BadTable):
        hz.TraceTable([1, 2, 3, 4], [1, -1, 1, 1])
    with pytest.raises(BadTable):
        hz.plancherel_model({0: ([1, 2, 3, 4], [1, 1, 1, 1])}, 2, 1.0)


def test_h3_kernel_diagonal():
    t = np.array([0.1, 1.0])
    assert np.allclose(hz.h3_heat_kernel(t, 0.0), hz.h3_local_trace(t))


def test_alt_constants_variant_changes_constant():
    assert hz.c_coeff(0, 3, alt_constants=True) != hz.c_coeff(0, 3)
