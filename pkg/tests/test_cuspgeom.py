import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from l2torsion import cuspgeom as cg
from l2torsion.errors import BadRange, InsufficientData, MissingField, NonOddDimension

M3 = cg.CuspModel(3, (1.0, 2.5), 4.0)


def test_requires_odd_dimension():
    with pytest.raises(NonOddDimension):
        cg.CuspModel(4, (1.0,), 1.0)
    with pytest.raises(NonOddDimension):
        cg.analytic_torsion_estimate(cg.h2_example(), 1.0)


@given(st.floats(0.0, 30.0), st.floats(0.01, 5.0))
@settings(max_examples=50, deadline=None)
def test_slab_is_integral(R, w):
    want = M3.section_total * integrate.quad(lambda t: math.exp(-2 * t), R, R + w, epsrel=1e-13)[0]
    assert cg.vol_slab(M3, R, R + w) == pytest.approx(want, rel=1e-11)


@pytest.mark.parametrize("R", np.arange(1.0, 21.0))
def test_three_dimensional_factors(R):
    f = cg.stated_scaling(R)
    assert cg.vol_slab(M3, R, R + 1) / cg.vol_slab(M3, 1, 2) == pytest.approx(f, rel=2e-15)
    assert cg.vol_boundary(M3, R) / cg.vol_boundary(M3, 1) == pytest.approx(f, rel=2e-15)


def test_general_exponent():
    m5 = cg.CuspModel(5, (1.0,), 0.0)
    assert cg.vol_boundary(m5, 1.0) == pytest.approx(math.exp(-4))
    assert cg.vol_boundary(m5, 1.0, exponent=2) == pytest.approx(math.exp(-2))


def test_boundary_decreases_to_zero():
    v = [cg.vol_boundary(M3, R) for R in np.linspace(0, 40, 81)]
    assert np.all(np.diff(v) < 0) and v[-1] < 1e-30


def test_thick_part_increases_to_total():
    v = [cg.vol_thick(M3, R) for R in np.linspace(0, 30, 31)]
    assert np.all(np.diff(v) >= 0) and np.all(np.diff(v[:10]) > 0)
    assert v[-1] == pytest.approx(cg.vol_total(M3), rel=1e-15)


def test_bad_range():
    with pytest.raises(BadRange):
        cg.vol_slab(M3, 2.0, 1.0)


def test_h2_area():
    # fundamental domain |x| <= 1 above the two unit-diameter half circles
    area = integrate.quad(lambda x: 1 / math.sqrt(0.25 - (abs(x) - 0.5) ** 2), -1, 1, points=[0.0])[0]
    m = cg.h2_example()
    assert area == pytest.approx(2 * math.pi, rel=1e-9)
    assert cg.vol_total(m) == pytest.approx(2 * math.pi)
    assert m.k == 3


@given(st.integers(-10**9, 10**9), st.integers(-10**9, 10**9), st.integers(-10**9, 10**9), st.integers(1, 8))
@settings(max_examples=100, deadline=None)
def test_anomaly_arithmetic_exact(top_rho, anomaly, an_triv, dim):
    q = Fraction(1, 997)
    row = {
        "logTan_rho": top_rho * q - dim * anomaly * q,
        "logTan_triv": an_triv * q,
        "logTtop_triv": an_triv * q + anomaly * q,
        "dim_rho": dim,
    }
    assert cg.anomaly_combine(row) == top_rho * q


def test_anomaly_missing_field():
    with pytest.raises(MissingField):
        cg.anomaly_combine({"logTan_rho": 1.0})


def test_convergence_report():
    R = np.arange(1.0, 7.0)
    rows = [{"R": r, "logTan_rho": 1 + math.exp(-2 * r)} for r in R]
    rep = cg.convergence_report(cg.AnomalyLedger(rows))
    assert rep.limit == pytest.approx(1.0, abs=1e-10)
    assert rep.rate == pytest.approx(2.0, rel=1e-6)
    assert rep.monotone


def test_convergence_constant_and_short():
    rows = [{"R": r, "logTan_rho": 0.5} for r in (1.0, 2.0, 3.0)]
    assert math.isinf(cg.convergence_report(cg.AnomalyLedger(rows)).rate)
    with pytest.raises(InsufficientData):
        cg.convergence_report(cg.AnomalyLedger(rows[:2]))


def test_ledger_roundtrip():
    rows = [{"R": 1.0, "logTan_rho": 0.1, "logTan_triv": 0.2, "logTtop_triv": 0.3, "dim_rho": 2.0}]
    L = cg.read_ledger("# comment\n" + cg.write_ledger(cg.AnomalyLedger(rows)))
    assert L.rows == rows


def test_ledger_order():
    with pytest.raises(BadRange):
        cg.AnomalyLedger([{"R": 2.0}, {"R": 1.0}])
