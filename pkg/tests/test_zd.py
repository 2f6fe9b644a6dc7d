import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, special

from l2torsion import cwcomplex
from l2torsion.errors import (
    CochainViolation,
    IdenticallySingular,
    NonCommutingGenerators,
    NotHermitian,
    NotSquare,
    RankMismatch,
    ShapeMismatch,
)
from l2torsion.zd import invariants as inv
from l2torsion.zd.laurent import LaurentMatrix, TwistedRep, make_zd_complex, symbol, symbol_at_angles, vn_trace
from l2torsion.zd.quadrature import QuadraturePolicy

T_MINUS_1 = LaurentMatrix.scalar({1: 1, 0: -1})
LAP1 = LaurentMatrix.scalar({-1: -1, 0: 2, 1: -1})


def random_laurent(rng, d=1, m=2, span=1):
    exps = [tuple(int(x) for x in rng.integers(-span, span + 1, d)) for _ in range(3)]
    return LaurentMatrix(d, m, m, {g: rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m)) for g in exps})


# ---------------------------------------------------------------- Laurent algebra


def test_shape_checks():
    with pytest.raises(ShapeMismatch):
        LaurentMatrix(1, 1, 1, {(0, 0): [[1]]})
    with pytest.raises(RankMismatch):
        T_MINUS_1 + LaurentMatrix.scalar({(0, 0): 1}, d=2)


@given(st.integers(0, 10**6))
@settings(max_examples=30, deadline=None)
def test_symbol_is_multiplicative(seed):
    rng = np.random.default_rng(seed)
    A, B = random_laurent(rng, 2), random_laurent(rng, 2)
    th = rng.uniform(0, 2 * np.pi, (5, 2))
    assert np.allclose(symbol_at_angles(A @ B, th), symbol_at_angles(A, th) @ symbol_at_angles(B, th))
    assert np.allclose(symbol_at_angles(A + B, th), symbol_at_angles(A, th) + symbol_at_angles(B, th))
    assert np.allclose(symbol_at_angles(A.adjoint(), th), np.conj(np.swapaxes(symbol_at_angles(A, th), 1, 2)))


@given(st.integers(0, 10**6))
@settings(max_examples=20, deadline=None)
def test_vn_trace_is_mean_symbol_trace(seed):
    rng = np.random.default_rng(seed)
    A = random_laurent(rng, 1, 3, span=2)
    th = (np.arange(16) + 0.5)[:, None] * (2 * np.pi / 16)
    mean = np.mean(np.trace(symbol_at_angles(A, th), axis1=1, axis2=2))
    assert abs(vn_trace(A) - mean) < 1e-12


def test_symbol_at_point():
    z = np.exp(0.3j)
    assert symbol(T_MINUS_1, [z])[0, 0] == pytest.approx(z - 1)


def test_twisted_rep_checks():
    with pytest.raises(NonCommutingGenerators):
        TwistedRep(2, (np.array([[0, 1], [1, 0]]), np.diag([1.0, 2.0])))
    assert TwistedRep.character([np.exp(1j)]).unimodular
    assert not TwistedRep.character([2.0]).unimodular


def test_make_zd_complex_cochain():
    with pytest.raises(CochainViolation):
        make_zd_complex(1, [T_MINUS_1, T_MINUS_1])


# ---------------------------------------------------------------- densities and Betti numbers


def test_density_closed_form():
    lam = np.array([0.0, 0.3, 1.0, 1.7, 2.0, 2.5])
    r = inv.spectral_density_curve(T_MINUS_1, lam)
    want = 2 / np.pi * np.arcsin(np.minimum(lam, 2) / 2)
    assert np.max(np.abs(r.values - want)) < 1e-4
    assert np.all(np.diff(r.values) >= 0)


def test_betti_zd():
    assert inv.betti_zd(T_MINUS_1) == 0
    assert inv.betti_zd(LaurentMatrix.zero(1, 2, 3)) == 3


def test_generic_rank():
    A = LaurentMatrix(1, 2, 2, {(0,): [[1, 1], [1, 1]], (1,): [[1, 1], [1, 1]]})
    assert inv.generic_rank(A) == 1


def test_torus_betti_untwisted():
    for k in (1, 2, 3):
        X = cwcomplex.assemble(cwcomplex.torus(k))
        assert all(inv.complex_betti(X, n) == 0 for n in range(k + 1))


def test_finite_group_case_matches_ordinary_betti():
    # over Z^0 the L2-Betti numbers are the ordinary ones
    X = cwcomplex.GammaCW(0, (2, 1), ({(): np.array([[1, -1]])},))
    Y = cwcomplex.assemble(X)
    assert inv.complex_betti(Y, 0) == 1 and inv.complex_betti(Y, 1) == 0


def test_active_part_drops_unused_variables():
    A = LaurentMatrix.scalar({(1, 0): 1, (0, 0): -1}, d=2)
    assert inv.active_part(A).d == 1


def test_thread_count_does_not_change_results():
    lam = np.linspace(0.1, 2, 7)
    a = inv.spectral_density_curve(LAP1, lam, inv.DENSITY_POLICY.with_(threads=1)).values
    b = inv.spectral_density_curve(LAP1, lam, inv.DENSITY_POLICY.with_(threads=3)).values
    assert np.array_equal(a, b)


# ---------------------------------------------------------------- Novikov-Shubin


def test_ns_closed_forms():
    a = inv.ns_estimate(T_MINUS_1)
    assert abs(a.alpha - 1) < 0.05 and a.r2 > 0.999
    assert abs(inv.ns_estimate(LAP1).alpha - 0.5) < 0.05


def test_ns_gap():
    assert inv.ns_estimate(LaurentMatrix.scalar({0: 3.0})).is_gap


def test_ns_torus_degree_zero():
    X = cwcomplex.assemble(cwcomplex.torus(2))
    assert abs(inv.complex_ns_estimate(X, 0).alpha - 2) < 0.1


# ---------------------------------------------------------------- determinants


@given(st.floats(0.05, 20.0).filter(lambda a: abs(a - 1) > 0.05), st.floats(0, 2 * math.pi))
@settings(max_examples=25, deadline=None)
def test_jensen(a, phi):
    # m(t - a) = ln max(1, |a|)
    A = LaurentMatrix.scalar({1: 1, 0: -a * np.exp(1j * phi)})
    assert inv.fk_log_det(A).value == pytest.approx(math.log(max(1.0, a)), abs=1e-9)


def test_fk_boundary_cases():
    assert abs(inv.fk_log_det(T_MINUS_1).value) < 1e-8
    assert abs(inv.fk_log_det(LAP1).value) < 1e-6


def mahler_1xy_oracle():
    # integrate out y with Jensen: m(1 + x + y) = mean of ln max(1, |1 + x|)
    f = lambda th: math.log(max(1.0, abs(1 + np.exp(1j * th))))
    return integrate.quad(f, 0, 2 * math.pi, points=[2 * math.pi / 3, 4 * math.pi / 3], epsabs=1e-13)[0] / (2 * math.pi)


def test_mahler_two_variables():
    p = LaurentMatrix.scalar({(0, 0): 1, (1, 0): 1, (0, 1): 1}, d=2)
    assert inv.fk_log_det(p).value == pytest.approx(mahler_1xy_oracle(), abs=1e-8)


def test_fk_matrix_equals_mahler_of_determinant():
    # det [[t, 2], [1, 1]] = t - 2
    A = LaurentMatrix(1, 2, 2, {(1,): [[1, 0], [0, 0]], (0,): [[0, 2], [1, 1]]})
    assert inv.fk_log_det(A).value == pytest.approx(math.log(2), abs=1e-9)


def test_fk_errors():
    with pytest.raises(NotSquare):
        inv.fk_log_det(LaurentMatrix.zero(1, 1, 2))
    with pytest.raises(IdenticallySingular):
        inv.fk_log_det(LaurentMatrix.zero(1, 1, 1))


def test_det_class():
    dc = inv.det_class_check(T_MINUS_1)
    assert dc.flag
    # int_0^1 ln lam dF(t-1) with F = (2/pi) arcsin(lam/2)
    want = integrate.quad(lambda x: math.log(x) * (2 / math.pi) / math.sqrt(4 - x * x), 0, 1)[0]
    assert dc.integral == pytest.approx(want, abs=2e-3)


# ---------------------------------------------------------------- heat traces and torsion


def test_heat_trace_bessel():
    for t in (0.1, 1.0, 3.0):
        assert inv.heat_trace_zd(LAP1, t) == pytest.approx(special.ive(0, 2 * t), abs=1e-12)
    lap2 = cwcomplex.assemble(cwcomplex.torus(2)).laplacian(0)
    assert inv.heat_trace_zd(lap2, 0.7) == pytest.approx(special.ive(0, 1.4) ** 2, abs=1e-12)


def test_heat_trace_needs_hermitian():
    with pytest.raises(NotHermitian):
        inv.heat_trace_zd(T_MINUS_1, 1.0)


def test_stieltjes_matches_heat_trace():
    rng = np.random.default_rng(3)
    B = random_laurent(rng)
    A = B.adjoint() @ B
    ts = [0.5, 1.0, 2.0]
    direct = np.array([inv.heat_trace_zd(A, t) for t in ts])
    assert np.allclose(inv.stieltjes_heat_trace(A, ts), direct, atol=1e-4)


def test_torsion_untwisted_torus_vanishes():
    assert abs(inv.torsion_zd(cwcomplex.assemble(cwcomplex.torus(2))).value) < 1e-6


def test_torsion_circle_with_scaling_character():
    # c_0 = 3t - 1: Delta_1 = |3t - 1|^2 has log det 2 ln 3
    X = cwcomplex.assemble(cwcomplex.circle(), TwistedRep.character([3.0]))
    assert inv.torsion_zd(X).value == pytest.approx(math.log(3), abs=1e-8)


def test_policy_is_immutable_copy():
    p = QuadraturePolicy()
    q = p.with_(tol=1e-3)
    assert p.tol == 1e-4 and q.tol == 1e-3


def test_heat_trace_resolves_large_times():
    # the kernel of e^{-tA} concentrates near theta = 0; coarse grids miss it
    for t in (1e3, 1e5):
        assert inv.heat_trace_zd(LAP1, t) == pytest.approx(special.ive(0, 2 * t), rel=1e-8)


def test_det_class_heat_form():
    dc = inv.det_class_heat_check(LAP1)
    assert dc.flag
    want = integrate.quad(lambda u: special.ive(0, 2 * math.exp(u)), 0, 18 * math.log(2), limit=200)[0]
    assert dc.partial_sums[-1] == pytest.approx(want, abs=1e-6)
    gapped = inv.det_class_heat_check(LaurentMatrix.scalar({-1: -1, 0: 3, 1: -1}))
    assert gapped.flag and gapped.partial_sums[0] == gapped.partial_sums[-1]


def monomial_diag(d, exps):
    m = len(exps)
    terms = {}
    for i, g in enumerate(exps):
        terms.setdefault(tuple(g), np.zeros((m, m)))[i, i] = 1.0
    return LaurentMatrix(d, m, m, terms)


@given(st.integers(0, 10**6))
@settings(max_examples=5, deadline=None)
def test_torsion_invariant_under_monomial_rebasing(seed):
    # replacing cell basis elements e by x^g e is a unimodular change of basis
    rng = np.random.default_rng(seed)
    X = cwcomplex.assemble(cwcomplex.torus(2), TwistedRep.character(np.exp(1j * rng.uniform(0.5, 2.5, 2))))
    units = [[tuple(int(v) for v in rng.integers(-1, 2, 2)) for _ in range(m)] for m in X.ranks]
    U = [monomial_diag(2, u) for u in units]
    Uinv = [monomial_diag(2, [tuple(-v for v in g) for g in u]) for u in units]
    Y = make_zd_complex(2, [U[n + 1] @ X.diffs[n] @ Uinv[n] for n in range(X.top)])
    assert inv.torsion_zd(Y).value == pytest.approx(inv.torsion_zd(X).value, abs=1e-6)
