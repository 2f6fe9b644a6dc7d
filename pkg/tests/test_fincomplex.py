import math

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings, strategies as st

from l2torsion import fincomplex as fc
from l2torsion import samples
from l2torsion.errors import CochainViolation, DegreeOutOfRange, GridOutOfRange, HypothesisViolated, ShapeMismatch


def rng_complex(seed, acyclic=False, top=None):
    rng = np.random.default_rng(seed)
    top = top if top is not None else int(rng.integers(1, 5))
    return samples.random_complex(rng, *samples.random_ranks(rng, top, acyclic=acyclic))


def restricted_sv_oracle(C, n):
    # orthocomplement of im c_{n-1} = ker c_{n-1}^*, via scipy's null space
    prev = C.diff(n - 1)
    q = scipy.linalg.null_space(prev.conj().T) if prev.shape[1] else np.eye(C.dims[n])
    a = C.diff(n) @ q
    s = scipy.linalg.svdvals(a) if a.size else np.zeros(0)
    return np.sort(np.concatenate([s, np.zeros(q.shape[1] - s.size)]))


# ---------------------------------------------------------------- construction


def test_empty_complex():
    C = fc.make_complex([])
    assert C.dims == (0,)
    assert fc.torsion_finite(C) == 0.0


def test_single_map():
    C = fc.make_complex([[[2]]])
    assert C.dims == (1, 1)


def test_cochain_violation():
    a = np.array([[1.0], [0.0]])
    b = np.array([[1.0, 0.0]])
    with pytest.raises(CochainViolation):
        fc.make_complex([a, b])


def test_shape_mismatch():
    with pytest.raises(ShapeMismatch):
        fc.make_complex([np.ones((2, 1)), np.ones((1, 3))])
    with pytest.raises(ShapeMismatch):
        fc.make_complex([np.array([[np.nan]])])


def test_degree_out_of_range():
    C = fc.make_complex([[[1]]])
    with pytest.raises(DegreeOutOfRange):
        fc.laplacian(C, 2)


# ---------------------------------------------------------------- laplacian


def test_laplacian_examples():
    Z = fc.zero_complex([2, 3])
    assert np.all(fc.laplacian(Z, 1) == 0)
    C = fc.make_complex([[[1]]])
    assert fc.laplacian(C, 0)[0, 0] == 1
    assert fc.laplacian(C, 1)[0, 0] == 1


@given(st.integers(0, 10**6))
@settings(max_examples=30, deadline=None)
def test_laplacian_matches_definition(seed):
    C = rng_complex(seed)
    for n in range(C.top + 1):
        a = C.diffs[n] if n < C.top else np.zeros((0, C.dims[n]))
        b = C.diffs[n - 1] if n >= 1 else np.zeros((C.dims[0], 0))
        want = np.conj(a).T.dot(a) + b.dot(np.conj(b).T)
        L = fc.laplacian(C, n)
        assert np.allclose(L, want, atol=1e-12)
        assert np.allclose(L, L.conj().T)
        if L.size:
            assert np.linalg.eigvalsh(L).min() > -1e-10


# ---------------------------------------------------------------- densities


def test_density_diagonal():
    C = fc.make_complex([np.diag([0.5, 2.0])])
    r = fc.spectral_density(C, 0, [0.4, 0.5, 2.0])
    assert list(r.values) == [0, 1, 2]


def test_density_identity_map():
    C = fc.make_complex([np.eye(3)])
    r = fc.spectral_density(C, 0, [0.0, 0.99, 1.0, 5.0])
    assert list(r.values) == [0, 0, 3, 3]


def test_density_negative_lambda():
    with pytest.raises(GridOutOfRange):
        fc.spectral_density(fc.make_complex([[[1]]]), 0, [-1.0])


@given(st.integers(0, 10**6))
@settings(max_examples=40, deadline=None)
def test_density_matches_projector_oracle(seed):
    C = rng_complex(seed)
    lam = np.linspace(0, 4, 33)
    for n in range(C.top + 1):
        s = restricted_sv_oracle(C, n)
        s[s <= 1e-10 * max(s.max(initial=0.0), 1.0)] = 0.0
        want = np.array([np.count_nonzero(s <= x) for x in lam], dtype=float)
        r = fc.spectral_density(C, n, lam)
        assert np.array_equal(r.values, want)
        assert np.all(np.diff(r.values) >= 0)
        assert r.values[0] == r.betti


@given(st.integers(0, 10**6))
@settings(max_examples=40, deadline=None)
def test_betti_is_laplacian_kernel(seed):
    C = rng_complex(seed)
    for n in range(C.top + 1):
        L = fc.laplacian(C, n)
        w = np.linalg.eigvalsh(L) if L.size else np.zeros(0)
        k = int(np.count_nonzero(w <= 1e-9 * max(w.max(initial=0.0), 1.0)))
        assert fc.betti(C, n) == k


def test_betti_examples():
    assert fc.betti(fc.zero_complex([2, 2]), 0) == 2
    C = fc.make_complex([[[1]]])
    assert fc.betti(C, 0) == fc.betti(C, 1) == 0


@given(st.integers(0, 10**6))
@settings(max_examples=20, deadline=None)
def test_euler_characteristic_of_bettis(seed):
    C = rng_complex(seed)
    assert sum((-1) ** n * fc.betti(C, n) for n in range(C.top + 1)) == C.euler_characteristic()


def test_novikov_shubin_gap():
    assert math.isinf(fc.novikov_shubin(fc.make_complex([[[3]]]), 0))


# ---------------------------------------------------------------- torsion


def test_torsion_examples():
    assert fc.torsion_finite(fc.make_complex([[[2]]])) == pytest.approx(math.log(2), abs=1e-15)
    assert fc.torsion_finite(fc.zero_complex([3, 1, 2])) == 0.0


@given(st.integers(0, 10**6))
@settings(max_examples=30, deadline=None)
def test_torsion_is_log_det(seed):
    rng = np.random.default_rng(seed)
    A = samples.random_invertible(rng, 5)
    C = fc.make_complex([A])
    assert fc.torsion_finite(C) == pytest.approx(math.log(abs(np.linalg.det(A))), abs=1e-9)


@given(st.integers(0, 10**6), st.floats(0.1, 10.0))
@settings(max_examples=20, deadline=None)
def test_torsion_scales_with_differential(seed, s):
    # scaling c_0 of 0 -> C^k -> C^k -> 0 by s shifts the torsion by k ln s
    rng = np.random.default_rng(seed)
    A = samples.random_invertible(rng, 3)
    t0 = fc.torsion_finite(fc.make_complex([A]))
    t1 = fc.torsion_finite(fc.make_complex([s * A]))
    assert t1 - t0 == pytest.approx(3 * math.log(s), abs=1e-9)


# ---------------------------------------------------------------- checks


@given(st.integers(0, 10**6))
@settings(max_examples=30, deadline=None)
def test_density_identity(seed):
    C = rng_complex(seed, acyclic=True)
    lam = np.sort(np.random.default_rng(seed).uniform(0, 30, 16))
    for p in range(C.top + 1):
        assert fc.density_identity_check(C, p, lam).passed


def test_density_identity_needs_acyclic():
    C = fc.zero_complex([1, 1])
    with pytest.raises(HypothesisViolated):
        fc.density_identity_check(C, 1, [0.5])


@given(st.integers(0, 10**6))
@settings(max_examples=30, deadline=None)
def test_sandwich(seed):
    C = rng_complex(seed)
    lam = np.geomspace(1e-3, 1 / math.sqrt(2), 12)
    for p in range(C.top + 1):
        assert fc.sobolev_sandwich_check(C, p, lam).passed


def test_sandwich_grid():
    with pytest.raises(GridOutOfRange):
        fc.sobolev_sandwich_check(fc.make_complex([[[1]]]), 0, [0.9])


@given(st.integers(0, 10**6))
@settings(max_examples=30, deadline=None)
def test_dilatation_on_stabilizations(seed):
    rng = np.random.default_rng(seed)
    C = samples.random_complex(rng, *samples.random_ranks(rng, int(rng.integers(1, 4))))
    D = samples.random_stabilization(rng, C)
    r = fc.homotopy_dilatation_check(C, D, np.geomspace(1e-3, 0.25, 10))
    assert r.passed and r.extra["witness"] >= 1


@given(st.integers(0, 10**6))
@settings(max_examples=30, deadline=None)
def test_exact_sequence_bound(seed):
    rng = np.random.default_rng(seed)
    top = int(rng.integers(1, 4))
    C = samples.random_complex(rng, *samples.random_ranks(rng, top))
    E = samples.random_complex(rng, *samples.random_ranks(rng, top, acyclic=True))
    D, f, g = samples.random_exact_triple(rng, C, E)
    for n in range(top + 1):
        assert fc.ses_bound_check(C, D, E, f, g, n, np.geomspace(1e-4, 1.0, 12)).passed


def test_direct_sum_adds_densities():
    C, D = rng_complex(1, top=2), rng_complex(2, top=2)
    S = fc.direct_sum(C, D)
    lam = np.linspace(0, 3, 13)
    for n in range(3):
        want = fc.spectral_density(C, n, lam).values + fc.spectral_density(D, n, lam).values
        assert np.array_equal(fc.spectral_density(S, n, lam).values, want)
