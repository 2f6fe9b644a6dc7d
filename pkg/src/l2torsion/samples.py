"""Seeded random finite complexes, exact triples and stabilizations.

Used by the property tests and by the built-in acceptance runner; every
generator takes a :class:`numpy.random.Generator` so runs are reproducible.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

from .fincomplex import FiniteComplex, direct_sum, make_complex


def _gauss(rng: np.random.Generator, shape) -> np.ndarray:
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def well_conditioned(rng: np.random.Generator, n: int, spread: float = 0.25) -> np.ndarray:
    """``I + spread * G / |G|``: condition number at most ``(1+spread)/(1-spread)``."""
    if n == 0:
        return np.zeros((0, 0), dtype=complex)
    g = _gauss(rng, (n, n))
    return np.eye(n) + spread * g / np.linalg.norm(g, 2)


def random_invertible(rng: np.random.Generator, n: int, smin: float = 0.5, smax: float = 2.0) -> np.ndarray:
    """Random matrix with singular values drawn uniformly from ``[smin, smax]``."""
    if n == 0:
        return np.zeros((0, 0), dtype=complex)
    u, _ = np.linalg.qr(_gauss(rng, (n, n)))
    v, _ = np.linalg.qr(_gauss(rng, (n, n)))
    return u @ np.diag(rng.uniform(smin, smax, n)) @ v


def random_complex(
    rng: np.random.Generator,
    ranks,
    bettis,
    conjugate: bool = True,
) -> FiniteComplex:
    """Complex with prescribed ranks ``r_n`` of ``c_n`` and Betti numbers ``b_n``.

    ``len(bettis) == len(ranks) + 1``; degree ``n`` has dimension
    ``r_{n-1} + b_n + r_n``.  With ``conjugate`` the adapted basis is hidden
    behind a random change of basis in each degree.
    """
    ranks = [int(r) for r in ranks]
    bettis = [int(b) for b in bettis]
    top = len(ranks)
    if len(bettis) != top + 1:
        raise ValueError("need one Betti number per degree")
    dims = []
    for n in range(top + 1):
        prev = ranks[n - 1] if n >= 1 else 0
        cur = ranks[n] if n < top else 0
        dims.append(prev + bettis[n] + cur)
    mats = []
    for n in range(top):
        c = np.zeros((dims[n + 1], dims[n]), dtype=complex)
        r = ranks[n]
        # W_n (last r columns of degree n) -> B_{n+1} (first r rows of degree n+1)
        c[:r, dims[n] - r :] = random_invertible(rng, r)
        mats.append(c)
    if conjugate:
        basis = [random_invertible(rng, m) for m in dims]
        mats = [basis[n + 1] @ mats[n] @ np.linalg.inv(basis[n]) if dims[n] and dims[n + 1] else mats[n] for n in range(top)]
    if top == 0:
        return FiniteComplex(dims=(dims[0],), diffs=())
    return make_complex(mats, rtol=1e-9)


def random_ranks(rng: np.random.Generator, top: int, acyclic: bool = False, max_rank: int = 3):
    ranks = [int(rng.integers(0 if not acyclic else 1, max_rank + 1)) for _ in range(top)]
    bettis = [0] * (top + 1) if acyclic else [int(rng.integers(0, 3)) for _ in range(top + 1)]
    return ranks, bettis


def contractible(rng: np.random.Generator, k: int, degree: int, top: int) -> FiniteComplex:
    """``0 -> C^k --A--> C^k -> 0`` in degrees ``degree, degree+1`` (singular values in [1, 3])."""
    dims = [0] * (top + 1)
    dims[degree] = dims[degree + 1] = k
    mats = [np.zeros((dims[n + 1], dims[n]), dtype=complex) for n in range(top)]
    mats[degree] = random_invertible(rng, k, 1.0, 3.0)
    return FiniteComplex(dims=tuple(dims), diffs=tuple(mats))


def conjugate_complex(C: FiniteComplex, basis) -> FiniteComplex:
    mats = [basis[n + 1] @ C.diff(n) @ np.linalg.inv(basis[n]) if C.dims[n] and C.dims[n + 1] else C.diff(n) for n in range(C.top)]
    return FiniteComplex(dims=C.dims, diffs=tuple(np.asarray(m, complex) for m in mats))


def random_stabilization(rng: np.random.Generator, C: FiniteComplex, spread: float = 0.25) -> FiniteComplex:
    """``Q (C + K) Q^{-1}`` with ``K`` contractible and ``Q`` close to the identity.

    The contractible summand has singular values in ``[1, 3]`` and ``Q`` has
    condition number at most 5/3, so the densities of the result agree with
    those of ``C`` up to dilatation below ``lambda ~ 0.3``.
    """
    top = max(C.top, 1)
    degree = int(rng.integers(0, top))
    K = contractible(rng, int(rng.integers(1, 3)), degree, top)
    S = direct_sum(C, K)
    return conjugate_complex(S, [well_conditioned(rng, m, spread) for m in S.dims])


def random_exact_triple(rng: np.random.Generator, C: FiniteComplex, E: FiniteComplex, glue: bool = True):
    """Build ``0 -> C -f-> D -g-> E -> 0`` with a generally non-split ``D``.

    In the adapted basis ``D_n = C_n + E_n`` carries the differential
    ``[[c, h], [0, e]]``.  ``h_n = Z A Y`` with ``c_{n+1} Z = 0`` and
    ``Y e_{n-1} = 0`` makes ``d`` square to zero; a further conjugation by
    random ``Q_n`` hides the splitting.  Returns ``(D, f, g)``.
    """
    if C.top != E.top:
        raise ValueError("C and E must share the degree range")
    top = C.top
    mats = []
    for n in range(top):
        c, e = C.diff(n), E.diff(n)
        h = np.zeros((C.dims[n + 1], E.dims[n]), dtype=complex)
        if glue and C.dims[n + 1] and E.dims[n]:
            z = scipy.linalg.null_space(C.diff(n + 1)) if C.diff(n + 1).shape[0] else np.eye(C.dims[n + 1])
            prev = E.diff(n - 1)
            y = scipy.linalg.null_space(prev.conj().T).conj().T if prev.shape[1] else np.eye(E.dims[n])
            if z.shape[1] and y.shape[0]:
                h = z @ _gauss(rng, (z.shape[1], y.shape[0])) @ y
        mats.append(np.block([[c, h], [np.zeros((E.dims[n + 1], C.dims[n])), e]]))
    dims = tuple(a + b for a, b in zip(C.dims, E.dims))
    Q = [random_invertible(rng, m) for m in dims]
    d = [Q[n + 1] @ mats[n] @ np.linalg.inv(Q[n]) if dims[n] and dims[n + 1] else np.asarray(mats[n], complex) for n in range(top)]
    D = FiniteComplex(dims=dims, diffs=tuple(np.asarray(x, complex) for x in d))
    f, g = [], []
    for n in range(top + 1):
        cn, en = C.dims[n], E.dims[n]
        inc = np.vstack([np.eye(cn), np.zeros((en, cn))]) if dims[n] else np.zeros((0, cn))
        proj = np.hstack([np.zeros((en, cn)), np.eye(en)]) if dims[n] else np.zeros((en, 0))
        if dims[n]:
            f.append(Q[n] @ inc)
            g.append(proj @ np.linalg.inv(Q[n]))
        else:
            f.append(np.zeros((0, cn), dtype=complex))
            g.append(np.zeros((en, 0), dtype=complex))
    return D, f, g
