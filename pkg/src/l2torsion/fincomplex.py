"""Exact L2-invariants of finite-dimensional Hilbert cochain complexes.

This is the trivial-group case: von Neumann traces are ordinary traces, so
spectral density functions are integer-valued step functions and everything
can be computed from dense eigen- and singular value decompositions.  The
module doubles as the brute-force oracle for the Z^d code.

Conventions
-----------
A complex ``C`` lives in degrees ``0..N``; ``C.diff(n)`` is the differential
``c_n: C_n -> C_{n+1}`` stored as a ``dims[n+1] x dims[n]`` matrix.  The
density ``F_n(C, lam)`` counts singular values ``<= lam`` of ``c_n`` restricted
to the orthogonal complement of ``im c_{n-1}``, kernel included.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg

from .errors import (
    CochainViolation,
    DegreeOutOfRange,
    GridOutOfRange,
    HypothesisViolated,
    NotExact,
    NotHomotopyEquivalent,
    ShapeMismatch,
)

#: relative zero threshold for eigen/singular values
ZERO_RTOL = 1e-10
#: relative tolerance of the cochain condition
COCHAIN_RTOL = 1e-12
#: sentinel for a spectral gap at zero (Novikov-Shubin invariant "infinity+")
INF_PLUS = math.inf


def zero_threshold(smax: float) -> float:
    """Values at or below this count as zero for a matrix of norm ``smax``."""
    return ZERO_RTOL * (1.0 + smax)


def numerical_rank(s: np.ndarray) -> int:
    """Rank from a vector of singular values, using :func:`zero_threshold`."""
    if s.size == 0:
        return 0
    return int(np.count_nonzero(s > zero_threshold(float(np.max(s)))))


@dataclass(frozen=True)
class FiniteComplex:
    dims: tuple[int, ...]
    diffs: tuple[np.ndarray, ...]

    @property
    def top(self) -> int:
        return len(self.dims) - 1

    def check_degree(self, n: int) -> None:
        if not 0 <= n <= self.top:
            raise DegreeOutOfRange(f"degree {n} outside 0..{self.top}")

    def diff(self, n: int) -> np.ndarray:
        """``c_n``; zero maps outside the stored range (``n = -1`` or ``n = N``)."""
        if 0 <= n < self.top:
            return self.diffs[n]
        if n == -1:
            return np.zeros((self.dims[0], 0), dtype=complex)
        if n == self.top:
            return np.zeros((0, self.dims[self.top]), dtype=complex)
        raise DegreeOutOfRange(f"no differential c_{n}")

    def euler_characteristic(self) -> int:
        return sum((-1) ** n * m for n, m in enumerate(self.dims))


@dataclass
class DensityReport:
    """Samples of a spectral density function ``F``.

    ``gap`` carries a per-point error bound when the values come from
    quadrature; it stays ``None`` for exact (finite-dimensional) curves.
    """

    lambdas: np.ndarray
    values: np.ndarray
    betti: float
    gap: np.ndarray | None = None

    def __post_init__(self):
        self.lambdas = np.asarray(self.lambdas, dtype=float)
        self.values = np.asarray(self.values, dtype=float)

    def perpendicular(self) -> np.ndarray:
        """``F(lam) - F(0)``, the density of the part orthogonal to the kernel."""
        return np.maximum(self.values - self.betti, 0.0)


@dataclass
class CheckReport:
    """Outcome of one of the inequality/identity checks below."""

    name: str
    passed: bool
    lambdas: np.ndarray
    columns: dict[str, np.ndarray] = field(default_factory=dict)
    extra: dict = field(default_factory=dict)


def make_complex(mats: Sequence, rtol: float = COCHAIN_RTOL) -> FiniteComplex:
    """Validate a list of differentials ``c_0, c_1, ...`` into a complex."""
    diffs = []
    for k, m in enumerate(mats):
        a = np.atleast_2d(np.asarray(m, dtype=complex))
        if a.ndim != 2:
            raise ShapeMismatch(f"c_{k} is not a matrix")
        if not np.all(np.isfinite(a)):
            raise ShapeMismatch(f"c_{k} has non-finite entries")
        diffs.append(a)
    if not diffs:
        return FiniteComplex(dims=(0,), diffs=())
    for k in range(len(diffs) - 1):
        if diffs[k + 1].shape[1] != diffs[k].shape[0]:
            raise ShapeMismatch(
                f"c_{k + 1} has {diffs[k + 1].shape[1]} columns but c_{k} has {diffs[k].shape[0]} rows"
            )
    for k in range(len(diffs) - 1):
        a, b = diffs[k], diffs[k + 1]
        prod = np.linalg.norm(b @ a, 2) if a.size and b.size else 0.0
        scale = (np.linalg.norm(a, 2) * np.linalg.norm(b, 2)) if a.size and b.size else 0.0
        if prod > rtol * scale:
            raise CochainViolation(f"|c_{k + 1} c_{k}| = {prod:.3e} exceeds {rtol:g} * {scale:.3e}")
    dims = tuple(d.shape[1] for d in diffs) + (diffs[-1].shape[0],)
    return FiniteComplex(dims=dims, diffs=tuple(diffs))


def zero_complex(dims: Sequence[int]) -> FiniteComplex:
    dims = tuple(int(d) for d in dims) or (0,)
    mats = [np.zeros((dims[k + 1], dims[k]), dtype=complex) for k in range(len(dims) - 1)]
    return FiniteComplex(dims=dims, diffs=tuple(mats))


def direct_sum(C: FiniteComplex, D: FiniteComplex) -> FiniteComplex:
    """Degreewise orthogonal direct sum (shorter complex padded with zeros)."""
    top = max(C.top, D.top)
    dc = tuple(C.dims) + (0,) * (top - C.top)
    dd = tuple(D.dims) + (0,) * (top - D.top)
    Cp = C if C.top == top else zero_pad(C, top)
    Dp = D if D.top == top else zero_pad(D, top)
    mats = [scipy.linalg.block_diag(Cp.diff(n), Dp.diff(n)) for n in range(top)]
    out = FiniteComplex(dims=tuple(a + b for a, b in zip(dc, dd)), diffs=tuple(np.asarray(m, complex) for m in mats))
    return out


def zero_pad(C: FiniteComplex, top: int) -> FiniteComplex:
    """Extend ``C`` by zero modules up to degree ``top``."""
    if top < C.top:
        raise DegreeOutOfRange("cannot truncate a complex by padding")
    dims = tuple(C.dims) + (0,) * (top - C.top)
    mats = list(C.diffs) + [np.zeros((dims[k + 1], dims[k]), dtype=complex) for k in range(C.top, top)]
    return FiniteComplex(dims=dims, diffs=tuple(mats))


def laplacian(C: FiniteComplex, n: int) -> np.ndarray:
    """``c_n^* c_n + c_{n-1} c_{n-1}^*`` on ``C_n``."""
    C.check_degree(n)
    a = C.diff(n)
    b = C.diff(n - 1)
    return a.conj().T @ a + b @ b.conj().T


def restricted_singular_values(C: FiniteComplex, n: int) -> np.ndarray:
    """Singular values of ``c_n`` on ``(im c_{n-1})^perp``, ascending.

    The vector has one entry per dimension of the restricted domain; values
    under the zero threshold are set to exactly 0.
    """
    C.check_degree(n)
    prev = C.diff(n - 1)
    m = C.dims[n]
    if prev.shape[1] and m:
        u, s, _ = np.linalg.svd(prev, full_matrices=True)
        r = numerical_rank(s)
        q = u[:, r:]
    else:
        q = np.eye(m, dtype=complex)
    a = C.diff(n) @ q
    k = q.shape[1]
    if a.shape[0] and k:
        s = np.linalg.svd(a, compute_uv=False)
    else:
        s = np.zeros(0)
    s = np.concatenate([s, np.zeros(k - s.size)]) if s.size < k else s
    s = np.sort(s)
    if s.size:
        s[s <= zero_threshold(float(s[-1]))] = 0.0
    return s


def _count_le(values: np.ndarray, lambdas: np.ndarray) -> np.ndarray:
    return np.searchsorted(np.sort(values), lambdas, side="right").astype(float)


def spectral_density(C: FiniteComplex, n: int, lambdas) -> DensityReport:
    lam = np.atleast_1d(np.asarray(lambdas, dtype=float))
    if np.any(lam < 0):
        raise GridOutOfRange("spectral density needs lambda >= 0")
    s = restricted_singular_values(C, n)
    return DensityReport(lambdas=lam, values=_count_le(s, lam), betti=float(np.count_nonzero(s == 0.0)))


def betti(C: FiniteComplex, n: int) -> int:
    """``F_n(C, 0)``, which equals ``dim ker Delta_n``."""
    s = restricted_singular_values(C, n)
    return int(np.count_nonzero(s == 0.0))


def novikov_shubin(C: FiniteComplex, n: int) -> float:
    """Always the gap sentinel: finite spectra are bounded away from zero."""
    C.check_degree(n)
    return INF_PLUS


def log_det_prime(h: np.ndarray) -> float:
    """Log of the product of the positive eigenvalues of a Hermitian psd matrix."""
    if h.size == 0:
        return 0.0
    w = np.linalg.eigvalsh(h)
    thr = zero_threshold(float(np.max(np.abs(w))))
    w = w[w > thr]
    return float(np.sum(np.log(w)))


def torsion_finite(C: FiniteComplex) -> float:
    """Log L2-torsion ``1/2 sum_n (-1)^(n+1) n ln det'(Delta_n)``."""
    total = 0.0
    for n in range(C.top + 1):
        if n == 0:
            continue
        total += (-1) ** (n + 1) * n * log_det_prime(laplacian(C, n))
    return 0.5 * total


# ---------------------------------------------------------------------------
# checks of the comparison results for density functions


def _level_gram_density(C: FiniteComplex, p: int, lambdas: np.ndarray) -> np.ndarray:
    """``F_p`` of the level-p complex with the graph norm on ``C_p``.

    The middle space carries ``|v|_1^2 = |v|^2 + |c_p v|^2``; the restriction
    is to the ``|.|_1``-orthogonal complement of ``im c_{p-1}`` and the
    singular values are those of ``c_p`` measured in the new norm.
    """
    a = C.diff(p)
    m = C.dims[p]
    gram = np.eye(m, dtype=complex) + a.conj().T @ a
    prev = C.diff(p - 1)
    if prev.shape[1] and m:
        u, s, _ = np.linalg.svd(prev, full_matrices=False)
        img = u[:, : numerical_rank(s)]
    else:
        img = np.zeros((m, 0), dtype=complex)
    if img.shape[1]:
        w = scipy.linalg.null_space(img.conj().T @ gram)
    else:
        w = np.eye(m, dtype=complex)
    if w.shape[1] == 0:
        return np.zeros_like(lambdas)
    lhs = w.conj().T @ a.conj().T @ a @ w
    rhs = w.conj().T @ gram @ w
    mu = scipy.linalg.eigh(lhs, rhs, eigvals_only=True)
    sig = np.sqrt(np.clip(mu, 0.0, None))
    sig[sig <= zero_threshold(float(np.max(sig)))] = 0.0
    return _count_le(sig, lambdas)


def sobolev_sandwich_check(C: FiniteComplex, p: int, lambdas) -> CheckReport:
    """``F_p(L) <= F_p(D_abs) <= F_p(L, sqrt(2) lam)`` for ``0 < lam <= 1/sqrt(2)``."""
    C.check_degree(p)
    lam = np.atleast_1d(np.asarray(lambdas, dtype=float))
    if np.any(lam <= 0) or np.any(lam > 1 / math.sqrt(2) * (1 + 1e-15)):
        raise GridOutOfRange("sandwich grid must lie in (0, 1/sqrt(2)]")
    low = spectral_density(C, p, lam).values
    mid = _level_gram_density(C, p, lam)
    high = spectral_density(C, p, math.sqrt(2) * lam).values
    ok = bool(np.all(low <= mid) and np.all(mid <= high))
    return CheckReport("sobolev_sandwich", ok, lam, {"F_L": low, "F_Dabs": mid, "F_L_sqrt2": high})


def _opnorm(a: np.ndarray) -> float:
    return float(np.linalg.norm(a, 2)) if a.size else 0.0


def _inverse_norm(a: np.ndarray) -> float:
    """Norm of the inverse on the image (injective) or co-kernel (surjective)."""
    if a.size == 0:
        return 0.0
    s = np.linalg.svd(a, compute_uv=False)
    s = s[s > zero_threshold(float(s[0]))]
    return float(1.0 / s[-1]) if s.size else 0.0


def _check_short_exact(C, D, E, f, g) -> None:
    for n in range(D.top + 1):
        fn, gn = np.asarray(f[n], complex), np.asarray(g[n], complex)
        if fn.shape != (D.dims[n], C.dims[n]) or gn.shape != (E.dims[n], D.dims[n]):
            raise NotExact(f"maps in degree {n} have wrong shapes")
        rf = numerical_rank(np.linalg.svd(fn, compute_uv=False)) if fn.size else 0
        rg = numerical_rank(np.linalg.svd(gn, compute_uv=False)) if gn.size else 0
        if rf != C.dims[n]:
            raise NotExact(f"f_{n} is not injective")
        if rg != E.dims[n]:
            raise NotExact(f"g_{n} is not surjective")
        if rf + rg != D.dims[n]:
            raise NotExact(f"ker g_{n} != im f_{n} (dimension count)")
        if fn.size and gn.size and _opnorm(gn @ fn) > 1e-9 * (1 + _opnorm(gn) * _opnorm(fn)):
            raise NotExact(f"g_{n} f_{n} != 0")
    for n in range(D.top):
        for lhs, rhs, what in (
            (D.diff(n) @ np.asarray(f[n], complex), np.asarray(f[n + 1], complex) @ C.diff(n), "f"),
            (E.diff(n) @ np.asarray(g[n], complex), np.asarray(g[n + 1], complex) @ D.diff(n), "g"),
        ):
            if lhs.size and _opnorm(lhs - rhs) > 1e-9 * (1 + _opnorm(lhs) + _opnorm(rhs)):
                raise NotExact(f"{what} is not a chain map in degree {n}")


def ses_bound_check(C, D, E, f, g, n: int, lambdas) -> CheckReport:
    """Density estimate for a short exact sequence ``0 -> C -> D -> E -> 0``.

    ``F_hat = F - F(0)``.  Checked at every grid point below ``alpha_1``;
    points at or above it are reported but not judged.
    """
    if not (C.top == D.top == E.top):
        raise NotExact("complexes must share the degree range")
    D.check_degree(n)
    _check_short_exact(C, D, E, f, g)
    if betti(E, n) != 0 and (n + 1 > C.top or betti(C, n + 1) != 0):
        raise HypothesisViolated(f"need b_{n}(E) = 0 or b_{n + 1}(C) = 0")
    lam = np.atleast_1d(np.asarray(lambdas, dtype=float))
    f_next = np.asarray(f[n + 1], complex) if n + 1 <= D.top else np.zeros((0, 0))
    g_next = np.asarray(g[n + 1], complex) if n + 1 <= D.top else np.zeros((0, 0))
    dn = _opnorm(D.diff(n))
    alpha_c = math.sqrt(_inverse_norm(f_next)) * _opnorm(np.asarray(f[n], complex))
    alpha_e = (4 + 2 * dn) * _opnorm(g_next) * _inverse_norm(np.asarray(g[n], complex))
    alpha_1 = (4 + 2 * dn) ** -0.5

    def fhat(X, x):
        rep = spectral_density(X, n, x)
        return rep.values - rep.betti

    lhs = fhat(D, lam)
    rhs = fhat(C, alpha_c * np.sqrt(lam)) + fhat(E, alpha_e * np.sqrt(lam))
    judged = lam < alpha_1
    ok = bool(np.all(lhs[judged] <= rhs[judged]))
    return CheckReport(
        "ses_bound",
        ok,
        lam,
        {"Fhat_D": lhs, "bound": rhs, "judged": judged.astype(float)},
        {"alpha_C": alpha_c, "alpha_E": alpha_e, "alpha_1": alpha_1},
    )


def homotopy_dilatation_check(C: FiniteComplex, D: FiniteComplex, lambdas, max_power: int = 20) -> CheckReport:
    """Search ``c = 2^k`` with ``F_n(C, lam/c) <= F_n(D, lam) <= F_n(C, c lam)``.

    The caller guarantees that ``C`` and ``D`` are homotopy equivalent (for
    instance ``D`` is ``C`` plus a contractible summand) and that the grid
    lies below the dilatation threshold.
    """
    top = max(C.top, D.top)
    C, D = zero_pad(C, top), zero_pad(D, top)
    bc = [betti(C, n) for n in range(top + 1)]
    bd = [betti(D, n) for n in range(top + 1)]
    if bc != bd:
        raise NotHomotopyEquivalent(f"Betti numbers differ: {bc} vs {bd}")
    lam = np.atleast_1d(np.asarray(lambdas, dtype=float))
    fd = [spectral_density(D, n, lam).values for n in range(top + 1)]
    witness = None
    for k in range(max_power + 1):
        c = 2.0**k
        good = True
        for n in range(top + 1):
            lo = spectral_density(C, n, lam / c).values
            hi = spectral_density(C, n, lam * c).values
            if np.any(lo > fd[n]) or np.any(fd[n] > hi):
                good = False
                break
        if good:
            witness = c
            break
    return CheckReport("homotopy_dilatation", witness is not None, lam, {}, {"witness": witness, "betti": bc})


def density_identity_check(C: FiniteComplex, p: int, lambdas) -> CheckReport:
    """``F(Delta_p, lam) = F_p(sqrt(lam)) + F_{p-1}(sqrt(lam))`` on an acyclic degree.

    The left side counts eigenvalues of the Laplacian up to ``lam``; the right
    side counts singular values of the two adjacent restricted differentials
    up to ``sqrt(lam)``.
    """
    C.check_degree(p)
    for q in (p - 1, p):
        if q >= 0 and betti(C, q) != 0:
            raise HypothesisViolated(f"b_{q} = {betti(C, q)} != 0; the identity needs b_{p - 1} = b_{p} = 0")
    lam = np.atleast_1d(np.asarray(lambdas, dtype=float))
    if np.any(lam < 0):
        raise GridOutOfRange("lambda must be >= 0")
    w = np.linalg.eigvalsh(laplacian(C, p)) if C.dims[p] else np.zeros(0)
    if w.size:
        w[w <= zero_threshold(float(np.max(np.abs(w))))] = 0.0
    lhs = _count_le(w, lam)
    rt = np.sqrt(lam)
    rhs = spectral_density(C, p, rt).values
    if p >= 1:
        rhs = rhs + spectral_density(C, p - 1, rt).values
    ok = bool(np.array_equal(lhs, rhs))
    return CheckReport("density_identity", ok, lam, {"F_laplacian": lhs, "F_sum": rhs})
