"""L2-invariants of matrices and complexes over C[Z^d].

The von Neumann trace of a ``C[Z^d]``-matrix is the torus mean of the trace
of its symbol, so every invariant here is a torus integral evaluated by the
cell quadrature in :mod:`.quadrature`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import (
    IdenticallySingular,
    InsufficientPoints,
    NotDeterminantClass,
    NotHermitian,
    NotSquare,
    QuadratureNotConverged,
)
from ..fincomplex import INF_PLUS, DensityReport, zero_threshold
from .laurent import LaurentMatrix, ZdComplex
from .quadrature import (
    QuadraturePolicy,
    density_on_torus,
    log_integral_on_torus,
    periodic_mean,
)

DENSITY_POLICY = QuadraturePolicy(tol=1e-4, atol=1e-12)
LOGDET_POLICY = QuadraturePolicy(tol=1e-10, atol=1e-9)
HEAT_POLICY = QuadraturePolicy(tol=1e-13, atol=1e-15)
NS_POLICY = QuadraturePolicy(tol=2e-2, atol=1e-300, criterion="cauchy")
NS_WINDOW = (1e-4, 1e-1)

_RANK_SEED = 20240517


def _sample_points(d: int, count: int = 24) -> np.ndarray:
    rng = np.random.default_rng(_RANK_SEED)
    return rng.uniform(0.0, 2 * np.pi, size=(count, d))


def generic_rank(A: LaurentMatrix) -> int:
    """Rank of the symbol at a generic torus point.

    Minors of the symbol are trigonometric polynomials, so the rank equals
    its maximum everywhere off a null set; the maximum over a few random
    points finds it with probability one.
    """
    if A.rows == 0 or A.cols == 0 or not A.terms:
        return 0
    s = np.linalg.svd(A.evaluate(_sample_points(A.d)), compute_uv=False)
    thr = zero_threshold(float(s.max()))
    return int(np.max(np.sum(s > thr, axis=1)))


def active_part(A: LaurentMatrix) -> LaurentMatrix:
    """Drop torus coordinates the symbol does not depend on.

    Torus means of functions of the symbol are unchanged, and the quadrature
    no longer refines along directions in which nothing varies (e.g. after
    induction along ``Z -> Z^2``).
    """
    used = [i for i in range(A.d) if any(g[i] != 0 for g in A.terms)]
    if len(used) == A.d or A.d == 0:
        return A
    terms = {tuple(g[i] for i in used): b for g, b in A.terms.items()}
    return LaurentMatrix(len(used), A.rows, A.cols, terms)


def _top_singular_field(A: LaurentMatrix, k: int):
    """Callable returning the ``k`` largest singular values, ascending."""

    def field(theta: np.ndarray) -> np.ndarray:
        s = np.linalg.svd(A.evaluate(theta), compute_uv=False)[:, :k]
        return s[:, ::-1]

    return field


def _density(A: LaurentMatrix, k: int, offset: float, lambdas, policy: QuadraturePolicy) -> DensityReport:
    A = active_part(A)
    lam_in = np.atleast_1d(np.asarray(lambdas, dtype=float))
    if np.any(lam_in < 0):
        raise ValueError("lambda must be >= 0")
    order = np.argsort(lam_in, kind="stable")
    lam = lam_in[order]
    values = np.full(lam.size, float(offset))
    gap = np.zeros(lam.size)
    pos = lam > 0
    if k > 0 and pos.any() and A.d == 0:
        sv = np.linalg.svd(A.evaluate(np.zeros((1, 0)))[0], compute_uv=False)[:k]
        values[pos] += np.sum(sv[None, :] <= lam[pos][:, None], axis=1)
    elif k > 0 and pos.any():
        est = density_on_torus(_top_singular_field(A, k), A.lipschitz(), A.d, lam[pos], policy)
        if not est.converged:
            out = np.empty_like(values)
            tmp = values.copy()
            tmp[pos] += est.values
            out[order] = tmp
            raise QuadratureNotConverged(
                f"density gap {est.gap.max():.3e} after depth {est.depth}", out, est.gap.max()
            )
        values[pos] += est.values
        gap[pos] = est.gap
    out_v = np.empty_like(values)
    out_g = np.empty_like(gap)
    out_v[order] = values
    out_g[order] = gap
    return DensityReport(lambdas=lam_in, values=out_v, betti=float(offset), gap=out_g)


def spectral_density_curve(A: LaurentMatrix, lambdas, policy: QuadraturePolicy | None = None) -> DensityReport:
    """``F(A, lam) = int #{i : sigma_i(A^(z)) <= lam} dmu(z)``, kernel included."""
    policy = policy or DENSITY_POLICY
    r = generic_rank(A)
    return _density(A, r, A.cols - r, lambdas, policy)


def betti_zd(A: LaurentMatrix, policy: QuadraturePolicy | None = None) -> float:
    """``F(A, 0) = int dim ker A^(z) dmu``; equals ``cols`` minus the generic rank."""
    return float(A.cols - generic_rank(A))


def complex_density_curve(X: ZdComplex, n: int, lambdas, policy: QuadraturePolicy | None = None) -> DensityReport:
    """``F_n(X, lam)``: density of ``c_n`` restricted to ``(im c_{n-1})^perp``.

    Off a null set the restricted operator has exactly ``rank c_n`` nonzero
    singular values (the largest ones of ``c_n``) and a kernel of dimension
    ``m_n - rank c_{n-1} - rank c_n``, the L2-Betti number.
    """
    policy = policy or DENSITY_POLICY
    r_prev = generic_rank(X.diff(n - 1))
    r = generic_rank(X.diff(n))
    b = X.ranks[n] - r_prev - r
    return _density(X.diff(n), r, b, lambdas, policy)


def complex_betti(X: ZdComplex, n: int) -> float:
    return float(X.ranks[n] - generic_rank(X.diff(n - 1)) - generic_rank(X.diff(n)))


def laplacian_density_curve(X: ZdComplex, p: int, lambdas, policy: QuadraturePolicy | None = None) -> DensityReport:
    """Eigenvalue density ``F(Delta_p, lam)`` of the ``p``-th Laplacian."""
    return spectral_density_curve(X.laplacian(p), lambdas, policy)


# ---------------------------------------------------------------------------
# Novikov-Shubin


@dataclass
class NSFit:
    alpha: float
    r2: float
    points: int
    gap: bool = False

    @property
    def is_gap(self) -> bool:
        return math.isinf(self.alpha)


def ns_fit(curve: DensityReport, window=NS_WINDOW) -> NSFit:
    """Least-squares slope of ``ln(F - F(0))`` against ``ln lam`` on the window.

    A finite-window estimator of the Novikov-Shubin invariant; a curve that
    is flat at the bottom of the window signals a spectral gap and returns
    ``INF_PLUS``.
    """
    lo, hi = window
    lam = np.asarray(curve.lambdas, dtype=float)
    sel = (lam >= lo * (1 - 1e-12)) & (lam <= hi * (1 + 1e-12)) & (lam > 0)
    if sel.sum() < 3:
        raise InsufficientPoints(f"{int(sel.sum())} curve points in window {window}")
    x = lam[sel]
    y = curve.perpendicular()[sel]
    order = np.argsort(x)
    x, y = x[order], y[order]
    if y[0] <= 0:
        return NSFit(INF_PLUS, 1.0, int(sel.sum()), gap=True)
    keep = y > 0
    if keep.sum() < 3:
        raise InsufficientPoints("fewer than three positive density values")
    lx, ly = np.log(x[keep]), np.log(y[keep])
    slope, icpt = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + icpt)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return NSFit(float(slope), r2, int(keep.sum()))


def ns_window_grid(window=NS_WINDOW, points: int = 10) -> np.ndarray:
    return np.geomspace(window[0], window[1], points)


def _ns_policy(A: LaurentMatrix) -> QuadraturePolicy:
    # in one variable the certified gap is cheap; in more, level sets of
    # small lam are tiny and only the Cauchy criterion is affordable
    return NS_POLICY.with_(criterion="gap") if active_part(A).d <= 1 else NS_POLICY


def ns_estimate(A: LaurentMatrix, window=NS_WINDOW, points: int = 10, policy: QuadraturePolicy | None = None) -> NSFit:
    curve = spectral_density_curve(A, ns_window_grid(window, points), policy or _ns_policy(A))
    return ns_fit(curve, window)


def complex_ns_estimate(X: ZdComplex, n: int, window=NS_WINDOW, points: int = 10, policy: QuadraturePolicy | None = None) -> NSFit:
    curve = complex_density_curve(X, n, ns_window_grid(window, points), policy or _ns_policy(X.diff(n)))
    return ns_fit(curve, window)


# ---------------------------------------------------------------------------
# Fuglede-Kadison determinants


@dataclass
class LogDet:
    value: float
    error: float
    rank: int
    cells: int


def fk_log_det(A: LaurentMatrix, policy: QuadraturePolicy | None = None, allow_kernel: bool = False) -> LogDet:
    """``int ln det'|A^(z)| dmu``: the log Fuglede-Kadison determinant.

    ``det'`` multiplies the generic-rank many largest singular values, so for
    a.e. invertible square ``A`` this is the Mahler measure of ``det A^``.
    With ``allow_kernel`` a generic kernel is ignored (the convention used
    for Laplacians of complexes that are not acyclic); otherwise it raises
    :class:`IdenticallySingular`.
    """
    if A.rows != A.cols:
        raise NotSquare(f"{A.rows}x{A.cols} matrix has no determinant")
    policy = policy or LOGDET_POLICY
    A = active_part(A)
    r = generic_rank(A)
    if r < A.rows and not allow_kernel:
        raise IdenticallySingular(f"symbol determinant vanishes identically (generic rank {r} < {A.rows})")
    if r == 0:
        return LogDet(0.0, 0.0, 0, 0)
    if A.d == 0:
        s = np.linalg.svd(A.evaluate(np.zeros((1, 0)))[0], compute_uv=False)[:r]
        return LogDet(float(np.sum(np.log(s))), 0.0, r, 1)
    full = r == A.rows
    # Below eps * |A| a computed singular value is rounding noise (e.g.
    # 2 - 2cos(theta) is exactly 0 for |theta| < 1e-8); flooring there keeps
    # the noise from dominating the tiny cells next to the zero set.
    nb = A.norm_bound()
    s_floor = np.finfo(float).eps * nb
    det_floor = math.log(s_floor) + (r - 1) * math.log(nb)

    def integrand(theta):
        m = A.evaluate(theta)
        if full:
            return np.maximum(np.linalg.slogdet(m)[1], det_floor)
        s = np.linalg.svd(m, compute_uv=False)[:, :r]
        return np.sum(np.log(np.maximum(s, s_floor)), axis=1)

    def smallest(theta):
        return np.linalg.svd(A.evaluate(theta), compute_uv=False)[:, r - 1]

    est = log_integral_on_torus(integrand, smallest, A.lipschitz(), A.d, policy)
    return LogDet(est.value, est.error, r, est.cells)


@dataclass
class DetClass:
    flag: bool
    integral: float
    partial_sums: list
    levels: tuple


def det_class_check(
    A: LaurentMatrix,
    policy: QuadraturePolicy | None = None,
    levels: tuple = (10, 20, 30),
    tol: float = 1e-3,
) -> DetClass:
    """Estimate ``int_{0+}^1 ln lam dF(lam)`` and decide determinant class.

    Integrating by parts, the Stieltjes integral is ``-int_0^1 (F - F(0)) / lam``,
    i.e. ``-int_{-inf}^0 F_hat(e^u) du``.  Each octave ``[2^-(k+1), 2^-k]`` is
    done with 4-point Gauss-Legendre in ``u``; partial sums are taken over
    ``levels`` octaves (three of them) and the flag requires them to settle:
    increments must shrink and the extrapolated tail must be below ``tol``.
    """
    if generic_rank(A) == 0:
        raise IdenticallySingular("zero symbol")
    policy = policy or DENSITY_POLICY.with_(tol=1e-2, atol=1e-6, criterion="cauchy")
    kmax = max(levels)
    xg, wg = np.polynomial.legendre.leggauss(4)
    ln2 = math.log(2.0)
    us, ws = [], []
    for k in range(kmax):
        a, b = -(k + 1) * ln2, -k * ln2
        us.append(0.5 * (b - a) * xg + 0.5 * (a + b))
        ws.append(0.5 * (b - a) * wg)
    lam = np.exp(np.concatenate(us))
    curve = spectral_density_curve(A, lam, policy)
    fhat = curve.perpendicular().reshape(kmax, 4)
    per_octave = -(fhat * np.stack(ws)).sum(axis=1)
    sums = [float(np.sum(per_octave[:k])) for k in levels]
    # F_hat ~ c lam^alpha makes the level increments geometric; the tail past
    # the last level is estimated from their ratio (Aitken).
    d0, d1 = abs(sums[-2] - sums[-3]), abs(sums[-1] - sums[-2])
    if d1 == 0.0:
        tail = 0.0
    elif d1 < d0:
        ratio = d1 / d0
        tail = d1 * ratio / (1.0 - ratio)
    else:
        tail = math.inf
    flag = tail <= tol * (1.0 + abs(sums[-1]))
    return DetClass(bool(flag), sums[-1], sums, tuple(levels))


def _settled(sums: list, tol: float) -> bool:
    d0, d1 = abs(sums[-2] - sums[-3]), abs(sums[-1] - sums[-2])
    if d1 == 0.0:
        return True
    if d1 >= d0:
        return False
    ratio = d1 / d0
    return d1 * ratio / (1.0 - ratio) <= tol * (1.0 + abs(sums[-1]))


def det_class_heat_check(
    A: LaurentMatrix,
    policy: QuadraturePolicy | None = None,
    levels: tuple = (6, 12, 18),
    tol: float = 1e-3,
) -> DetClass:
    """The heat-trace form of the determinant-class test for a Hermitian psd ``A``.

    Estimates ``int_1^oo t^{-1} (tr e^{-tA} - b) dt`` with ``b`` the kernel
    dimension, octave by octave in ``u = ln t`` (4-point Gauss-Legendre),
    and flags convergence with the same extrapolated-tail rule as
    :func:`det_class_check`.  The two tests agree for zeta-regular
    operators; no equivalence is assumed here.
    """
    if not A.is_hermitian():
        raise NotHermitian("heat trace needs terms[-g] = terms[g]^*")
    b = betti_zd(A)
    kmax = max(levels)
    xg, wg = np.polynomial.legendre.leggauss(4)
    ln2 = math.log(2.0)
    per_octave = []
    for k in range(kmax):
        a, c = k * ln2, (k + 1) * ln2
        u = 0.5 * (c - a) * xg + 0.5 * (a + c)
        vals = [heat_trace_zd(A, math.exp(x), policy) - b for x in u]
        per_octave.append(float(np.dot(0.5 * (c - a) * wg, vals)))
    sums = [float(np.sum(per_octave[:k])) for k in levels]
    return DetClass(_settled(sums, tol), sums[-1], sums, tuple(levels))


# ---------------------------------------------------------------------------
# heat traces and torsion


def heat_trace_zd(A: LaurentMatrix, t: float, policy: QuadraturePolicy | None = None) -> float:
    """``int tr exp(-t A^(z)) dmu`` for a Hermitian positive semidefinite ``A``."""
    if not A.is_hermitian():
        raise NotHermitian("heat trace needs terms[-g] = terms[g]^*")
    if t <= 0:
        raise ValueError("t must be positive")
    policy = policy or HEAT_POLICY
    A = active_part(A)
    if A.d == 0:
        w = np.linalg.eigvalsh(A.evaluate(np.zeros((1, 0)))[0])
        return float(np.sum(np.exp(-t * w)))

    def fn(theta):
        w = np.linalg.eigvalsh(A.evaluate(theta))
        return np.sum(np.exp(-t * w), axis=1)

    # Near a zero the integrand is a Gaussian of width ~ (t K)^(-1/2), K a
    # bound on the symbol's second derivatives.  Doubling from a coarser grid
    # can miss it twice and "converge" to 0, so start at the resolving size.
    curv = sum(max(abs(x) for x in g) ** 2 * np.linalg.norm(b, 2) for g, b in A.terms.items())
    start = max(8, policy.base_cells(A.d) // 4, int(math.ceil(9.0 * math.sqrt(t * curv))))
    if start**A.d > policy.max_cells * 4:
        raise QuadratureNotConverged(f"t = {t:g} needs {start}^{A.d} grid points to resolve the heat kernel")
    return float(periodic_mean(fn, A.d, policy, start=start).value)


def stieltjes_heat_trace(
    A: LaurentMatrix,
    ts,
    panels: int = 200,
    order: int = 8,
    policy: QuadraturePolicy | None = None,
) -> np.ndarray:
    """``int_0^Lam e^{-t lam} dF(A, lam)`` computed from the density curve.

    With ``Lam`` above the spectrum, integration by parts gives
    ``e^{-t Lam} rows + t int_0^Lam e^{-t lam} F(lam) dlam``; the last
    integral uses composite Gauss-Legendre on ``panels`` panels, so one
    density curve serves every ``t``.
    """
    policy = policy or DENSITY_POLICY.with_(tol=1e-7, atol=1e-9)
    ts = np.atleast_1d(np.asarray(ts, dtype=float))
    lam_max = A.norm_bound() * (1 + 1e-4) + 1e-12
    x, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(0.0, lam_max, panels + 1)
    mid, half = 0.5 * (edges[1:] + edges[:-1]), 0.5 * np.diff(edges)
    lam = (mid[:, None] + half[:, None] * x).ravel()
    wts = (half[:, None] * w).ravel()
    F = spectral_density_curve(A, lam, policy).values
    return np.array([np.exp(-t * lam_max) * A.cols + t * np.sum(wts * np.exp(-t * lam) * F) for t in ts])


@dataclass
class TorsionZd:
    value: float
    log_dets: dict
    det_class: dict


def torsion_zd(X: ZdComplex, policy: QuadraturePolicy | None = None, check_det_class: bool = True) -> TorsionZd:
    """``1/2 sum_n (-1)^(n+1) n ln det(Delta_n)`` with Fuglede-Kadison determinants."""
    log_dets, classes = {}, {}
    total = 0.0
    for n in range(1, X.top + 1):
        lap = X.laplacian(n)
        if generic_rank(lap) == 0:
            log_dets[n] = 0.0
            continue
        if check_det_class:
            dc = det_class_check(lap)
            classes[n] = dc
            if not dc.flag:
                raise NotDeterminantClass(f"Laplacian in degree {n} fails the determinant-class check")
        ld = fk_log_det(lap, policy, allow_kernel=True).value
        log_dets[n] = ld
        total += (-1) ** (n + 1) * n * ld
    return TorsionZd(0.5 * total, log_dets, classes)
