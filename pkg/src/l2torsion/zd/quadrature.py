"""Adaptive cell quadrature on the torus ``[0, 2 pi)^d``.

Two integrals show up over and over: the measure of ``{z : sigma_i(z) <= lam}``
(spectral densities) and the mean of ``log|det|`` (Fuglede-Kadison
determinants).  Both have trouble near the zero set of the symbol, so both
run on the same dyadic cell tree: a uniform base grid of ``N^d`` cubes,
recursively split into ``2^d`` children wherever the integrand may be rough.

Roughness is detected with a Lipschitz bound ``L`` on the symbol (see
:meth:`LaurentMatrix.lipschitz`): singular values move by at most ``L h``
inside a cube of half-width ``h``.  For densities this certifies the count
exactly on most cubes and yields a rigorous error bound ("gap") from the rest.

All reductions run in a fixed order, so results do not depend on the thread
count.
"""

from __future__ import annotations

import itertools
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from ..errors import QuadratureNotConverged
from .laurent import torus_grid

DEFAULT_BASE = {0: 1, 1: 256, 2: 128, 3: 48}
MODES = ("plain", "refine", "exclusion")
THREADS_ENV = "L2TORSION_THREADS"


def default_threads() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


@dataclass(frozen=True)
class QuadraturePolicy:
    """Knobs for the torus integrals.

    ``base`` is the number of cells per torus direction (``None`` picks 256,
    128, 48 for d = 1, 2, 3).  ``tol`` is relative, ``atol`` absolute; the
    estimate is accepted once ``levels`` successive refinements agree.  For
    densities ``criterion`` chooses between ``"gap"`` (the measure of cubes
    that cannot be certified is below tolerance, a rigorous-in-exact-arithmetic
    bound) and ``"cauchy"`` (successive estimates agree; much cheaper in
    d >= 2 where level sets of small ``lam`` are tiny).
    """

    base: int | None = None
    levels: int = 3
    tol: float = 1e-4
    atol: float = 1e-12
    mode: str = "refine"
    max_depth: int = 48
    max_cells: int = 1_500_000
    gauss_order: int | None = None
    grading: float = 8.0
    threads: int | None = None
    criterion: str = "gap"

    def __post_init__(self):
        if self.base is not None and self.base < 8:
            raise ValueError("base grid needs N >= 8")
        if self.levels < 2:
            raise ValueError("need at least two refinement levels")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.criterion not in ("gap", "cauchy"):
            raise ValueError("criterion must be 'gap' or 'cauchy'")

    def base_cells(self, d: int) -> int:
        return self.base if self.base is not None else DEFAULT_BASE.get(d, 16)

    def order(self, d: int) -> int:
        if self.gauss_order is not None:
            return self.gauss_order
        return 6 if d <= 1 else 4 if d == 2 else 3

    def n_threads(self) -> int:
        return self.threads if self.threads is not None else default_threads()

    def with_(self, **kw) -> "QuadraturePolicy":
        return replace(self, **kw)


def map_chunks(fn: Callable[[np.ndarray], np.ndarray], pts: np.ndarray, threads: int = 1, chunk: int = 32768) -> np.ndarray:
    """Apply ``fn`` to row chunks of ``pts`` and concatenate in order."""
    if pts.shape[0] <= chunk:
        return fn(pts)
    parts = [pts[s : s + chunk] for s in range(0, pts.shape[0], chunk)]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            out = list(ex.map(fn, parts))
    else:
        out = [fn(p) for p in parts]
    return np.concatenate(out, axis=0)


def _child_offsets(d: int) -> np.ndarray:
    return np.array(list(itertools.product((-0.5, 0.5), repeat=d)), dtype=float).reshape(2**d, d)


def split(centers: np.ndarray, h: float) -> np.ndarray:
    """Children of cubes with half-width ``h``; children have half-width ``h/2``."""
    d = centers.shape[1]
    return (centers[:, None, :] + h * _child_offsets(d)[None, :, :]).reshape(-1, d)


# ---------------------------------------------------------------------------
# densities


@dataclass
class DensityEstimate:
    values: np.ndarray
    gap: np.ndarray
    converged: bool
    depth: int
    cells: int


def _sums(v: np.ndarray, lam: np.ndarray, band: float):
    """Per-lambda totals of counts ``#{v_i <= lam}`` and of uncertified flags."""
    j = lam.size
    pos = np.searchsorted(lam, v.ravel(), side="left")
    cnt = np.cumsum(np.bincount(pos, minlength=j + 1)[:j])
    if band > 0:
        lo = np.searchsorted(lam, v.ravel() - band, side="right")
        hi = np.searchsorted(lam, v.ravel() + band, side="left")
        diff = np.bincount(lo, minlength=j + 1) - np.bincount(hi, minlength=j + 1)
        unc = np.cumsum(diff[:j])
    else:
        unc = np.zeros(j, dtype=np.int64)
    return cnt.astype(float), unc.astype(float)


def density_on_torus(
    field: Callable[[np.ndarray], np.ndarray],
    lipschitz: float,
    d: int,
    lambdas: np.ndarray,
    policy: QuadraturePolicy,
) -> DensityEstimate:
    """Estimate ``F(lam) = int #{i : v_i(z) <= lam} dmu`` for each (sorted) ``lam``.

    ``field`` maps angles ``(M, d)`` to values ``(M, k)``, each column
    Lipschitz with constant ``lipschitz``.  Cubes whose value bands straddle
    an unresolved ``lam`` are split until the total straddling measure (the
    gap) is below ``atol + tol * F``.
    """
    lam = np.asarray(lambdas, dtype=float)
    n = policy.base_cells(d)
    h = np.pi / n
    centers = torus_grid(d, n)
    w = (h / np.pi) ** d
    j = lam.size
    acc = np.zeros(j)
    gap_acc = np.zeros(j)
    threads = policy.n_threads()
    depth = 0
    history: list = []
    while True:
        v = map_chunks(field, centers, threads)
        v = v.reshape(centers.shape[0], -1)
        band = lipschitz * h
        cnt, unc = _sums(v, lam, band)
        est = acc + w * cnt
        gap = gap_acc + w * unc
        thr = policy.atol + policy.tol * est
        need = gap > thr
        history.append(est)
        if policy.criterion == "cauchy" and len(history) >= policy.levels:
            tail = history[-policy.levels :]
            settled = np.all([np.abs(b - a) <= thr for a, b in zip(tail[:-1], tail[1:])], axis=0)
            # a zero estimate only means no sample has reached the level set yet
            need &= ~(settled & (est > 0))
        if not need.any():
            return DensityEstimate(est, gap, True, depth, centers.shape[0])
        # a cube goes down a level if one of its bands covers an unresolved lambda
        pref = np.concatenate([[0], np.cumsum(need)])
        lo = np.searchsorted(lam, v - band, side="right")
        hi = np.searchsorted(lam, v + band, side="left")
        refine = np.any(pref[hi] - pref[lo] > 0, axis=1)
        n_next = int(refine.sum()) * 2**d
        if depth >= policy.max_depth or n_next > policy.max_cells:
            return DensityEstimate(est, gap, False, depth, centers.shape[0])
        keep = ~refine
        c_keep, u_keep = _sums(v[keep], lam, band)
        acc += w * c_keep
        gap_acc += w * u_keep
        centers = split(centers[refine], h)
        h /= 2
        w /= 2**d
        depth += 1


# ---------------------------------------------------------------------------
# integrals with logarithmic singularities


@dataclass
class IntegralEstimate:
    value: float
    error: float
    converged: bool
    history: list
    cells: int


def _gauss_rule(d: int, q: int):
    x, wt = np.polynomial.legendre.leggauss(q)
    nodes = np.array(list(itertools.product(x, repeat=d)), dtype=float).reshape(-1, d)
    weights = np.array([np.prod(c) for c in itertools.product(wt, repeat=d)]) / 2**d
    return nodes, weights


def _cell_means(fn, centers: np.ndarray, h: float, nodes: np.ndarray, weights: np.ndarray, threads: int) -> np.ndarray:
    """Gauss-Legendre mean of ``fn`` over each cube."""
    d = centers.shape[1]
    pts = (centers[:, None, :] + h * nodes[None, :, :]).reshape(-1, d)
    vals = map_chunks(fn, pts, threads).reshape(centers.shape[0], -1)
    return vals @ weights


def _cauchy(history: list, policy: QuadraturePolicy, atol: float) -> tuple[bool, float]:
    if len(history) < policy.levels:
        return False, float("inf")
    tail = history[-policy.levels :]
    diffs = [abs(b - a) for a, b in zip(tail[:-1], tail[1:])]
    scale = abs(tail[-1])
    ok = all(dd <= max(atol, policy.tol * scale) for dd in diffs)
    return ok, diffs[-1]


def _aitken(seq: list) -> float:
    if len(seq) < 3:
        return seq[-1]
    a, b, c = seq[-3:]
    den = (c - b) - (b - a)
    if den == 0 or not np.isfinite(den):
        return c
    return c - (c - b) ** 2 / den


def _unresolved(smallest, centers: np.ndarray, h: float, lipschitz: float, grading: float) -> np.ndarray:
    """Cubes where ``ln smallest`` may not be smooth.

    A cube counts as resolved when ``smallest`` at its center exceeds
    ``grading`` times its observed variation over the corners.  The variation
    is capped by the global Lipschitz bound; using the local value keeps
    higher-order zeros (where ``smallest ~ dist^2``) from refining a region
    that grows as the cubes shrink.
    """
    d = centers.shape[1]
    corners = (centers[:, None, :] + h * 2 * _child_offsets(d)[None, :, :]).reshape(-1, d)
    sc = smallest(centers)
    sk = smallest(corners).reshape(centers.shape[0], -1)
    var = np.minimum(np.max(np.abs(sk - sc[:, None]), axis=1), lipschitz * h)
    return (sc <= grading * var) | (np.min(sk, axis=1) <= 0) | (sc <= 0)


def log_integral_on_torus(
    fn: Callable[[np.ndarray], np.ndarray],
    smallest: Callable[[np.ndarray], np.ndarray],
    lipschitz: float,
    d: int,
    policy: QuadraturePolicy,
) -> IntegralEstimate:
    """Torus mean of ``fn``, which may have logarithmic singularities.

    ``smallest`` returns a quantity that vanishes on the singular set and is
    ``lipschitz``-Lipschitz (the smallest relevant singular value).  Modes:

    ``plain``      uniform grids, doubled until successive values agree;
    ``refine``     cubes where ``smallest`` is small against its variation are split,
                   others are integrated with Gauss-Legendre and frozen;
    ``exclusion``  as ``refine`` but the unresolved cubes around the zero set
                   are dropped, and the sequence is Aitken-extrapolated.
    """
    q = policy.order(d)
    nodes, weights = _gauss_rule(d, q)
    threads = policy.n_threads()
    n = policy.base_cells(d)
    history: list = []
    if policy.mode == "plain":
        while True:
            h = np.pi / n
            centers = torus_grid(d, n)
            val = float(np.sum(_cell_means(fn, centers, h, nodes, weights, threads)) / centers.shape[0])
            history.append(val)
            ok, err = _cauchy(history, policy, policy.atol)
            if ok:
                return IntegralEstimate(val, err, True, history, centers.shape[0])
            if (2 * n) ** d * nodes.shape[0] > policy.max_cells * 8:
                raise QuadratureNotConverged("plain grid refinement exhausted", val, err)
            n *= 2

    h = np.pi / n
    centers = torus_grid(d, n)
    w = (h / np.pi) ** d
    acc = 0.0
    extrap: list = []
    total_cells = 0
    for depth in range(policy.max_depth + 1):
        means = _cell_means(fn, centers, h, nodes, weights, threads)
        total_cells += centers.shape[0]
        refine = _unresolved(smallest, centers, h, lipschitz, policy.grading)
        frozen = float(np.sum(means[~refine])) * w
        acc += frozen
        if policy.mode == "refine":
            history.append(acc + float(np.sum(means[refine])) * w)
            current = history[-1]
            ok, err = _cauchy(history, policy, policy.atol)
        else:
            history.append(acc)
            extrap.append(_aitken(history))
            current = extrap[-1]
            ok, err = _cauchy(extrap, policy, policy.atol)
        if not refine.any():
            return IntegralEstimate(current, 0.0 if policy.mode == "refine" else err, True, history, total_cells)
        if ok:
            return IntegralEstimate(current, err, True, history, total_cells)
        if int(refine.sum()) * 2**d > policy.max_cells:
            break
        centers = split(centers[refine], h)
        h /= 2
        w /= 2**d
    raise QuadratureNotConverged("log-singular refinement did not settle", current, err)


# ---------------------------------------------------------------------------
# smooth periodic integrands


def periodic_mean(
    fn: Callable[[np.ndarray], np.ndarray],
    d: int,
    policy: QuadraturePolicy,
    start: int | None = None,
) -> IntegralEstimate:
    """Midpoint (shifted trapezoid) rule on ``N^d`` grids with ``N`` doubling.

    Spectrally accurate for smooth periodic integrands.
    """
    n = start or max(8, policy.base_cells(d) // 4)
    threads = policy.n_threads()
    history: list = []
    while True:
        pts = torus_grid(d, n)
        val = map_chunks(fn, pts, threads)
        mean = float(np.sum(val) / pts.shape[0]) if np.isrealobj(val) else complex(np.sum(val) / pts.shape[0])
        history.append(mean)
        if len(history) >= 2:
            diff = abs(history[-1] - history[-2])
            if diff <= max(policy.atol, policy.tol * abs(history[-1])):
                return IntegralEstimate(history[-1], diff, True, history, pts.shape[0])
        if (2 * n) ** d > policy.max_cells * 4:
            raise QuadratureNotConverged("periodic grid refinement exhausted", history[-1], diff if len(history) > 1 else None)
        n *= 2
