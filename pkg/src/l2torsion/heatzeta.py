"""Zeta-regularized determinants and analytic L2-torsion from heat traces.

For a heat trace ``theta(t)`` with small-time expansion
``theta(t) ~ sum_i kappa_i t^{-(n-i)/2}`` (remainder ``O(t^{1/2})``)

    zeta'(0) = int_0^1 (theta(t) - sum_i kappa_i t^{-(n-i)/2}) dt/t + sum_i c(i, n) kappa_i,

and the log-torsion aggregates ``zeta_p'(0) + int_1^oo theta_p(t) dt/t`` over
the form degrees ``p`` with weights ``(p/2)(-1)^(p+1)``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy import integrate
from scipy.interpolate import PchipInterpolator
from scipy.special import binom

from .errors import (
    AsymptoticsMismatch,
    BadTable,
    DivergentTail,
    IllConditionedFit,
    IndexOutOfRange,
    L2Error,
    MissingKappas,
)

EULER_GAMMA = float(np.euler_gamma)
PROBE_TIMES = (1e-6, 1e-5, 1e-4)
DECAY_TIMES = (1e2, 1e3, 1e4)
FIT_TIMES = tuple(np.geomspace(1e-4, 1e-2, 16))
MAX_CONDITION = 1e12


def c_coeff(i: int, n: int, alt_constants: bool = False) -> float:
    """``d/ds [Gamma(s)^{-1} / (s - (n-i)/2)]`` at ``s = 0``.

    Equals ``2/(i-n)`` for ``i != n`` and Euler's constant for ``i == n``.
    ``alt_constants=True`` returns an alternative normalization
    (``-(n-i)/2`` and ``Gamma'(1) = -gamma``); kept for comparison
    and not used by default.
    """
    if not (0 <= i <= n):
        raise IndexOutOfRange(f"need 0 <= i <= n, got i={i}, n={n}")
    if alt_constants:
        return -(n - i) / 2 if i != n else -EULER_GAMMA
    return 2.0 / (i - n) if i != n else EULER_GAMMA


# ---------------------------------------------------------------------------
# heat-trace data


@dataclass
class TraceTable:
    """Tabulated positive heat trace, interpolated monotonically in ``(ln t, ln theta)``.

    Beyond the last sample the trace continues as ``A e^{-bt} t^{-c}``,
    fitted on the last decade of the table.
    """

    t: np.ndarray
    theta: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        th = np.asarray(self.theta, dtype=float)
        if t.ndim != 1 or t.shape != th.shape or t.size < 4:
            raise BadTable("a table needs at least four (t, theta) pairs")
        if not np.all(np.isfinite(t)) or not np.all(np.isfinite(th)):
            raise BadTable("table entries must be finite")
        if np.any(t <= 0) or np.any(np.diff(t) <= 0):
            raise BadTable("table times must be positive and strictly increasing")
        if np.any(th <= 0):
            raise BadTable("heat-trace table must be positive")
        self.t, self.theta = t, th
        self._interp = PchipInterpolator(np.log(t), np.log(th))
        self.tail = self._fit_tail()

    @property
    def t_min(self) -> float:
        return float(self.t[0])

    @property
    def t_max(self) -> float:
        return float(self.t[-1])

    def _fit_tail(self):
        sel = self.t >= self.t_max / 10
        if sel.sum() < 3:
            sel = np.zeros_like(sel)
            sel[-3:] = True
        tt = self.t[sel]
        m = np.column_stack([np.ones_like(tt), -tt, -np.log(tt)])
        coef, *_ = np.linalg.lstsq(m, np.log(self.theta[sel]), rcond=None)
        return float(math.exp(coef[0])), float(coef[1]), float(coef[2])

    def tail_value(self, t):
        a, b, c = self.tail
        return a * np.exp(-b * t) * np.power(t, -c)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        inside = np.clip(t, self.t_min, self.t_max)
        out = np.exp(self._interp(np.log(inside)))
        return np.where(t > self.t_max, self.tail_value(np.maximum(t, self.t_max)), out)


Trace = Callable[[float], float]


@dataclass
class HeatTraceModel:
    """Per-degree heat traces ``theta_p`` of an ``n``-dimensional problem.

    ``traces[p]`` is a callable or a :class:`TraceTable`; ``kappas[p]`` lists
    ``kappa_0 .. kappa_n`` (missing degrees are fitted on demand).
    ``weyl`` marks models of genuine Laplacians, whose leading coefficient
    must be positive.
    """

    n: int
    traces: Mapping[int, object]
    kappas: Mapping[int, Sequence[float]] = field(default_factory=dict)
    labels: Mapping[str, str] = field(default_factory=dict)
    weyl: bool = False

    def __post_init__(self):
        if self.n < 0:
            raise ValueError("dimension must be >= 0")
        for p in self.traces:
            if not (0 <= p <= self.n):
                raise IndexOutOfRange(f"degree {p} outside 0..{self.n}")
        for p, k in self.kappas.items():
            if len(k) != self.n + 1:
                raise MissingKappas(f"degree {p} needs {self.n + 1} coefficients, got {len(k)}")

    def theta(self, p: int):
        return self.traces[p]

    def kappa(self, p: int) -> np.ndarray:
        if p not in self.kappas:
            raise MissingKappas(f"no small-time coefficients for degree {p}")
        return np.asarray(self.kappas[p], dtype=float)

    def scaled(self, factor: float) -> "HeatTraceModel":
        traces = {p: _scale(f, factor) for p, f in self.traces.items()}
        kappas = {p: [factor * k for k in ks] for p, ks in self.kappas.items()}
        return HeatTraceModel(self.n, traces, kappas, dict(self.labels), self.weyl)


def _scale(f, factor):
    if isinstance(f, TraceTable):
        return TraceTable(f.t, factor * f.theta)
    return lambda t: factor * f(t)


def _expansion(kappa: np.ndarray, n: int, t):
    t = np.asarray(t, dtype=float)
    return sum(k * t ** (-(n - i) / 2) for i, k in enumerate(kappa) if k != 0.0) + 0.0 * t


def _probe_times(f) -> np.ndarray:
    if isinstance(f, TraceTable):
        return f.t[:3]
    return np.asarray(PROBE_TIMES)


def check_remainder(model: HeatTraceModel, p: int) -> None:
    """Raise :class:`AsymptoticsMismatch` unless ``theta - expansion`` looks ``O(t^{1/2})``.

    The ratio ``|r(t)| / sqrt(t)`` at the three smallest sample times must not
    grow towards ``t -> 0`` (a factor above 5 across the probes counts as
    growth), unless the remainder is at rounding level.
    """
    f = model.theta(p)
    kappa = model.kappa(p)
    if model.weyl and kappa[0] <= 0:
        raise AsymptoticsMismatch(f"leading coefficient {kappa[0]:.3e} is not positive")
    ts = _probe_times(f)
    th = np.array([float(f(t)) for t in ts])
    r = th - _expansion(kappa, model.n, ts)
    q = np.abs(r) / np.sqrt(ts)
    scale = np.abs(th) + np.abs(_expansion(np.abs(kappa), model.n, ts))
    if q[0] > 5 * q[-1] and abs(r[0]) > 1e-8 * scale[0] + 1e-300:
        raise AsymptoticsMismatch(
            f"remainder/sqrt(t) grows from {q[-1]:.3e} to {q[0]:.3e} as t -> 0"
        )


# ---------------------------------------------------------------------------
# the two integrals


def _quad(fn, a, b, **kw):
    """``scipy.integrate.quad`` without warnings; callers report its error estimate."""
    opts = dict(epsabs=1e-14, epsrel=1e-12, limit=400)
    opts.update(kw)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        return integrate.quad(fn, a, b, **opts)


@dataclass
class Quad:
    value: float
    error: float


def small_time_zeta_derivative(model: HeatTraceModel, p: int, alt_constants: bool = False) -> Quad:
    """``zeta_p'(0)`` from the subtracted small-time integral plus the ``c(i,n)`` sum.

    The substitution ``t = u^2`` turns ``r(t)/t dt`` into ``2 r(u^2)/u du``,
    which is bounded when ``r = O(t^{1/2})``.
    """
    kappa = model.kappa(p)
    f = model.theta(p)
    check_remainder(model, p)
    n = model.n

    def rem(t):
        return float(f(t)) - float(_expansion(kappa, n, t))

    value = 0.0
    error = 0.0
    lo = 0.0
    if isinstance(f, TraceTable) and f.t_min < 1.0:
        # below the table the remainder is continued as c sqrt(t)
        c0 = rem(f.t_min) / math.sqrt(f.t_min)
        value += 2 * c0 * math.sqrt(f.t_min)
        lo = math.sqrt(f.t_min)
    pts = None
    if isinstance(f, TraceTable):
        pts = [math.sqrt(t) for t in f.t if lo < math.sqrt(t) < 1.0][:50] or None
    v, e = _quad(lambda u: 2.0 * rem(u * u) / u, lo, 1.0, points=pts)
    value += v
    error += e
    value += sum(c_coeff(i, n, alt_constants) * k for i, k in enumerate(kappa))
    return Quad(value, error)


def _check_decay(f) -> None:
    if isinstance(f, TraceTable):
        a, b, c = f.tail
        if b <= 1e-12 and c <= 1.0:
            raise DivergentTail(f"fitted tail A e^(-bt) t^(-c) has b={b:.3g}, c={c:.3g}: not integrable")
        return
    ts = np.asarray(DECAY_TIMES)
    g = np.array([abs(float(f(t))) for t in ts]) * np.log(ts)
    if g[-1] == 0.0:
        return
    if not (g[-1] < 0.9 * g[0] and g[-1] <= g[1]):
        raise DivergentTail(f"theta(T) ln T does not decay: {g[0]:.3e} -> {g[-1]:.3e}")


def large_time_integral(model: HeatTraceModel, p: int) -> Quad:
    """``int_1^oo theta_p(t) dt / t``; the tail beyond any table uses its fitted decay."""
    f = model.theta(p)
    _check_decay(f)
    g = lambda t: float(f(t)) / t
    if isinstance(f, TraceTable):
        pts = [t for t in f.t if 1.0 < t < f.t_max][:50] or None
        hi = max(f.t_max, 1.0)
        v1, e1 = _quad(g, 1.0, hi, points=pts) if hi > 1 else (0.0, 0.0)
        v2, e2 = _quad(lambda t: float(f.tail_value(t)) / t, hi, np.inf)
        return Quad(v1 + v2, e1 + e2)
    v1, e1 = _quad(g, 1.0, 100.0)
    v2, e2 = _quad(g, 100.0, np.inf)
    return Quad(v1 + v2, e1 + e2)


@dataclass
class TorsionBreakdown:
    zeta_derivatives: dict
    tails: dict
    total: float
    errors: dict = field(default_factory=dict)

    def per_volume(self, vol: float) -> float:
        """``tau = log T / Vol``, the volume-normalized torsion constant."""
        return self.total / vol


def log_torsion(model: HeatTraceModel, alt_constants: bool = False) -> TorsionBreakdown:
    """``sum_p (p/2)(-1)^(p+1) (zeta_p'(0) + int_1^oo theta_p dt/t)``.

    Degrees without a trace contribute nothing; missing ``kappa`` are fitted.
    """
    zetas, tails, errs = {}, {}, {}
    total = 0.0
    model = ensure_kappas(model)
    for p in sorted(model.traces):
        try:
            z = small_time_zeta_derivative(model, p, alt_constants)
            tl = large_time_integral(model, p)
        except L2Error as exc:
            raise type(exc)(f"degree {p}: {exc}") from exc
        zetas[p], tails[p] = z.value, tl.value
        errs[p] = z.error + tl.error
        total += 0.5 * p * (-1) ** (p + 1) * (z.value + tl.value)
    return TorsionBreakdown(zetas, tails, total, errs)


# ---------------------------------------------------------------------------
# fitting small-time coefficients


@dataclass
class KappaFit:
    kappas: np.ndarray
    residual: float
    condition: float


def fit_kappa(t, theta, n: int, extra: int = 2) -> KappaFit:
    """Least squares ``theta ~ sum_i kappa_i t^{-(n-i)/2}`` on small-time samples.

    ``extra`` further columns ``t^{1/2}, t, ...`` absorb the remainder.  Rows
    are multiplied by ``t^{n/2}`` so the design is a polynomial in ``sqrt t``;
    columns are then normalized before the condition number is checked.
    """
    t = np.asarray(t, dtype=float)
    theta = np.asarray(theta, dtype=float)
    ncols = n + 1 + extra
    if t.size < max(2 * (n + 1), ncols):
        raise IllConditionedFit(f"need at least {max(2 * (n + 1), ncols)} samples, got {t.size}")
    s = np.sqrt(t)
    design = np.column_stack([s**k for k in range(ncols)])
    rhs = theta * s**n
    norms = np.linalg.norm(design, axis=0)
    scaled = design / norms
    cond = float(np.linalg.cond(scaled))
    if not np.isfinite(cond) or cond > MAX_CONDITION:
        raise IllConditionedFit(f"design condition number {cond:.3e}")
    coef, *_ = np.linalg.lstsq(scaled, rhs, rcond=None)
    coef = coef / norms
    res = float(np.linalg.norm(scaled @ (coef * norms) - rhs) / max(np.linalg.norm(rhs), 1e-300))
    return KappaFit(coef[: n + 1], res, cond)


def ensure_kappas(model: HeatTraceModel) -> HeatTraceModel:
    """Fill in missing ``kappa`` lists by :func:`fit_kappa` on the smallest times."""
    missing = [p for p in model.traces if p not in model.kappas]
    if not missing:
        return model
    kappas = dict(model.kappas)
    for p in missing:
        f = model.theta(p)
        if isinstance(f, TraceTable):
            k = max(2 * (model.n + 1), model.n + 3) + 4
            ts = f.t[: max(k, int(np.sum(f.t <= 0.05)))]
        else:
            ts = np.asarray(FIT_TIMES)
        th = np.array([float(f(t)) for t in ts])
        kappas[p] = list(fit_kappa(ts, th, model.n).kappas)
    return HeatTraceModel(model.n, model.traces, kappas, dict(model.labels), model.weyl)


# ---------------------------------------------------------------------------
# models


def free_space_trace(n: int, vol: float, p: int):
    """Flat ``R^n``: ``theta_p(t) = binom(n,p) vol (4 pi t)^{-n/2}`` and its exact ``kappa``."""
    if n < 1 or vol <= 0:
        raise ValueError("need n >= 1 and vol > 0")
    if not (0 <= p <= n):
        raise IndexOutOfRange(f"degree {p} outside 0..{n}")
    a = float(binom(n, p)) * vol * (4 * math.pi) ** (-n / 2)
    kappa = [a] + [0.0] * n
    return (lambda t: a * t ** (-n / 2)), kappa


def free_space_model(n: int, vol: float, degrees=None) -> HeatTraceModel:
    traces, kappas = {}, {}
    for p in degrees if degrees is not None else range(n + 1):
        traces[p], kappas[p] = free_space_trace(n, vol, p)
    return HeatTraceModel(n, traces, kappas, {"model": "free"}, weyl=True)


def circle_model(length: float) -> HeatTraceModel:
    """Flat line modulo nothing, normalized by a fundamental domain of length ``L``."""
    return free_space_model(1, length)


def exponential_model(mu: float, n: int = 1, p: int = 1) -> HeatTraceModel:
    """A single eigenvalue ``mu`` placed in degree ``p``: ``theta = e^{-mu t}``, ``kappa_n = 1``."""
    kappa = [0.0] * n + [1.0]
    return HeatTraceModel(n, {p: lambda t: math.exp(-mu * t)}, {p: kappa}, {"model": f"exp({mu})"})


def plancherel_model(table: Mapping[int, tuple], n: int, vol: float, kappas=None) -> HeatTraceModel:
    """``theta_p = vol * H_p`` from tabulated homogeneous local traces ``H_p``."""
    if n % 2 == 0:
        raise BadTable(f"Plancherel tables are supported for odd n only, got n={n}")
    if vol <= 0:
        raise BadTable("volume must be positive")
    traces = {}
    for p, (t, h) in table.items():
        if not (0 <= int(p) <= n):
            raise BadTable(f"degree {p} outside 0..{n}")
        traces[int(p)] = TraceTable(np.asarray(t, float), vol * np.asarray(h, float))
    kap = {int(p): [vol * k for k in ks] for p, ks in (kappas or {}).items()}
    return HeatTraceModel(n, traces, kap, {"model": "plancherel"}, weyl=True)


def torsion_per_volume(model: HeatTraceModel, vol: float) -> float:
    return log_torsion(model).per_volume(vol)


# ---------------------------------------------------------------------------
# hyperbolic 3-space


def h3_heat_kernel(t, r):
    """Heat kernel of the function Laplacian on H^3 (curvature -1) at distance ``r``."""
    t = np.asarray(t, dtype=float)
    r = np.asarray(r, dtype=float)
    ratio = np.where(r == 0, 1.0, r / np.sinh(np.where(r == 0, 1.0, r)))
    return (4 * np.pi * t) ** -1.5 * ratio * np.exp(-t - r * r / (4 * t))


def h3_local_trace(t):
    """``H_0(t) = e^{-t} (4 pi t)^{-3/2}``, the on-diagonal value of :func:`h3_heat_kernel`."""
    t = np.asarray(t, dtype=float)
    return np.exp(-t) * (4 * np.pi * t) ** -1.5


def h3_table(t_min: float = 1e-4, t_max: float = 50.0, points: int = 200):
    t = np.geomspace(t_min, t_max, points)
    return t, h3_local_trace(t)
