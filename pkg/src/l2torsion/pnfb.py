"""Image-method heat kernels in one dimension.

The Neumann half-line and interval and the circle are the line with its
kernel folded by reflections or translations; comparing them with the line
kernel away from the boundary is an exactly solvable instance of "not
feeling the boundary".
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .errors import GridOutOfRange, OutOfDomain

GEOMETRIES = ("line", "halfline-neumann", "interval-neumann", "circle")
DEFAULT_M = 32


@dataclass(frozen=True)
class Kernel1D:
    geometry: str
    length: float | None = None
    M: int = DEFAULT_M

    def __post_init__(self):
        if self.geometry not in GEOMETRIES:
            raise ValueError(f"geometry must be one of {GEOMETRIES}")
        if self.compact:
            if self.length is None or not self.length > 0:
                raise ValueError("compact geometries need a length L > 0")
            if self.M < 8:
                raise ValueError("compact geometries need M >= 8 images")

    @property
    def compact(self) -> bool:
        return self.geometry in ("interval-neumann", "circle")

    def domain(self) -> tuple[float, float]:
        if self.geometry == "line":
            return -math.inf, math.inf
        if self.geometry == "halfline-neumann":
            return 0.0, math.inf
        return 0.0, float(self.length)


def line_kernel(t, x, y):
    t = np.asarray(t, dtype=float)
    return (4 * np.pi * t) ** -0.5 * np.exp(-((np.asarray(x) - np.asarray(y)) ** 2) / (4 * t))


def _check(k: Kernel1D, t, x, y):
    if np.any(np.asarray(t) <= 0):
        raise OutOfDomain("t must be positive")
    lo, hi = k.domain()
    for v in (x, y):
        v = np.asarray(v, dtype=float)
        if np.any(v < lo) or np.any(v > hi) or not np.all(np.isfinite(v)):
            raise OutOfDomain(f"point outside the {k.geometry} domain [{lo}, {hi}]")


def k_eval(k: Kernel1D, t, x, y):
    """Heat kernel ``k(t, x, y)`` of ``k.geometry``; broadcasts over arrays."""
    _check(k, t, x, y)
    t, x, y = (np.asarray(v, dtype=float) for v in (t, x, y))
    if k.geometry == "line":
        return line_kernel(t, x, y)
    if k.geometry == "halfline-neumann":
        return line_kernel(t, x, y) + line_kernel(t, x, -y)
    m = np.arange(-k.M, k.M + 1).reshape((-1,) + (1,) * np.broadcast(t, x, y).ndim)
    L = float(k.length)
    if k.geometry == "interval-neumann":
        return np.sum(line_kernel(t, x, y + 2 * m * L) + line_kernel(t, x, -y + 2 * m * L), axis=0)
    return np.sum(line_kernel(t, x, y + m * L), axis=0)


def interval_trace(k: Kernel1D, t: float) -> float:
    """``int_0^L k(t, x, x) dx`` by adaptive quadrature."""
    if k.geometry not in ("interval-neumann", "circle"):
        raise ValueError("trace needs a compact geometry")
    val, _ = integrate.quad(lambda x: float(k_eval(k, t, x, x)), 0.0, k.length, epsabs=1e-14, epsrel=1e-13, limit=200)
    return val


def neumann_eigen_sum(t: float, length: float, terms: int | None = None) -> float:
    """``sum_{j >= 0} exp(-t (pi j / L)^2)``, the Neumann interval heat trace."""
    if terms is None:
        # stop once the next term is below 1e-18
        terms = int(length / math.pi * math.sqrt(42.0 / t)) + 2
    j = np.arange(terms)
    return float(np.sum(np.exp(-t * (np.pi * j / length) ** 2)))


def mass(k: Kernel1D, t: float, y: float) -> float:
    lo, hi = k.domain()
    f = lambda x: float(k_eval(k, t, x, y))
    if k.compact:
        return integrate.quad(f, lo, hi, epsabs=1e-13, limit=200)[0]
    if k.geometry == "halfline-neumann":
        return integrate.quad(f, 0.0, np.inf, epsabs=1e-13, limit=200)[0]
    return integrate.quad(f, -np.inf, np.inf, epsabs=1e-13, limit=200)[0]


# ---------------------------------------------------------------------------
# reports


@dataclass
class BoundReport:
    rows: list
    max_ratio: float
    passed: bool
    meta: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        cols = list(self.rows[0].keys()) if self.rows else []
        w.writerow(cols)
        for r in self.rows:
            w.writerow([_fmt(r[c]) for c in cols])
        return buf.getvalue()


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)) or isinstance(v, str):
        return str(v)
    return repr(float(v))


def boundary_comparison_report(D: float, t_grid, x_grid, C: float = 1.0, kappa: float = 2.0) -> BoundReport:
    """Half-line Neumann against the line on the diagonal, against ``C e^{-2x/(kappa t)}``.

    The difference is exactly ``(4 pi t)^{-1/2} e^{-x^2/t}`` (the reflected
    image).  The bound with ``d_N(x) = x`` and ``d(x, x) = 0`` is checked at
    every grid point; ``passed`` means all ratios are <= 1.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    x_grid = np.asarray(x_grid, dtype=float)
    if np.any(x_grid < D):
        raise GridOutOfRange(f"grid point x={x_grid.min()} is closer than D={D} to the boundary")
    if np.any(t_grid <= 0):
        raise GridOutOfRange("t must be positive")
    half = Kernel1D("halfline-neumann")
    line = Kernel1D("line")
    rows = []
    for t in t_grid:
        for x in x_grid:
            diff = abs(float(k_eval(half, t, x, x)) - float(k_eval(line, t, x, x)))
            log_exact = -0.5 * math.log(4 * math.pi * t) - x * x / t
            log_bound = math.log(C) - 2 * x / (kappa * t)
            # the ratio is formed in log space: both sides underflow for small t
            rows.append({
                "t": t,
                "x": x,
                "difference": diff,
                "exact": math.exp(log_exact),
                "bound": math.exp(log_bound),
                "ratio": math.exp(log_exact - log_bound),
            })
    max_ratio = max(r["ratio"] for r in rows) if rows else 0.0
    return BoundReport(rows, max_ratio, max_ratio <= 1.0, {"C": C, "kappa": kappa, "D": D})


def large_time_constant(t0: float) -> float:
    return 3.0 * (4 * math.pi * t0) ** -0.5


def large_time_bound_report(t0: float, t_grid, x_grid, geometries=None) -> BoundReport:
    """Check ``k(t, x, y) <= c(t0) = 3 (4 pi t0)^{-1/2}`` for ``t >= t0``.

    The grid is used for ``x`` and ``y`` (points outside a geometry's domain
    are skipped); ``passed`` is reported per geometry in ``meta``.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if t0 <= 0 or np.any(t_grid < t0):
        raise GridOutOfRange("need t >= t0 > 0")
    c = large_time_constant(t0)
    if geometries is None:
        geometries = [
            Kernel1D("line"),
            Kernel1D("halfline-neumann"),
            Kernel1D("interval-neumann", 1.0),
            Kernel1D("circle", 1.0),
        ]
    rows, per = [], {}
    xs = np.asarray(x_grid, dtype=float)
    for k in geometries:
        lo, hi = k.domain()
        pts = xs[(xs >= lo) & (xs <= hi)]
        worst = 0.0
        for t in t_grid:
            vals = k_eval(k, t, pts[:, None], pts[None, :])
            i, j = np.unravel_index(np.argmax(vals), vals.shape)
            v = float(vals[i, j])
            worst = max(worst, v)
            tag = k.geometry if k.length is None else f"{k.geometry}({k.length:g})"
            rows.append({"geometry": tag, "t": t, "x": pts[i], "y": pts[j], "kernel_max": v, "bound": c, "ratio": v / c})
        per[k.geometry if k.length is None else f"{k.geometry}({k.length:g})"] = worst <= c
    max_ratio = max(r["ratio"] for r in rows) if rows else 0.0
    return BoundReport(rows, max_ratio, all(per.values()), {"c": c, "per_geometry": per})
