"""Cusp volumes under the warped metric and the torsion-anomaly bookkeeping.

A cusp cross-section ``G_j`` at height ``t`` carries the metric
``dt^2 + e^{-2t} dx^2``, so its ``(n-1)``-volume scales as ``e^{-(n-1)t}``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.optimize import curve_fit

from .errors import BadRange, InsufficientData, MissingField, NonOddDimension

LEDGER_COLUMNS = ("R", "logTan_rho", "logTan_triv", "logTtop_triv", "dim_rho")
RATE_INF = math.inf


@dataclass(frozen=True)
class CuspModel:
    """``k`` cusps with cross-section volumes ``Vol(G_j)`` glued to a core of volume ``Vol(F_0)``.

    ``demo`` admits even ``n`` for illustration; such models refuse to enter
    torsion computations (:func:`require_odd`).
    """

    n: int
    cross_sections: tuple
    core_volume: float
    demo: bool = False
    label: str = ""

    def __post_init__(self):
        cs = tuple(float(v) for v in self.cross_sections)
        if not cs:
            raise ValueError("need at least one cusp")
        if any(not v > 0 for v in cs):
            raise ValueError("cross-section volumes must be positive")
        if self.core_volume < 0:
            raise ValueError("core volume must be >= 0")
        if self.n < 2:
            raise ValueError("dimension must be >= 2")
        if not self.demo and (self.n % 2 == 0 or self.n < 3):
            raise NonOddDimension(f"cusp models need odd n >= 3, got {self.n}")
        object.__setattr__(self, "cross_sections", cs)

    @property
    def k(self) -> int:
        return len(self.cross_sections)

    @property
    def section_total(self) -> float:
        return float(sum(self.cross_sections))

    @property
    def exponent(self) -> int:
        return self.n - 1


def require_odd(model: CuspModel) -> None:
    if model.n % 2 == 0:
        raise NonOddDimension(f"n = {model.n}: analytic torsion of even-dimensional quotients is not handled")


def _integral(a: float, R: float, S: float) -> float:
    """``int_R^S e^{-a t} dt`` for ``a > 0`` (``S`` may be ``inf``)."""
    if math.isinf(S):
        return math.exp(-a * R) / a
    return -math.expm1(-a * (S - R)) * math.exp(-a * R) / a


def vol_slab(model: CuspModel, R: float, S: float, exponent: int | None = None) -> float:
    """``Vol(F_S minus F_R) = sum_j Vol(G_j) int_R^S e^{-(n-1)t} dt``.

    ``exponent`` overrides ``n - 1`` (``2`` reproduces the three-dimensional
    factors ``e^{-2R+2}``).
    """
    if not (0 <= R < S):
        raise BadRange(f"need 0 <= R < S, got R={R}, S={S}")
    a = model.exponent if exponent is None else exponent
    return model.section_total * _integral(a, R, S)


def vol_boundary(model: CuspModel, R: float, exponent: int | None = None) -> float:
    """``Vol(dF_R) = sum_j Vol(G_j) e^{-(n-1)R}``."""
    if R < 0:
        raise BadRange("R must be >= 0")
    a = model.exponent if exponent is None else exponent
    return model.section_total * math.exp(-a * R)


def vol_thick(model: CuspModel, R: float) -> float:
    """``Vol(F_R) = Vol(F_0) + Vol(F_R minus F_0)``."""
    if R < 0:
        raise BadRange("R must be >= 0")
    if R == 0:
        return float(model.core_volume)
    return model.core_volume + vol_slab(model, 0.0, R)


def vol_total(model: CuspModel) -> float:
    return model.core_volume + model.section_total / model.exponent


def stated_scaling(R: float) -> float:
    """``e^{-2R+2}``, the stated scaling for slabs and boundaries in dimension three."""
    return math.exp(-2 * R + 2)


def analytic_torsion_estimate(model: CuspModel, tau: float) -> float:
    """``log T = Vol * tau`` for a volume-normalized torsion constant ``tau``."""
    require_odd(model)
    return vol_total(model) * tau


def h2_example() -> CuspModel:
    """The level-two congruence quotient of the hyperbolic plane (demo only, n = 2).

    Three cusps (at infinity, 0 and 1), each of width 2.  Cutting the
    maximal disjoint horoballs (``y > 1`` at infinity and the diameter-1 discs
    at 0 and 1, which are tangent to it) gives cross-sections of length 2 and
    cusp areas 2 each; the total area is ``2 pi`` (two ideal triangles), so
    the core has area ``2 pi - 6``.
    """
    return CuspModel(2, (2.0, 2.0, 2.0), 2 * math.pi - 6.0, demo=True, label="Gamma(2) on H^2")


# ---------------------------------------------------------------------------
# anomaly ledger


@dataclass
class AnomalyLedger:
    rows: list = field(default_factory=list)

    def __post_init__(self):
        Rs = [float(r["R"]) for r in self.rows]
        if any(b <= a for a, b in zip(Rs, Rs[1:])):
            raise BadRange("ledger R values must be strictly increasing")

    def column(self, name: str) -> np.ndarray:
        return np.array([float(_get(r, name)) for r in self.rows])


def _get(row: Mapping, name: str):
    if name not in row or row[name] is None or row[name] == "":
        raise MissingField(f"ledger row lacks '{name}'")
    return row[name]


def anomaly_combine(row: Mapping) -> float:
    """``logT^An(rho) + dim(rho) (logT^Top(1) - logT^An(1))``.

    The analytic-minus-topological anomaly of the quotient is ``dim(rho)``
    times that of the trivial representation, so correcting the analytic
    torsion for ``rho`` yields the topological one.  Values are combined
    as given, so ``fractions.Fraction`` inputs give exact results.
    """
    an_rho = _get(row, "logTan_rho")
    an_triv = _get(row, "logTan_triv")
    top_triv = _get(row, "logTtop_triv")
    dim = _get(row, "dim_rho")
    return an_rho + dim * (top_triv - an_triv)


@dataclass
class ConvergenceReport:
    limit: float
    rate: float
    amplitude: float
    monotone: bool
    residuals: list


def convergence_report(ledger: AnomalyLedger, column: str = "logTan_rho") -> ConvergenceReport:
    """Fit ``y(R) = L + B e^{-c R}``; report the limit ``L`` and rate ``c``.

    A constant column has rate ``inf``.  ``monotone`` says whether
    ``|y - L|`` decreases along the ledger.
    """
    if len(ledger.rows) < 3:
        raise InsufficientData(f"need at least 3 ledger rows, got {len(ledger.rows)}")
    R = ledger.column("R")
    y = ledger.column(column)
    scale = max(np.max(np.abs(y)), 1.0)
    if np.ptp(y) <= 1e-14 * scale:
        return ConvergenceReport(float(y[-1]), RATE_INF, 0.0, True, [0.0] * len(y))
    # starting guess from the last three points, as for geometric sequences
    d1, d2 = y[-2] - y[-3], y[-1] - y[-2]
    c0 = 1.0
    if d1 != 0 and 0 < d2 / d1 < 1:
        c0 = -math.log(d2 / d1) / max(R[-1] - R[-2], 1e-12)
    L0 = y[-1]

    def model(r, L, B, c):
        return L + B * np.exp(-c * (r - R[0]))

    try:
        popt, _ = curve_fit(model, R, y, p0=(L0, y[0] - L0, c0), maxfev=20000)
    except RuntimeError:
        popt = (L0, y[0] - L0, c0)
    L, B, c = (float(v) for v in popt)
    res = np.abs(y - L)
    monotone = bool(np.all(np.diff(res) <= 1e-12 * scale))
    return ConvergenceReport(L, c, B * math.exp(c * R[0]), monotone, [float(v) for v in res])


def read_ledger(text: str) -> AnomalyLedger:
    rows = []
    for rec in csv.DictReader(line for line in io.StringIO(text) if not line.startswith("#")):
        row = {}
        for k, v in rec.items():
            if k is None:
                continue
            k = k.strip()
            v = (v or "").strip()
            row[k] = float(v) if v else None
        rows.append(row)
    for r in rows:
        _get(r, "R")
    return AnomalyLedger(rows)


def write_ledger(ledger: AnomalyLedger, columns: Sequence[str] = LEDGER_COLUMNS) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in ledger.rows:
        w.writerow([repr(float(r[c])) if r.get(c) is not None else "" for c in columns])
    return buf.getvalue()
