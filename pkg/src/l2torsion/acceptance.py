"""Built-in acceptance suite (criteria 1-13).

Each criterion returns a :class:`Result` whose ``detail`` is a short,
deterministic summary (no timings), so two runs with one seed render to the
same CSV bytes.  Runtime limits are still enforced; they only show up in the
pass/fail column.
"""

from __future__ import annotations

import csv
import io
import math
import time
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy import special

from . import cuspgeom, cwcomplex, fincomplex, heatzeta, pnfb, samples
from .zd import invariants as inv
from .zd.laurent import LaurentMatrix, TwistedRep
from .zd.quadrature import QuadraturePolicy

DEFAULT_SEED = 20240601


@dataclass
class Result:
    number: int
    name: str
    passed: bool
    detail: str


def _rng(seed: int, number: int) -> np.random.Generator:
    return np.random.default_rng([seed, number])


def _g(x: float) -> str:
    return f"{x:.3e}"


# ---------------------------------------------------------------------------


def c1_zeta_pipeline(seed: int) -> Result:
    start = time.perf_counter()
    worst = 0.0
    for mu in (0.5, 1.0, 2.0, 10.0):
        m = heatzeta.exponential_model(mu)
        z = heatzeta.small_time_zeta_derivative(m, 1).value
        tail = heatzeta.large_time_integral(m, 1).value
        worst = max(worst, abs(z + tail + math.log(mu)))
    fast = time.perf_counter() - start < 1.0
    return Result(1, "zeta pipeline", worst <= 1e-8 and fast, f"max_err={_g(worst)} runtime_ok={fast}")


def _c_oracle(i: int, n: int, h: float = 1e-20) -> float:
    """Complex-step derivative at 0 of ``1 / (Gamma(s) (s - (n-i)/2))``."""
    a = (n - i) / 2
    s = 1j * h
    return float((special.rgamma(s) / (s - a)).imag / h)


def c2_c_coeff(seed: int) -> Result:
    gamma_err = max(abs(heatzeta.c_coeff(n, n) - 0.5772156649) for n in range(8))
    worst = 0.0
    for n in range(8):
        for i in range(n):
            worst = max(worst, abs(heatzeta.c_coeff(i, n) - _c_oracle(i, n)))
            worst = max(worst, abs(heatzeta.c_coeff(i, n) - 2 / (i - n)))
    ok = gamma_err <= 1e-10 and worst <= 1e-8
    return Result(2, "c_coeff", ok, f"gamma_err={_g(gamma_err)} max_err={_g(worst)}")


def c3_circle(seed: int) -> Result:
    start = time.perf_counter()
    worst = 0.0
    for L in (0.5, 1.0, math.pi):
        b = heatzeta.log_torsion(heatzeta.circle_model(L))
        ref = 2 * L * (4 * math.pi) ** -0.5
        worst = max(worst, abs(b.zeta_derivatives[1] + ref), abs(b.tails[1] - ref), abs(b.total))
    fast = time.perf_counter() - start < 1.0
    return Result(3, "circle torsion", worst <= 1e-8 and fast, f"max_err={_g(worst)} runtime_ok={fast}")


def c4_fk(seed: int) -> Result:
    start = time.perf_counter()
    e1 = abs(inv.fk_log_det(LaurentMatrix.scalar({1: 1, 0: -2})).value - math.log(2))
    e2 = abs(inv.fk_log_det(LaurentMatrix.scalar({1: 1, 0: -1})).value)
    e3 = abs(inv.fk_log_det(LaurentMatrix.scalar({-1: -1, 0: 2, 1: -1})).value)
    p = LaurentMatrix.scalar({(0, 0): 1, (1, 0): 1, (0, 1): 1}, d=2)
    vals = [inv.fk_log_det(p, inv.LOGDET_POLICY.with_(base=b)).value for b in (64, 128, 256)]
    spread = max(vals) - min(vals)
    fast = time.perf_counter() - start < 30.0
    ok = e1 <= 1e-10 and e2 <= 1e-8 and e3 <= 1e-6 and spread <= 1e-5 and fast
    detail = f"err_t-2={_g(e1)} err_t-1={_g(e2)} err_lap={_g(e3)} m(1+x+y)={vals[-1]:.10f} spread={_g(spread)} runtime_ok={fast}"
    return Result(4, "Fuglede-Kadison / Mahler", ok, detail)


def c5_ns(seed: int) -> Result:
    a = inv.ns_estimate(LaurentMatrix.scalar({1: 1, 0: -1}))
    b = inv.ns_estimate(LaurentMatrix.scalar({-1: -1, 0: 2, 1: -1}))
    ok = abs(a.alpha - 1.0) <= 0.05 and a.r2 > 0.999 and abs(b.alpha - 0.5) <= 0.05
    return Result(5, "Novikov-Shubin", ok, f"alpha(t-1)={a.alpha:.4f} r2={a.r2:.6f} alpha(lap)={b.alpha:.4f}")


def c6_density_identity(seed: int) -> Result:
    rng = _rng(seed, 6)
    finite_ok = True
    for _ in range(20):
        top = int(rng.integers(1, 5))
        ranks, bettis = samples.random_ranks(rng, top, acyclic=True)
        C = samples.random_complex(rng, ranks, bettis)
        for p in range(C.top + 1):
            smax = max(np.linalg.eigvalsh(fincomplex.laplacian(C, p)).max(), 1.0) if C.dims[p] else 1.0
            lam = np.sort(rng.uniform(0, 1.2 * smax, 16))
            finite_ok &= fincomplex.density_identity_check(C, p, lam).passed
    X = cwcomplex.assemble(cwcomplex.circle())
    lam = np.sort(rng.uniform(0.0, 4.5, 16))
    circle_err = 0.0
    for p in range(X.top + 1):
        lhs = inv.laplacian_density_curve(X, p, lam).values
        rhs = inv.complex_density_curve(X, p, np.sqrt(lam)).values
        if p >= 1:
            rhs = rhs + inv.complex_density_curve(X, p - 1, np.sqrt(lam)).values
        circle_err = max(circle_err, float(np.max(np.abs(lhs - rhs))))
    ok = finite_ok and circle_err <= 1e-4
    return Result(6, "density identity", ok, f"finite_exact={finite_ok} circle_err={_g(circle_err)}")


def c7_twisted_tori(seed: int) -> Result:
    rng = _rng(seed, 7)
    start = time.perf_counter()
    max_b, min_alpha = 0.0, math.inf
    for k in (2, 3):
        X = cwcomplex.torus(k)
        for _ in range(5):
            rho = TwistedRep.character(np.exp(1j * rng.uniform(0.0, 2 * math.pi, k)))
            Y = cwcomplex.assemble(X, rho)
            for n in range(Y.top + 1):
                max_b = max(max_b, abs(inv.complex_betti(Y, n)))
                min_alpha = min(min_alpha, inv.complex_ns_estimate(Y, n).alpha)
    fast = time.perf_counter() - start < 60.0
    ok = max_b <= 1e-6 and min_alpha > 0.2 and fast
    return Result(7, "twisted tori", ok, f"max_betti={_g(max_b)} min_alpha={min_alpha:.4f} runtime_ok={fast}")


def c8_finite(seed: int) -> Result:
    rng = _rng(seed, 8)
    tors = 0.0
    for _ in range(20):
        A = samples.random_invertible(rng, 5, 0.3, 3.0)
        C = fincomplex.make_complex([A])
        tors = max(tors, abs(fincomplex.torsion_finite(C) - math.log(abs(np.linalg.det(A)))))
    dil = 0
    lam_low = np.geomspace(1e-3, 0.25, 12)
    for _ in range(50):
        C = samples.random_complex(rng, *samples.random_ranks(rng, int(rng.integers(1, 4))))
        D = samples.random_stabilization(rng, C)
        dil += fincomplex.homotopy_dilatation_check(C, D, lam_low).passed
    exact = 0
    lam = np.geomspace(1e-4, 1.0, 16)
    for _ in range(50):
        top = int(rng.integers(1, 4))
        C = samples.random_complex(rng, *samples.random_ranks(rng, top))
        E = samples.random_complex(rng, *samples.random_ranks(rng, top, acyclic=True))
        D, f, g = samples.random_exact_triple(rng, C, E)
        exact += all(fincomplex.ses_bound_check(C, D, E, f, g, n, lam).passed for n in range(top + 1))
    sand = 0
    lam_s = np.geomspace(1e-3, 1 / math.sqrt(2), 16)
    for _ in range(50):
        C = samples.random_complex(rng, *samples.random_ranks(rng, int(rng.integers(1, 4))))
        sand += all(fincomplex.sobolev_sandwich_check(C, p, lam_s).passed for p in range(C.top + 1))
    ok = tors <= 1e-9 and dil == 50 and exact == 50 and sand == 50
    return Result(8, "finite-complex oracles", ok, f"torsion_err={_g(tors)} dilatation={dil}/50 exact_triple={exact}/50 sandwich={sand}/50")


def c9_induction(seed: int) -> Result:
    X = cwcomplex.circle()
    base = cwcomplex.assemble(X)
    db, dns = 0.0, 0.0
    for embed in ([0], [1]):
        Y = cwcomplex.assemble(cwcomplex.induce(X, embed, 2))
        for n in range(base.top + 1):
            db = max(db, abs(inv.complex_betti(base, n) - inv.complex_betti(Y, n)))
            a0 = inv.complex_ns_estimate(base, n).alpha
            a1 = inv.complex_ns_estimate(Y, n).alpha
            if not (math.isinf(a0) and math.isinf(a1)):
                dns = max(dns, abs(a0 - a1))
    ok = db <= 1e-6 and dns <= 0.05
    return Result(9, "induction invariance", ok, f"betti_diff={_g(db)} ns_diff={_g(dns)}")


def _random_hermitian(rng: np.random.Generator) -> LaurentMatrix:
    m = int(rng.integers(1, 3))
    terms = {(g,): (rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))) / 2 for g in (-1, 0, 1)}
    B = LaurentMatrix(1, m, m, terms)
    return B.adjoint() @ B


def c10_stieltjes(seed: int) -> Result:
    rng = _rng(seed, 10)
    ts = (0.5, 1.0, 2.0)
    worst = 0.0
    for _ in range(10):
        A = _random_hermitian(rng)
        direct = np.array([inv.heat_trace_zd(A, t) for t in ts])
        stj = inv.stieltjes_heat_trace(A, ts)
        worst = max(worst, float(np.max(np.abs(direct - stj) / (1 + np.abs(direct)))))
    lap = LaurentMatrix.scalar({-1: -1, 0: 2, 1: -1})
    circ = max(abs(inv.heat_trace_zd(lap, t) - special.ive(0, 2 * t)) for t in ts)
    ok = worst <= 1e-4 and circ <= 1e-8
    return Result(10, "Stieltjes / heat trace", ok, f"stieltjes_err={_g(worst)} circle_err={_g(circ)}")


def c11_pnfb(seed: int) -> Result:
    half, line = pnfb.Kernel1D("halfline-neumann"), pnfb.Kernel1D("line")
    ts = np.geomspace(1e-3, 1.0, 31)
    xs = np.linspace(1.0, 5.0, 41)
    diff_err = 0.0
    for t in ts:
        kl = pnfb.k_eval(line, t, xs, xs)
        d = pnfb.k_eval(half, t, xs, xs) - kl
        exact = (4 * math.pi * t) ** -0.5 * np.exp(-xs**2 / t)
        diff_err = max(diff_err, float(np.max(np.abs(d - exact) / np.maximum(kl, 1.0))))
    bound = pnfb.boundary_comparison_report(1.0, ts, xs, C=1.0, kappa=2.0)
    interval = pnfb.Kernel1D("interval-neumann", 1.0)
    trace_err = max(abs(pnfb.interval_trace(interval, t) - pnfb.neumann_eigen_sum(t, 1.0)) for t in (0.1, 0.2, 0.5, 1.0, 2.0, 5.0))
    ok = diff_err <= 1e-12 and bound.passed and trace_err <= 1e-10
    detail = f"difference_err={_g(diff_err)} bound_max_ratio={bound.max_ratio:.4f} trace_err={_g(trace_err)}"
    return Result(11, "not feeling the boundary", ok, detail)


def c12_cusps(seed: int) -> Result:
    rng = _rng(seed, 12)
    m = cuspgeom.CuspModel(3, (1.0, 2.5), 4.0)
    Rs = np.arange(1.0, 21.0)
    rel = 0.0
    for R in Rs:
        want = cuspgeom.stated_scaling(R)
        slab = cuspgeom.vol_slab(m, R, R + 1) / cuspgeom.vol_slab(m, 1.0, 2.0)
        bnd = cuspgeom.vol_boundary(m, R) / cuspgeom.vol_boundary(m, 1.0)
        rel = max(rel, abs(slab / want - 1), abs(bnd / want - 1))
    vb = [cuspgeom.vol_boundary(m, R) for R in np.linspace(0.0, 40.0, 81)]
    monotone = bool(np.all(np.diff(vb) < 0)) and vb[-1] < 1e-30
    exact = True
    for _ in range(50):
        top_rho, anomaly, an_triv = (Fraction(int(rng.integers(-10**6, 10**6)), int(rng.integers(1, 1000))) for _ in range(3))
        dim = int(rng.integers(1, 6))
        row = {
            "R": 1.0,
            "logTan_rho": top_rho - dim * anomaly,
            "logTan_triv": an_triv,
            "logTtop_triv": an_triv + anomaly,
            "dim_rho": dim,
        }
        exact &= cuspgeom.anomaly_combine(row) == top_rho
    ok = rel <= 8 * np.finfo(float).eps and monotone and exact
    return Result(12, "cusp volumes and anomaly", ok, f"max_rel_err={_g(rel)} boundary_monotone={monotone} anomaly_exact={exact}")


CRITERIA = {
    1: c1_zeta_pipeline,
    2: c2_c_coeff,
    3: c3_circle,
    4: c4_fk,
    5: c5_ns,
    6: c6_density_identity,
    7: c7_twisted_tori,
    8: c8_finite,
    9: c9_induction,
    10: c10_stieltjes,
    11: c11_pnfb,
    12: c12_cusps,
}


def to_csv(results, seed: int) -> str:
    buf = io.StringIO()
    buf.write(f"# l2torsion verify seed={seed}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["criterion", "name", "passed", "detail"])
    for r in results:
        w.writerow([r.number, r.name, str(r.passed).lower(), r.detail])
    return buf.getvalue()


def run(seed: int = DEFAULT_SEED, only=None, determinism: bool = True) -> list:
    """Run the criteria; criterion 13 reruns 1-12 and compares the CSV bytes."""
    numbers = sorted(only) if only else sorted(CRITERIA) + [13]
    base = [n for n in numbers if n in CRITERIA]
    results = [CRITERIA[n](seed) for n in base]
    if 13 in numbers and determinism:
        again = [CRITERIA[n](seed) for n in base]
        same = to_csv(results, seed) == to_csv(again, seed)
        results.append(Result(13, "determinism", same, f"criteria={'+'.join(map(str, base))} identical={same}"))
    return results


def line(r: Result) -> str:
    return f"criterion {r.number:2d} [{'PASS' if r.passed else 'FAIL'}] {r.name}: {r.detail}"
