"""``l2torsion`` command line: one JSON job in, one CSV out.

Exit status: 0 success, 1 ``verify`` ran but a criterion failed,
2 configuration / usage errors, 3 computation errors (the module error is
named on stderr).
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import io
import json
import math
import os
import sys

import numpy as np
import scipy

from . import __version__, acceptance, config, cuspgeom, cwcomplex, fincomplex, heatzeta, pnfb
from .errors import ConfigParseError, L2Error, UnknownSubcommand
from .zd import invariants as inv
from .zd.quadrature import THREADS_ENV, default_threads

SUBCOMMANDS = (
    "fk-det", "density", "ns", "betti", "torsion-fin", "torsion-zd", "assemble", "induce",
    "zeta-derivative", "tail", "torsion-analytic", "fit-kappa", "pnfb-report", "cusp-volumes",
    "anomaly", "convergence", "verify",
)


@dataclasses.dataclass
class Table:
    columns: list
    rows: list
    meta: dict = dataclasses.field(default_factory=dict)
    status: int = 0


def fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer, str)):
        return str(v)
    if v is None:
        return ""
    v = float(v)
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return repr(v)


def render(sub: str, table: Table, job: config.JobConfig) -> str:
    buf = io.StringIO()
    meta = {
        "subcommand": sub,
        "config_sha256": hashlib.sha256(job.text.encode()).hexdigest(),
        "versions": {"l2torsion": __version__, "numpy": np.__version__, "scipy": scipy.__version__},
    }
    meta.update(table.meta)
    buf.write("# " + json.dumps(meta, sort_keys=True, default=fmt) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(table.columns)
    for r in table.rows:
        w.writerow([fmt(v) for v in r])
    return buf.getvalue()


def parse_grid(spec: str) -> np.ndarray:
    try:
        lo, hi, n = spec.split(":")
        lo, hi, n = float(lo), float(hi), int(n)
    except ValueError:
        raise ConfigParseError(f"field '--grid': expected lo:hi:n, got '{spec}'") from None
    if n < 1 or not hi >= lo:
        raise ConfigParseError("field '--grid': need n >= 1 and hi >= lo")
    return np.linspace(lo, hi, n)


class Context:
    def __init__(self, args, job: config.JobConfig, base_dir: str):
        self.args, self.job, self.base_dir = args, job, base_dir

    @property
    def params(self) -> dict:
        return self.job.params

    def policy(self, base):
        threads = self.args.threads if self.args.threads is not None else default_threads()
        return config.make_policy(base, self.job.policy, self.args.tol, threads)

    def grid(self, default=None) -> np.ndarray:
        if self.args.grid:
            return parse_grid(self.args.grid)
        g = self.params.get("grid")
        if isinstance(g, str):
            return parse_grid(g)
        if isinstance(g, list):
            return config.vector(g, "params.grid")
        if default is None:
            raise ConfigParseError("field 'params.grid': missing; pass --grid lo:hi:n")
        return np.asarray(default, dtype=float)

    def expect(self, *kinds):
        if self.job.kind not in kinds:
            raise ConfigParseError(f"field 'input': this subcommand takes {' or '.join(kinds)}, got {self.job.kind}")
        return self.job.kind

    def laurent(self):
        return config.laurent(self.job.data)

    def cw(self):
        return config.cw(self.job.data)

    def zd_complex(self):
        X, rho = self.cw()
        return cwcomplex.assemble(X, rho)

    def model(self):
        return config.heat_model(self.job.data)

    def degree(self, default=None):
        v = self.params.get("degree", default)
        return None if v is None else config.integer(v, "params.degree")

    def flag(self, name: str) -> bool:
        v = self.params.get(name, False)
        if not isinstance(v, bool):
            raise ConfigParseError(f"field 'params.{name}': must be true or false")
        return v


def policy_meta(p) -> dict:
    return {"policy": dataclasses.asdict(p)}


# ---------------------------------------------------------------------------
# subcommands


def cmd_fk_det(ctx: Context) -> Table:
    """Log Fuglede-Kadison determinant of a Laurent matrix."""
    ctx.expect("laurent")
    p = ctx.policy(inv.LOGDET_POLICY)
    r = inv.fk_log_det(ctx.laurent(), p, allow_kernel=ctx.flag("allow_kernel"))
    return Table(["log_det", "error", "rank", "cells"], [[r.value, r.error, r.rank, r.cells]], policy_meta(p))


def cmd_density(ctx: Context) -> Table:
    """Spectral density curve on a lambda grid."""
    kind = ctx.expect("laurent", "cw", "complex")
    lam = ctx.grid()
    if kind == "complex":
        C = config.finite_complex(ctx.job.data)
        rep = fincomplex.spectral_density(C, ctx.degree(0), lam)
        return Table(["lambda", "F"], [[a, b] for a, b in zip(rep.lambdas, rep.values)], {"policy": "exact"})
    p = ctx.policy(inv.DENSITY_POLICY)
    if kind == "laurent":
        rep = inv.spectral_density_curve(ctx.laurent(), lam, p)
    else:
        rep = inv.complex_density_curve(ctx.zd_complex(), ctx.degree(0), lam, p)
    gap = rep.gap if rep.gap is not None else np.zeros_like(rep.values)
    return Table(["lambda", "F", "error"], [[a, b, c] for a, b, c in zip(rep.lambdas, rep.values, gap)], policy_meta(p))


def _degrees(ctx: Context, top: int):
    d = ctx.degree()
    return range(top + 1) if d is None else [d]


def cmd_ns(ctx: Context) -> Table:
    """Novikov-Shubin estimate from the density near zero."""
    kind = ctx.expect("laurent", "cw", "complex")
    cols = ["degree", "alpha", "r2", "points", "gap"]
    if kind == "complex":
        C = config.finite_complex(ctx.job.data)
        return Table(cols, [[n, fincomplex.novikov_shubin(C, n), 1.0, 0, True] for n in _degrees(ctx, C.top)], {"policy": "exact"})
    if kind == "laurent":
        A = ctx.laurent()
        p = ctx.policy(inv._ns_policy(A))
        f = inv.ns_estimate(A, policy=p)
        return Table(cols, [[0, f.alpha, f.r2, f.points, f.gap]], policy_meta(p))
    X = ctx.zd_complex()
    rows, used = [], {}
    for n in _degrees(ctx, X.top):
        p = ctx.policy(inv._ns_policy(X.diff(n)))
        used[str(n)] = dataclasses.asdict(p)
        f = inv.complex_ns_estimate(X, n, policy=p)
        rows.append([n, f.alpha, f.r2, f.points, f.gap])
    return Table(cols, rows, {"policy": used})


def cmd_betti(ctx: Context) -> Table:
    """L2-Betti numbers."""
    kind = ctx.expect("laurent", "cw", "complex")
    meta = {"policy": "generic rank"}
    if kind == "laurent":
        return Table(["degree", "betti"], [[0, inv.betti_zd(ctx.laurent())]], meta)
    if kind == "complex":
        C = config.finite_complex(ctx.job.data)
        return Table(["degree", "betti"], [[n, fincomplex.betti(C, n)] for n in _degrees(ctx, C.top)], {"policy": "exact"})
    X = ctx.zd_complex()
    return Table(["degree", "betti"], [[n, inv.complex_betti(X, n)] for n in _degrees(ctx, X.top)], meta)


def cmd_torsion_fin(ctx: Context) -> Table:
    """L2-torsion of a finite complex."""
    ctx.expect("complex")
    C = config.finite_complex(ctx.job.data)
    return Table(["log_torsion"], [[fincomplex.torsion_finite(C)]], {"policy": "exact"})


def cmd_torsion_zd(ctx: Context) -> Table:
    """L2-torsion of a twisted Z^d complex."""
    ctx.expect("cw")
    p = ctx.policy(inv.LOGDET_POLICY)
    r = inv.torsion_zd(ctx.zd_complex(), p, check_det_class=not ctx.flag("skip_det_class"))
    rows = [[n, ld, r.det_class[n].flag if n in r.det_class else ""] for n, ld in sorted(r.log_dets.items())]
    rows.append(["total", r.value, ""])
    return Table(["degree", "log_det", "det_class"], rows, policy_meta(p))


def cmd_assemble(ctx: Context) -> Table:
    """Assemble the twisted cochain complex of a Z^d-CW complex."""
    ctx.expect("cw")
    X, rho = ctx.cw()
    Y = cwcomplex.assemble(X, rho)
    rows = []
    for n in range(Y.top + 1):
        D = Y.diff(n)
        rows.append([n, Y.ranks[n], inv.generic_rank(D) if n < Y.top else 0, len(D.terms), inv.complex_betti(Y, n)])
    meta = {"d": Y.d, "rep_dim": rho.dim, "unimodular": rho.unimodular, "euler_characteristic": Y.euler_characteristic()}
    return Table(["degree", "rank", "diff_generic_rank", "diff_terms", "betti"], rows, meta)


def cmd_induce(ctx: Context) -> Table:
    """Induce a Z^d-CW complex to a larger lattice."""
    ctx.expect("cw")
    X, rho = ctx.cw()
    embed = ctx.params.get("embed")
    if not isinstance(embed, list):
        raise ConfigParseError("field 'params.embed': missing list of target coordinates")
    d = config.integer(ctx.params.get("d", X.d + 1), "params.d")
    Y = cwcomplex.induce(X, [config.integer(v, f"params.embed[{i}]") for i, v in enumerate(embed)], d)
    a, b = cwcomplex.assemble(X), cwcomplex.assemble(Y)
    rows = [[n, X.cells[n], inv.complex_betti(a, n), inv.complex_betti(b, n)] for n in range(X.top + 1)]
    return Table(["degree", "cells", "betti_before", "betti_after"], rows, {"d_before": X.d, "d_after": d, "embed": embed})


def _model_degrees(ctx: Context, model) -> list:
    d = ctx.degree()
    return sorted(model.traces) if d is None else [d]


def cmd_zeta_derivative(ctx: Context) -> Table:
    """Regularized zeta derivative at zero from a heat-trace model."""
    ctx.expect("model")
    m = heatzeta.ensure_kappas(ctx.model())
    alt = ctx.flag("alt_constants")
    rows = []
    for p in _model_degrees(ctx, m):
        q = heatzeta.small_time_zeta_derivative(m, p, alt)
        rows.append([p, q.value, q.error])
    return Table(["degree", "zeta_derivative", "error"], rows, {"c_coeff": "alt_constants" if alt else "default"})


def cmd_tail(ctx: Context) -> Table:
    """Large-time heat-trace integral."""
    ctx.expect("model")
    m = ctx.model()
    rows = []
    for p in _model_degrees(ctx, m):
        q = heatzeta.large_time_integral(m, p)
        rows.append([p, q.value, q.error])
    return Table(["degree", "tail", "error"], rows)


def cmd_torsion_analytic(ctx: Context) -> Table:
    """Analytic log-torsion of a heat-trace model."""
    ctx.expect("model")
    alt = ctx.flag("alt_constants")
    b = heatzeta.log_torsion(ctx.model(), alt)
    rows = []
    for p in sorted(b.zeta_derivatives):
        w = 0.5 * p * (-1) ** (p + 1)
        rows.append([p, b.zeta_derivatives[p], b.tails[p], w, w * (b.zeta_derivatives[p] + b.tails[p]), b.errors[p]])
    rows.append(["total", "", "", "", b.total, sum(b.errors.values())])
    meta = {"c_coeff": "alt_constants" if alt else "default"}
    if "vol" in ctx.params:
        meta["tau"] = b.per_volume(config.number(ctx.params["vol"], "params.vol"))
    return Table(["degree", "zeta_derivative", "tail", "weight", "contribution", "error"], rows, meta)


def cmd_fit_kappa(ctx: Context) -> Table:
    """Fit small-time heat-trace coefficients."""
    kind = ctx.expect("model", "none")
    if kind == "none":
        t = config.vector(config.need(ctx.params, "t", "params"), "params.t")
        th = config.vector(config.need(ctx.params, "theta", "params"), "params.theta")
        n = config.integer(config.need(ctx.params, "n", "params"), "params.n")
    else:
        m = ctx.model()
        p = ctx.degree(min(m.traces))
        f = m.theta(p)
        t = np.asarray(f.t[f.t <= 0.05]) if isinstance(f, heatzeta.TraceTable) else np.asarray(heatzeta.FIT_TIMES)
        th = np.array([float(f(x)) for x in t])
        n = m.n
    fit = heatzeta.fit_kappa(t, th, n, config.integer(ctx.params.get("extra", 2), "params.extra"))
    return Table(["i", "kappa"], [[i, k] for i, k in enumerate(fit.kappas)], {"residual": fit.residual, "condition": fit.condition})


def cmd_pnfb_report(ctx: Context) -> Table:
    """Image-method boundary comparison report."""
    ctx.expect("none")
    P = ctx.params
    kind = P.get("kind", "boundary")
    xs = config.vector(P["x"], "params.x") if "x" in P else np.linspace(1.0, 5.0, 41)
    if kind == "boundary":
        ts = ctx.grid(np.geomspace(1e-3, 1.0, 31))
        rep = pnfb.boundary_comparison_report(
            config.number(P.get("D", 1.0), "params.D"), ts, xs,
            config.number(P.get("C", 1.0), "params.C"), config.number(P.get("kappa", 2.0), "params.kappa"),
        )
    elif kind == "large-time":
        t0 = config.number(P.get("t0", 1.0), "params.t0")
        ts = ctx.grid(np.linspace(t0, 10 * t0, 10))
        rep = pnfb.large_time_bound_report(t0, ts, xs)
    else:
        raise ConfigParseError("field 'params.kind': expected 'boundary' or 'large-time'")
    cols = list(rep.rows[0].keys()) if rep.rows else []
    meta = dict(rep.meta, max_ratio=rep.max_ratio, passed=rep.passed)
    return Table(cols, [[r[c] for c in cols] for r in rep.rows], meta)


def cmd_cusp_volumes(ctx: Context) -> Table:
    """Volumes of cusp slabs, boundaries and thick parts."""
    ctx.expect("cusp")
    m = config.cusp(ctx.job.data)
    Rs = ctx.grid(np.arange(0.0, 11.0))
    b0 = cuspgeom.vol_boundary(m, 0.0)
    rows = []
    for R in Rs:
        vb = cuspgeom.vol_boundary(m, R)
        rows.append([R, vb, vb / b0, cuspgeom.vol_slab(m, R, R + 1), cuspgeom.vol_thick(m, R), cuspgeom.stated_scaling(R)])
    meta = {"n": m.n, "k": m.k, "vol_total": cuspgeom.vol_total(m), "exponent": m.exponent}
    return Table(["R", "vol_boundary", "boundary_ratio", "vol_slab_R_R+1", "vol_thick", "exp(-2R+2)"], rows, meta)


def _ledger(ctx: Context):
    ctx.expect("ledger")
    return config.ledger(ctx.job.data, ctx.base_dir)


def cmd_anomaly(ctx: Context) -> Table:
    """Topological torsion from an anomaly ledger."""
    L = _ledger(ctx)
    return Table(["R", "logTtop_rho"], [[r["R"], cuspgeom.anomaly_combine(r)] for r in L.rows])


def cmd_convergence(ctx: Context) -> Table:
    """Limit and rate of a ledger column in R."""
    L = _ledger(ctx)
    col = ctx.params.get("column", "logTan_rho")
    r = cuspgeom.convergence_report(L, col)
    return Table(["column", "limit", "rate", "amplitude", "monotone"], [[col, r.limit, r.rate, r.amplitude, r.monotone]])


def cmd_verify(ctx: Context) -> Table:
    """Run the acceptance suite."""
    seed = ctx.job.seed if ctx.job.seed is not None else acceptance.DEFAULT_SEED
    only = ctx.params.get("only")
    if only is not None:
        if not isinstance(only, list):
            raise ConfigParseError("field 'params.only': must be a list of criterion numbers")
        only = [config.integer(v, f"params.only[{i}]") for i, v in enumerate(only)]
    results = acceptance.run(seed, only)
    for r in results:
        print(acceptance.line(r), file=sys.stderr)
    rows = [[r.number, r.name, r.passed, r.detail] for r in results]
    status = 0 if all(r.passed for r in results) else 1
    return Table(["criterion", "name", "passed", "detail"], rows, {"seed": seed}, status)


COMMANDS = {name: globals()["cmd_" + name.replace("-", "_")] for name in SUBCOMMANDS}


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="l2torsion", description="L2-invariants of chain complexes and heat-trace models.")
    sub = ap.add_subparsers(dest="subcommand", metavar="SUBCOMMAND")
    for name in SUBCOMMANDS:
        sp = sub.add_parser(name, help=(COMMANDS[name].__doc__ or name).strip().splitlines()[0])
        sp.add_argument("--config", help="JSON job file ('-' reads stdin)")
        sp.add_argument("--out", help="output CSV path (default: stdout)")
        sp.add_argument("--grid", help="lo:hi:n evaluation grid")
        sp.add_argument("--tol", type=float, help="override the relative quadrature tolerance")
        sp.add_argument("--seed", type=int, help="seed for randomized suites")
        sp.add_argument("--threads", type=int, help=f"worker threads (default ${THREADS_ENV} or 1)")
    return ap


def _load(args) -> tuple[config.JobConfig, str]:
    if args.config is None:
        text, base = "{}", os.getcwd()
    elif args.config == "-":
        text, base = sys.stdin.read(), os.getcwd()
    else:
        try:
            with open(args.config, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigParseError(f"cannot read config {args.config}: {exc.strerror}") from None
        base = os.path.dirname(os.path.abspath(args.config))
    job = config.parse_text(text)
    if args.seed is not None:
        job.seed = args.seed
    if job.seed is None and args.subcommand == "verify":
        job.seed = acceptance.DEFAULT_SEED
    return job, base


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        if argv and not argv[0].startswith("-") and argv[0] not in SUBCOMMANDS:
            raise UnknownSubcommand(f"unknown subcommand '{argv[0]}'; expected one of {', '.join(SUBCOMMANDS)}")
        args = build_parser().parse_args(argv)
        if args.subcommand is None:
            raise UnknownSubcommand("no subcommand given")
        if args.threads is not None and args.threads < 1:
            raise ConfigParseError("field '--threads': must be >= 1")
        job, base = _load(args)
        table = COMMANDS[args.subcommand](Context(args, job, base))
        text = render(args.subcommand, table, job)
    except (ConfigParseError, UnknownSubcommand) as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except L2Error as exc:
        print(f"ComputeError: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return table.status


if __name__ == "__main__":
    sys.exit(main())
