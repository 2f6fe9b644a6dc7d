"""JSON job configurations.

A job is one JSON document::

    {
      "input":  {"laurent": {...}}            # exactly one input object
      "policy": {"tol": 1e-6, "base": 128},   # optional quadrature overrides
      "params": {...},                        # subcommand-specific options
      "seed":   7                             # required by randomized jobs
    }

Input kinds and their schemas are documented in ``docs/config.md``.
Complex numbers are written either as plain numbers or as ``[re, im]``
pairs; a matrix is a list of rows, so ``[[1, 0]]`` is a real 1x2 matrix
and ``[[[1, 0]]]`` the complex 1x1 matrix ``(1)``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .errors import ConfigParseError, L2Error
from .zd.quadrature import QuadraturePolicy

INPUT_KINDS = ("complex", "laurent", "cw", "model", "cusp", "ledger", "none")
POLICY_FIELDS = {"base": int, "levels": int, "tol": float, "atol": float, "mode": str, "max_depth": int,
                 "max_cells": int, "gauss_order": int, "grading": float, "criterion": str}


@dataclass
class JobConfig:
    kind: str
    data: Any
    policy: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)
    seed: int | None = None
    text: str = ""


def fail(path: str, msg: str):
    raise ConfigParseError(f"field '{path}': {msg}")


def parse_text(text: str) -> JobConfig:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigParseError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        fail("<root>", "a job config must be a JSON object")
    unknown = set(doc) - {"input", "policy", "params", "seed", "output", "subcommand"}
    if unknown:
        fail(sorted(unknown)[0], "unknown top-level field")
    inp = doc.get("input", {"none": None})
    if not isinstance(inp, dict) or len(inp) != 1:
        fail("input", "must hold exactly one input object")
    (kind, data), = inp.items()
    if kind not in INPUT_KINDS:
        fail(f"input.{kind}", f"unknown input kind; expected one of {', '.join(INPUT_KINDS)}")
    policy = doc.get("policy", {})
    if not isinstance(policy, dict):
        fail("policy", "must be an object")
    for k, v in policy.items():
        if k not in POLICY_FIELDS:
            fail(f"policy.{k}", "unknown policy field")
        if POLICY_FIELDS[k] is str and not isinstance(v, str):
            fail(f"policy.{k}", "must be a string")
        if POLICY_FIELDS[k] is not str and (isinstance(v, bool) or not isinstance(v, (int, float))):
            fail(f"policy.{k}", "must be a number")
    params = doc.get("params", {})
    if not isinstance(params, dict):
        fail("params", "must be an object")
    seed = doc.get("seed")
    if seed is not None and (isinstance(seed, bool) or not isinstance(seed, int)):
        fail("seed", "must be an integer")
    return JobConfig(kind, data, dict(policy), dict(params), seed, text)


def make_policy(base: QuadraturePolicy, overrides: dict, tol: float | None = None, threads: int | None = None):
    kw = {k: POLICY_FIELDS[k](v) for k, v in overrides.items()}
    if tol is not None:
        kw["tol"] = float(tol)
    if threads is not None:
        kw["threads"] = int(threads)
    try:
        return base.with_(**kw) if kw else base
    except (TypeError, ValueError) as exc:
        raise ConfigParseError(f"field 'policy': {exc}") from None


# ---------------------------------------------------------------------------
# field helpers


def need(obj: Any, key: str, path: str):
    if not isinstance(obj, dict):
        fail(path, "must be an object")
    if key not in obj:
        fail(f"{path}.{key}", "missing required field")
    return obj[key]


def number(v: Any, path: str) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        fail(path, "must be a number")
    return float(v)


def integer(v: Any, path: str) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        fail(path, "must be an integer")
    return int(v)


def scalar(v: Any, path: str) -> complex:
    if isinstance(v, list):
        if len(v) != 2:
            fail(path, "complex values are [re, im] pairs")
        return complex(number(v[0], path + "[0]"), number(v[1], path + "[1]"))
    return complex(number(v, path))


def vector(v: Any, path: str) -> np.ndarray:
    if not isinstance(v, list):
        fail(path, "must be a list of numbers")
    return np.array([number(x, f"{path}[{i}]") for i, x in enumerate(v)])


def matrix(v: Any, path: str, shape: tuple | None = None) -> np.ndarray:
    """A list of rows of numbers or ``[re, im]`` pairs, as a complex array."""
    if not isinstance(v, list) or any(not isinstance(r, list) for r in v):
        fail(path, "a matrix is a list of rows")
    rows = [[scalar(x, f"{path}[{i}][{j}]") for j, x in enumerate(r)] for i, r in enumerate(v)]
    if len({len(r) for r in rows}) > 1:
        fail(path, "rows have different lengths")
    ncols = len(rows[0]) if rows else (shape[1] if shape else 0)
    m = np.array(rows, dtype=complex).reshape(len(rows), ncols)
    if shape is not None and m.shape != tuple(shape):
        if m.size == 0 and 0 in shape:
            return np.zeros(shape, dtype=complex)
        fail(path, f"expected shape {shape[0]}x{shape[1]}, got {m.shape[0]}x{m.shape[1]}")
    return m


def exact_if_integer(m: np.ndarray) -> np.ndarray:
    if np.all(m.imag == 0) and np.all(m.real == np.round(m.real)):
        return m.real.astype(np.int64)
    return m


def wrap(path: str, fn, *args):
    """Run a constructor, turning plain ``ValueError`` into config diagnostics.

    Module errors (``L2Error``) pass through: the input parsed, but the
    object it describes is invalid, which the CLI reports as a compute error.
    """
    try:
        return fn(*args)
    except L2Error:
        raise
    except ValueError as exc:
        raise ConfigParseError(f"field '{path}': {type(exc).__name__}: {exc}") from None


# ---------------------------------------------------------------------------
# input objects


def finite_complex(data: Any, path: str = "input.complex"):
    from .fincomplex import make_complex

    mats = need(data, "mats", path)
    if not isinstance(mats, list):
        fail(f"{path}.mats", "must be a list of matrices")
    ms = [matrix(m, f"{path}.mats[{i}]") for i, m in enumerate(mats)]
    if "dims" in data:
        dims = [integer(x, f"{path}.dims[{i}]") for i, x in enumerate(need(data, "dims", path))]
        if len(dims) != len(ms) + 1:
            fail(f"{path}.dims", "need one more dimension than matrices")
        ms = [m if m.size else np.zeros((dims[i + 1], dims[i]), complex) for i, m in enumerate(ms)]
    return wrap(path, make_complex, ms)


def laurent_terms(recs: Any, path: str, rows: int, cols: int, d: int) -> dict:
    if not isinstance(recs, list):
        fail(path, "must be a list of {exponent, block} records")
    terms: dict = {}
    for i, rec in enumerate(recs):
        p = f"{path}[{i}]"
        g = need(rec, "exponent", p)
        if not isinstance(g, list) or len(g) != d:
            fail(f"{p}.exponent", f"must be a list of {d} integers")
        g = tuple(integer(x, f"{p}.exponent[{j}]") for j, x in enumerate(g))
        if "block" in rec:
            b = matrix(rec["block"], f"{p}.block", (rows, cols))
        elif "coefficient" in rec and rows == cols == 1:
            b = np.array([[scalar(rec["coefficient"], f"{p}.coefficient")]])
        else:
            fail(f"{p}.block", "missing required field")
        terms[g] = terms[g] + b if g in terms else b
    return terms


def laurent(data: Any, path: str = "input.laurent"):
    from .zd.laurent import LaurentMatrix

    d = integer(need(data, "d", path), f"{path}.d")
    rows = integer(data.get("rows", 1), f"{path}.rows")
    cols = integer(data.get("cols", 1), f"{path}.cols")
    if d < 0 or rows < 0 or cols < 0:
        fail(path, "d, rows and cols must be >= 0")
    terms = laurent_terms(need(data, "terms", path), f"{path}.terms", rows, cols, d)
    return wrap(path, LaurentMatrix, d, rows, cols, terms)


def rep(data: Any, d: int, path: str = "input.cw.rep"):
    from .zd.laurent import TwistedRep

    if data is None:
        return TwistedRep.trivial(d)
    if not isinstance(data, dict):
        fail(path, "must be an object")
    if "character" in data:
        vals = data["character"]
        if not isinstance(vals, list):
            fail(f"{path}.character", "must be a list")
        return wrap(path, TwistedRep.character, [scalar(v, f"{path}.character[{i}]") for i, v in enumerate(vals)])
    if "phases" in data:
        ph = vector(data["phases"], f"{path}.phases")
        return wrap(path, TwistedRep.character, list(np.exp(1j * ph)))
    gens = need(data, "generators", path)
    if not isinstance(gens, list):
        fail(f"{path}.generators", "must be a list of matrices")
    return wrap(path, TwistedRep, len(gens), tuple(matrix(g, f"{path}.generators[{i}]") for i, g in enumerate(gens)))


def cw(data: Any, path: str = "input.cw"):
    """``{"builtin": "torus", "k": 2}`` or ``{"d", "cells", "boundaries"}``; optional ``rep``."""
    from . import cwcomplex

    if not isinstance(data, dict):
        fail(path, "must be an object")
    if "builtin" in data:
        name = data["builtin"]
        if name == "circle":
            X = cwcomplex.circle()
        elif name == "torus":
            k = integer(need(data, "k", path), f"{path}.k")
            X = wrap(path, cwcomplex.torus, k)
        else:
            fail(f"{path}.builtin", "expected 'circle' or 'torus'")
    else:
        d = integer(need(data, "d", path), f"{path}.d")
        cells = need(data, "cells", path)
        if not isinstance(cells, list) or not cells:
            fail(f"{path}.cells", "must be a nonempty list of integers")
        cells = [integer(c, f"{path}.cells[{i}]") for i, c in enumerate(cells)]
        bds = need(data, "boundaries", path)
        if not isinstance(bds, list) or len(bds) != len(cells) - 1:
            fail(f"{path}.boundaries", f"need {len(cells) - 1} coboundary lists")
        terms = [
            {g: exact_if_integer(b) for g, b in laurent_terms(t, f"{path}.boundaries[{p}]", cells[p + 1], cells[p], d).items()}
            for p, t in enumerate(bds)
        ]
        X = wrap(path, cwcomplex.GammaCW, d, cells, tuple(terms))
    return X, rep(data.get("rep"), X.d, f"{path}.rep")


def trace_table(data: Any, path: str):
    from .heatzeta import TraceTable

    t = vector(need(data, "t", path), f"{path}.t")
    th = vector(need(data, "theta", path), f"{path}.theta")
    return wrap(path, TraceTable, t, th)


def heat_model(data: Any, path: str = "input.model"):
    """Heat-trace models.

    ``{"kind": "circle", "L": 1}``, ``{"kind": "free", "n": 3, "vol": 1}``,
    ``{"kind": "exponential", "mu": 2}``, ``{"kind": "h3", "vol": 1}``,
    ``{"kind": "plancherel", "n": 3, "vol": 1, "tables": {"0": {"t", "H"}}}``
    or ``{"kind": "tables", "n": 1, "tables": {"1": {"t", "theta"}}}``.
    Optional ``"kappas": {"p": [...]}``.
    """
    from . import heatzeta as hz

    kind = need(data, "kind", path)
    kappas = data.get("kappas")
    if kappas is not None and not isinstance(kappas, dict):
        fail(f"{path}.kappas", "must map degrees to coefficient lists")
    kap = {}
    for p, ks in (kappas or {}).items():
        try:
            kap[int(p)] = list(vector(ks, f"{path}.kappas.{p}"))
        except ValueError:
            fail(f"{path}.kappas.{p}", "degree keys must be integers")
    if kind == "circle":
        return wrap(path, hz.circle_model, number(need(data, "L", path), f"{path}.L"))
    if kind == "free":
        return wrap(path, hz.free_space_model, integer(need(data, "n", path), f"{path}.n"), number(need(data, "vol", path), f"{path}.vol"))
    if kind == "exponential":
        n = integer(data.get("n", 1), f"{path}.n")
        return wrap(path, hz.exponential_model, number(need(data, "mu", path), f"{path}.mu"), n, integer(data.get("p", 1), f"{path}.p"))
    if kind == "h3":
        vol = number(data.get("vol", 1.0), f"{path}.vol")
        t, h = hz.h3_table()
        return wrap(path, hz.plancherel_model, {0: (t, h)}, 3, vol, kap or {0: [(4 * np.pi) ** -1.5, 0.0, -(4 * np.pi) ** -1.5, 0.0]})
    if kind in ("plancherel", "tables"):
        n = integer(need(data, "n", path), f"{path}.n")
        tabs = need(data, "tables", path)
        if not isinstance(tabs, dict) or not tabs:
            fail(f"{path}.tables", "must map degrees to {t, ...} tables")
        parsed = {}
        for p, tab in tabs.items():
            try:
                key = int(p)
            except ValueError:
                fail(f"{path}.tables.{p}", "degree keys must be integers")
            tp = f"{path}.tables.{p}"
            if kind == "plancherel":
                parsed[key] = (vector(need(tab, "t", tp), f"{tp}.t"), vector(need(tab, "H", tp), f"{tp}.H"))
            else:
                parsed[key] = trace_table(tab, tp)
        if kind == "plancherel":
            return wrap(path, hz.plancherel_model, parsed, n, number(need(data, "vol", path), f"{path}.vol"), kap)
        return wrap(path, hz.HeatTraceModel, n, parsed, kap, {"model": "tables"}, bool(data.get("weyl", False)))
    fail(f"{path}.kind", "expected circle, free, exponential, h3, plancherel or tables")


def cusp(data: Any, path: str = "input.cusp"):
    """``{"n": 3, "cross_sections": [1.0], "core_volume": 1.0}`` or ``{"builtin": "h2"}``."""
    from .cuspgeom import CuspModel, h2_example

    if isinstance(data, dict) and data.get("builtin") == "h2":
        return h2_example()
    n = integer(need(data, "n", path), f"{path}.n")
    cs = vector(need(data, "cross_sections", path), f"{path}.cross_sections")
    core = number(need(data, "core_volume", path), f"{path}.core_volume")
    return wrap(path, CuspModel, n, tuple(cs), core, bool(data.get("demo", False)), str(data.get("label", "")))


def ledger(data: Any, base_dir: str, path: str = "input.ledger"):
    """``{"path": "ledger.csv"}`` (relative to the config) or ``{"rows": [{...}, ...]}``."""
    import os

    from .cuspgeom import AnomalyLedger, read_ledger

    if not isinstance(data, dict):
        fail(path, "must be an object")
    if "rows" in data:
        rows = data["rows"]
        if not isinstance(rows, list):
            fail(f"{path}.rows", "must be a list")
        out = []
        for i, r in enumerate(rows):
            if not isinstance(r, dict):
                fail(f"{path}.rows[{i}]", "must be an object")
            out.append({k: number(v, f"{path}.rows[{i}].{k}") for k, v in r.items()})
        return wrap(path, AnomalyLedger, out)
    p = need(data, "path", path)
    if not isinstance(p, str):
        fail(f"{path}.path", "must be a string")
    full = p if os.path.isabs(p) else os.path.join(base_dir, p)
    try:
        with open(full, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        fail(f"{path}.path", f"cannot read {p}: {exc.strerror}")
    return wrap(path, read_ledger, text)
