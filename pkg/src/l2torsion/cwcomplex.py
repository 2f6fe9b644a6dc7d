"""Free Z^d-CW complexes and their twisted cochain complexes.

A :class:`GammaCW` records, for each dimension ``p``, the number ``m_p`` of
cell orbits and the coboundary ``delta_p : C^p -> C^{p+1}`` as a Laurent
matrix with integer coefficients, stored as ``{exponent: int block}``.  The
cochain direction matches :class:`~l2torsion.zd.ZdComplex`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import BadEmbedding, CochainViolation, RankMismatch, ShapeMismatch
from .fincomplex import FiniteComplex
from .zd.laurent import LaurentMatrix, TwistedRep, ZdComplex, twist_complex

Terms = Mapping[tuple, np.ndarray]


def _clean(terms: Terms, shape, d: int) -> dict:
    out: dict = {}
    for g, b in terms.items():
        g = tuple(int(x) for x in np.atleast_1d(g)) if d else ()
        if len(g) != d:
            raise ShapeMismatch(f"exponent {g} does not have length {d}")
        b = np.asarray(b)
        if b.dtype.kind in "bf" and np.all(b == np.round(b)):
            b = b.astype(np.int64)
        if b.size != shape[0] * shape[1]:
            raise ShapeMismatch(f"block at {g} does not have shape {shape[0]}x{shape[1]}")
        b = b.reshape(shape)
        out[g] = out[g] + b if g in out else b
    return {g: b for g, b in sorted(out.items()) if np.any(b != 0)}


def _mul(a: Terms, b: Terms) -> dict:
    """Product of Laurent matrices ``a @ b`` in exact arithmetic for integer blocks."""
    out: dict = {}
    for ga, ba in a.items():
        for gb, bb in b.items():
            g = tuple(x + y for x, y in zip(ga, gb))
            p = ba @ bb
            out[g] = out[g] + p if g in out else p
    return {g: blk for g, blk in out.items() if np.any(blk != 0)}


def _is_exact(terms: Terms) -> bool:
    return all(b.dtype.kind in "iu" for b in terms.values())


@dataclass(frozen=True)
class GammaCW:
    """Cell counts ``cells[p]`` and coboundaries ``boundaries[p]: C^p -> C^{p+1}``."""

    d: int
    cells: tuple
    boundaries: tuple

    def __post_init__(self):
        cells = tuple(int(m) for m in self.cells)
        if any(m < 0 for m in cells) or not cells:
            raise ShapeMismatch("cell counts must be a nonempty list of nonnegative integers")
        if len(self.boundaries) != len(cells) - 1:
            raise ShapeMismatch("need one boundary map between consecutive dimensions")
        bds = tuple(_clean(t, (cells[p + 1], cells[p]), self.d) for p, t in enumerate(self.boundaries))
        for p in range(len(bds) - 1):
            prod = _mul(bds[p + 1], bds[p])
            if _is_exact(bds[p]) and _is_exact(bds[p + 1]):
                if prod:
                    raise CochainViolation(f"delta_{p + 1} delta_{p} != 0")
            else:
                scale = sum(np.abs(b).sum() for b in bds[p].values()) * sum(np.abs(b).sum() for b in bds[p + 1].values())
                err = max((np.abs(b).max() for b in prod.values()), default=0.0)
                if err > 1e-12 * max(scale, 1.0):
                    raise CochainViolation(f"delta_{p + 1} delta_{p} reaches {err:.3e}")
        object.__setattr__(self, "cells", cells)
        object.__setattr__(self, "boundaries", bds)

    @property
    def top(self) -> int:
        return len(self.cells) - 1

    def euler_characteristic(self) -> int:
        return sum((-1) ** p * m for p, m in enumerate(self.cells))

    def laurent(self, p: int) -> LaurentMatrix:
        return LaurentMatrix(self.d, self.cells[p + 1], self.cells[p], dict(self.boundaries[p]))


def circle() -> GammaCW:
    """The line with its free Z action: one vertex and one edge, coboundary ``t - 1``."""
    return GammaCW(1, (1, 1), ({(1,): np.array([[1]]), (0,): np.array([[-1]])},))


def point() -> GammaCW:
    return GammaCW(0, (1,), ())


def tensor(X: GammaCW, Y: GammaCW) -> GammaCW:
    """Product cell structure over ``Z^(dX + dY)``.

    Degree ``p`` is ``sum_{a+b=p} X^a (x) Y^b`` ordered by ``a``; the
    coboundary is ``delta x (x) y + (-1)^a x (x) delta y``.
    """
    d = X.d + Y.d
    top = X.top + Y.top
    blocks = [[(a, p - a) for a in range(p + 1) if a <= X.top and p - a <= Y.top] for p in range(top + 1)]

    def offset(p, a):
        off = 0
        for a2, b2 in blocks[p]:
            if a2 == a:
                return off
            off += X.cells[a2] * Y.cells[b2]
        raise KeyError

    cells = tuple(sum(X.cells[a] * Y.cells[b] for a, b in blocks[p]) for p in range(top + 1))
    exact = all(_is_exact(t) for t in X.boundaries + Y.boundaries)
    dtype = np.int64 if exact else complex
    bds = []
    for p in range(top):
        out: dict = {}

        def put(g, r0, c0, blk):
            if g not in out:
                out[g] = np.zeros((cells[p + 1], cells[p]), dtype=dtype)
            out[g][r0 : r0 + blk.shape[0], c0 : c0 + blk.shape[1]] += blk

        for a, b in blocks[p]:
            c0 = offset(p, a)
            ia = np.eye(X.cells[a], dtype=dtype)
            ib = np.eye(Y.cells[b], dtype=dtype)
            if a < X.top:
                r0 = offset(p + 1, a + 1)
                for g, blk in X.boundaries[a].items():
                    put(g + (0,) * Y.d, r0, c0, np.kron(blk, ib))
            if b < Y.top:
                r0 = offset(p + 1, a)
                for g, blk in Y.boundaries[b].items():
                    put((0,) * X.d + g, r0, c0, (-1) ** a * np.kron(ia, blk))
        bds.append(out)
    return GammaCW(d, cells, tuple(bds))


def torus(k: int) -> GammaCW:
    """``R^k`` with the free ``Z^k`` action: the k-fold product of circles."""
    if k < 1:
        raise ValueError("torus rank must be >= 1")
    X = circle()
    for _ in range(k - 1):
        X = tensor(X, circle())
    return X


def from_finite(F: FiniteComplex) -> GammaCW:
    """A finite complex as a CW datum over the trivial group ``Z^0``."""
    bds = []
    for n in range(F.top):
        c = np.asarray(F.diff(n))
        if np.all(c.imag == 0) and np.all(c.real == np.round(c.real)):
            c = c.real.astype(np.int64)
        bds.append({(): c})
    return GammaCW(0, F.dims, tuple(bds))


def product(X: GammaCW, F: FiniteComplex) -> GammaCW:
    """``X x F`` for a finite complex ``F`` on which the group acts trivially."""
    return tensor(X, from_finite(F))


def assemble(X: GammaCW, rho: TwistedRep | None = None) -> ZdComplex:
    """The twisted cochain complex ``C*(X) (x) V`` as a :class:`ZdComplex`."""
    rho = rho if rho is not None else TwistedRep.trivial(X.d)
    if rho.d != X.d:
        raise RankMismatch(f"representation of Z^{rho.d} for a complex over Z^{X.d}")
    base = ZdComplex(d=X.d, ranks=X.cells, diffs=tuple(X.laurent(p) for p in range(X.top)))
    return twist_complex(base, rho)


def induce(X: GammaCW, embed: Sequence[int], d: int) -> GammaCW:
    """Induce along the coordinate inclusion sending ``e_i`` to ``e_{embed[i]}``."""
    embed = [int(j) for j in embed]
    if len(embed) != X.d or len(set(embed)) != len(embed) or any(j < 0 or j >= d for j in embed):
        raise BadEmbedding(f"{embed} is not an injective coordinate map Z^{X.d} -> Z^{d}")
    bds = []
    for t in X.boundaries:
        out = {}
        for g, b in t.items():
            k = [0] * d
            for i, j in enumerate(embed):
                k[j] = g[i]
            out[tuple(k)] = b
        bds.append(out)
    return GammaCW(d, X.cells, tuple(bds))


def from_records(data: dict) -> GammaCW:
    """Parse ``{"d", "cells", "boundaries": [[{"exponent", "block"}, ...], ...]}``."""
    d = int(data["d"])
    cells = [int(m) for m in data["cells"]]
    bds = []
    for p, recs in enumerate(data.get("boundaries", [])):
        t: dict = {}
        for rec in recs:
            g = tuple(int(x) for x in rec["exponent"])
            blk = np.asarray(rec.get("block", rec.get("coefficient")))
            t[g] = t[g] + blk.reshape(cells[p + 1], cells[p]) if g in t else blk.reshape(cells[p + 1], cells[p])
        bds.append(t)
    return GammaCW(d, cells, tuple(bds))
