"""Matrices over the group ring C[Z^d] and their symbols on the torus."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from ..errors import (
    CochainViolation,
    NonCommutingGenerators,
    NotOnTorus,
    NotSquare,
    RankMismatch,
    ShapeMismatch,
)

Exponent = tuple[int, ...]


@dataclass(frozen=True)
class LaurentMatrix:
    """A finite sum ``sum_g terms[g] * z^g`` of ``rows x cols`` complex blocks."""

    d: int
    rows: int
    cols: int
    terms: Mapping[Exponent, np.ndarray]

    def __post_init__(self):
        if self.d < 0:
            raise ShapeMismatch("rank d must be >= 0")
        clean = {}
        for g, block in self.terms.items():
            g = tuple(int(x) for x in g)
            if len(g) != self.d:
                raise ShapeMismatch(f"exponent {g} does not have length {self.d}")
            b = np.asarray(block, dtype=complex)
            if b.size != self.rows * self.cols or (b.ndim == 2 and b.shape != (self.rows, self.cols)):
                raise ShapeMismatch(f"block at {g} does not have shape {self.rows}x{self.cols}")
            b = b.reshape(self.rows, self.cols)
            if g in clean:
                clean[g] = clean[g] + b
            else:
                clean[g] = b
        clean = {g: b for g, b in sorted(clean.items()) if np.any(b != 0)}
        object.__setattr__(self, "terms", clean)

    # -- constructors -----------------------------------------------------
    @classmethod
    def zero(cls, d: int, rows: int, cols: int) -> "LaurentMatrix":
        return cls(d, rows, cols, {})

    @classmethod
    def constant(cls, block, d: int) -> "LaurentMatrix":
        b = np.atleast_2d(np.asarray(block, dtype=complex))
        return cls(d, b.shape[0], b.shape[1], {(0,) * d: b})

    @classmethod
    def identity(cls, d: int, n: int) -> "LaurentMatrix":
        return cls.constant(np.eye(n), d)

    @classmethod
    def scalar(cls, coeffs: Mapping, d: int = 1) -> "LaurentMatrix":
        """1x1 matrix from ``{exponent: coefficient}``; integer keys allowed for d = 1."""
        terms = {}
        for g, c in coeffs.items():
            g = (g,) if np.isscalar(g) else tuple(g)
            terms[g] = np.array([[c]], dtype=complex)
        return cls(d, 1, 1, terms)

    # -- algebra ----------------------------------------------------------
    def _check_same(self, other: "LaurentMatrix"):
        if self.d != other.d:
            raise RankMismatch(f"rank {self.d} vs {other.d}")

    def __add__(self, other: "LaurentMatrix") -> "LaurentMatrix":
        self._check_same(other)
        if (self.rows, self.cols) != (other.rows, other.cols):
            raise ShapeMismatch("cannot add matrices of different shapes")
        terms = dict(self.terms)
        for g, b in other.terms.items():
            terms[g] = terms[g] + b if g in terms else b
        return LaurentMatrix(self.d, self.rows, self.cols, terms)

    def __neg__(self) -> "LaurentMatrix":
        return self.scale(-1.0)

    def __sub__(self, other: "LaurentMatrix") -> "LaurentMatrix":
        return self + (-other)

    def scale(self, c) -> "LaurentMatrix":
        return LaurentMatrix(self.d, self.rows, self.cols, {g: c * b for g, b in self.terms.items()})

    def __matmul__(self, other: "LaurentMatrix") -> "LaurentMatrix":
        self._check_same(other)
        if self.cols != other.rows:
            raise ShapeMismatch(f"cannot multiply {self.rows}x{self.cols} by {other.rows}x{other.cols}")
        terms: dict[Exponent, np.ndarray] = {}
        for g, a in self.terms.items():
            for h, b in other.terms.items():
                k = tuple(x + y for x, y in zip(g, h))
                terms[k] = terms[k] + a @ b if k in terms else a @ b
        return LaurentMatrix(self.d, self.rows, other.cols, terms)

    def adjoint(self) -> "LaurentMatrix":
        """Involution ``sum T_g z^g -> sum T_g^* z^{-g}``; the symbol becomes its conjugate transpose."""
        return LaurentMatrix(
            self.d, self.cols, self.rows, {tuple(-x for x in g): b.conj().T for g, b in self.terms.items()}
        )

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        if self.rows != self.cols:
            return False
        adj = self.adjoint()
        keys = set(self.terms) | set(adj.terms)
        scale = 1.0 + max((np.abs(b).max() for b in self.terms.values()), default=0.0)
        for g in keys:
            a = self.terms.get(g, 0)
            b = adj.terms.get(g, 0)
            if np.max(np.abs(np.asarray(a) - np.asarray(b)), initial=0.0) > tol * scale:
                return False
        return True

    def kron(self, other: "LaurentMatrix") -> "LaurentMatrix":
        self._check_same(other)
        terms: dict[Exponent, np.ndarray] = {}
        for g, a in self.terms.items():
            for h, b in other.terms.items():
                k = tuple(x + y for x, y in zip(g, h))
                terms[k] = terms[k] + np.kron(a, b) if k in terms else np.kron(a, b)
        return LaurentMatrix(self.d, self.rows * other.rows, self.cols * other.cols, terms)

    def block_diag(self, other: "LaurentMatrix") -> "LaurentMatrix":
        self._check_same(other)
        terms = {}
        for g in set(self.terms) | set(other.terms):
            out = np.zeros((self.rows + other.rows, self.cols + other.cols), dtype=complex)
            if g in self.terms:
                out[: self.rows, : self.cols] = self.terms[g]
            if g in other.terms:
                out[self.rows :, self.cols :] = other.terms[g]
            terms[g] = out
        return LaurentMatrix(self.d, self.rows + other.rows, self.cols + other.cols, terms)

    def reindex(self, embed: Iterable[int], d: int) -> "LaurentMatrix":
        """Move exponent coordinate ``i`` to coordinate ``embed[i]`` of ``Z^d``."""
        embed = list(embed)
        terms = {}
        for g, b in self.terms.items():
            k = [0] * d
            for i, j in enumerate(embed):
                k[j] = g[i]
            terms[tuple(k)] = b
        return LaurentMatrix(d, self.rows, self.cols, terms)

    # -- evaluation -------------------------------------------------------
    def coefficient_sum(self) -> np.ndarray:
        out = np.zeros((self.rows, self.cols), dtype=complex)
        for b in self.terms.values():
            out = out + b
        return out

    def lipschitz(self) -> float:
        """Bound ``L`` with ``|A(th) - A(th')|_2 <= L |th - th'|_inf``."""
        return float(sum(np.linalg.norm(b, 2) * sum(abs(x) for x in g) for g, b in self.terms.items()))

    def norm_bound(self) -> float:
        """``sum_g |T_g|_2``, an upper bound for the symbol norm on the torus."""
        return float(sum(np.linalg.norm(b, 2) for b in self.terms.values()))

    def evaluate(self, theta, chunk: int = 65536) -> np.ndarray:
        """Symbols at angle vectors ``theta`` of shape ``(M, d)``; returns ``(M, rows, cols)``."""
        th = np.asarray(theta, dtype=float)
        th = th.reshape(-1, self.d) if self.d else th.reshape(len(th) if th.ndim else 1, 0)
        m = th.shape[0]
        out = np.zeros((m, self.rows, self.cols), dtype=complex)
        if not self.terms:
            return out
        expo = np.array(list(self.terms.keys()), dtype=float).reshape(len(self.terms), self.d)
        coef = np.stack(list(self.terms.values()))
        for s in range(0, m, chunk):
            ph = np.exp(1j * (th[s : s + chunk] @ expo.T))
            out[s : s + chunk] = np.einsum("mg,grc->mrc", ph, coef)
        return out


def symbol(A: LaurentMatrix, z) -> np.ndarray:
    """``A^(z) = sum_g terms[g] z^g`` at a torus point ``z`` (complex, modulus one)."""
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    if z.shape[-1] != A.d:
        raise ShapeMismatch(f"point has {z.shape[-1]} coordinates, need {A.d}")
    if np.any(np.abs(np.abs(z) - 1.0) > 1e-12):
        raise NotOnTorus(f"{z} is not on the unit torus")
    single = z.ndim == 1
    out = A.evaluate(np.angle(z).reshape(-1, A.d))
    return out[0] if single else out


def symbol_at_angles(A: LaurentMatrix, theta) -> np.ndarray:
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    single = theta.ndim == 1
    out = A.evaluate(theta.reshape(-1, A.d))
    return out[0] if single else out


def vn_trace(A: LaurentMatrix) -> complex:
    """Von Neumann trace: trace of the constant coefficient."""
    if A.rows != A.cols:
        raise NotSquare(f"{A.rows}x{A.cols} matrix has no trace")
    b = A.terms.get((0,) * A.d)
    return complex(np.trace(b)) if b is not None else 0j


def torus_grid(d: int, n: int) -> np.ndarray:
    """Midpoint grid of ``n^d`` angle vectors on ``[0, 2 pi)^d``."""
    if d == 0:
        return np.zeros((1, 0))
    ax = (np.arange(n) + 0.5) * (2 * np.pi / n)
    return np.stack(np.meshgrid(*([ax] * d), indexing="ij"), axis=-1).reshape(-1, d)


@dataclass(frozen=True)
class TwistedRep:
    """Commuting invertible matrices ``rho(e_i)`` for the generators of ``Z^d``."""

    d: int
    generators: tuple[np.ndarray, ...]

    def __post_init__(self):
        gens = tuple(np.atleast_2d(np.asarray(g, dtype=complex)) for g in self.generators)
        if len(gens) != self.d:
            raise RankMismatch(f"{len(gens)} generators for Z^{self.d}")
        m = gens[0].shape[0] if gens else 1
        for g in gens:
            if g.shape != (m, m):
                raise ShapeMismatch("generators must be square of one size")
            if abs(np.linalg.det(g)) < 1e-300:
                raise ShapeMismatch("generators must be invertible")
        for a, b in itertools.combinations(gens, 2):
            if np.linalg.norm(a @ b - b @ a, 2) > 1e-12 * np.linalg.norm(a, 2) * np.linalg.norm(b, 2):
                raise NonCommutingGenerators("generators do not commute")
        object.__setattr__(self, "generators", gens)
        object.__setattr__(self, "_dim", m)

    @property
    def dim(self) -> int:
        return self._dim

    @property
    def unimodular(self) -> bool:
        return all(abs(abs(np.linalg.det(g)) - 1.0) <= 1e-10 for g in self.generators)

    @classmethod
    def trivial(cls, d: int, m: int = 1) -> "TwistedRep":
        return cls(d, tuple(np.eye(m) for _ in range(d)))

    @classmethod
    def character(cls, values) -> "TwistedRep":
        """One-dimensional representation sending ``e_i`` to ``values[i]``."""
        values = list(values)
        return cls(len(values), tuple(np.array([[v]], dtype=complex) for v in values))

    def __call__(self, g: Exponent) -> np.ndarray:
        out = np.eye(self.dim, dtype=complex)
        for gen, k in zip(self.generators, g):
            if k:
                out = out @ np.linalg.matrix_power(gen if k > 0 else np.linalg.inv(gen), abs(int(k)))
        return out


@dataclass(frozen=True)
class ZdComplex:
    """Cochain complex of free ``C[Z^d]``-modules; ``diffs[n]`` maps degree n to n+1."""

    d: int
    ranks: tuple[int, ...]
    diffs: tuple[LaurentMatrix, ...]

    @property
    def top(self) -> int:
        return len(self.ranks) - 1

    def diff(self, n: int) -> LaurentMatrix:
        if 0 <= n < self.top:
            return self.diffs[n]
        if n == -1:
            return LaurentMatrix.zero(self.d, self.ranks[0], 0)
        if n == self.top:
            return LaurentMatrix.zero(self.d, 0, self.ranks[self.top])
        raise ShapeMismatch(f"no differential c_{n}")

    def laplacian(self, n: int) -> LaurentMatrix:
        a, b = self.diff(n), self.diff(n - 1)
        return a.adjoint() @ a + b @ b.adjoint()

    def euler_characteristic(self) -> int:
        return sum((-1) ** n * m for n, m in enumerate(self.ranks))


def make_zd_complex(d: int, diffs, ranks=None, samples: int = 32, tol: float = 1e-10) -> ZdComplex:
    """Validate shapes and check ``c_{n+1} c_n = 0`` on a ``samples^d`` torus grid."""
    diffs = tuple(diffs)
    for c in diffs:
        if c.d != d:
            raise RankMismatch(f"differential over Z^{c.d}, complex over Z^{d}")
    if ranks is None:
        if not diffs:
            raise ShapeMismatch("ranks are required for a complex without differentials")
        ranks = tuple(c.cols for c in diffs) + (diffs[-1].rows,)
    ranks = tuple(int(r) for r in ranks)
    if len(ranks) != len(diffs) + 1:
        raise ShapeMismatch("need one rank per degree")
    for n, c in enumerate(diffs):
        if (c.rows, c.cols) != (ranks[n + 1], ranks[n]):
            raise ShapeMismatch(f"c_{n} has shape {c.rows}x{c.cols}, expected {ranks[n + 1]}x{ranks[n]}")
    if len(diffs) >= 2:
        grid = torus_grid(d, samples if d <= 3 else 8)
        for n in range(len(diffs) - 1):
            a = diffs[n].evaluate(grid)
            b = diffs[n + 1].evaluate(grid)
            if a.size == 0 or b.size == 0:
                continue
            err = np.max(np.abs(b @ a))
            scale = diffs[n].norm_bound() * diffs[n + 1].norm_bound()
            if err > tol * max(scale, 1.0):
                raise CochainViolation(f"symbol of c_{n + 1} c_{n} reaches {err:.3e}")
    return ZdComplex(d=d, ranks=ranks, diffs=diffs)


def twist_matrix(A: LaurentMatrix, rho: TwistedRep) -> LaurentMatrix:
    """Replace each monomial coefficient ``T_g`` by ``T_g (x) rho(g)``."""
    if rho.d != A.d:
        raise RankMismatch(f"representation of Z^{rho.d} applied to a matrix over Z^{A.d}")
    m = rho.dim
    return LaurentMatrix(A.d, A.rows * m, A.cols * m, {g: np.kron(b, rho(g)) for g, b in A.terms.items()})


def twist_complex(X: ZdComplex, rho: TwistedRep) -> ZdComplex:
    """The complex ``C(X) (x) V`` with diagonal action; ranks scale by ``dim rho``."""
    if rho.d != X.d:
        raise RankMismatch(f"representation of Z^{rho.d} applied to a complex over Z^{X.d}")
    diffs = tuple(twist_matrix(c, rho) for c in X.diffs)
    ranks = tuple(r * rho.dim for r in X.ranks)
    return ZdComplex(d=X.d, ranks=ranks, diffs=diffs)
