"""Truncated Taylor jets in the Wirtinger variables.

A jet of degree ``d`` at a batch of base points stores the Taylor
coefficients of a function in the ``2n`` independent variables
``(z_1 - a_1, ..., z_n - a_n, zbar_1 - abar_1, ..., zbar_n - abar_n)`` up to
total degree ``d``.  Differentiation with respect to ``z_j`` or ``zbar_j`` is
then an exact operation on coefficients that lowers the degree by one, so
differential operators with variable coefficients can be applied literally,
without any finite differencing.

Coefficient arrays have the monomial axis first and any batch shape after
it, so a single jet object describes the expansion at many points at once.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np
import scipy.sparse as sp


@dataclass(frozen=True)
class JetSpace:
    """Monomial bookkeeping for jets in ``2n`` variables up to ``degree``."""

    n: int
    degree: int
    exponents: np.ndarray  # (M, 2n) integer exponents, graded order
    factorials: np.ndarray  # (M,) alpha!
    variables: tuple  # per monomial: sorted tuple of variable indices
    product_left: np.ndarray
    product_right: np.ndarray
    product_matrix: sp.csr_matrix  # (M, P) scatter of pairwise products
    conj_perm: np.ndarray

    @property
    def size(self) -> int:
        return self.exponents.shape[0]

    def count(self, degree: int) -> int:
        """Number of monomials of total degree at most ``degree``."""
        return math.comb(2 * self.n + degree, degree)


@lru_cache(maxsize=None)
def jet_space(n: int, degree: int) -> JetSpace:
    nv = 2 * n
    exps: list[tuple[int, ...]] = []
    variables: list[tuple[int, ...]] = []
    for d in range(degree + 1):
        for combo in itertools.combinations_with_replacement(range(nv), d):
            e = [0] * nv
            for v in combo:
                e[v] += 1
            exps.append(tuple(e))
            variables.append(combo)
    exponents = np.array(exps, dtype=np.int64).reshape(len(exps), nv)
    index = {e: i for i, e in enumerate(exps)}
    factorials = np.array([math.prod(math.factorial(a) for a in e) for e in exps], dtype=float)

    left, right, target = [], [], []
    for i, ei in enumerate(exps):
        di = sum(ei)
        for j, ej in enumerate(exps):
            if di + sum(ej) > degree:
                continue
            left.append(i)
            right.append(j)
            target.append(index[tuple(a + b for a, b in zip(ei, ej))])
    m = len(exps)
    p = len(left)
    matrix = sp.csr_matrix((np.ones(p), (np.array(target), np.arange(p))), shape=(m, p))

    conj_perm = np.array([index[e[n:] + e[:n]] for e in exps], dtype=np.int64)
    return JetSpace(
        n=n,
        degree=degree,
        exponents=exponents,
        factorials=factorials,
        variables=tuple(variables),
        product_left=np.array(left, dtype=np.int64),
        product_right=np.array(right, dtype=np.int64),
        product_matrix=matrix,
        conj_perm=conj_perm,
    )


@lru_cache(maxsize=None)
def _derivative_map(n: int, degree: int, var: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Source indices, target indices and factors for d/d(var)."""
    hi = jet_space(n, degree)
    lo = jet_space(n, degree - 1)
    index = {tuple(e): i for i, e in enumerate(lo.exponents.tolist())}
    src, dst, fac = [], [], []
    for i, e in enumerate(hi.exponents.tolist()):
        if e[var] == 0:
            continue
        f = e[var]
        e = list(e)
        e[var] -= 1
        src.append(i)
        dst.append(index[tuple(e)])
        fac.append(float(f))
    return np.array(src, dtype=np.int64), np.array(dst, dtype=np.int64), np.array(fac)


def _wirtinger_matrix(n: int) -> np.ndarray:
    """Rows give d/dz_j, d/dzbar_j in the interleaved real basis (x_1, y_1, ...)."""
    q = np.zeros((2 * n, 2 * n), dtype=complex)
    for j in range(n):
        q[j, 2 * j] = 0.5
        q[j, 2 * j + 1] = -0.5j
        q[n + j, 2 * j] = 0.5
        q[n + j, 2 * j + 1] = 0.5j
    return q


def real_to_wirtinger(tensors: Sequence[np.ndarray], n: int) -> list[np.ndarray]:
    """Convert real derivative tensors (batch first) to Wirtinger tensors."""
    q = _wirtinger_matrix(n)
    out = []
    for k, t in enumerate(tensors, start=1):
        t = np.asarray(t)
        w = t.astype(complex)
        for axis in range(t.ndim - k, t.ndim):
            w = np.moveaxis(np.tensordot(w, q, axes=([axis], [1])), -1, axis)
        out.append(w)
    return out


class Jet:
    """Truncated Taylor expansion in ``(z - a, zbar - abar)``."""

    __slots__ = ("space", "c")
    __array_priority__ = 1000

    def __init__(self, space: JetSpace, coefficients: np.ndarray):
        self.space = space
        self.c = coefficients

    # construction -------------------------------------------------------
    @classmethod
    def constant(cls, n: int, degree: int, value, batch_shape: tuple = ()) -> "Jet":
        space = jet_space(n, degree)
        value = np.broadcast_to(np.asarray(value, dtype=complex), batch_shape)
        c = np.zeros((space.size,) + value.shape, dtype=complex)
        c[0] = value
        return cls(space, c)

    @classmethod
    def coordinates(cls, z0: np.ndarray, degree: int) -> tuple[list["Jet"], list["Jet"]]:
        """Jets of ``z_j`` and ``zbar_j`` at base points ``z0`` of shape (..., n)."""
        z0 = np.asarray(z0, dtype=complex)
        n = z0.shape[-1]
        batch = z0.shape[:-1]
        space = jet_space(n, degree)
        zs, zbs = [], []
        for j in range(n):
            for var, base in ((j, z0[..., j]), (n + j, np.conj(z0[..., j]))):
                c = np.zeros((space.size,) + batch, dtype=complex)
                c[0] = base
                if degree >= 1:
                    c[1 + var] = 1.0
                (zs if var < n else zbs).append(cls(space, c))
        return zs, zbs

    @classmethod
    def from_wirtinger(cls, value, tensors: Sequence[np.ndarray], n: int) -> "Jet":
        """Build a jet from Wirtinger derivative tensors of orders 1..d.

        ``tensors[k-1]`` has shape ``batch + (2n,)*k`` and holds all k-th
        derivatives in the variable order ``(z_1..z_n, zbar_1..zbar_n)``.
        """
        degree = len(tensors)
        space = jet_space(n, degree)
        value = np.asarray(value, dtype=complex)
        c = np.zeros((space.size,) + value.shape, dtype=complex)
        c[0] = value
        for i in range(1, space.size):
            idx = space.variables[i]
            t = tensors[len(idx) - 1]
            c[i] = t[(Ellipsis,) + tuple(idx)] / space.factorials[i]
        return cls(space, c)

    @classmethod
    def from_real(cls, value, real_tensors: Sequence[np.ndarray], n: int) -> "Jet":
        """Build a jet from real derivative tensors in the basis (x_1, y_1, ...)."""
        return cls.from_wirtinger(value, real_to_wirtinger(real_tensors, n), n)

    # basic properties ---------------------------------------------------
    @property
    def n(self) -> int:
        return self.space.n

    @property
    def degree(self) -> int:
        return self.space.degree

    @property
    def batch_shape(self) -> tuple:
        return self.c.shape[1:]

    @property
    def value(self) -> np.ndarray:
        return self.c[0]

    def first(self) -> tuple[np.ndarray, np.ndarray]:
        """First derivatives as arrays of shape batch + (n,) for z and zbar."""
        n = self.n
        d = np.moveaxis(self.c[1 : 1 + n], 0, -1)
        db = np.moveaxis(self.c[1 + n : 1 + 2 * n], 0, -1)
        return d, db

    def tensor(self, order: int) -> np.ndarray:
        """Full symmetric Wirtinger derivative tensor of the given order."""
        space = self.space
        nv = 2 * self.n
        out = np.zeros(self.batch_shape + (nv,) * order, dtype=complex)
        for i in range(space.count(order - 1) if order > 0 else 0, space.count(order)):
            idx = space.variables[i]
            val = self.c[i] * space.factorials[i]
            for perm in set(itertools.permutations(idx)):
                out[(Ellipsis,) + perm] = val
        return out

    # truncation and coercion ---------------------------------------------
    def truncate(self, degree: int) -> "Jet":
        if degree == self.degree:
            return self
        if degree > self.degree:
            raise ValueError("cannot raise the degree of a jet")
        space = jet_space(self.n, degree)
        return Jet(space, self.c[: space.size])

    def _coerce(self, other) -> tuple["Jet", "Jet"]:
        if isinstance(other, Jet):
            d = min(self.degree, other.degree)
            return self.truncate(d), other.truncate(d)
        other = np.asarray(other, dtype=complex)
        return self, Jet.constant(self.n, self.degree, other, np.broadcast_shapes(other.shape, self.batch_shape))

    # arithmetic -----------------------------------------------------------
    def __add__(self, other) -> "Jet":
        if not isinstance(other, Jet):
            c = self.c.astype(complex, copy=True)
            c[0] = c[0] + other
            return Jet(self.space, c)
        a, b = self._coerce(other)
        return Jet(a.space, a.c + b.c)

    __radd__ = __add__

    def __neg__(self) -> "Jet":
        return Jet(self.space, -self.c)

    def __sub__(self, other) -> "Jet":
        return self + (-other)

    def __rsub__(self, other) -> "Jet":
        return (-self) + other

    def __mul__(self, other) -> "Jet":
        if not isinstance(other, Jet):
            return Jet(self.space, self.c * np.asarray(other))
        a, b = self._coerce(other)
        space = a.space
        if space.degree == 0:
            return Jet(space, a.c * b.c)
        if space.degree == 1:
            c = a.c[0] * b.c
            c[1:] += a.c[1:] * b.c[0]
            return Jet(space, c)
        prods = a.c[space.product_left] * b.c[space.product_right]
        shape = prods.shape
        out = space.product_matrix @ prods.reshape(shape[0], -1)
        return Jet(space, np.asarray(out).reshape((space.size,) + shape[1:]))

    __rmul__ = __mul__

    def __truediv__(self, other) -> "Jet":
        if not isinstance(other, Jet):
            return Jet(self.space, self.c / np.asarray(other))
        return self * other.reciprocal()

    def __rtruediv__(self, other) -> "Jet":
        return self.reciprocal() * other

    def __pow__(self, k: int) -> "Jet":
        if isinstance(k, int) and k >= 0:
            out = Jet.constant(self.n, self.degree, 1.0, self.batch_shape)
            for _ in range(k):
                out = out * self
            return out
        return self.power(float(k))

    def conj(self) -> "Jet":
        return Jet(self.space, np.conj(self.c[self.space.conj_perm]))

    @property
    def real(self) -> "Jet":
        return (self + self.conj()) * 0.5

    # calculus -------------------------------------------------------------
    def diff(self, var: int) -> "Jet":
        """Derivative with respect to variable ``var`` (0..n-1: z, n..2n-1: zbar)."""
        if self.degree == 0:
            raise ValueError("cannot differentiate a degree-0 jet")
        src, dst, fac = _derivative_map(self.n, self.degree, var)
        space = jet_space(self.n, self.degree - 1)
        c = np.zeros((space.size,) + self.batch_shape, dtype=complex)
        fac = fac.reshape((-1,) + (1,) * len(self.batch_shape))
        c[dst] = self.c[src] * fac
        return Jet(space, c)

    def dz(self, j: int) -> "Jet":
        return self.diff(j)

    def dzb(self, j: int) -> "Jet":
        return self.diff(self.n + j)

    def compose(self, derivatives: Sequence[np.ndarray]) -> "Jet":
        """Evaluate ``f(self)`` from ``f^(k)`` at the base value, k = 0..degree."""
        h = Jet(self.space, self.c.copy())
        h.c[0] = 0.0
        out = Jet.constant(self.n, self.degree, derivatives[0], self.batch_shape)
        term = Jet.constant(self.n, self.degree, 1.0, self.batch_shape)
        for k in range(1, self.degree + 1):
            term = term * h
            out = out + term * (np.asarray(derivatives[k]) / math.factorial(k))
        return out

    def power(self, p: float) -> "Jet":
        a = self.c[0]
        ders = []
        coef = 1.0
        for k in range(self.degree + 1):
            ders.append(coef * a ** (p - k))
            coef *= p - k
        return self.compose(ders)

    def reciprocal(self) -> "Jet":
        a = self.c[0]
        return self.compose([(-1) ** k * math.factorial(k) / a ** (k + 1) for k in range(self.degree + 1)])

    def sqrt(self) -> "Jet":
        return self.power(0.5)

    def exp(self) -> "Jet":
        e = np.exp(self.c[0])
        return self.compose([e] * (self.degree + 1))

    def log(self) -> "Jet":
        a = self.c[0]
        ders = [np.log(a)] + [(-1) ** (k - 1) * math.factorial(k - 1) / a**k for k in range(1, self.degree + 1)]
        return self.compose(ders)

    def apply(self, func_derivatives) -> "Jet":
        """Compose with a scalar function given as ``x -> [f(x), f'(x), ...]``."""
        return self.compose(func_derivatives(self.c[0], self.degree))


def jet_sum(jets: Sequence[Jet]) -> Jet:
    out = jets[0]
    for j in jets[1:]:
        out = out + j
    return out
