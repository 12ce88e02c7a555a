"""Differential forms of type (p,q) with jet-valued coefficients.

A :class:`Form` is lazy: it owns an evaluator ``(z, degree) -> {(J, K): Jet}``
and every operator returns a new lazy form.  Differential operators consume
one jet degree, so evaluating ``dbar(u)`` at degree ``d`` evaluates ``u`` at
degree ``d + 1``.  Only increasing multi-indices are stored; missing keys are
zero.

Basis monomials are ``dz^J ^ dzbar^K`` with all holomorphic differentials
first.  The pointwise inner product treats these monomials as orthonormal.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .errors import DegreeMismatch, DegreeOverflow
from .geometry import Jet2
from .jets import Jet

Key = tuple  # (J, K) with J, K increasing tuples of 0-based indices
Field = Callable[[list, list], "Jet | complex"]


# ---------------------------------------------------------------------------
# multi-indices and exterior signs
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MultiIndex:
    """Strictly increasing tuple of 0-based complex directions."""

    entries: tuple

    def __post_init__(self) -> None:
        e = tuple(self.entries)
        if any(b <= a for a, b in zip(e, e[1:])):
            raise ValueError("multi-index entries must be strictly increasing")
        object.__setattr__(self, "entries", e)

    @staticmethod
    def normalize(seq: Sequence[int]) -> tuple[int, Optional["MultiIndex"]]:
        """Sign of the sorting permutation and the sorted index; repeats give 0."""
        s, out = permutation_sign(seq)
        return (0, None) if s == 0 else (s, MultiIndex(out))

    def complement(self, n: int) -> "MultiIndex":
        return MultiIndex(tuple(k for k in range(n) if k not in self.entries))

    def __len__(self) -> int:
        return len(self.entries)


def permutation_sign(seq: Sequence[int]) -> tuple[int, tuple]:
    seq = list(seq)
    if len(set(seq)) != len(seq):
        return 0, ()
    sign = 1
    for i in range(len(seq)):
        for j in range(i + 1, len(seq)):
            if seq[i] > seq[j]:
                sign = -sign
    return sign, tuple(sorted(seq))


def index_sets(n: int, k: int) -> list[tuple]:
    return list(itertools.combinations(range(n), k))


def _monomial_symbols(J: Sequence[int], K: Sequence[int]) -> list[tuple[int, int]]:
    """Differentials of dz^J ^ dzbar^K as (direction, is_bar)."""
    return [(j, 0) for j in J] + [(k, 1) for k in K]


def _frame_matrix(symbols: Sequence[tuple[int, int]], n: int) -> np.ndarray:
    """Values of each 1-form on the real frame e_{x_1}, e_{y_1}, ..., e_{y_n}."""
    M = np.zeros((len(symbols), 2 * n), dtype=complex)
    for a, (k, bar) in enumerate(symbols):
        M[a, 2 * k] = 1.0
        M[a, 2 * k + 1] = -1j if bar else 1j
    return M


@lru_cache(maxsize=None)
def top_factor(J: tuple, K: tuple, n: int) -> complex:
    """Value of the (n,n) monomial dz^J ^ dzbar^K on the oriented real frame."""
    syms = _monomial_symbols(J, K)
    if len(syms) != 2 * n:
        raise DegreeMismatch("not a top-degree monomial")
    return complex(np.linalg.det(_frame_matrix(syms, n)))


@lru_cache(maxsize=None)
def boundary_factors(J: tuple, K: tuple, n: int) -> np.ndarray:
    """Signed frame values (-1)^i w(e_1..^e_i..e_2n) of a (2n-1)-monomial.

    Pairing the result with the unit outward normal gives the density of
    the monomial against surface measure (0-based ``i``).
    """
    syms = _monomial_symbols(J, K)
    M = _frame_matrix(syms, n)
    out = np.zeros(2 * n, dtype=complex)
    for i in range(2 * n):
        sub = np.delete(M, i, axis=1)
        out[i] = (-1) ** i * np.linalg.det(sub)
    return out


def unit_volume_factor(n: int) -> float:
    """Ratio of the unit-norm volume form to Lebesgue measure (equals 2^n)."""
    return float(2**n)


@lru_cache(maxsize=None)
def star_coefficient(J: tuple, K: tuple, n: int) -> complex:
    """c(J, K) with dz^J dzbar^K ^ c dz^Jc dzbar^Kc equal to the unit volume form."""
    Jc = tuple(k for k in range(n) if k not in J)
    Kc = tuple(k for k in range(n) if k not in K)
    sign_j, Jall = permutation_sign(J + Jc)
    sign_k, Kall = permutation_sign(K + Kc)
    # dz^J dzbar^K dz^Jc dzbar^Kc -> dz^J dz^Jc dzbar^K dzbar^Kc
    sign = sign_j * sign_k * (-1) ** (len(K) * len(Jc))
    total = sign * top_factor(Jall, Kall, n)
    return unit_volume_factor(n) / total


# ---------------------------------------------------------------------------
# evaluated forms
# ---------------------------------------------------------------------------


class FormJet:
    """A (p,q)-form evaluated as jets at a batch of points."""

    def __init__(self, n: int, p: int, q: int, coeffs: dict, degree: int, batch_shape: tuple):
        self.n, self.p, self.q = n, p, q
        self.coeffs = coeffs
        self.degree = degree
        self.batch_shape = batch_shape

    def keys(self) -> list:
        return [(J, K) for J in index_sets(self.n, self.p) for K in index_sets(self.n, self.q)]

    def get(self, J: Sequence[int], K: Sequence[int]) -> Optional[Jet]:
        """Skew-symmetric access; ``None`` means zero."""
        sj, Js = permutation_sign(J)
        sk, Ks = permutation_sign(K)
        if sj == 0 or sk == 0:
            return None
        c = self.coeffs.get((Js, Ks))
        if c is None:
            return None
        return c if sj * sk == 1 else -c

    def values(self) -> dict:
        return {key: c.value for key, c in self.coeffs.items()}

    def value(self, J, K) -> np.ndarray:
        c = self.get(J, K)
        return np.zeros(self.batch_shape, dtype=complex) if c is None else c.value

    def pointwise_norm2(self) -> np.ndarray:
        out = np.zeros(self.batch_shape)
        for c in self.coeffs.values():
            out = out + np.abs(c.value) ** 2
        return out


class Form:
    """Lazy (p,q)-form on C^n."""

    def __init__(self, n: int, p: int, q: int, evaluator: Callable[[np.ndarray, int], dict], name: str = "form"):
        if not (0 <= p <= n and 0 <= q <= n):
            raise DegreeOverflow(f"({p},{q}) is not a form degree in C^{n}")
        self.n, self.p, self.q = n, p, q
        self._evaluator = evaluator
        self.name = name

    @classmethod
    def from_fields(cls, n: int, p: int, q: int, fields: dict, name: str = "form") -> "Form":
        """Coefficients given as ``(J, K) -> f(zs, zbs)`` on coordinate jets.

        Keys may be non-increasing; they are normalized with the skew rule.
        """
        norm = {}
        for (J, K), f in fields.items():
            sj, Js = permutation_sign(J)
            sk, Ks = permutation_sign(K)
            if sj * sk == 0:
                continue
            if len(Js) != p or len(Ks) != q:
                raise DegreeMismatch(f"index {(J, K)} does not match degree ({p},{q})")
            prev = norm.get((Js, Ks))
            sign = sj * sk
            norm[(Js, Ks)] = (prev or []) + [(sign, f)]

        def evaluator(z: np.ndarray, degree: int) -> dict:
            zs, zbs = Jet.coordinates(z, degree)
            out = {}
            for key, terms in norm.items():
                acc = None
                for sign, f in terms:
                    val = f(zs, zbs)
                    if not isinstance(val, Jet):
                        val = Jet.constant(n, degree, val, z.shape[:-1])
                    val = val if sign == 1 else -val
                    acc = val if acc is None else acc + val
                out[key] = acc.truncate(degree) if acc.degree > degree else acc
            return out

        return cls(n, p, q, evaluator, name)

    @classmethod
    def zero(cls, n: int, p: int, q: int) -> "Form":
        return cls(n, p, q, lambda z, d: {}, "0")

    @classmethod
    def function(cls, n: int, f: Field, name: str = "f") -> "Form":
        return cls.from_fields(n, 0, 0, {((), ()): f}, name)

    def evaluate(self, z, degree: int = 0) -> FormJet:
        z = np.asarray(z, dtype=complex)
        coeffs = self._evaluator(z, degree)
        return FormJet(self.n, self.p, self.q, coeffs, degree, z.shape[:-1])

    def __call__(self, z) -> dict:
        return self.evaluate(z, 0).values()

    # linear structure -------------------------------------------------------
    def _combine(self, other: "Form", a: complex, b: complex) -> "Form":
        if (self.n, self.p, self.q) != (other.n, other.p, other.q):
            raise DegreeMismatch("forms of different type")

        def ev(z, d):
            u = self._evaluator(z, d)
            v = other._evaluator(z, d)
            out = {k: c * a for k, c in u.items()}
            for k, c in v.items():
                out[k] = out[k] + c * b if k in out else c * b
            return out

        return Form(self.n, self.p, self.q, ev, f"({self.name}+{other.name})")

    def __add__(self, other: "Form") -> "Form":
        return self._combine(other, 1.0, 1.0)

    def __sub__(self, other: "Form") -> "Form":
        return self._combine(other, 1.0, -1.0)

    def scale(self, c: complex) -> "Form":
        return Form(self.n, self.p, self.q, lambda z, d: {k: v * c for k, v in self._evaluator(z, d).items()}, self.name)

    def multiply(self, f: Field | "Form") -> "Form":
        """Product with a scalar field given as a function form or a field."""
        n = self.n

        def ev(z, d):
            if isinstance(f, Form):
                g = f._evaluator(z, d).get(((), ()))
                if g is None:
                    return {}
            else:
                zs, zbs = Jet.coordinates(z, d)
                g = f(zs, zbs)
            return {k: v * g for k, v in self._evaluator(z, d).items()}

        return Form(n, self.p, self.q, ev, f"f*{self.name}")


# ---------------------------------------------------------------------------
# weights
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class WeightField:
    """Real weight phi; the canonical family is t |z|^2."""

    field: Field
    name: str = "phi"
    t: Optional[float] = None

    @classmethod
    def quadratic(cls, t: float) -> "WeightField":
        def f(zs, zbs):
            out = zs[0] * zbs[0]
            for a, b in zip(zs[1:], zbs[1:]):
                out = out + a * b
            return out * t

        return cls(f, f"{t:g}|z|^2", float(t))

    @classmethod
    def zero(cls) -> "WeightField":
        return cls.quadratic(0.0)

    def negated(self) -> "WeightField":
        f = self.field
        return WeightField(lambda zs, zbs: -f(zs, zbs), f"-({self.name})", None if self.t is None else -self.t)

    def jet(self, z, degree: int = 2) -> Jet:
        z = np.asarray(z, dtype=complex)
        zs, zbs = Jet.coordinates(z, degree)
        val = self.field(zs, zbs)
        if not isinstance(val, Jet):
            val = Jet.constant(z.shape[-1], degree, val, z.shape[:-1])
        return val

    def jet2(self, z) -> Jet2:
        return Jet2.from_jet(self.jet(z, 2), np.asarray(z))

    def __call__(self, z) -> np.ndarray:
        return self.jet(z, 0).value.real


# ---------------------------------------------------------------------------
# operators
# ---------------------------------------------------------------------------


def _sign_p(p: int) -> float:
    return -1.0 if p % 2 else 1.0


def dbar_jets(u: FormJet) -> FormJet:
    """Pointwise dbar of an evaluated form (consumes one degree)."""
    n, p, q = u.n, u.p, u.q
    if q + 1 > n:
        return FormJet(n, p, q + 1, {}, u.degree - 1, u.batch_shape)
    sp_ = _sign_p(p)
    out = {}
    for J in index_sets(n, p):
        for K in index_sets(n, q + 1):
            acc = None
            for pos, k in enumerate(K):
                Kp = K[:pos] + K[pos + 1 :]
                c = u.coeffs.get((J, Kp))
                if c is None:
                    continue
                term = c.dzb(k) * (sp_ * (-1) ** pos)
                acc = term if acc is None else acc + term
            if acc is not None:
                out[(J, K)] = acc
    return FormJet(n, p, q + 1, out, u.degree - 1, u.batch_shape)


def dbar(u: Form) -> Form:
    """Anti-holomorphic exterior derivative."""
    if u.q + 1 > u.n:
        raise DegreeOverflow("dbar of a top-degree form")

    def ev(z, d):
        return dbar_jets(u.evaluate(z, d + 1)).coeffs

    return Form(u.n, u.p, u.q + 1, ev, f"dbar({u.name})")


def dbar_star_jets(u: FormJet, phi: Jet) -> FormJet:
    """Formal adjoint of dbar in the e^{-phi} inner product (consumes one degree)."""
    n, p, q = u.n, u.p, u.q
    if q == 0:
        raise DegreeMismatch("dbar_star needs q >= 1")
    sp_ = _sign_p(p)
    dphi = [phi.truncate(u.degree).dz(k) for k in range(n)]
    out = {}
    for J in index_sets(n, p):
        for Kp in index_sets(n, q - 1):
            acc = None
            for k in range(n):
                c = u.get(J, (k,) + Kp)
                if c is None:
                    continue
                term = (c.truncate(u.degree - 1) * dphi[k] - c.dz(k)) * sp_
                acc = term if acc is None else acc + term
            if acc is not None:
                out[(J, Kp)] = acc
    return FormJet(n, p, q - 1, out, u.degree - 1, u.batch_shape)


def dbar_star(u: Form, w: WeightField) -> Form:
    if u.q == 0:
        raise DegreeMismatch("dbar_star needs q >= 1")

    def ev(z, d):
        return dbar_star_jets(u.evaluate(z, d + 1), w.jet(z, d + 1)).coeffs

    return Form(u.n, u.p, u.q - 1, ev, f"dbar*({u.name})")


def nabla_bar_jets(u: FormJet) -> dict:
    """All d u_{J,K} / d zbar_j keyed by (J, K, j)."""
    out = {}
    for (J, K), c in u.coeffs.items():
        for j in range(u.n):
            out[(J, K, j)] = c.dzb(j)
    return out


def nabla_bar(u: Form, z, degree: int = 0) -> dict:
    return nabla_bar_jets(u.evaluate(z, degree + 1))


def nabla_bar_norm2(u: FormJet) -> np.ndarray:
    """Pointwise |nabla_bar u|^2 from an evaluated form of degree >= 1."""
    out = np.zeros(u.batch_shape)
    for c in u.coeffs.values():
        _, db = c.first()
        out = out + np.sum(np.abs(db) ** 2, axis=-1)
    return out


def hessian_action_values(hess: np.ndarray, u: FormJet | dict, n: int | None = None, p: int | None = None, q: int | None = None) -> np.ndarray:
    """H_psi(u,u) from the mixed Hessian ``hess[..., j, k] = psi_{j kbar}``."""
    if isinstance(u, FormJet):
        vals = {key: c.value for key, c in u.coeffs.items()}
        n, p, q = u.n, u.p, u.q
    else:
        vals = u
    if q == 0:
        return np.zeros(hess.shape[:-2])
    batch = hess.shape[:-2]
    out = np.zeros(batch)
    for J in index_sets(n, p):
        for Kp in index_sets(n, q - 1):
            vec = np.zeros(batch + (n,), dtype=complex)
            for j in range(n):
                s, Ks = permutation_sign((j,) + Kp)
                if s == 0:
                    continue
                v = vals.get((J, Ks))
                if v is not None:
                    vec[..., j] = s * v
            out = out + np.einsum("...jk,...j,...k->...", hess, vec, np.conj(vec)).real
    return out


def hessian_action(psi_jet: Jet2, u: FormJet) -> np.ndarray:
    return hessian_action_values(psi_jet.ddb, u)


def hodge_star_values(vals: dict, n: int, p: int, q: int, phi_value: np.ndarray) -> dict:
    weight = np.exp(-np.asarray(phi_value).real)
    out = {}
    for (J, K), v in vals.items():
        Jc = tuple(k for k in range(n) if k not in J)
        Kc = tuple(k for k in range(n) if k not in K)
        out[(Jc, Kc)] = star_coefficient(J, K, n) * weight * np.conj(v)
    return out


def hodge_star_jets(u: FormJet, phi: Jet) -> FormJet:
    """Pointwise weighted star; conjugate-linear, jets preserved."""
    n = u.n
    e = (-phi.truncate(u.degree)).exp() if u.degree > 0 else None
    out = {}
    for (J, K), c in u.coeffs.items():
        Jc = tuple(k for k in range(n) if k not in J)
        Kc = tuple(k for k in range(n) if k not in K)
        cj = c.conj()
        if e is None:
            cj = cj * np.exp(-phi.value.real)
        else:
            cj = cj * e
        out[(Jc, Kc)] = cj * star_coefficient(J, K, n)
    return FormJet(n, n - u.p, n - u.q, out, u.degree, u.batch_shape)


def hodge_star(u: Form, w: WeightField) -> Form:
    """The weighted star fixed by  <v,u> e^{-phi} dV = v ^ star_phi u.

    ``dV`` here is the volume form of unit pointwise norm, which equals
    ``2^n`` times Lebesgue measure.
    """

    def ev(z, d):
        return hodge_star_jets(u.evaluate(z, d), w.jet(z, d)).coeffs

    return Form(u.n, u.n - u.p, u.n - u.q, ev, f"star({u.name})")


def wedge_values(u: dict, v: dict, n: int, pu: int, qu: int, pv: int, qv: int, mul=None) -> dict:
    if pu + pv > n or qu + qv > n:
        raise DegreeOverflow("wedge degree exceeds the dimension")
    mul = mul or (lambda a, b: a * b)
    out = {}
    for (J1, K1), a in u.items():
        for (J2, K2), b in v.items():
            sj, J = permutation_sign(J1 + J2)
            sk, K = permutation_sign(K1 + K2)
            if sj * sk == 0:
                continue
            sign = sj * sk * (-1) ** (len(K1) * len(J2))
            term = mul(a, b) * sign
            out[(J, K)] = out[(J, K)] + term if (J, K) in out else term
    return out


def wedge(u: Form, v: Form) -> Form:
    """Exterior product with the dz-before-dzbar ordering of monomials."""
    if u.n != v.n:
        raise DegreeMismatch("forms live in different dimensions")
    if u.p + v.p > u.n or u.q + v.q > u.n:
        raise DegreeOverflow("wedge degree exceeds the dimension")

    def ev(z, d):
        return wedge_values(u._evaluator(z, d), v._evaluator(z, d), u.n, u.p, u.q, v.p, v.q)

    return Form(u.n, u.p + v.p, u.q + v.q, ev, f"{u.name}^{v.name}")


def wedge_jets(u: FormJet, v: FormJet) -> FormJet:
    vals = wedge_values(u.coeffs, v.coeffs, u.n, u.p, u.q, v.p, v.q)
    return FormJet(u.n, u.p + v.p, u.q + v.q, vals, min(u.degree, v.degree), u.batch_shape)


def pointwise_inner(u: dict, v: dict) -> np.ndarray:
    out = 0.0
    for key, a in u.items():
        b = v.get(key)
        if b is not None:
            out = out + a * np.conj(b)
    return out


# ---------------------------------------------------------------------------
# integration
# ---------------------------------------------------------------------------


def _chunks(scheme, size: int = 50_000):
    if hasattr(scheme, "chunks"):
        yield from scheme.chunks(size)
    else:
        pts, wts = scheme
        for s in range(0, len(wts), size):
            yield pts[s : s + size], wts[s : s + size], None


def _fsum_complex(parts: Iterable[complex]) -> complex:
    parts = list(parts)
    return complex(math.fsum(p.real for p in parts), math.fsum(p.imag for p in parts))


def inner(u: Form, v: Form, w: WeightField, scheme) -> complex:
    """Weighted L2 inner product  sum' int u_JK conj(v_JK) e^{-phi} dV."""
    if (u.n, u.p, u.q) != (v.n, v.p, v.q):
        raise DegreeMismatch("inner product of forms of different type")
    parts = []
    for pts, wts, _ in _chunks(scheme):
        a = u.evaluate(pts, 0).values()
        b = v.evaluate(pts, 0).values()
        dens = pointwise_inner(a, b) * np.exp(-w(pts))
        parts.append(np.sum(np.asarray(dens) * wts))
    return _fsum_complex(parts) if parts else 0j


def norm(u: Form, w: WeightField, scheme) -> float:
    return math.sqrt(max(inner(u, u, w, scheme).real, 0.0))


def integrate_top(u: Form, scheme) -> complex:
    """Integral of an (n,n)-form against the standard orientation."""
    n = u.n
    if (u.p, u.q) != (n, n):
        raise DegreeMismatch("integrate_top needs an (n,n)-form")
    key = (tuple(range(n)), tuple(range(n)))
    fac = top_factor(*key, n)
    parts = []
    for pts, wts, _ in _chunks(scheme):
        c = u.evaluate(pts, 0).coeffs.get(key)
        if c is not None:
            parts.append(np.sum(c.value * wts) * fac)
    return _fsum_complex(parts) if parts else 0j


def boundary_density(vals: dict, n: int, normals: np.ndarray) -> np.ndarray:
    """Density of a (2n-1)-form against surface measure for outward ``normals``."""
    out = 0.0
    for (J, K), c in vals.items():
        fac = boundary_factors(J, K, n)
        out = out + c * (normals @ fac)
    return out


def integrate_boundary(u: Form, scheme) -> complex:
    """Integral of a (2n-1)-form over a boundary scheme carrying normals."""
    if u.p + u.q != 2 * u.n - 1:
        raise DegreeMismatch("integrate_boundary needs a form of total degree 2n-1")
    parts = []
    for pts, wts, nrm in _chunks(scheme):
        vals = u.evaluate(pts, 0).values()
        parts.append(np.sum(boundary_density(vals, u.n, nrm) * wts))
    return _fsum_complex(parts) if parts else 0j
