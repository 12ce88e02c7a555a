"""Domains, signed distance, Wirtinger jets and the CR frame.

Points of C^n are complex arrays of shape ``(..., n)``.  Real coordinates use
the interleaved ordering ``(x_1, y_1, ..., x_n, y_n)``, which is the standard
orientation of C^n.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
from scipy.stats import qmc

from .errors import BadJet, NoConvergence, OutsideShell, ShellTooThin
from .jets import Jet

NEWTON_MAX_ITER = 50
NEWTON_TOL = 1e-12
IMPLICIT_FD_STEP = 1e-5
THIRD_FD_STEP = 1e-4


def to_real(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=complex)
    return np.stack([z.real, z.imag], axis=-1).reshape(z.shape[:-1] + (2 * z.shape[-1],))


def to_complex(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    x = x.reshape(x.shape[:-1] + (x.shape[-1] // 2, 2))
    return x[..., 0] + 1j * x[..., 1]


RealFunc = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class DomainSpec:
    """A bounded domain in C^n.

    Use the constructors :meth:`ball`, :meth:`ellipsoid` and :meth:`implicit`.
    Implicit domains take a real defining function ``func`` acting on arrays
    of shape ``(..., 2n)``, negative inside, with optional analytic ``grad``
    and ``hess``; missing derivatives fall back to central differences.
    Implicit domains must be star-shaped with respect to ``center``.
    """

    kind: str
    n: int
    center: tuple
    shell_thickness: float
    radius: Optional[float] = None
    semi_axes: Optional[tuple] = None
    func: Optional[RealFunc] = field(default=None, compare=False)
    grad: Optional[RealFunc] = field(default=None, compare=False)
    hess: Optional[RealFunc] = field(default=None, compare=False)
    extent: Optional[float] = None
    name: str = ""

    # constructors ---------------------------------------------------------
    @classmethod
    def ball(cls, n: int = 2, radius: float = 1.0, center=None, shell_thickness: float | None = None) -> "DomainSpec":
        c = tuple(complex(v) for v in (np.zeros(n) if center is None else center))
        if shell_thickness is None:
            shell_thickness = 0.4 * radius
        return cls("ball", n, c, float(shell_thickness), radius=float(radius), name=f"ball(r={radius:g})")

    @classmethod
    def ellipsoid(cls, semi_axes, center=None, shell_thickness: float | None = None) -> "DomainSpec":
        """Ellipsoid with one semi-axis per complex coordinate (or per real one)."""
        a = np.asarray(semi_axes, dtype=float).ravel()
        n = len(a)
        if center is not None and len(center) * 2 == len(a):
            n = len(a) // 2
        real_axes = np.repeat(a, 2) if len(a) == n else a
        if len(real_axes) != 2 * n:
            raise ValueError("semi_axes must have n or 2n entries")
        c = tuple(complex(v) for v in (np.zeros(n) if center is None else center))
        reach = real_axes.min() ** 2 / real_axes.max()
        if shell_thickness is None:
            shell_thickness = min(0.2 * 2 * real_axes.max(), 0.5 * reach)
        label = ",".join(f"{v:g}" for v in a)
        return cls("ellipsoid", n, c, float(shell_thickness), semi_axes=tuple(real_axes.tolist()), name=f"ellipsoid({label})")

    @classmethod
    def implicit(
        cls,
        n: int,
        func: RealFunc,
        extent: float,
        shell_thickness: float,
        grad: RealFunc | None = None,
        hess: RealFunc | None = None,
        center=None,
        name: str = "implicit",
    ) -> "DomainSpec":
        """``extent`` bounds the distance from ``center`` to any boundary point."""
        c = tuple(complex(v) for v in (np.zeros(n) if center is None else center))
        return cls("implicit", n, c, float(shell_thickness), func=func, grad=grad, hess=hess, extent=float(extent), name=name)

    # geometry summaries ----------------------------------------------------
    @property
    def center_array(self) -> np.ndarray:
        return np.array(self.center, dtype=complex)

    @property
    def diameter(self) -> float:
        if self.kind == "ball":
            return 2.0 * self.radius
        if self.kind == "ellipsoid":
            return 2.0 * max(self.semi_axes)
        pts = boundary_samples(self, 4000, seed=0)
        x = to_real(pts)
        # farthest pair among samples, anchored at the extreme points
        d = 0.0
        for _ in range(3):
            i = np.argmax(np.linalg.norm(x - x[0], axis=1))
            j = np.argmax(np.linalg.norm(x - x[i], axis=1))
            d = max(d, float(np.linalg.norm(x[i] - x[j])))
            x = np.roll(x, 1, axis=0)
        return d

    @property
    def outer_radius(self) -> float:
        """Radius of a ball about ``center`` containing the domain."""
        if self.kind == "ball":
            return self.radius
        if self.kind == "ellipsoid":
            return max(self.semi_axes)
        return self.extent

    @property
    def inner_radius(self) -> float:
        """Radius of a ball about ``center`` contained in the domain."""
        if self.kind == "ball":
            return self.radius
        if self.kind == "ellipsoid":
            return min(self.semi_axes)
        return float(np.min(radial_boundary(self, _sphere_samples(self.n, 2000, 1))))

    def bounding_box(self) -> tuple[np.ndarray, np.ndarray]:
        c = to_real(self.center_array)
        r = self.outer_radius
        return c - r, c + r

    def scaled(self, lam: float) -> "DomainSpec":
        """Dilation about the origin by ``lam``."""
        c = tuple(complex(v) * lam for v in self.center)
        if self.kind == "ball":
            return replace(self, center=c, radius=self.radius * lam, shell_thickness=self.shell_thickness * lam)
        if self.kind == "ellipsoid":
            return replace(
                self,
                center=c,
                semi_axes=tuple(a * lam for a in self.semi_axes),
                shell_thickness=self.shell_thickness * lam,
            )
        f, g, h = self.func, self.grad, self.hess
        return replace(
            self,
            center=c,
            func=lambda x: f(x / lam),
            grad=None if g is None else (lambda x: g(x / lam) / lam),
            hess=None if h is None else (lambda x: h(x / lam) / lam**2),
            extent=self.extent * lam,
            shell_thickness=self.shell_thickness * lam,
        )

    def with_shell(self, shell_thickness: float) -> "DomainSpec":
        return replace(self, shell_thickness=float(shell_thickness))


@dataclass(frozen=True)
class AnnulusSpec:
    """Annulus ``envelope \\ closure(hole)``."""

    envelope: DomainSpec
    hole: DomainSpec

    def __post_init__(self) -> None:
        if self.envelope.n != self.hole.n:
            raise ValueError("envelope and hole live in different dimensions")
        pts = boundary_samples(self.hole, 512, seed=0)
        rho = signed_distance(self.envelope, pts)
        if not np.all(rho < -0.5 * self.gap_estimate(pts, rho)):
            raise ValueError("hole closure is not contained in the envelope with margin gap/2")

    @staticmethod
    def gap_estimate(pts, rho) -> float:
        return float(np.min(-rho))

    @property
    def n(self) -> int:
        return self.envelope.n

    @property
    def gap(self) -> float:
        pts = boundary_samples(self.hole, 4096, seed=1)
        return float(np.min(-signed_distance(self.envelope, pts)))

    @property
    def diameter(self) -> float:
        return self.envelope.diameter

    @classmethod
    def balls(cls, n: int = 2, outer: float = 1.0, inner: float = 0.4, hole_shell: float | None = None) -> "AnnulusSpec":
        if hole_shell is None:
            hole_shell = 0.2 * 2 * inner
        return cls(DomainSpec.ball(n, outer), DomainSpec.ball(n, inner, shell_thickness=hole_shell))

    def contains(self, z: np.ndarray) -> np.ndarray:
        return (signed_distance(self.envelope, z) < 0) & (signed_distance(self.hole, z) > 0)


# ---------------------------------------------------------------------------
# signed distance
# ---------------------------------------------------------------------------


def _ellipsoid_project(domain: DomainSpec, x: np.ndarray):
    """Closest points on an ellipsoid via the secular equation in lambda."""
    a2 = np.asarray(domain.semi_axes) ** 2
    c = to_real(domain.center_array)
    d = x - c
    d2 = d**2
    amin = a2.min()

    def g(lam):
        return np.sum(d2 * a2 / (a2 + lam[..., None]) ** 2, axis=-1) - 1.0

    def dg(lam):
        return -2.0 * np.sum(d2 * a2 / (a2 + lam[..., None]) ** 3, axis=-1)

    # bracket [lo, hi] containing the largest root on (-amin, inf)
    lo = np.full(x.shape[:-1], -amin)
    r = np.linalg.norm(d, axis=-1)
    hi = np.sqrt(a2.max()) * r + 1.0
    degenerate = g(np.full_like(lo, -amin * (1 - 1e-15))) <= 0
    lam = np.where(g(np.zeros_like(lo)) > 0, 0.0, -0.5 * amin)
    for it in range(200):
        val = g(lam)
        lo = np.where(val > 0, lam, lo)
        hi = np.where(val <= 0, lam, hi)
        with np.errstate(divide="ignore", invalid="ignore"):
            cand = lam - val / dg(lam)
        bad = ~((cand > lo) & (cand < hi)) | ~np.isfinite(cand)
        cand = np.where(bad, 0.5 * (lo + hi), cand)
        done = np.abs(cand - lam) <= 1e-15 * (1.0 + np.abs(lam))
        lam = cand
        if np.all(done | degenerate):
            break
    else:
        if not np.all(degenerate | (np.abs(g(lam)) < 1e-10)):
            raise NoConvergence("ellipsoid projection did not converge")
    y = c + d * a2 / (a2 + lam[..., None])
    if np.any(degenerate):
        # medial-axis case: components along the smallest axis are free
        small = np.isclose(a2, amin)
        other = np.where(small, 0.0, d * a2 / (a2 - amin + 1e-300))
        rest = 1.0 - np.sum(np.where(small, 0.0, other**2 / a2), axis=-1)
        rest = np.maximum(rest, 0.0)
        yd = other.copy()
        first = int(np.argmax(small))
        yd[..., first] = np.sqrt(rest * amin)
        y = np.where(degenerate[..., None], c + yd, y)
    inside = np.sum(d2 / a2, axis=-1) < 1.0
    dist = np.linalg.norm(x - y, axis=-1)
    rho = np.where(inside, -dist, dist)
    grad_f = 2.0 * (y - c) / a2
    nrm = grad_f / np.linalg.norm(grad_f, axis=-1, keepdims=True)
    return rho, y, nrm


def _implicit_grad(domain: DomainSpec, y: np.ndarray) -> np.ndarray:
    if domain.grad is not None:
        return np.asarray(domain.grad(y), dtype=float)
    h = 1e-6 * max(domain.extent, 1.0)
    out = np.empty_like(y)
    for a in range(y.shape[-1]):
        e = np.zeros(y.shape[-1])
        e[a] = h
        out[..., a] = (domain.func(y + e) - domain.func(y - e)) / (2 * h)
    return out


def _implicit_hess(domain: DomainSpec, y: np.ndarray) -> np.ndarray:
    if domain.hess is not None:
        return np.asarray(domain.hess(y), dtype=float)
    h = IMPLICIT_FD_STEP * 2 * max(domain.extent, 1.0)
    m = y.shape[-1]
    out = np.empty(y.shape + (m,))
    for a in range(m):
        e = np.zeros(m)
        e[a] = h
        out[..., a] = (_implicit_grad(domain, y + e) - _implicit_grad(domain, y - e)) / (2 * h)
    return 0.5 * (out + np.swapaxes(out, -1, -2))


def _implicit_project(domain: DomainSpec, x: np.ndarray):
    """Damped Newton on the Lagrange system y - x + lam grad F(y) = 0, F(y) = 0."""
    f = domain.func
    y = x.copy()
    for _ in range(5):
        g = _implicit_grad(domain, y)
        y = y - (f(y) / np.sum(g * g, axis=-1))[..., None] * g
    g = _implicit_grad(domain, y)
    lam = np.sum((x - y) * g, axis=-1) / np.sum(g * g, axis=-1)
    m = x.shape[-1]

    def residual(y, lam):
        g = _implicit_grad(domain, y)
        return np.concatenate([y - x + lam[..., None] * g, f(y)[..., None]], axis=-1)

    res = residual(y, lam)
    converged = False
    for _ in range(NEWTON_MAX_ITER):
        nres = np.linalg.norm(res, axis=-1)
        if np.all((np.abs(res[..., -1]) < NEWTON_TOL) & (nres < 1e-10)):
            converged = True
            break
        g = _implicit_grad(domain, y)
        hmat = _implicit_hess(domain, y)
        jac = np.zeros(x.shape[:-1] + (m + 1, m + 1))
        jac[..., :m, :m] = np.eye(m) + lam[..., None, None] * hmat
        jac[..., :m, m] = g
        jac[..., m, :m] = g
        step = np.linalg.solve(jac, -res[..., None])[..., 0]
        t = np.ones(x.shape[:-1])
        for _ in range(8):
            ny = y + t[..., None] * step[..., :m]
            nl = lam + t * step[..., m]
            nr = residual(ny, nl)
            worse = np.linalg.norm(nr, axis=-1) > nres
            if not np.any(worse):
                break
            t = np.where(worse, 0.5 * t, t)
        y, lam, res = ny, nl, nr
    if not converged:
        raise NoConvergence("Newton projection did not converge within the iteration cap")
    g = _implicit_grad(domain, y)
    nrm = g / np.linalg.norm(g, axis=-1, keepdims=True)
    dist = np.linalg.norm(x - y, axis=-1)
    rho = np.where(f(x) < 0, -dist, dist)
    return rho, y, nrm


def project(domain: DomainSpec, z: np.ndarray):
    """Signed distance, foot points and unit outward normals (real coords)."""
    x = to_real(np.atleast_1d(np.asarray(z, dtype=complex)))
    if domain.kind == "ball":
        c = to_real(domain.center_array)
        d = x - c
        r = np.linalg.norm(d, axis=-1)
        safe = np.where(r > 0, r, 1.0)
        nrm = d / safe[..., None]
        return r - domain.radius, c + domain.radius * nrm, nrm
    if domain.kind == "ellipsoid":
        return _ellipsoid_project(domain, x)
    return _implicit_project(domain, x)


def signed_distance(domain: DomainSpec, z) -> np.ndarray | float:
    """Distance to the boundary, negative inside.

    >>> float(signed_distance(DomainSpec.ball(3), [0.5, 0, 0]))
    -0.5
    """
    z = np.asarray(z, dtype=complex)
    if domain.kind == "ball":
        out = np.linalg.norm(z - domain.center_array, axis=-1) - domain.radius
    else:
        out = project(domain, z)[0]
    return float(out) if np.ndim(out) == 0 else out


# ---------------------------------------------------------------------------
# jets
# ---------------------------------------------------------------------------


@dataclass
class Jet2:
    """Wirtinger derivatives up to order two (three when available) at points."""

    z: np.ndarray
    value: np.ndarray
    d: np.ndarray  # rho_j, (..., n)
    db: np.ndarray  # rho_jbar
    dd: np.ndarray  # rho_jk, (..., n, n)
    ddb: np.ndarray  # rho_{j kbar}
    dbdb: np.ndarray  # rho_{jbar kbar}
    taylor: Optional[Jet] = None

    @classmethod
    def from_jet(cls, jet: Jet, z: np.ndarray) -> "Jet2":
        n = jet.n
        d, db = jet.first()
        h = jet.tensor(2)
        return cls(
            z=np.asarray(z),
            value=jet.value.real,
            d=d,
            db=db,
            dd=h[..., :n, :n],
            ddb=h[..., :n, n:],
            dbdb=h[..., n:, n:],
            taylor=jet,
        )

    @property
    def n(self) -> int:
        return self.d.shape[-1]

    def third(self) -> np.ndarray:
        """Full third-order Wirtinger tensor (..., 2n, 2n, 2n)."""
        if self.taylor is None or self.taylor.degree < 3:
            raise ValueError("jet carries no third derivatives")
        return self.taylor.tensor(3)

    def gradient_norm(self) -> np.ndarray:
        """Euclidean |d rho| = 2 |partial rho|."""
        return 2.0 * np.sqrt(np.sum(np.abs(self.d) ** 2, axis=-1))


def _ball_taylor(domain: DomainSpec, z: np.ndarray, degree: int) -> Jet:
    zs, zbs = Jet.coordinates(z - domain.center_array, degree)
    r2 = zs[0] * zbs[0]
    for a, b in zip(zs[1:], zbs[1:]):
        r2 = r2 + a * b
    return r2.sqrt() - domain.radius


def _implicit_like_hessian(domain: DomainSpec, x: np.ndarray):
    """rho, real gradient and Hessian by composing the projection."""
    rho, y, nrm = project(domain, to_complex(x))
    m = x.shape[-1]
    if domain.kind == "ellipsoid":
        a2 = np.asarray(domain.semi_axes) ** 2
        gvec = 2.0 * (y - to_real(domain.center_array)) / a2
        hf = np.broadcast_to(np.diag(2.0 / a2), y.shape + (m,))
    else:
        gvec = _implicit_grad(domain, y)
        hf = _implicit_hess(domain, y)
    gl = np.linalg.norm(gvec, axis=-1)
    proj = np.eye(m) - nrm[..., :, None] * nrm[..., None, :]
    dn = proj @ hf / gl[..., None, None]
    dy = np.linalg.solve(np.eye(m) + rho[..., None, None] * dn, proj)
    hess = dn @ dy
    hess = 0.5 * (hess + np.swapaxes(hess, -1, -2))
    return rho, nrm, hess


def real_derivatives(domain: DomainSpec, x: np.ndarray, order: int = 2):
    """Signed distance with real gradient, Hessian and (order 3) third tensor."""
    x = np.asarray(x, dtype=float)
    if domain.kind == "ball":
        c = to_real(domain.center_array)
        d = x - c
        r = np.linalg.norm(d, axis=-1)
        u = d / r[..., None]
        m = x.shape[-1]
        eye = np.eye(m)
        hess = (eye - u[..., :, None] * u[..., None, :]) / r[..., None, None]
        out = [r - domain.radius, u, hess]
        if order >= 3:
            t = -(
                eye[:, :, None] * u[..., None, None, :]
                + eye[:, None, :] * u[..., None, :, None]
                + eye[None, :, :] * u[..., :, None, None]
            ) + 3 * u[..., :, None, None] * u[..., None, :, None] * u[..., None, None, :]
            out.append(t / (r**2)[..., None, None, None])
        return out
    rho, grad, hess = _implicit_like_hessian(domain, x)
    out = [rho, grad, hess]
    if order >= 3:
        m = x.shape[-1]
        scale = THIRD_FD_STEP * domain.diameter if domain.kind == "ellipsoid" else 1e-3 * 2 * domain.extent
        t = np.empty(x.shape + (m, m))
        for a in range(m):
            e = np.zeros(m)
            e[a] = scale
            hp = _implicit_like_hessian(domain, x + e)[2]
            hm = _implicit_like_hessian(domain, x - e)[2]
            t[..., a, :, :] = (hp - hm) / (2 * scale)
        t = (t + np.swapaxes(t, -3, -2) + np.swapaxes(t, -3, -1)) / 3.0
        out.append(t)
    return out


def rho_taylor(domain: DomainSpec, z: np.ndarray, degree: int = 2) -> Jet:
    """Taylor jet of the signed distance at points ``z`` (no shell check)."""
    z = np.asarray(z, dtype=complex)
    if domain.kind == "ball":
        return _ball_taylor(domain, z, degree)
    if degree > 3:
        raise ValueError("non-ball domains provide jets up to degree 3")
    ders = real_derivatives(domain, to_real(z), order=max(degree, 1))
    return Jet.from_real(ders[0], ders[1 : degree + 1], domain.n)


def jet(domain: DomainSpec, z, order: int = 2) -> Jet2:
    """Second-order (optionally third-order) Wirtinger jet of the signed distance."""
    z = np.asarray(z, dtype=complex)
    rho = np.asarray(signed_distance(domain, z))
    if np.any(np.abs(rho) >= domain.shell_thickness):
        raise OutsideShell(f"point(s) outside the shell |rho| < {domain.shell_thickness:g}")
    return Jet2.from_jet(rho_taylor(domain, z, order), z)


# ---------------------------------------------------------------------------
# CR frame
# ---------------------------------------------------------------------------


@dataclass
class CRFrame:
    """Frame quantities built from a distance jet and an optional weight jet."""

    N_coeffs: np.ndarray
    L_coeffs: np.ndarray
    tau: np.ndarray
    eta_squared: np.ndarray
    nu: np.ndarray
    mu: np.ndarray
    mu_alt: np.ndarray
    gamma: np.ndarray
    L_rho: np.ndarray  # L_j rho_k


def cr_frame(rho_jet: Jet2, weight_jet: Jet2 | None = None, tol: float = 1e-6) -> CRFrame:
    r1 = rho_jet.d
    r1b = rho_jet.db
    n = r1.shape[-1]
    dev = np.abs(4.0 * np.sum(np.abs(r1) ** 2, axis=-1) - 1.0)
    if np.any(dev > tol):
        raise BadJet(f"|d rho| deviates from 1 by {float(np.max(dev)):.3e}")
    rjk = rho_jet.dd
    rjkb = rho_jet.ddb
    eye = np.eye(n)
    N = 4.0 * r1b
    L = eye - 4.0 * r1[..., :, None] * r1b[..., None, :]
    tau = np.einsum("...jj->...", rjkb) - 4.0 * np.einsum("...j,...l,...jl->...", r1b, r1, rjkb)
    # L_j rho_k = rho_jk - rho_j N rho_k
    n_rho_k = 4.0 * np.einsum("...l,...kl->...k", r1b, rjk)
    L_rho = rjk - r1[..., :, None] * n_rho_k[..., None, :]
    eta2 = np.sum(np.abs(L_rho) ** 2, axis=(-2, -1))
    if weight_jet is None:
        p1 = np.zeros_like(r1)
        p1b = np.zeros_like(r1)
        pjkb = np.zeros_like(rjkb)
    else:
        p1, p1b, pjkb = weight_jet.d, weight_jet.db, weight_jet.ddb
    nu = np.einsum("...kk->...", rjkb) - np.sum(r1 * p1b, axis=-1)
    mu = p1 + 4.0 * np.einsum("...jk,...k->...j", rjk, r1b) + 4.0 * r1 * np.conj(nu)[..., None]
    mu_alt = p1 - 4.0 * np.einsum("...jk,...k->...j", rjkb, r1) + 4.0 * r1 * np.conj(nu)[..., None]
    gamma = np.einsum("...jj->...", pjkb) - 4.0 * np.einsum("...j,...l,...jl->...", r1b, r1, pjkb)
    return CRFrame(
        N_coeffs=N,
        L_coeffs=L,
        tau=tau.real,
        eta_squared=eta2,
        nu=nu,
        mu=mu,
        mu_alt=mu_alt,
        gamma=gamma.real,
        L_rho=L_rho,
    )


# ---------------------------------------------------------------------------
# sampling helpers
# ---------------------------------------------------------------------------


def _sphere_samples(n: int, count: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    w = rng.normal(size=(count, n)) + 1j * rng.normal(size=(count, n))
    return w / np.linalg.norm(w, axis=-1, keepdims=True)


def radial_boundary(domain: DomainSpec, omega: np.ndarray) -> np.ndarray:
    """Distance from ``center`` to the boundary along unit directions ``omega``."""
    omega = np.asarray(omega, dtype=complex)
    if domain.kind == "ball":
        return np.full(omega.shape[:-1], domain.radius)
    if domain.kind == "ellipsoid":
        a2 = np.asarray(domain.semi_axes) ** 2
        w = to_real(omega)
        return 1.0 / np.sqrt(np.sum(w**2 / a2, axis=-1))
    c = to_real(domain.center_array)
    w = to_real(omega)
    lo = np.zeros(omega.shape[:-1])
    hi = np.full(omega.shape[:-1], 1.05 * domain.extent)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        inside = domain.func(c + mid[..., None] * w) < 0
        lo = np.where(inside, mid, lo)
        hi = np.where(inside, hi, mid)
        if np.max(hi - lo) < 1e-15 * domain.extent:
            break
    return 0.5 * (lo + hi)


def boundary_samples(domain: DomainSpec, count: int, seed: int = 0) -> np.ndarray:
    omega = _sphere_samples(domain.n, count, seed)
    r = radial_boundary(domain, omega)
    pts = domain.center_array + r[..., None] * omega
    if domain.kind == "implicit":
        pts = to_complex(project(domain, pts)[1])
    return pts


def shell_samples(domain: DomainSpec, count: int, seed: int = 0, side: str = "both", fraction: float = 0.9) -> np.ndarray:
    """Random points with |rho| < fraction * shell_thickness.

    ``side`` is ``"inside"``, ``"outside"`` or ``"both"``.
    """
    rng = np.random.default_rng(seed + 7919)
    base = boundary_samples(domain, count, seed)
    _, _, nrm = project(domain, base)
    s = domain.shell_thickness * fraction
    if side == "inside":
        t = -rng.uniform(0, s, count)
    elif side == "outside":
        t = rng.uniform(0, s, count)
    else:
        t = rng.uniform(-s, s, count)
    return to_complex(to_real(base) + t[:, None] * nrm)


# ---------------------------------------------------------------------------
# mollification
# ---------------------------------------------------------------------------


def _mollifier_nodes(m: int, radius: float, count: int = 64, seed: int = 0):
    """Symmetric quasi-random nodes in the 2n-ball with bump weights summing to one."""
    half = count // 2
    sob = qmc.Sobol(d=m, scramble=True, seed=seed)
    pts = []
    while sum(len(p) for p in pts) < half:
        u = 2.0 * sob.random(256) - 1.0
        pts.append(u[np.linalg.norm(u, axis=1) < 1.0])
    u = np.concatenate(pts)[:half]
    u = np.concatenate([u, -u])
    r2 = np.sum(u**2, axis=1)
    w = np.exp(-1.0 / (1.0 - r2))
    return radius * u, w / w.sum()


def mollify(domain: DomainSpec, j: int, nodes: int = 64, seed: int = 0) -> DomainSpec:
    """Domain defined by the mollified signed distance rho * chi_j.

    The mollifier is a symmetric quadrature of a radial bump supported in
    the ball of radius 1/j, so |rho - rho_j| <= 1/j holds exactly at every
    point because the weights are positive and sum to one.
    """
    radius = 1.0 / j
    if 2.0 * radius >= domain.shell_thickness:
        raise ShellTooThin(f"1/j = {radius:g} does not fit in shell {domain.shell_thickness:g}")
    m = 2 * domain.n
    offsets, weights = _mollifier_nodes(m, radius, nodes, seed)

    def shifted(x):
        x = np.asarray(x, dtype=float)
        return x[..., None, :] - offsets

    def func(x):
        return np.sum(signed_distance(domain, to_complex(shifted(x))) * weights, axis=-1)

    def grad(x):
        ders = real_derivatives(domain, shifted(x), order=1)
        return np.einsum("...ia,i->...a", ders[1], weights)

    def hess(x):
        ders = real_derivatives(domain, shifted(x), order=2)
        return np.einsum("...iab,i->...ab", ders[2], weights)

    extent = domain.outer_radius + radius
    return DomainSpec.implicit(
        domain.n,
        func,
        extent=extent,
        shell_thickness=domain.shell_thickness - 2.0 * radius,
        grad=grad,
        hess=hess,
        center=domain.center,
        name=f"mollified[{domain.name}, j={j}]",
    )
