"""Pointwise and integral checks of the boundary identities.

Integral identities are evaluated on collar schemes at resolutions ``R``
and ``2R``.  The residual at ``R`` is compared with the two-resolution
quadrature estimate ``|res_R - res_2R|``; the observed convergence slope is
``log2(|res_R| / |res_2R|)``.

Adjoints of vector fields are always taken from the generic formula
``X* g = -sum d_k(conj(b_k) g) + sum conj(b_k) phi_k g`` (for
``X = sum b_k d/dzbar_k``), never from the closed forms being verified.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import BoundaryConditionViolated, NotClosed, UnsupportedSupport
from .forms import (
    Form,
    FormJet,
    WeightField,
    boundary_density,
    dbar_jets,
    dbar_star_jets,
    hessian_action_values,
    index_sets,
    nabla_bar_norm2,
    permutation_sign,
    wedge_values,
)
from .geometry import (
    AnnulusSpec,
    DomainSpec,
    cr_frame,
    jet,
    project,
    rho_taylor,
    shell_samples,
    signed_distance,
    Jet2,
)
from .jets import Jet
from .quadrature import ShellScheme, collar_width, torus_rule

FLOOR_REL = 1e-9

ANCHORS = {
    "rho_relations": "signed-distance relations",
    "adjoint_representation": "adjoint of Lbar_j",
    "adjoint_representation_alt": "adjoint of Lbar_j, alternative mu",
    "commutator_L_Lbar": "commutator sum [L_j, Lbar_j]",
    "N_tau": "normal derivative of tau",
    "N_tau_fd": "normal derivative of tau, finite differences",
    "Lbar_mu": "sum Lbar_j mu_j",
    "fundamental_commutator": "fundamental commutator",
    "fundamental_commutator_adjoint_form": "fundamental commutator via (tau Nbar)*",
    "tangential_decomposition": "sum rho_jbar Lbar_j* = tau",
    "int_by_parts": "integration by parts against the distance",
    "gradient_identity": "twisted gradient identity",
    "mkh": "Morrey-Kohn-Hormander identity",
    "pseudoconcave": "pseudoconcave identity",
    "pseudoconcave_without_eta": "pseudoconcave identity with the eta term removed",
    "pairing": "boundary pairing",
}


@dataclass
class ResidualReport:
    identity: str
    lhs: float
    rhs: float
    abs_residual: float
    rel_residual: float
    quadrature_estimate: float
    passed: bool
    n: int = 0
    p: int = 0
    q: int = 0
    domain: str = ""
    weight: str = ""
    resolution: int = 0
    slope: Optional[float] = None
    anchor: str = ""
    extra: dict = field(default_factory=dict)

    CSV_FIELDS = (
        "identity",
        "anchor",
        "n",
        "p",
        "q",
        "domain",
        "weight",
        "resolution",
        "lhs",
        "rhs",
        "abs_residual",
        "rel_residual",
        "estimate",
        "slope",
        "pass",
    )

    def row(self) -> dict:
        return {
            "identity": self.identity,
            "anchor": self.anchor or ANCHORS.get(self.identity, ""),
            "n": self.n,
            "p": self.p,
            "q": self.q,
            "domain": self.domain,
            "weight": self.weight,
            "resolution": self.resolution,
            "lhs": f"{self.lhs:.12e}",
            "rhs": f"{self.rhs:.12e}",
            "abs_residual": f"{self.abs_residual:.6e}",
            "rel_residual": f"{self.rel_residual:.6e}",
            "estimate": f"{self.quadrature_estimate:.6e}",
            "slope": "" if self.slope is None else f"{self.slope:.4f}",
            "pass": int(self.passed),
        }


def _pass_rule(lhs: float, rhs: float, estimate: float) -> tuple[float, float, bool]:
    res = abs(lhs - rhs)
    scale = abs(lhs) + abs(rhs)
    rel = res / scale if scale > 0 else 0.0
    return res, rel, res <= max(10.0 * estimate, FLOOR_REL * scale)


# ---------------------------------------------------------------------------
# vector fields on jets
# ---------------------------------------------------------------------------


def apply_field(a: Sequence[Optional[Jet]], b: Sequence[Optional[Jet]], f: Jet) -> Jet:
    """Apply ``sum a_k d/dz_k + b_k d/dzbar_k`` to a jet (consumes one degree)."""
    d = f.degree - 1
    out = None
    for k in range(f.n):
        for coef, df in ((a[k], f.dz(k)) if a is not None else (None, None), (b[k], f.dzb(k)) if b is not None else (None, None)):
            if coef is None:
                continue
            term = (coef.truncate(d) if isinstance(coef, Jet) else coef) * df
            out = term if out is None else out + term
    if out is None:
        return Jet.constant(f.n, d, 0.0, f.batch_shape)
    return out


def adjoint_apply(a, b, g: Jet, phi: Jet) -> Jet:
    """Formal adjoint in the e^{-phi} inner product of the field (a, b) applied to g."""
    n = g.n
    d = g.degree - 1
    dphi = [phi.truncate(d + 1).dz(k).truncate(d) for k in range(n)]
    dphib = [phi.truncate(d + 1).dzb(k).truncate(d) for k in range(n)]
    out = Jet.constant(n, d, 0.0, g.batch_shape)
    for k in range(n):
        if a is not None and a[k] is not None:
            ab = a[k].conj() if isinstance(a[k], Jet) else np.conj(a[k])
            prod = g * ab
            out = out - prod.dzb(k) + prod.truncate(d) * dphib[k]
        if b is not None and b[k] is not None:
            bb = b[k].conj() if isinstance(b[k], Jet) else np.conj(b[k])
            prod = g * bb
            out = out - prod.dz(k) + prod.truncate(d) * dphi[k]
    return out


@dataclass
class FrameFields:
    """Coefficient jets of N, Nbar, L_j and Lbar_j built from a distance jet."""

    rho: Jet

    def __post_init__(self) -> None:
        n = self.rho.n
        self.n = n
        self.r = [self.rho.dz(k) for k in range(n)]
        self.rb = [self.rho.dzb(k) for k in range(n)]

    def N(self):
        return [rb * 4.0 for rb in self.rb], None

    def Nbar(self):
        return None, [r * 4.0 for r in self.r]

    def L(self, j: int):
        a = []
        for k in range(self.n):
            c = self.r[j] * self.rb[k] * (-4.0)
            a.append(c + 1.0 if k == j else c)
        return a, None

    def Lbar(self, j: int):
        b = []
        for k in range(self.n):
            c = self.rb[j] * self.r[k] * (-4.0)
            b.append(c + 1.0 if k == j else c)
        return None, b

    def tau(self) -> Jet:
        """tau = sum_j Lbar_j rho_j as a jet (consumes two degrees of rho)."""
        out = None
        for j in range(self.n):
            a, b = self.Lbar(j)
            t = apply_field(a, b, self.r[j])
            out = t if out is None else out + t
        return out


# ---------------------------------------------------------------------------
# pointwise suites
# ---------------------------------------------------------------------------


def _mk_report(name, lhs_arr, rhs_arr, tol, domain, weight_name, n, extra=None) -> ResidualReport:
    lhs_arr = np.asarray(lhs_arr)
    rhs_arr = np.asarray(rhs_arr)
    diff = np.abs(lhs_arr - rhs_arr)
    if diff.ndim > 1:
        diff = diff.reshape(diff.shape[0], -1).max(axis=1)
    scale = np.maximum(1.0, np.maximum(np.abs(lhs_arr), np.abs(rhs_arr)))
    if scale.ndim > 1:
        scale = scale.reshape(scale.shape[0], -1).max(axis=1)
    rel = diff / scale
    worst = int(np.argmax(rel)) if rel.size else 0
    lw = np.ravel(lhs_arr.reshape(lhs_arr.shape[0], -1)[worst])[0] if lhs_arr.size else 0.0
    rw = np.ravel(rhs_arr.reshape(rhs_arr.shape[0], -1)[worst])[0] if rhs_arr.size else 0.0
    return ResidualReport(
        identity=name,
        lhs=float(np.abs(lw)),
        rhs=float(np.abs(rw)),
        abs_residual=float(diff.max()) if diff.size else 0.0,
        rel_residual=float(rel.max()) if rel.size else 0.0,
        quadrature_estimate=0.0,
        passed=bool(rel.max() <= tol) if rel.size else True,
        n=n,
        domain=domain.name,
        weight=weight_name,
        resolution=len(rel),
        anchor=ANCHORS.get(name, ""),
        extra=extra or {},
    )


def default_tolerance(domain: DomainSpec, analytic: float, fd: float) -> float:
    return analytic if domain.kind == "ball" else fd


def rho_relations(domain: DomainSpec, samples: int = 200, seed: int = 0, tol: float | None = None) -> list[ResidualReport]:
    """First-order relations of the signed distance at shell samples."""
    if tol is None:
        tol = default_tolerance(domain, 1e-7, 1e-4)
    z = shell_samples(domain, samples, seed)
    j = jet(domain, z, 2)
    fr = cr_frame(j, tol=1.0)
    n = domain.n
    r1, r1b = j.d, j.db
    reps = []
    one = np.ones(len(z))
    reps.append(_mk_report("grad_norm", j.gradient_norm(), one, tol, domain, "-", n))
    reps.append(_mk_report("rho_square_sum", np.sum(np.abs(r1) ** 2, axis=-1), 0.25 * one, tol, domain, "-", n))
    reps.append(_mk_report("N_rho", np.sum(fr.N_coeffs * r1, axis=-1), one, tol, domain, "-", n))
    reps.append(_mk_report("N_norm", np.sqrt(0.5 * np.sum(np.abs(fr.N_coeffs) ** 2, axis=-1)), math.sqrt(2.0) * one, tol, domain, "-", n))
    comb = np.einsum("...j,...jk->...k", r1b, fr.L_coeffs)
    reps.append(_mk_report("rho_bar_L", comb, np.zeros_like(comb), tol, domain, "-", n))
    diffrel = np.einsum("...l,...lj->...j", r1, np.conj(j.ddb)) + np.einsum("...lj,...l->...j", j.dd, r1b)
    reps.append(_mk_report("differentiated_relation", diffrel, np.zeros_like(diffrel), tol, domain, "-", n))
    for r in reps:
        r.identity = r.identity
        r.anchor = ANCHORS["rho_relations"]
    return reps


def default_test_function(n: int) -> Callable:
    """A fixed non-holomorphic polynomial used by the pointwise suite."""

    def v(zs, zbs):
        out = 1.0 + zs[0] * zbs[-1] * 0.7 + zbs[0] * zbs[0] * 0.3 - zs[-1] * zs[0] * zbs[0] * 0.2j
        if n > 1:
            out = out + zs[1] * zbs[1] * 0.5 + zbs[1] * (0.4 - 0.1j)
        return out

    return v


def verify_pointwise(domain: DomainSpec, weight: WeightField, samples: int | np.ndarray = 100, seed: int = 0, tol: float | None = None, test_function: Callable | None = None) -> list[ResidualReport]:
    """Frame identities at shell points, both sides evaluated independently."""
    if tol is None:
        tol = default_tolerance(domain, 1e-6, 1e-4)
    n = domain.n
    z = shell_samples(domain, samples, seed) if np.isscalar(samples) else np.asarray(samples)
    rho = rho_taylor(domain, z, 3)
    phi = weight.jet(z, 3)
    zs, zbs = Jet.coordinates(z, 2)
    v = (test_function or default_test_function(n))(zs, zbs)
    if not isinstance(v, Jet):
        v = Jet.constant(n, 2, v, z.shape[:-1])
    F = FrameFields(rho)
    j2 = Jet2.from_jet(rho.truncate(2), z)
    w2 = Jet2.from_jet(phi.truncate(2), z)
    fr = cr_frame(j2, w2, tol=1.0)
    tau = fr.tau
    nu = fr.nu
    reps = []
    wname = weight.name

    # adjoint representation: Lbar_j* v = (-L_j + mu_j) v
    lhs, rhs, rhs_alt = [], [], []
    v1 = v.truncate(1)
    for j in range(n):
        a, b = F.Lbar(j)
        lhs.append(adjoint_apply(a, b, v1, phi).value)
        aL, bL = F.L(j)
        Lv = apply_field(aL, bL, v1).value
        rhs.append(-Lv + fr.mu[..., j] * v.value)
        rhs_alt.append(-Lv + fr.mu_alt[..., j] * v.value)
    lhs = np.stack(lhs, -1)
    reps.append(_mk_report("adjoint_representation", lhs, np.stack(rhs, -1), tol, domain, wname, n))
    reps.append(_mk_report("adjoint_representation_alt", lhs, np.stack(rhs_alt, -1), tol, domain, wname, n))

    # sum [L_j, Lbar_j] v = tau (N - Nbar) v
    comm = 0.0
    for j in range(n):
        aL, bL = F.L(j)
        aB, bB = F.Lbar(j)
        comm = comm + apply_field(aL, bL, apply_field(aB, bB, v)).value - apply_field(aB, bB, apply_field(aL, bL, v)).value
    aN, _ = F.N()
    _, bNb = F.Nbar()
    Nv = apply_field(aN, None, v1).value
    Nbv = apply_field(None, bNb, v1).value
    reps.append(_mk_report("commutator_L_Lbar", comm, tau * (Nv - Nbv), tol, domain, wname, n))

    # N tau: closed form against the field applied to the tau jet and a finite difference
    tau_jet = F.tau()
    N_tau_field = apply_field(aN, None, tau_jet).value
    d3 = rho.tensor(3)
    r1, r1b = j2.d, j2.db
    # rho_{j jbar k}: indices (j, n+j, k)
    t_jjk = np.zeros(z.shape[:-1] + (n,), dtype=complex)
    for j in range(n):
        t_jjk = t_jjk + d3[..., j, n + j, :n]
    term1 = 4.0 * np.einsum("...k,...k->...", r1b, t_jjk)
    t_jlk = d3[..., :n, n:, :n]  # rho_{j lbar k}
    term2 = -16.0 * np.einsum("...k,...j,...l,...jlk->...", r1b, r1b, r1, t_jlk)
    N_tau_formula = term1 + term2
    reps.append(_mk_report("N_tau", N_tau_field, N_tau_formula, tol, domain, wname, n))
    if domain.kind in ("ball", "ellipsoid"):
        fd = _n_tau_fd(domain, z)
        reps.append(_mk_report("N_tau_fd", fd, N_tau_formula, max(tol, 1e-5), domain, wname, n))

    # sum Lbar_j mu_j = gamma + N tau + 4 eta^2 + 4 tau conj(nu)
    mu_jets = _mu_jets(F, phi)
    lbar_mu = 0.0
    for j in range(n):
        aB, bB = F.Lbar(j)
        lbar_mu = lbar_mu + apply_field(aB, bB, mu_jets[j]).value
    rhs_mu = fr.gamma + N_tau_formula + 4.0 * fr.eta_squared + 4.0 * tau * np.conj(nu)
    reps.append(_mk_report("Lbar_mu", lbar_mu, rhs_mu, tol, domain, wname, n))

    # fundamental commutator with generic adjoints
    fc = 0.0
    for j in range(n):
        aB, bB = F.Lbar(j)
        fc = fc + adjoint_apply(aB, bB, apply_field(aB, bB, v), phi).value - apply_field(aB, bB, adjoint_apply(aB, bB, v, phi)).value
    rhs_fc = -tau * (Nv - Nbv) - rhs_mu * v.value
    reps.append(_mk_report("fundamental_commutator", fc, rhs_fc, tol, domain, wname, n))
    tau2 = tau_jet  # degree 1 jet of tau
    bt = [c.truncate(1) * tau2 for c in bNb]
    adj_tnb = adjoint_apply(None, bt, v1, phi).value
    rhs_fc2 = adj_tnb + tau * Nbv - fr.gamma * v.value - 4.0 * fr.eta_squared * v.value
    reps.append(_mk_report("fundamental_commutator_adjoint_form", fc, rhs_fc2, tol, domain, wname, n))

    # sum rho_jbar Lbar_j* v = tau v
    td = 0.0
    for j in range(n):
        aB, bB = F.Lbar(j)
        td = td + r1b[..., j] * adjoint_apply(aB, bB, v1, phi).value
    reps.append(_mk_report("tangential_decomposition", td, tau * v.value, tol, domain, wname, n))
    return reps


def _mu_jets(F: FrameFields, phi: Jet) -> list[Jet]:
    """mu_j as jets of degree one, from the defining expression."""
    n = F.n
    r = [x.truncate(1) for x in F.r]
    rb = [x.truncate(1) for x in F.rb]
    rjk = [[F.r[j].dz(k) for k in range(n)] for j in range(n)]
    rkkb = [F.r[k].dzb(k) for k in range(n)]
    dphi = [phi.truncate(2).dz(k).truncate(1) for k in range(n)]
    dphib = [phi.truncate(2).dzb(k).truncate(1) for k in range(n)]
    nu = None
    for k in range(n):
        t = rkkb[k] - r[k] * dphib[k]
        nu = t if nu is None else nu + t
    out = []
    for j in range(n):
        m = dphi[j] + r[j] * nu.conj() * 4.0
        for k in range(n):
            m = m + rjk[j][k] * rb[k] * 4.0
        out.append(m)
    return out


def _n_tau_fd(domain: DomainSpec, z: np.ndarray, h: float = 1e-4) -> np.ndarray:
    """N tau by central differences of tau along the real direction of N.

    N = 4 sum rho_kbar d/dz_k acts on real functions as grad rho . grad + i J grad rho . grad;
    for real tau, N tau = (d/ds)tau along grad rho - i (d/ds) tau along J grad rho.
    """

    def tau_at(pts):
        return cr_frame(jet(domain, pts, 2), tol=1.0).tau

    _, _, nrm = project(domain, z)
    from .geometry import to_complex

    g = to_complex(nrm)  # grad rho as complex vector (x + i y)
    Jg = 1j * g
    d_n = (tau_at(z + h * g) - tau_at(z - h * g)) / (2 * h)
    d_j = (tau_at(z + h * Jg) - tau_at(z - h * Jg)) / (2 * h)
    return d_n - 1j * d_j


# ---------------------------------------------------------------------------
# test forms
# ---------------------------------------------------------------------------


def bump_derivatives(s: np.ndarray, order: int = 1) -> list[np.ndarray]:
    """exp(1 - 1/(1 - s^2)) on |s| < 1 with derivatives up to ``order`` (<= 2)."""
    s = np.asarray(s, dtype=float)
    inside = np.abs(s) < 1.0
    ss = np.where(inside, s, 0.0)
    den = 1.0 - ss**2
    b = np.where(inside, np.exp(1.0 - 1.0 / den), 0.0)
    g1 = -2.0 * ss / den**2
    out = [b, np.where(inside, b * g1, 0.0)]
    if order >= 2:
        g2 = -2.0 / den**2 - 8.0 * ss**2 / den**3
        out.append(np.where(inside, b * (g1**2 + g2), 0.0))
    return out[: order + 1]


@dataclass
class TestForm:
    """Bump-localized polynomial (p,q)-form near a boundary.

    ``coeffs`` maps ``(J, K)`` to ``(c0, a, b)`` for the affine polynomial
    ``c0 + a.z + b.zbar``.  The bump is a function of rho / support, so the
    form is supported in ``|rho| < support``.  ``bc`` is ``free``,
    ``dbar_neumann`` (normal contraction vanishes) or ``dirichlet``.
    """

    n: int
    p: int
    q: int
    support: float
    coeffs: dict
    bc: str = "free"
    side: str = "outside"
    name: str = "u"

    @classmethod
    def random(cls, n: int, p: int, q: int, support: float, rng: np.random.Generator, bc: str = "free", side: str = "outside", name: str = "u") -> "TestForm":
        coeffs = {}
        for J in index_sets(n, p):
            for K in index_sets(n, q):
                c0 = rng.normal() + 1j * rng.normal()
                a = rng.normal(size=n) + 1j * rng.normal(size=n)
                b = rng.normal(size=n) + 1j * rng.normal(size=n)
                coeffs[(J, K)] = (c0, 0.5 * a, 0.5 * b)
        return cls(n, p, q, support, coeffs, bc, side, name)

    @classmethod
    def zero(cls, n: int, p: int, q: int, support: float = 0.1, side: str = "outside") -> "TestForm":
        return cls(n, p, q, support, {}, "free", side, "0")

    def evaluate(self, z: np.ndarray, rho: Jet, degree: int = 1) -> FormJet:
        """Evaluate with a distance jet of degree ``degree + 1``."""
        n = self.n
        z = np.asarray(z, dtype=complex)
        batch = z.shape[:-1]
        zs, zbs = Jet.coordinates(z, degree)
        r = rho.truncate(degree)
        s = r * (1.0 / self.support)
        ders = bump_derivatives(s.value.real, degree)
        bump = s.compose(ders)
        if self.side == "outside":
            mask = s.value.real >= -1e-12
        else:
            mask = s.value.real <= 1e-12
        bump = Jet(bump.space, bump.c * mask)
        vals = {}
        for key, (c0, a, b) in self.coeffs.items():
            poly = Jet.constant(n, degree, c0, batch)
            for k in range(n):
                poly = poly + zs[k] * a[k] + zbs[k] * b[k]
            vals[key] = poly * bump
        u = FormJet(n, self.p, self.q, vals, degree, batch)
        if self.bc == "dbar_neumann":
            u = neumann_projection(u, rho, degree)
        elif self.bc == "dirichlet":
            u = FormJet(n, self.p, self.q, {k: c * r for k, c in u.coeffs.items()}, degree, batch)
        return u


def neumann_projection(w: FormJet, rho: Jet, degree: int) -> FormJet:
    """u = w - 4 dbar(rho) ^ (V contracted into w), V = sum rho_k d/dzbar_k.

    The contraction of V into u vanishes identically.  For top anti-holomorphic
    degree the projection is zero, so ``rho * w`` is returned instead; it
    satisfies the boundary condition through its trace.
    """
    n, p, q = w.n, w.p, w.q
    if q == 0:
        return w
    if q == n:
        r = rho.truncate(degree)
        return FormJet(n, p, q, {k: c * r for k, c in w.coeffs.items()}, degree, w.batch_shape)
    rk = [rho.dz(k).truncate(degree) for k in range(n)]
    rkb = [rho.dzb(k).truncate(degree) for k in range(n)]
    out = {}
    for J in index_sets(n, p):
        # contraction (up to the (-1)^p that cancels against the wedge)
        contr = {}
        for Kp in index_sets(n, q - 1):
            acc = None
            for k in range(n):
                c = w.get(J, (k,) + Kp)
                if c is None:
                    continue
                t = c * rk[k]
                acc = t if acc is None else acc + t
            if acc is not None:
                contr[Kp] = acc
        for K in index_sets(n, q):
            val = w.coeffs.get((J, K))
            acc = None
            for pos, k in enumerate(K):
                Kp = K[:pos] + K[pos + 1 :]
                c = contr.get(Kp)
                if c is None:
                    continue
                t = rkb[k] * c * ((-1) ** pos)
                acc = t if acc is None else acc + t
            if acc is not None:
                val = (-acc * 4.0) if val is None else val - acc * 4.0
            if val is not None:
                out[(J, K)] = val
    return FormJet(n, p, q, out, degree, w.batch_shape)


def normal_contraction(u: FormJet, r1: np.ndarray) -> float:
    """max |sum_k rho_k u_{J,kK'}| over the batch."""
    worst = 0.0
    for J in index_sets(u.n, u.p):
        for Kp in index_sets(u.n, u.q - 1):
            acc = 0.0
            for k in range(u.n):
                c = u.get(J, (k,) + Kp)
                if c is not None:
                    acc = acc + r1[..., k] * c.value
            worst = max(worst, float(np.max(np.abs(acc))) if np.ndim(acc) else abs(acc))
    return worst


# ---------------------------------------------------------------------------
# collar integration
# ---------------------------------------------------------------------------


@dataclass
class LocalGeometry:
    z: np.ndarray
    rho: Jet  # degree 2
    phi: Jet  # degree 2

    def __post_init__(self) -> None:
        self.j2 = Jet2.from_jet(self.rho, self.z)
        self.w2 = Jet2.from_jet(self.phi, self.z)
        fr = cr_frame(self.j2, self.w2, tol=1e-6)
        self.frame = fr
        self.r1 = self.j2.d
        self.r1b = self.j2.db
        self.tau = fr.tau
        self.eta2 = fr.eta_squared
        self.gamma = fr.gamma
        self.h_rho = self.j2.ddb
        self.h_phi = self.w2.ddb
        self.dphi = self.w2.d
        self.ephi = np.exp(-self.phi.value.real)
        self.rjk = self.j2.dd

    @property
    def n(self) -> int:
        return self.r1.shape[-1]

    def lbar(self, vd: np.ndarray, vdb: np.ndarray) -> np.ndarray:
        """Lbar_j v for all j, from the first derivatives of v."""
        nb = np.sum(self.r1 * vdb, axis=-1)
        return vdb - 4.0 * self.r1b * nb[..., None]

    def nbar(self, vdb: np.ndarray) -> np.ndarray:
        return 4.0 * np.sum(self.r1 * vdb, axis=-1)

    def lbar_adjoint(self, v: np.ndarray, vd: np.ndarray) -> np.ndarray:
        """Generic formal adjoint of Lbar_j applied to v, for all j.

        With conj(b_jk) = delta_jk - 4 rho_j rho_kbar:
        Lbar_j* v = sum_k [ -d_k(conj(b_jk)) v - conj(b_jk) d_k v + conj(b_jk) phi_k v ].
        """
        n = self.n
        B = np.eye(n) - 4.0 * self.r1[..., :, None] * self.r1b[..., None, :]
        # d_k conj(b_jk) = -4 (rho_jk rho_kbar + rho_j rho_{k kbar})
        dB = -4.0 * (self.rjk * self.r1b[..., None, :] + self.r1[..., :, None] * np.diagonal(self.h_rho, axis1=-2, axis2=-1)[..., None, :])
        t1 = -np.sum(dB, axis=-1) * v[..., None]
        t2 = -np.einsum("...jk,...k->...j", B, vd)
        t3 = np.einsum("...jk,...k->...j", B, self.dphi) * v[..., None]
        return t1 + t2 + t3


def _geometry_for(domain: DomainSpec, weight: WeightField, z: np.ndarray) -> LocalGeometry:
    return LocalGeometry(z, rho_taylor(domain, z, 2), weight.jet(z, 2))


TermFn = Callable[[LocalGeometry, FormJet], dict]


def _integrate(scheme: ShellScheme, domain: DomainSpec, weight: WeightField, forms: Sequence[TestForm], volume_terms: TermFn, boundary_terms: TermFn | None, chunk: int = 40_000) -> list[dict]:
    """Integrals of named densities for each form (volume plus boundary)."""
    acc = [dict() for _ in forms]

    def add(i, name, value):
        acc[i].setdefault(name, []).append(float(value))

    for ch in scheme.shell_chunks(chunk):
        geo = _geometry_for(domain, weight, ch.points)
        wts = ch.weights * geo.ephi
        for i, tf in enumerate(forms):
            u = tf.evaluate(ch.points, geo.rho, 1)
            for name, dens in volume_terms(geo, u).items():
                add(i, name, np.sum(np.real(dens) * wts))
    if boundary_terms is not None:
        b = scheme.boundary
        for s in range(0, len(b), chunk):
            pts = b.points[s : s + chunk]
            geo = _geometry_for(domain, weight, pts)
            wts = b.weights[s : s + chunk] * geo.ephi
            for i, tf in enumerate(forms):
                u = tf.evaluate(pts, geo.rho, 1)
                for name, dens in boundary_terms(geo, u).items():
                    add(i, name, np.sum(np.real(dens) * wts))
    return [{k: math.fsum(v) for k, v in a.items()} for a in acc]


def _coeff_arrays(u: FormJet):
    for key, c in u.coeffs.items():
        d, db = c.first()
        yield key, c.value, d, db


def _terms_int_by_parts(geo: LocalGeometry, u: FormJet) -> dict:
    out = {k: 0.0 for k in ("lbar", "adj", "tau2", "cross", "gamma_eta")}
    for _, v, vd, vdb in _coeff_arrays(u):
        lb = geo.lbar(vd, vdb)
        adj = geo.lbar_adjoint(v, vd) - 4.0 * geo.r1 * (geo.tau * v)[..., None]
        out["lbar"] = out["lbar"] + np.sum(np.abs(lb) ** 2, axis=-1)
        out["adj"] = out["adj"] + np.sum(np.abs(adj) ** 2, axis=-1)
        out["tau2"] = out["tau2"] + 4.0 * geo.tau**2 * np.abs(v) ** 2
        out["cross"] = out["cross"] + 2.0 * np.real(geo.tau * v * np.conj(geo.nbar(vdb)))
        out["gamma_eta"] = out["gamma_eta"] + (geo.gamma + 4.0 * geo.eta2) * np.abs(v) ** 2
    return out


def _terms_boundary_tau(geo: LocalGeometry, u: FormJet) -> dict:
    return {"b_tau": geo.tau * u.pointwise_norm2()}


def _terms_gradient(geo: LocalGeometry, u: FormJet) -> dict:
    out = {k: 0.0 for k in ("grad", "gamma", "eta", "adj", "normal")}
    for _, v, vd, vdb in _coeff_arrays(u):
        adj = geo.lbar_adjoint(v, vd) - 4.0 * geo.r1 * (geo.tau * v)[..., None]
        out["grad"] = out["grad"] + np.sum(np.abs(vdb) ** 2, axis=-1)
        out["gamma"] = out["gamma"] + geo.gamma * np.abs(v) ** 2
        out["eta"] = out["eta"] + 4.0 * geo.eta2 * np.abs(v) ** 2
        out["adj"] = out["adj"] + np.sum(np.abs(adj) ** 2, axis=-1)
        out["normal"] = out["normal"] + 0.25 * np.abs(geo.nbar(vdb) + 4.0 * geo.tau * v) ** 2
    return out


def _dbar_terms(geo: LocalGeometry, u: FormJet) -> dict:
    out = {}
    if u.q < u.n:
        out["dbar"] = dbar_jets(u).pointwise_norm2()
    else:
        out["dbar"] = np.zeros(u.batch_shape)
    if u.q >= 1:
        out["dbar_star"] = dbar_star_jets(u, geo.phi.truncate(1)).pointwise_norm2()
    else:
        out["dbar_star"] = np.zeros(u.batch_shape)
    return out


def _terms_mkh(geo: LocalGeometry, u: FormJet) -> dict:
    out = _dbar_terms(geo, u)
    out["h_phi"] = hessian_action_values(geo.h_phi, u)
    out["grad"] = nabla_bar_norm2(u)
    return out


def _terms_mkh_boundary(geo: LocalGeometry, u: FormJet) -> dict:
    return {"b_h_rho": hessian_action_values(geo.h_rho, u)}


def _terms_pseudoconcave(geo: LocalGeometry, u: FormJet) -> dict:
    out = _dbar_terms(geo, u)
    g = _terms_gradient(geo, u)
    norm2 = u.pointwise_norm2()
    out["h_phi_gamma"] = hessian_action_values(geo.h_phi, u) - geo.gamma * norm2
    out["eta"] = g["eta"]
    out["normal"] = g["normal"]
    out["adj"] = g["adj"]
    return out


def _terms_pseudoconcave_boundary(geo: LocalGeometry, u: FormJet) -> dict:
    return {"b_h_rho_tau": hessian_action_values(geo.h_rho, u) - geo.tau * u.pointwise_norm2()}


@dataclass
class IdentitySpec:
    name: str
    side: str
    volume: TermFn
    boundary: Optional[TermFn]
    combine: Callable[[dict], tuple[float, float]]


def _combine_int_by_parts(t: dict) -> tuple[float, float]:
    lhs = t.get("lbar", 0.0)
    rhs = t.get("adj", 0.0) + t.get("tau2", 0.0) + t.get("b_tau", 0.0) + t.get("cross", 0.0) - t.get("gamma_eta", 0.0)
    return lhs, rhs


def _combine_gradient(t: dict) -> tuple[float, float]:
    lhs = t.get("grad", 0.0)
    rhs = t.get("b_tau", 0.0) - t.get("gamma", 0.0) - t.get("eta", 0.0) + t.get("adj", 0.0) + t.get("normal", 0.0)
    return lhs, rhs


def _combine_mkh(t: dict) -> tuple[float, float]:
    lhs = t.get("dbar", 0.0) + t.get("dbar_star", 0.0)
    rhs = t.get("b_h_rho", 0.0) + t.get("h_phi", 0.0) + t.get("grad", 0.0)
    return lhs, rhs


def _combine_pseudoconcave(t: dict, with_eta: bool = True) -> tuple[float, float]:
    lhs = t.get("dbar", 0.0) + t.get("dbar_star", 0.0)
    rhs = -t.get("b_h_rho_tau", 0.0) + t.get("h_phi_gamma", 0.0) + t.get("normal", 0.0) + t.get("adj", 0.0)
    if with_eta:
        rhs -= t.get("eta", 0.0)
    return lhs, rhs


def _boundary_terms_union(*fns):
    def f(geo, u):
        out = {}
        for fn in fns:
            out.update(fn(geo, u))
        return out

    return f


IDENTITIES = {
    "int_by_parts": IdentitySpec("int_by_parts", "outside", _terms_int_by_parts, _terms_boundary_tau, _combine_int_by_parts),
    "gradient_identity": IdentitySpec("gradient_identity", "outside", _terms_gradient, _terms_boundary_tau, _combine_gradient),
    "mkh": IdentitySpec("mkh", "inside", _terms_mkh, _terms_mkh_boundary, _combine_mkh),
    "pseudoconcave": IdentitySpec("pseudoconcave", "outside", _terms_pseudoconcave, _terms_pseudoconcave_boundary, _combine_pseudoconcave),
}


def default_torus(n: int) -> np.ndarray:
    return torus_rule(n, 8) if n == 2 else torus_rule(n, 67, "lattice")


def _scheme(domain: DomainSpec, side: str, support: float, resolution: int, moduli: int | None = None) -> ShellScheme:
    width = collar_width(domain, side, support)
    if moduli is None:
        moduli = 16 if domain.n == 2 else 12
    return ShellScheme(domain, side, width, resolution, moduli, default_torus(domain.n))


def _check_forms(domain: DomainSpec, forms: Sequence[TestForm], side: str) -> None:
    for f in forms:
        if f.n != domain.n:
            raise UnsupportedSupport("test form lives in a different dimension")
        if f.side != side:
            raise UnsupportedSupport(f"test form is supported on the {f.side} of the boundary, identity needs {side}")
        if f.support >= domain.shell_thickness:
            raise UnsupportedSupport("test form support exceeds the shell on which rho is smooth")


def _check_bc(domain: DomainSpec, weight: WeightField, forms: Sequence[TestForm], tol: float = 1e-9) -> None:
    sch = _scheme(domain, forms[0].side, forms[0].support, 2, moduli=4)
    b = sch.boundary
    rho = rho_taylor(domain, b.points, 2)
    r1, _ = rho.first()
    for f in forms:
        if f.q == 0:
            continue
        u = f.evaluate(b.points, rho, 1)
        scale = 1.0 + max((float(np.max(np.abs(c.value))) for c in u.coeffs.values()), default=0.0)
        if normal_contraction(u, r1) > tol * scale:
            raise BoundaryConditionViolated(f"normal contraction of {f.name} does not vanish on the boundary")


def run_identity(name: str, domain: DomainSpec, weight: WeightField, forms: Sequence[TestForm], resolution: int, drop_eta: bool = False, moduli: int | None = None) -> list[ResidualReport]:
    """Evaluate one integral identity for a batch of test forms at R and 2R."""
    spec = IDENTITIES[name]
    forms = list(forms)
    if not forms:
        return []
    _check_forms(domain, forms, spec.side)
    if name in ("mkh", "pseudoconcave"):
        _check_bc(domain, weight, forms)
    support = max(f.support for f in forms)
    results = []
    for R in (resolution, 2 * resolution):
        sch = _scheme(domain, spec.side, support, R, moduli)
        results.append(_integrate(sch, domain, weight, forms, spec.volume, spec.boundary))
    reports = []
    for i, f in enumerate(forms):
        sides = []
        for res in results:
            if name == "pseudoconcave":
                sides.append(_combine_pseudoconcave(res[i], not drop_eta))
            else:
                sides.append(spec.combine(res[i]))
        (l1, r1), (l2, r2) = sides
        d1, d2 = l1 - r1, l2 - r2
        est = abs(d1 - d2)
        absr, rel, ok = _pass_rule(l1, r1, est)
        slope = math.log2(abs(d1) / abs(d2)) if d1 != 0 and d2 != 0 else None
        ident = name + ("_without_eta" if drop_eta else "")
        reports.append(
            ResidualReport(
                identity=ident,
                lhs=l1,
                rhs=r1,
                abs_residual=absr,
                rel_residual=rel,
                quadrature_estimate=est,
                passed=ok,
                n=f.n,
                p=f.p,
                q=f.q,
                domain=domain.name,
                weight=weight.name,
                resolution=resolution,
                slope=slope,
                anchor=ANCHORS.get(ident, ""),
                extra={"terms": results[0][i], "form": f.name},
            )
        )
    return reports


def _single(res):
    return res[0] if len(res) == 1 else res


def verify_int_by_parts(domain: DomainSpec, weight: WeightField, v, resolution: int = 48):
    """Integration-by-parts identity for functions supported in the outer collar."""
    forms = [v] if isinstance(v, TestForm) else list(v)
    for f in forms:
        if f.p != 0 or f.q != 0:
            raise UnsupportedSupport("the integration-by-parts identity takes functions")
    return _single(run_identity("int_by_parts", domain, weight, forms, resolution))


def verify_gradient_identity(domain: DomainSpec, weight: WeightField, u, resolution: int = 48):
    forms = [u] if isinstance(u, TestForm) else list(u)
    return _single(run_identity("gradient_identity", domain, weight, forms, resolution))


def verify_mkh(domain: DomainSpec, weight: WeightField, u, resolution: int = 48):
    """Morrey-Kohn-Hormander identity on the interior collar of ``domain``."""
    forms = [u] if isinstance(u, TestForm) else list(u)
    return _single(run_identity("mkh", domain, weight, forms, resolution))


def verify_pseudoconcave(region, weight: WeightField, u, resolution: int = 48, drop_eta: bool = False):
    """Pseudoconcave identity in the collar outside the hole of an annulus."""
    hole = region.hole if isinstance(region, AnnulusSpec) else region
    forms = [u] if isinstance(u, TestForm) else list(u)
    return _single(run_identity("pseudoconcave", hole, weight, forms, resolution, drop_eta=drop_eta))


# ---------------------------------------------------------------------------
# boundary pairing
# ---------------------------------------------------------------------------


def martinelli_form(n: int, center=None, numerator: Callable | None = None) -> Form:
    """Closed (0,n-1)-form  P(z) sum_k (-1)^k conj(w_k) dzbar^{[k]} / |w|^{2n},  w = z - center."""
    c = np.zeros(n, dtype=complex) if center is None else np.asarray(center, dtype=complex)

    def make(k):
        def f(zs, zbs):
            w = [zs[j] - c[j] for j in range(n)]
            wb = [zbs[j] - np.conj(c[j]) for j in range(n)]
            r2 = w[0] * wb[0]
            for j in range(1, n):
                r2 = r2 + w[j] * wb[j]
            val = wb[k] * ((-1) ** k) / r2**n
            if numerator is not None:
                val = val * numerator(zs, zbs)
            return val

        return f

    fields = {((), tuple(j for j in range(n) if j != k)): make(k) for k in range(n)}
    return Form.from_fields(n, 0, n - 1, fields, "martinelli")


def verify_pairing(annulus: AnnulusSpec, g: Form, f: Form, cutoff=None, resolution: int = 32, moduli: int = 16, closed_tol: float = 1e-8) -> ResidualReport:
    """int_Omega g ^ dbar(chi f) against (-1)^deg(g) int_{b hole} g ^ f.

    ``g`` and ``f`` are dbar-closed near the hole and of complementary
    degree.  ``chi`` is the cutoff from :func:`dbarlab.constants.build_cutoff`;
    the hole boundary is oriented as part of the boundary of the annulus.
    """
    from .constants import build_cutoff

    hole = annulus.hole
    n = annulus.n
    if cutoff is None:
        cutoff = build_cutoff(annulus, 0.25 * hole.shell_thickness, 0.75 * hole.shell_thickness)
    torus = torus_rule(n, 12 if n == 2 else 8)
    # closedness of g on collar samples
    zs_check = shell_samples(hole, 64, seed=3, side="outside")
    if g.q + 1 <= n:
        from .forms import dbar as _dbar

        dg = _dbar(g).evaluate(zs_check, 0).values()
        gv = g.evaluate(zs_check, 0).values()
        scale = max((float(np.max(np.abs(v))) for v in gv.values()), default=0.0)
        worst = max((float(np.max(np.abs(v))) for v in dg.values()), default=0.0)
        if worst > closed_tol * max(1.0, scale):
            raise NotClosed(f"dbar g is {worst:.3e} on collar samples")

    width = collar_width(hole, "outside", cutoff.outer)

    def sides(R):
        # the collar covers the whole layer where dbar chi is supported
        sch = ShellScheme(hole, "outside", width, R, moduli, torus)
        vol = []
        for ch in sch.shell_chunks(40_000):
            pts, wts = ch.points, ch.weights
            gv = g.evaluate(pts, 0).values()
            fv = f.evaluate(pts, 0).values()
            dchi = cutoff.dbar(pts)  # (..., n) coefficients of dzbar_k
            ef = {}
            for (J, K), val in fv.items():
                for k in range(n):
                    s, Ks = permutation_sign((k,) + K)
                    if s == 0:
                        continue
                    # dbar(chi f) = sum_k dchi_k dzbar_k ^ f  with the (-1)^p of f
                    sign = s * (-1) ** len(J)
                    ef[(J, Ks)] = ef.get((J, Ks), 0.0) + sign * dchi[..., k] * val
            top = wedge_values(gv, ef, n, g.p, g.q, f.p, f.q + 1)
            key = (tuple(range(n)), tuple(range(n)))
            from .forms import top_factor

            dens = top.get(key, 0.0) * top_factor(*key, n)
            vol.append(np.sum(dens * wts))
        lhs = complex(math.fsum(np.real(vol)), math.fsum(np.imag(vol)))
        return lhs

    b = ShellScheme(hole, "outside", 1.0, 1, moduli, torus).boundary
    gv = g.evaluate(b.points, 0).values()
    fv = f.evaluate(b.points, 0).values()
    gf = wedge_values(gv, fv, n, g.p, g.q, f.p, f.q)
    dens = boundary_density(gf, n, b.normals)
    rhs = (-1) ** (g.p + g.q) * complex(np.sum(dens * b.weights))
    l1 = sides(resolution)
    l2 = sides(2 * resolution)
    est = abs(l1 - l2)
    res = abs(l1 - rhs)
    scale = abs(l1) + abs(rhs)
    ok = res <= max(10.0 * est, FLOOR_REL * scale, 1e-14)
    slope = math.log2(abs(l1 - rhs) / abs(l2 - rhs)) if abs(l2 - rhs) > 0 and abs(l1 - rhs) > 0 else None
    return ResidualReport(
        identity="pairing",
        lhs=float(abs(l1)),
        rhs=float(abs(rhs)),
        abs_residual=res,
        rel_residual=res / scale if scale > 0 else 0.0,
        quadrature_estimate=est,
        passed=bool(ok),
        n=n,
        p=g.p,
        q=g.q,
        domain=f"{annulus.envelope.name}\\{hole.name}",
        weight="-",
        resolution=resolution,
        slope=slope,
        anchor=ANCHORS["pairing"],
        extra={"lhs_complex": l1, "rhs_complex": rhs},
    )
