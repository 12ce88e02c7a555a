"""Cutoff construction and the explicit closed-range constants.

The mixed-problem constant depends on three geometric numbers: ``A`` (the
sup of the cutoff gradient), ``B`` (the sup of ``4 eta^2`` on the hole collar)
and ``delta`` (the diameter of the annulus).  The weight ``t|z|^2`` is chosen
to minimize

    2 exp(t delta^2) / (sqrt(t (q-1) - B) - 2A)

which has the closed-form minimizer returned by :func:`constant_mixed`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import MarginOrder, MissingInputs, QTooSmall
from .geometry import AnnulusSpec, DomainSpec, cr_frame, jet, rho_taylor, shell_samples, signed_distance

SMOOTHSTEP_MAX_SLOPE = 15.0 / 8.0


def smoothstep(x: np.ndarray) -> np.ndarray:
    """Quintic smoothstep ``6x^5 - 15x^4 + 10x^3`` clamped to [0, 1]."""
    x = np.clip(x, 0.0, 1.0)
    return x**3 * (x * (6.0 * x - 15.0) + 10.0)


def smoothstep_slope(x: np.ndarray) -> np.ndarray:
    x = np.clip(x, 0.0, 1.0)
    return 30.0 * x**2 * (x - 1.0) ** 2


@dataclass(frozen=True)
class Cutoff:
    """``chi = S((outer - rho_hole) / (outer - inner))``.

    Equal to one on ``rho_hole <= inner`` (including the hole) and zero on
    ``rho_hole >= outer``.
    """

    hole: DomainSpec
    inner: float
    outer: float

    @property
    def width(self) -> float:
        return self.outer - self.inner

    @property
    def A(self) -> float:
        return SMOOTHSTEP_MAX_SLOPE / self.width

    def _arg(self, rho: np.ndarray) -> np.ndarray:
        return (self.outer - rho) / self.width

    def __call__(self, z: np.ndarray) -> np.ndarray:
        return smoothstep(self._arg(signed_distance(self.hole, z)))

    def _transition(self, z: np.ndarray):
        z = np.asarray(z, dtype=complex)
        rho = np.atleast_1d(signed_distance(self.hole, z))
        zz = z.reshape(-1, z.shape[-1])
        active = (rho > self.inner) & (rho < self.outer)
        return zz, rho.ravel(), active.ravel()

    def dbar(self, z: np.ndarray) -> np.ndarray:
        """Coefficients of ``dzbar_k`` in ``dbar chi``, shape (..., n)."""
        z = np.asarray(z, dtype=complex)
        zz, rho, active = self._transition(z)
        out = np.zeros(zz.shape, dtype=complex)
        if np.any(active):
            j = rho_taylor(self.hole, zz[active], 1)
            _, db = j.first()
            out[active] = -smoothstep_slope(self._arg(rho[active]))[:, None] / self.width * db
        return out.reshape(z.shape)

    def gradient_norm(self, z: np.ndarray) -> np.ndarray:
        """Euclidean length of the real gradient (|d rho| = 1 in the collar)."""
        z = np.asarray(z, dtype=complex)
        zz, rho, active = self._transition(z)
        out = np.zeros(len(zz))
        out[active] = smoothstep_slope(self._arg(rho[active])) / self.width
        return out.reshape(z.shape[:-1])


def build_cutoff(annulus: AnnulusSpec, inner_margin: float, outer_margin: float) -> Cutoff:
    """Cutoff around the hole with transition layer ``inner < rho_hole < outer``."""
    hole = annulus.hole
    if not 0.0 < inner_margin < outer_margin < hole.shell_thickness:
        raise MarginOrder(
            f"need 0 < inner_margin < outer_margin < shell_thickness, got "
            f"{inner_margin}, {outer_margin}, {hole.shell_thickness}"
        )
    if outer_margin >= annulus.gap:
        raise MarginOrder("outer_margin must be smaller than the gap between the boundaries")
    return Cutoff(hole, float(inner_margin), float(outer_margin))


@dataclass(frozen=True)
class BEstimate:
    raw: float
    inflated: float
    samples: int

    def __float__(self) -> float:
        return self.inflated


def estimate_B(annulus: AnnulusSpec | DomainSpec, samples: int = 4000, seed: int = 0, inflation: float = 0.1, width: float | None = None) -> BEstimate:
    """sup of ``4 eta^2`` over shell samples outside the hole."""
    hole = annulus.hole if isinstance(annulus, AnnulusSpec) else annulus
    if hole.kind == "ball":
        return BEstimate(0.0, 0.0, 0)
    fraction = 1.0 if width is None else min(1.0, width / hole.shell_thickness)
    z = shell_samples(hole, samples, seed=seed, side="outside", fraction=fraction)
    eta2 = cr_frame(jet(hole, z, 2), tol=1e-6).eta_squared
    raw = float(4.0 * np.max(eta2))
    return BEstimate(raw, (1.0 + inflation) * raw, samples)


def mixed_objective(t, A: float, B: float, delta: float, q: int):
    """``2 exp(t delta^2) / (sqrt(t (q-1) - B) - 2A)``; infinite where undefined."""
    t = np.asarray(t, dtype=float)
    s = np.sqrt(np.maximum(t * (q - 1) - B, 0.0))
    den = s - 2.0 * A
    with np.errstate(over="ignore", divide="ignore"):
        return np.where(den > 0, 2.0 * np.exp(t * delta**2) / np.where(den > 0, den, 1.0), np.inf)


def constant_mixed(A: float, B: float, delta: float, q: int, log: bool = False) -> tuple[float, float]:
    """Optimal weight parameter and the mixed-problem constant.

    With ``s = A + sqrt(A^2 + (q-1)/(2 delta^2))`` the optimum is
    ``t = (s^2 + B)/(q-1)`` and ``C = 2 exp(t delta^2) / (s - 2A)``.  With
    ``log=True`` the natural log of ``C`` is returned, which stays finite when
    ``C`` overflows.
    """
    if q <= 1:
        raise QTooSmall("the mixed problem has no closed-range constant for q <= 1")
    root = math.sqrt(A * A + (q - 1) / (2.0 * delta * delta))
    t_opt = ((A + root) ** 2 + B) / (q - 1)
    log_c = math.log(2.0) - math.log(root - A) + delta * delta * t_opt
    if log:
        return t_opt, log_c
    return t_opt, math.exp(log_c) if log_c < 700 else math.inf


def constant_hormander(domain: DomainSpec | float, q: int) -> float:
    """``sqrt(e/q) * delta`` for a domain of diameter ``delta``."""
    if q < 1:
        raise QTooSmall("q must be at least 1")
    delta = domain if isinstance(domain, (int, float)) else domain.diameter
    return math.sqrt(math.e / q) * delta


def constant_annulus_l2(annulus: AnnulusSpec | float, q: int, K: Optional[float], E: Optional[float], C_w1: Optional[float]) -> float:
    """``sqrt(e/q) delta + E C_W1 K``, conditional on the supplied K, E and C_W1."""
    missing = [name for name, v in (("K", K), ("E", E), ("C_w1", C_w1)) if v is None]
    if missing:
        raise MissingInputs("missing inputs: " + ", ".join(missing))
    delta = annulus if isinstance(annulus, (int, float)) else annulus.envelope.diameter
    return constant_hormander(delta, q) + E * C_w1 * K


@dataclass
class ConstantsBundle:
    A: float
    B: float
    B_raw: float
    delta: float
    t_opt: dict = field(default_factory=dict)
    C_mix: dict = field(default_factory=dict)
    log_C_mix: dict = field(default_factory=dict)
    C_hormander: dict = field(default_factory=dict)
    C_annulus: dict = field(default_factory=dict)
    K: Optional[float] = None
    E: Optional[float] = None
    C_w1: Optional[float] = None

    def rows(self) -> list[dict]:
        out = []
        for name, anchor, table in (
            ("t_opt", "optimal weight parameter", self.t_opt),
            ("C_mix", "mixed closed-range constant", self.C_mix),
            ("log_C_mix", "log of the mixed closed-range constant", self.log_C_mix),
            ("C_hormander", "q-convex solvability constant", self.C_hormander),
            ("C_annulus", "annulus closed-range constant (conditional on K, E)", self.C_annulus),
        ):
            for q, v in sorted(table.items()):
                out.append({"quantity": name, "q": q, "value": f"{v:.12e}", "anchor": anchor})
        for name, v, anchor in (
            ("A", self.A, "sup of the cutoff gradient"),
            ("B", self.B, "sup of 4 eta^2 on the hole collar, inflated"),
            ("B_raw", self.B_raw, "sup of 4 eta^2 on the hole collar"),
            ("delta", self.delta, "diameter of the annulus"),
        ):
            out.append({"quantity": name, "q": "", "value": f"{v:.12e}", "anchor": anchor})
        return out


def compute_constants(annulus: AnnulusSpec, inner_margin: float, outer_margin: float, qs=None, samples: int = 4000, seed: int = 0, K=None, E=None, C_w1=None) -> ConstantsBundle:
    cut = build_cutoff(annulus, inner_margin, outer_margin)
    b = estimate_B(annulus, samples, seed, width=outer_margin)
    delta = annulus.envelope.diameter
    n = annulus.n
    qs = list(range(1, n + 1)) if qs is None else list(qs)
    bundle = ConstantsBundle(cut.A, b.inflated, b.raw, delta, K=K, E=E, C_w1=C_w1)
    for q in qs:
        bundle.C_hormander[q] = constant_hormander(delta, q)
        if q >= 2:
            t, logc = constant_mixed(cut.A, b.inflated, delta, q, log=True)
            bundle.t_opt[q] = t
            bundle.log_C_mix[q] = logc
            bundle.C_mix[q] = math.exp(logc) if logc < 700 else math.inf
        if None not in (K, E, C_w1):
            bundle.C_annulus[q] = constant_annulus_l2(delta, q, K, E, C_w1)
    return bundle
