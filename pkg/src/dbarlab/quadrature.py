"""Quadrature on domains, annuli and boundary shells.

Two families of schemes are provided:

* :func:`quadrature` builds tensor-cell volume rules with one level of
  subdivision at the boundary, plus parametric boundary rules.
* :class:`ShellScheme` integrates over a collar on one side of a
  star-shaped boundary in the coordinates ``z = c + r omega`` with
  ``r = r_b(omega) +/- width * xi``.  The normal coordinate ``xi`` uses the
  midpoint rule (the resolution), the sphere uses Gauss-Legendre nodes for
  the moduli angles and an equal-weight rule on the torus.
"""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterator, Optional

import numpy as np

from .geometry import (
    AnnulusSpec,
    DomainSpec,
    _implicit_grad,
    jet,
    project,
    radial_boundary,
    signed_distance,
    to_complex,
    to_real,
)


@dataclass
class NodeSet:
    """Points with weights, optional outward normals (real coordinates)."""

    points: np.ndarray
    weights: np.ndarray
    normals: Optional[np.ndarray] = None
    rho: Optional[np.ndarray] = None
    domain: Optional[DomainSpec] = None

    def __len__(self) -> int:
        return len(self.weights)

    def chunks(self, size: int = 50_000) -> Iterator[tuple]:
        for s in range(0, len(self.weights), size):
            nrm = None if self.normals is None else self.normals[s : s + size]
            yield self.points[s : s + size], self.weights[s : s + size], nrm

    def total(self) -> float:
        return pairwise_sum(self.weights)

    def jets(self, order: int = 2):
        """Jet2 of the signed distance at every node (boundary sets only)."""
        if self.domain is None:
            raise ValueError("node set is not attached to a domain")
        return jet(self.domain, self.points, order)


@dataclass
class QuadratureScheme:
    volume: NodeSet
    boundary: list = field(default_factory=list)

    def to_csv(self, path, part: str = "volume") -> None:
        """Columns x_1..x_2n, weight, rho and (boundary) the unit normal."""
        sets = [self.volume] if part == "volume" else self.boundary
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            rows_written = False
            for ns in sets:
                x = to_real(ns.points)
                m = x.shape[-1]
                if not rows_written:
                    head = [f"x_{i + 1}" for i in range(m)] + ["weight", "rho"]
                    if part != "volume":
                        head += [f"nu_{i + 1}" for i in range(m)]
                    w.writerow(head)
                    rows_written = True
                rho = ns.rho if ns.rho is not None else np.zeros(len(ns))
                for i in range(len(ns)):
                    row = [f"{v:.17g}" for v in x[i]] + [f"{ns.weights[i]:.17g}", f"{rho[i]:.17g}"]
                    if part != "volume":
                        row += [f"{v:.17g}" for v in ns.normals[i]]
                    w.writerow(row)


def pairwise_sum(values) -> float:
    """Deterministic sum (numpy pairwise summation on a contiguous copy)."""
    return float(np.sum(np.ascontiguousarray(values)))


# ---------------------------------------------------------------------------
# sphere rules
# ---------------------------------------------------------------------------


def gauss_interval(m: int, a: float, b: float) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(m)
    return 0.5 * (b - a) * x + 0.5 * (a + b), 0.5 * (b - a) * w


def midpoint_interval(m: int, a: float, b: float) -> tuple[np.ndarray, np.ndarray]:
    h = (b - a) / m
    return a + (np.arange(m) + 0.5) * h, np.full(m, h)


def moduli_rule(n: int, m: int, kind: str = "gauss") -> tuple[np.ndarray, np.ndarray]:
    """Nodes on the positive orthant of S^{n-1} weighted by m_1 ... m_n dS."""
    rule = gauss_interval if kind == "gauss" else midpoint_interval
    if n == 1:
        return np.ones((1, 1)), np.ones(1)
    if n == 2:
        a, wa = rule(m, 0.0, math.pi / 2)
        pts = np.stack([np.cos(a), np.sin(a)], axis=1)
        return pts, wa * np.cos(a) * np.sin(a)
    if n == 3:
        a, wa = rule(m, 0.0, math.pi / 2)
        b, wb = rule(m, 0.0, math.pi / 2)
        A, B = np.meshgrid(a, b, indexing="ij")
        W = np.outer(wa, wb)
        pts = np.stack([np.cos(A), np.sin(A) * np.cos(B), np.sin(A) * np.sin(B)], axis=-1).reshape(-1, 3)
        dens = (np.sin(A) ** 2) * np.cos(A) * np.sin(A) * np.cos(B) * np.sin(B)
        return pts, (W * dens).ravel()
    raise ValueError("moduli rules are provided for n <= 3")


@lru_cache(maxsize=None)
def lattice_generator(n: int, npts: int) -> tuple[tuple, int]:
    """Korobov vector (1, a, a^2, ...) maximizing the exactness degree.

    Returns the generator and the smallest l1-norm of a nonzero dual
    lattice vector; the rule integrates every trigonometric monomial of
    total degree below that number exactly.
    """
    best, best_deg = (1,) * n, 0
    for a in range(1, npts):
        g = tuple(pow(a, k, npts) for k in range(n))
        deg = _dual_degree(g, npts, cap=64)
        if deg > best_deg:
            best, best_deg = g, deg
    return best, best_deg


def _dual_degree(g: tuple, npts: int, cap: int) -> int:
    n = len(g)
    for d in range(1, cap):
        for k in _vectors_of_l1(n, d):
            if sum(ki * gi for ki, gi in zip(k, g)) % npts == 0:
                return d
    return cap


@lru_cache(maxsize=None)
def _vectors_of_l1_cached(n: int, d: int) -> tuple:
    out = []
    for parts in itertools.product(range(-d, d + 1), repeat=n):
        if sum(abs(p) for p in parts) == d:
            out.append(parts)
    return tuple(out)


def _vectors_of_l1(n: int, d: int):
    return _vectors_of_l1_cached(n, d)


def torus_rule(n: int, m: int, kind: str = "product") -> np.ndarray:
    """Angles on T^n with equal weights (2 pi)^n / count.

    ``product`` is the tensor trapezoid with ``m`` nodes per angle; ``lattice``
    is a rank-1 rule with ``m`` points.
    """
    if kind == "product":
        t = 2 * math.pi * np.arange(m) / m
        return np.stack(np.meshgrid(*([t] * n), indexing="ij"), axis=-1).reshape(-1, n)
    g, _ = lattice_generator(n, m)
    k = np.arange(m)[:, None] * np.asarray(g)[None, :]
    return 2 * math.pi * ((k % m) / m)


def sphere_rule(n: int, m_moduli: int, torus: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Unit vectors omega in C^n and surface weights on S^{2n-1}."""
    mod, wmod = moduli_rule(n, m_moduli)
    tw = (2 * math.pi) ** n / len(torus)
    omega = mod[:, None, :] * np.exp(1j * torus)[None, :, :]
    weights = np.repeat(wmod, len(torus)) * tw
    return omega.reshape(-1, n), weights


# ---------------------------------------------------------------------------
# boundary parametrization
# ---------------------------------------------------------------------------


def boundary_normals(domain: DomainSpec, pts: np.ndarray) -> np.ndarray:
    """Unit outward normals (real coordinates) at boundary points."""
    x = to_real(pts)
    c = to_real(domain.center_array)
    if domain.kind == "ball":
        d = x - c
        return d / np.linalg.norm(d, axis=-1, keepdims=True)
    if domain.kind == "ellipsoid":
        g = (x - c) / np.asarray(domain.semi_axes) ** 2
    else:
        g = _implicit_grad(domain, x)
    return g / np.linalg.norm(g, axis=-1, keepdims=True)


def radial_boundary_nodes(domain: DomainSpec, omega: np.ndarray, dS: np.ndarray):
    """Boundary points, normals and surface weights over sphere nodes."""
    rb = radial_boundary(domain, omega)
    pts = domain.center_array + rb[:, None] * omega
    nrm = boundary_normals(domain, pts)
    cosang = np.sum(to_real(omega) * nrm, axis=-1)
    n = domain.n
    w = dS * rb ** (2 * n - 1) / cosang
    return pts, nrm, w, rb, cosang


def boundary_scheme(domain: DomainSpec, resolution: int, outward: bool = True) -> NodeSet:
    n = domain.n
    m_mod = max(4, resolution // 2) if n == 3 else resolution
    torus = torus_rule(n, resolution if n <= 2 else max(6, resolution // 2))
    omega, dS = sphere_rule(n, m_mod, torus)
    pts, nrm, w, _, _ = radial_boundary_nodes(domain, omega, dS)
    return NodeSet(pts, w, nrm if outward else -nrm, np.zeros(len(w)), domain)


# ---------------------------------------------------------------------------
# tensor-cell volume rules
# ---------------------------------------------------------------------------


def _region_parts(region):
    if isinstance(region, AnnulusSpec):
        return region.envelope, region.hole
    return region, None


def _inside(region, z: np.ndarray) -> np.ndarray:
    env, hole = _region_parts(region)
    ok = signed_distance(env, z) < 0
    if hole is not None:
        ok &= signed_distance(hole, z) > 0
    return ok


def _signed_margin(region, z: np.ndarray) -> np.ndarray:
    env, hole = _region_parts(region)
    r = np.asarray(signed_distance(env, z))
    if hole is not None:
        r = np.maximum(r, -np.asarray(signed_distance(hole, z)))
    return r


def volume_scheme(region, resolution: int, order: str = "midpoint", chunk: int = 200_000) -> NodeSet:
    env, _ = _region_parts(region)
    n = env.n
    m = 2 * n
    lo, hi = env.bounding_box()
    h = float(np.max(hi - lo)) / resolution
    diag = 0.5 * h * math.sqrt(m)
    if order == "gauss":
        g = np.array([-1.0, 1.0]) / math.sqrt(3.0)
        sub = np.array(list(itertools.product(g, repeat=m))) * 0.5
    elif order == "midpoint":
        sub = np.zeros((1, m))
    else:
        raise ValueError(f"unknown order {order!r}")
    halves = np.array(list(itertools.product((-0.25, 0.25), repeat=m)))
    pts_out, w_out = [], []
    total = resolution**m
    for start in range(0, total, chunk):
        idx = np.arange(start, min(total, start + chunk))
        ijk = np.stack(np.unravel_index(idx, (resolution,) * m), axis=-1)
        centers = lo + (ijk + 0.5) * h
        zc = to_complex(centers)
        margin = _signed_margin(region, zc)
        full = margin < -diag
        partial = np.abs(margin) <= diag
        if np.any(full):
            c = centers[full]
            p = (c[:, None, :] + sub[None, :, :] * h).reshape(-1, m)
            pts_out.append(p)
            w_out.append(np.full(len(p), h**m / len(sub)))
        if np.any(partial):
            c = centers[partial]
            sc = (c[:, None, :] + halves[None, :, :] * h).reshape(-1, m)
            keep = _inside(region, to_complex(sc))
            sc = sc[keep]
            p = (sc[:, None, :] + sub[None, :, :] * (0.5 * h)).reshape(-1, m)
            pts_out.append(p)
            w_out.append(np.full(len(p), (0.5 * h) ** m / len(sub)))
    if pts_out:
        pts = to_complex(np.concatenate(pts_out))
        w = np.concatenate(w_out)
    else:
        pts = np.zeros((0, n), dtype=complex)
        w = np.zeros(0)
    return NodeSet(pts, w, None, None, None)


def quadrature(region, resolution: int, order: str = "midpoint") -> QuadratureScheme:
    """Volume and boundary rules for a domain or an annulus.

    Boundary normals point out of the region, so the hole of an annulus
    carries the inward normal of the hole.
    """
    env, hole = _region_parts(region)
    vol = volume_scheme(region, resolution, order)
    bnd = [boundary_scheme(env, resolution)]
    if hole is not None:
        bnd.append(boundary_scheme(hole, resolution, outward=False))
    return QuadratureScheme(vol, bnd)


# ---------------------------------------------------------------------------
# collar schemes used by the identity verifier
# ---------------------------------------------------------------------------


@dataclass
class ShellChunk:
    points: np.ndarray
    weights: np.ndarray
    xi: np.ndarray


class ShellScheme:
    """Collar on one side of a star-shaped boundary.

    ``side="outside"`` covers ``r_b < r < r_b + width`` and ``"inside"`` covers
    ``r_b - width < r < r_b``.  ``resolution`` is the number of midpoint nodes
    in the normal coordinate.
    """

    def __init__(self, domain: DomainSpec, side: str, width: float, resolution: int, moduli: int = 12, torus: np.ndarray | None = None):
        if side not in ("inside", "outside"):
            raise ValueError("side must be 'inside' or 'outside'")
        self.domain = domain
        self.side = side
        self.width = float(width)
        self.resolution = int(resolution)
        n = domain.n
        if torus is None:
            torus = torus_rule(n, 12 if n == 2 else 8)
        self.omega, self.dS = sphere_rule(n, moduli, torus)
        pts, nrm, w, rb, cosang = radial_boundary_nodes(domain, self.omega, self.dS)
        self.boundary = NodeSet(pts, w, nrm if side == "inside" else -nrm, np.zeros(len(w)), domain)
        self.rb = rb
        self.xi, self.wxi = midpoint_interval(self.resolution, 0.0, 1.0)

    @property
    def n(self) -> int:
        return self.domain.n

    def __len__(self) -> int:
        return len(self.dS) * self.resolution

    def chunks(self, size: int = 50_000) -> Iterator[tuple]:
        for ch in self.shell_chunks(size):
            yield ch.points, ch.weights, None

    def shell_chunks(self, size: int = 50_000) -> Iterator[ShellChunk]:
        n = self.n
        per = max(1, size // self.resolution)
        sgn = 1.0 if self.side == "outside" else -1.0
        c = self.domain.center_array
        for s in range(0, len(self.dS), per):
            om = self.omega[s : s + per]
            dS = self.dS[s : s + per]
            rb = self.rb[s : s + per]
            r = rb[:, None] + sgn * self.width * self.xi[None, :]
            pts = c + r[:, :, None] * om[:, None, :]
            w = dS[:, None] * r ** (2 * n - 1) * self.width * self.wxi[None, :]
            xi = np.broadcast_to(self.xi, r.shape)
            yield ShellChunk(pts.reshape(-1, n), w.ravel(), xi.ravel())

    def volume(self) -> float:
        return math.fsum(float(np.sum(ch.weights)) for ch in self.shell_chunks())


def collar_width(domain: DomainSpec, side: str, support: float) -> float:
    """Radial width that covers the collar ``|rho| < support`` of a convex domain."""
    if side == "outside":
        omega, _ = sphere_rule(domain.n, 16, torus_rule(domain.n, 4))
        _, _, _, _, cosang = radial_boundary_nodes(domain, omega, np.ones(len(omega)))
        return 1.02 * support / float(np.min(cosang))
    return 1.02 * support * domain.outer_radius / domain.inner_radius
