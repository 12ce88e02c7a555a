"""Discrete Cauchy-Riemann complexes on tensor grids.

Grid forms live on a cell complex built from the vertex mask of a domain.
A ``(0,q)`` coefficient indexed by ``K`` sits on the product of the
elementary squares in the complex directions of ``K``; such a cell exists
when all of its ``4**q`` corners lie in the mask.  In each complex
direction the derivative ``d/dzbar_k`` is the box stencil, exact for affine
functions at the square center, so the directional operators commute and
the discrete complex satisfies ``dbar o dbar = 0`` identically.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import MemoryGuard, NotClosed, NotInRange, ResolutionTooCoarse, SpectralStagnation
from .geometry import AnnulusSpec, DomainSpec, signed_distance, to_complex

MAX_NONZEROS = 20_000_000
BOX_STENCIL = (
    ((0, 0), -(1 + 1j) / 4),
    ((1, 0), (1 - 1j) / 4),
    ((0, 1), (-1 + 1j) / 4),
    ((1, 1), (1 + 1j) / 4),
)


@dataclass
class Grid:
    """Uniform cell-centred tensor grid with a vertex mask per region."""

    n: int
    resolution: int
    lo: np.ndarray
    h: float
    masks: dict

    @property
    def shape(self) -> tuple:
        return (self.resolution,) * (2 * self.n)

    @property
    def cell_weight(self) -> float:
        return self.h ** (2 * self.n)

    def points(self) -> np.ndarray:
        axes = [self.lo[a] + (np.arange(self.resolution) + 0.5) * self.h for a in range(2 * self.n)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return to_complex(np.stack(mesh, axis=-1))

    def cell_centers(self, K: Sequence[int]) -> np.ndarray:
        x = self.points()
        shift = np.zeros(self.n, dtype=complex)
        for k in K:
            shift[k] = 0.5 * self.h * (1 + 1j)
        return x + shift


def make_grid(region, resolution: int) -> Grid:
    """Grid on the bounding box of ``region`` with masks for its parts."""
    if isinstance(region, AnnulusSpec):
        env, hole = region.envelope, region.hole
    else:
        env, hole = region, None
    lo, hi = env.bounding_box()
    h = float(np.max(hi - lo)) / resolution
    grid = Grid(env.n, resolution, lo, h, {})
    pts = grid.points()
    flat = pts.reshape(-1, env.n)
    inside_env = (signed_distance(env, flat) < 0).reshape(grid.shape)
    grid.masks["envelope"] = inside_env
    if hole is None:
        grid.masks["domain"] = inside_env
        grid.masks["hole"] = np.zeros_like(inside_env)
    else:
        in_hole = (signed_distance(hole, flat) < 0).reshape(grid.shape)
        grid.masks["hole"] = in_hole
        grid.masks["domain"] = inside_env & ~in_hole
    return grid


def _shift(mask: np.ndarray, axis: int) -> np.ndarray:
    """mask[..., i + 1, ...] with False past the end."""
    out = np.zeros_like(mask)
    idx = [slice(None)] * mask.ndim
    src = list(idx)
    idx[axis] = slice(0, -1)
    src[axis] = slice(1, None)
    out[tuple(idx)] = mask[tuple(src)]
    return out


def cell_mask(vertex_mask: np.ndarray, K: Sequence[int]) -> np.ndarray:
    m = vertex_mask
    for k in K:
        m = m & _shift(m, 2 * k)
        m = m & _shift(m, 2 * k + 1)
    return m


def index_sets(n: int, q: int) -> list[tuple]:
    return list(itertools.combinations(range(n), q))


@dataclass
class FormSpace:
    """Ordered degrees of freedom of discrete (p,q)-forms."""

    n: int
    p: int
    q: int
    masks: dict  # (J, K) -> bool array of included base vertices
    offsets: dict = field(default_factory=dict)
    numbering: dict = field(default_factory=dict)
    size: int = 0

    def __post_init__(self) -> None:
        start = 0
        for key in sorted(self.masks):
            m = self.masks[key]
            num = np.full(m.shape, -1, dtype=np.int64)
            count = int(m.sum())
            num[m] = np.arange(start, start + count)
            self.numbering[key] = num
            self.offsets[key] = (start, start + count)
            start += count
        self.size = start

    def keys(self) -> list:
        return sorted(self.masks)


def form_space(vertex_mask: np.ndarray, n: int, p: int, q: int) -> FormSpace:
    masks = {}
    for J in index_sets(n, p):
        for K in index_sets(n, q):
            masks[(J, K)] = cell_mask(vertex_mask, K)
    return FormSpace(n, p, q, masks)


def _dbar_matrix(src: FormSpace, dst: FormSpace, h: float) -> sp.csr_matrix:
    rows, cols, vals = [], [], []
    sign_p = -1.0 if src.p % 2 else 1.0
    for (J, K) in dst.keys():
        dmask = dst.masks[(J, K)]
        base = np.argwhere(dmask)
        rid = dst.numbering[(J, K)][dmask]
        for pos, k in enumerate(K):
            Kp = tuple(x for x in K if x != k)
            snum = src.numbering.get((J, Kp))
            if snum is None:
                continue
            sign = sign_p * (-1.0) ** pos
            for (dx, dy), c in BOX_STENCIL:
                nb = base.copy()
                nb[:, 2 * k] += dx
                nb[:, 2 * k + 1] += dy
                ok = np.all(nb < np.array(snum.shape), axis=1)
                cid = np.full(len(nb), -1, dtype=np.int64)
                cid[ok] = snum[tuple(nb[ok].T)]
                keep = cid >= 0
                rows.append(rid[keep])
                cols.append(cid[keep])
                vals.append(np.full(int(keep.sum()), sign * c / h))
    if rows:
        r = np.concatenate(rows)
        c = np.concatenate(cols)
        v = np.concatenate(vals)
    else:
        r = c = np.zeros(0, dtype=np.int64)
        v = np.zeros(0, dtype=complex)
    if len(v) > MAX_NONZEROS:
        raise MemoryGuard(f"operator would have {len(v)} nonzeros")
    return sp.csr_matrix((v, (r, c)), shape=(dst.size, src.size))


@dataclass
class GridOperator:
    """Sparse discrete dbar from (p,q-1)- to (p,q)-grid forms."""

    matrix: sp.csr_matrix
    grid: Grid
    bc: str
    n: int
    p: int
    q: int
    domain_space: FormSpace
    range_space: FormSpace

    @property
    def h(self) -> float:
        return self.grid.h

    @property
    def weight(self) -> float:
        return self.grid.cell_weight

    def norm(self, v: np.ndarray) -> float:
        return float(np.sqrt(self.weight) * np.linalg.norm(v))

    def apply(self, v: np.ndarray) -> np.ndarray:
        return self.matrix @ v

    def export_coo(self, path) -> None:
        """Write ``row,col,re,im`` lines."""
        m = self.matrix.tocoo()
        order = np.lexsort((m.col, m.row))
        with open(path, "w") as fh:
            fh.write("row,col,re,im\n")
            for i in order:
                v = m.data[i]
                fh.write(f"{m.row[i]},{m.col[i]},{v.real:.17g},{v.imag:.17g}\n")


def _check_resolution(n: int, resolution: int) -> None:
    floor = 8 if n == 2 else 4
    if resolution < floor:
        raise ResolutionTooCoarse(f"resolution must be at least {floor} per real dimension in C^{n}")


def assemble_dbar(region, n: int, p: int, q: int, resolution: int, bc: str = "max", grid: Grid | None = None) -> GridOperator:
    """Discrete dbar on (p,q-1)-forms with boundary condition ``bc``.

    ``max`` keeps every cell inside the region.  ``mixed`` extends annulus
    forms by zero across the hole: unknowns are annulus cells while the
    image is taken on the whole envelope.  ``c`` is the compactly supported
    realization obtained by zero extension to all of C^n on the dual grid.
    """
    if q < 1 or q > n:
        raise ValueError("q must satisfy 1 <= q <= n")
    if region.n != n:
        raise ValueError("dimension mismatch")
    _check_resolution(n, resolution)
    if grid is None:
        grid = make_grid(region, resolution)
    est = int(grid.masks["envelope"].sum()) * math.comb(n, p) * math.comb(n, q) * 4 * q
    if est > MAX_NONZEROS:
        raise MemoryGuard(f"operator would have about {est} nonzeros")
    if bc == "max":
        src = form_space(grid.masks["domain"], n, p, q - 1)
        dst = form_space(grid.masks["domain"], n, p, q)
        mat = _dbar_matrix(src, dst, grid.h)
    elif bc == "mixed":
        if not isinstance(region, AnnulusSpec):
            raise ValueError("mixed boundary condition needs an annulus")
        src = form_space(grid.masks["domain"], n, p, q - 1)
        full = form_space(grid.masks["envelope"], n, p, q - 1)
        dst = form_space(grid.masks["envelope"], n, p, q)
        mat_full = _dbar_matrix(full, dst, grid.h)
        # restrict columns to annulus cells; hole-touching cells are pinned to zero
        keep = np.concatenate([full.numbering[key][src.masks[key]] for key in src.keys()])
        mat = mat_full[:, keep].tocsr()
    elif bc == "c":
        return _assemble_compact(region, n, p, q, grid)
    else:
        raise ValueError(f"unknown boundary condition {bc!r}")
    return GridOperator(mat, grid, bc, n, p, q, src, dst)


def _assemble_compact(region, n: int, p: int, q: int, grid: Grid) -> GridOperator:
    """Zero-extension realization on the dual grid.

    The dual vertices are the centres of the primal top-dimensional cells,
    so a discrete (p,q-1)-form with support in the closed region is extended
    by zero and differentiated everywhere.
    """
    top = cell_mask(grid.masks["domain"], tuple(range(n)))
    # dual vertex i sits at primal vertex i + (1/2, ..., 1/2); pad by one on
    # the low side so the image may leave the support
    R = grid.resolution + 1
    dual = np.zeros((R,) * (2 * n), dtype=bool)
    dual[(slice(1, None),) * (2 * n)] = top
    dual_grid = Grid(n, R, grid.lo - 0.5 * grid.h, grid.h, {"domain": dual, "envelope": dual, "hole": np.zeros_like(dual)})
    src = form_space(dual, n, p, q - 1)
    support = dual.copy()
    for a in range(2 * n):
        # every cell whose corners touch the support
        back = np.zeros_like(support)
        idx = [slice(None)] * (2 * n)
        idx[a] = slice(0, -1)
        sidx = list(idx)
        sidx[a] = slice(1, None)
        back[tuple(idx)] = support[tuple(sidx)]
        support = support | back
    dst_masks = {}
    for J in index_sets(n, p):
        for K in index_sets(n, q):
            m = np.zeros_like(dual)
            # a K-cell is needed when any corner lies in the support
            corners = dual.copy()
            for k in K:
                for a in (2 * k, 2 * k + 1):
                    back = np.zeros_like(corners)
                    idx = [slice(None)] * (2 * n)
                    idx[a] = slice(0, -1)
                    sidx = list(idx)
                    sidx[a] = slice(1, None)
                    back[tuple(idx)] = corners[tuple(sidx)]
                    corners = corners | back
            m |= corners
            dst_masks[(J, K)] = m
    dst = FormSpace(n, p, q, dst_masks)
    full_src = FormSpace(n, p, q - 1, {key: np.ones_like(dual) for key in src.keys()})
    mat_full = _dbar_matrix(full_src, dst, grid.h)
    keep = np.concatenate([full_src.numbering[key][src.masks[key]] for key in src.keys()])
    mat = mat_full[:, keep].tocsr()
    return GridOperator(mat, dual_grid, "c", n, p, q, src, dst)


# ---------------------------------------------------------------------------
# solves and spectra
# ---------------------------------------------------------------------------


@dataclass
class SolveReport:
    solution_norm: float
    data_norm: float
    ratio: float
    bound: Optional[float]
    satisfied: Optional[bool]
    iterations: int
    residual: float
    solution: Optional[np.ndarray] = None


def solve_min_norm(op: GridOperator, f: np.ndarray, bound: float | None = None, tol: float = 1e-8, slack: float = 1.2, closed_op: GridOperator | None = None) -> SolveReport:
    """Minimal-norm least-squares solution of ``op u = f``.

    ``closed_op`` (the next operator in the complex) enables the closedness
    check on ``f``.
    """
    f = np.asarray(f, dtype=complex)
    fn = float(np.linalg.norm(f))
    if closed_op is not None and fn > 0:
        if np.linalg.norm(closed_op.matrix @ f) > 1e-8 * fn * max(1.0, 1.0 / op.h):
            raise NotClosed("right-hand side is not discretely closed")
    if fn == 0.0:
        u = np.zeros(op.matrix.shape[1], dtype=complex)
        return SolveReport(0.0, 0.0, 0.0, bound, True if bound is not None else None, 0, 0.0, u)
    res = spla.lsmr(op.matrix, f, atol=tol * 1e-2, btol=tol * 1e-2, maxiter=20 * max(op.matrix.shape))
    u = res[0]
    iters = int(res[2])
    rel = float(np.linalg.norm(op.matrix @ u - f) / fn)
    if rel > tol:
        raise NotInRange(f"least-squares residual stagnated at {rel:.3e}")
    ratio = float(np.linalg.norm(u) / fn)
    sat = None if bound is None else bool(ratio <= slack * bound)
    return SolveReport(
        ratio * fn * math.sqrt(op.weight),
        fn * math.sqrt(op.weight),
        ratio,
        bound,
        sat,
        iters,
        rel,
        u,
    )


def singular_values_dense(op: GridOperator) -> np.ndarray:
    return sla.svdvals(op.matrix.toarray())


@dataclass
class ConstantEstimate:
    value: float
    sigma_min: float
    kernel_dimension: int
    converged: bool
    method: str
    log_value: Optional[float] = None


def estimate_best_constant(op: GridOperator, dense_limit: int = 2500, kernel_tol: float = 1e-9, k: int = 64, sparse_kernel_tol: float = 1e-6, normal_dense_limit: int = 8000) -> ConstantEstimate:
    """1 / (smallest nonzero singular value) of the operator.

    Small operators use a dense SVD.  Larger ones work with the normal
    matrix: a dense eigensolve up to ``normal_dense_limit`` columns, then
    shift-invert with a window doubled until it reaches past the kernel.
    Squaring the singular values limits the kernel threshold to
    ``sparse_kernel_tol`` relative to the largest one.
    """
    A = op.matrix
    nz = np.asarray(abs(A).sum(axis=0)).ravel() > 0
    zero_cols = int((~nz).sum())
    A = A[:, nz]
    ncol = A.shape[1]
    if ncol == 0:
        return ConstantEstimate(0.0, math.inf, zero_cols, True, "empty")
    if ncol <= dense_limit:
        s = sla.svdvals(A.toarray())
        s = np.concatenate([s, np.zeros(max(0, ncol - len(s)))])
        scale = s.max()
        pos = s[s > kernel_tol * scale]
        kdim = zero_cols + int((s <= kernel_tol * scale).sum())
        smin = float(pos.min())
        return ConstantEstimate(1.0 / smin, smin, kdim, True, "dense-svd")
    G = (A.conj().T @ A).tocsc()
    if ncol <= normal_dense_limit:
        lam = np.linalg.eigvalsh(G.toarray())
        thr = sparse_kernel_tol**2 * lam.max()
        pos = lam[lam > thr]
        smin = math.sqrt(float(pos.min()))
        return ConstantEstimate(1.0 / smin, smin, zero_cols + int((lam <= thr).sum()), True, "dense-normal")
    scale = float(spla.eigsh(G, k=1, which="LA", return_eigenvectors=False, tol=1e-8)[0])
    thr = sparse_kernel_tol**2 * scale
    eig = _SmallestEigenvalues(G)
    kk = k
    while True:
        kk = min(kk, ncol - 2)
        try:
            vals = eig(kk)
        except spla.ArpackNoConvergence as exc:
            raise SpectralStagnation("shift-invert eigensolver did not converge") from exc
        small = vals <= thr
        if not np.all(small):
            lam = float(vals[~small].min())
            smin = math.sqrt(max(lam, 0.0))
            return ConstantEstimate(1.0 / smin, smin, zero_cols + int(small.sum()), True, "shift-invert")
        if kk >= ncol - 2 or kk >= 4096:
            raise SpectralStagnation("kernel larger than the deflation window")
        kk *= 2


def harmonic_spectrum(lower: GridOperator | None, upper: GridOperator | None, k: int = 60) -> np.ndarray:
    """Smallest singular values of the stacked operator [upper; lower^H]."""
    blocks = []
    if upper is not None:
        blocks.append(upper.matrix)
    if lower is not None:
        blocks.append(lower.matrix.conj().T)
    A = sp.vstack(blocks).tocsr()
    ncol = A.shape[1]
    if ncol <= 3000:
        return np.sort(sla.svdvals(A.toarray()))
    G = (A.conj().T @ A).tocsc()
    vals = spla.eigsh(G, k=min(k, ncol - 2), sigma=-1e-6, which="LM", return_eigenvectors=False)
    return np.sqrt(np.maximum(np.sort(vals), 0.0))


class _SmallestEigenvalues:
    """The ``k`` smallest eigenvalues of a Hermitian positive semidefinite matrix.

    Repeated calls with growing ``k`` reuse the sparse factorization.
    ``direct=False`` skips the factorization, whose fill-in is prohibitive
    on six-dimensional grids.
    """

    def __init__(self, G: sp.spmatrix, seed: int = 0, direct: bool = True):
        self.G = G
        self.direct = direct
        self.m = G.shape[0]
        self.seed = seed
        self._dense = None
        self._op = None

    def __call__(self, k: int) -> np.ndarray:
        m = self.m
        G = self.G
        if m <= 3000:
            if self._dense is None:
                self._dense = np.linalg.eigvalsh(G.toarray())
            return self._dense[:k]
        if m <= 20000 and self.direct:
            Gc = G.tocsc()
            if self._op is None:
                self._shift = 1e-8 * float(abs(Gc).sum(axis=0).max())
                lu = spla.splu((Gc + self._shift * sp.identity(m, format="csc")).tocsc(), permc_spec="MMD_AT_PLUS_A")
                self._op = spla.LinearOperator(G.shape, matvec=lu.solve, dtype=G.dtype)
            vals = spla.eigsh(Gc, k=min(k, m - 2), sigma=-self._shift, OPinv=self._op, which="LM", return_eigenvectors=False)
            return np.sort(vals.real)
        rng = np.random.default_rng(self.seed)
        X = rng.normal(size=(m, k)) + 1j * rng.normal(size=(m, k))
        d = G.diagonal().real
        d = np.where(d > 0, d, 1.0)
        prec = spla.LinearOperator(G.shape, matvec=lambda x: x / d.reshape((m,) + (1,) * (x.ndim - 1)), matmat=lambda x: x / d[:, None], dtype=complex)
        vals, _ = spla.lobpcg(G.tocsr(), X, M=prec, largest=False, tol=1e-7, maxiter=1000)
        return np.sort(vals.real)


def _smallest_eigenvalues(G: sp.spmatrix, k: int, seed: int = 0) -> np.ndarray:
    return _SmallestEigenvalues(G, seed)(k)


@dataclass
class CohomologyReport:
    rank: int
    resolution: int
    smallest: np.ndarray
    threshold: float
    gap_ratio: float


def cohomology_rank(region, p: int, q: int, resolution: int, tol: float = 1e-6, n: int | None = None, gap: float = 1e3) -> CohomologyReport:
    """Dimension of the discrete harmonic space ker(dbar_q) cap ker(dbar_{q-1}^H).

    Singular values of the stacked operator below ``tol`` times its norm
    count as zero; a missing spectral gap of ``gap`` above the threshold
    raises :class:`ResolutionTooCoarse`, as does a hole containing no grid
    vertex.
    """
    n = region.n if n is None else n
    grid = make_grid(region, resolution)
    if isinstance(region, AnnulusSpec) and not grid.masks["hole"].any():
        raise ResolutionTooCoarse("the hole contains no grid vertex at this resolution")
    blocks = []
    if q < n:
        blocks.append(assemble_dbar(region, n, p, q + 1, resolution, "max", grid=grid).matrix)
    if q >= 1:
        blocks.append(assemble_dbar(region, n, p, q, resolution, "max", grid=grid).matrix.conj().T)
    A = sp.vstack(blocks).tocsr()
    G = (A.conj().T @ A).tocsr()
    norm2 = float(spla.eigsh(G, k=1, which="LA", return_eigenvectors=False, tol=1e-6)[0]) if G.shape[0] > 3 else float(np.abs(G.toarray()).sum())
    thr = (tol**2) * norm2
    k = 16
    eig = _SmallestEigenvalues(G, direct=n <= 2)
    while True:
        k = min(k, G.shape[0] - 2) if G.shape[0] > 3000 else k
        vals = eig(k)
        if vals[-1] > thr or len(vals) >= G.shape[0] - 2:
            break
        k *= 2
    sig = np.sqrt(np.maximum(vals, 0.0))
    rank = int(np.sum(vals <= thr))
    above = sig[sig > math.sqrt(thr)]
    ratio = float(above.min() / math.sqrt(thr)) if len(above) else math.inf
    if ratio < gap:
        raise ResolutionTooCoarse(f"no spectral gap above the zero threshold (ratio {ratio:.3g})")
    return CohomologyReport(rank, resolution, sig, math.sqrt(thr), ratio)


# ---------------------------------------------------------------------------
# sampling and the W^1 pipeline
# ---------------------------------------------------------------------------


def sample_form(space: FormSpace, grid: Grid, form) -> np.ndarray:
    """Coefficients of a :class:`dbarlab.forms.Form` at the centres of the grid cells."""
    out = np.zeros(space.size, dtype=complex)
    for (J, K) in space.keys():
        mask = space.masks[(J, K)]
        if not mask.any():
            continue
        z = grid.cell_centers(K)[mask]
        vals = form.evaluate(z, 0).values()
        a, b = space.offsets[(J, K)]
        v = vals.get((J, K))
        if v is not None:
            out[a:b] = np.broadcast_to(v, (b - a,))
    return out


def sample_function(space: FormSpace, grid: Grid, func) -> np.ndarray:
    """Per-coefficient values of a scalar field at the cell centres of ``space``."""
    out = np.zeros(space.size)
    for (J, K) in space.keys():
        mask = space.masks[(J, K)]
        a, b = space.offsets[(J, K)]
        if b > a:
            out[a:b] = func(grid.cell_centers(K)[mask])
    return out


def transfer(v: np.ndarray, src: FormSpace, dst: FormSpace) -> np.ndarray:
    """Move a grid form between spaces on the same grid, zero where ``dst`` has no source cell."""
    out = np.zeros(dst.size, dtype=complex)
    for key in dst.keys():
        if key not in src.masks:
            continue
        both = src.masks[key] & dst.masks[key]
        out[dst.numbering[key][both]] = v[src.numbering[key][both]]
    return out


def _with_domain(grid: Grid, mask: np.ndarray) -> Grid:
    return Grid(grid.n, grid.resolution, grid.lo, grid.h, {"domain": mask, "envelope": mask, "hole": np.zeros_like(mask)})


def w1_norm(u: np.ndarray, space: FormSpace, h: float) -> float:
    """sqrt(||u||^2 + sum of squared first differences / h^2) with cell measure h^(2n)."""
    total = float(np.vdot(u, u).real)
    for key in space.keys():
        num = space.numbering[key]
        mask = space.masks[key]
        for a in range(mask.ndim):
            pair = mask & _shift(mask, a)
            if not pair.any():
                continue
            i0 = num[pair]
            i1 = _shift(num, a)[pair]
            d = (u[i1] - u[i0]) / h
            total += float(np.vdot(d, d).real)
    return math.sqrt(total * h ** (2 * space.n))


@dataclass
class PipelineStage:
    name: str
    ratio: float
    bound: Optional[float]
    satisfied: Optional[bool]
    residual: float


@dataclass
class PipelineReport:
    """Outcome of the extension, mixed solve, canonical solve and restriction."""

    stages: list
    solution: np.ndarray
    data_norm: float
    solution_norm: float
    w1_norm: float
    w1_ratio: float
    residual: float
    space: FormSpace

    @property
    def satisfied(self) -> bool:
        return all(s.satisfied is not False for s in self.stages)


def w1_pipeline(
    hole: DomainSpec,
    f,
    envelope: DomainSpec,
    resolution: int,
    p: int = 0,
    q: int = 1,
    inner_margin: float | None = None,
    outer_margin: float | None = None,
    tol: float = 1e-8,
    slack: float = 1.2,
) -> PipelineReport:
    """Solve ``dbar u = f`` on the hole through the annulus and the envelope.

    ``f`` is a grid vector on the envelope's ``(p,q)`` cells (only its
    values near the hole matter), or a :class:`dbarlab.forms.Form`.  A form
    of bidegree ``(p,q)`` is sampled on the envelope; a form of bidegree
    ``(p,q-1)`` is treated as a potential and ``f`` is its discrete dbar.
    The data must be discretely closed on the hole.

    Steps: extend by a cutoff (``Ef``), take ``g = dbar Ef``, solve the mixed
    problem ``dbar v = g`` on the annulus, form ``h = Ef - v`` (closed on the
    envelope), take the canonical solution of ``dbar u = h`` on the envelope
    and restrict it to the hole.
    """
    from .constants import build_cutoff, constant_hormander, constant_mixed

    n = hole.n
    if not 1 <= q <= n:
        raise ValueError("q must satisfy 1 <= q <= n")
    annulus = AnnulusSpec(envelope, hole)
    grid = make_grid(annulus, resolution)
    env_mask = grid.masks["envelope"]
    hole_mask = grid.masks["hole"]
    if not hole_mask.any():
        raise ResolutionTooCoarse("the hole contains no grid vertex at this resolution")
    env_grid = _with_domain(grid, env_mask)
    hole_grid = _with_domain(grid, hole_mask)
    hole_f = form_space(hole_mask, n, p, q)
    env_f = form_space(env_mask, n, p, q)
    hole_op = assemble_dbar(hole, n, p, q, resolution, "max", grid=hole_grid)

    env_op = assemble_dbar(envelope, n, p, q, resolution, "max", grid=env_grid)
    if isinstance(f, np.ndarray):
        f_env = np.asarray(f, dtype=complex)
    elif f.q == q - 1:
        f_env = env_op.matrix @ sample_form(env_op.domain_space, grid, f)
    else:
        f_env = sample_form(env_f, grid, f)
    fv = transfer(f_env, env_f, hole_f)
    if q < n:
        nxt = assemble_dbar(hole, n, p, q + 1, resolution, "max", grid=hole_grid)
        fn = np.linalg.norm(fv)
        if fn > 0 and np.linalg.norm(nxt.matrix @ fv) > 1e-8 * fn / grid.h:
            raise NotClosed("data is not discretely closed on the hole")
    w = grid.cell_weight
    f_norm = float(np.linalg.norm(fv) * math.sqrt(w))
    stages = []

    shell = hole.shell_thickness
    inner_margin = 0.25 * shell if inner_margin is None else inner_margin
    outer_margin = 0.75 * shell if outer_margin is None else outer_margin
    chi = build_cutoff(annulus, inner_margin, outer_margin)
    Ef = f_env * sample_function(env_f, grid, chi)
    stages.append(PipelineStage("extension", float(np.linalg.norm(Ef) / max(np.linalg.norm(fv), 1e-300)), None, None, 0.0))

    if q < n:
        env_next = assemble_dbar(envelope, n, p, q + 1, resolution, "max", grid=env_grid)
        g = env_next.matrix @ Ef
        mixed = assemble_dbar(annulus, n, p, q + 1, resolution, "mixed", grid=grid)
        delta = envelope.diameter
        _, log_c = constant_mixed(chi.A, 0.0 if hole.kind == "ball" else _b_bound(hole, outer_margin), delta, q + 1, log=True)
        rep = solve_min_norm(mixed, g, tol=tol)
        ok = math.log(max(rep.ratio, 1e-300)) <= math.log(slack) + log_c
        stages.append(PipelineStage("mixed", rep.ratio, math.exp(log_c) if log_c < 700 else math.inf, ok, rep.residual))
        v_env = transfer(rep.solution, mixed.domain_space, env_f)
    else:
        v_env = np.zeros(env_f.size, dtype=complex)
    hvec = Ef - v_env

    canon = env_op
    rep = solve_min_norm(canon, hvec, bound=constant_hormander(envelope, q), tol=tol, slack=slack)
    stages.append(PipelineStage("canonical", rep.ratio, rep.bound, rep.satisfied, rep.residual))

    u_hole = transfer(rep.solution, canon.domain_space, hole_op.domain_space)
    res = float(np.linalg.norm(hole_op.matrix @ u_hole - fv) / max(np.linalg.norm(fv), 1e-300)) if np.any(fv) else 0.0
    u_norm = float(np.linalg.norm(u_hole) * math.sqrt(w))
    w1 = w1_norm(u_hole, hole_op.domain_space, grid.h)
    ratio = w1 / f_norm if f_norm > 0 else 0.0
    stages.append(PipelineStage("restriction", u_norm / f_norm if f_norm > 0 else 0.0, None, None, res))
    return PipelineReport(stages, u_hole, f_norm, u_norm, w1, ratio, res, hole_op.domain_space)


def _b_bound(hole: DomainSpec, width: float) -> float:
    from .constants import estimate_B

    return estimate_B(hole, width=width).inflated
