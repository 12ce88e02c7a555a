from __future__ import annotations

import math

import numpy as np
import pytest
import scipy.sparse as sp

from dbarlab.errors import NotClosed, ResolutionTooCoarse
from dbarlab.forms import Form
from dbarlab.geometry import AnnulusSpec, DomainSpec
from dbarlab.solver import (
    assemble_dbar,
    cohomology_rank,
    estimate_best_constant,
    form_space,
    make_grid,
    sample_form,
    singular_values_dense,
    solve_min_norm,
    w1_norm,
    w1_pipeline,
)
from dbarlab.solver import _with_domain

ANNULUS = AnnulusSpec.balls(2, 1.0, 0.4)


@pytest.mark.parametrize(
    "region,n,q,bc",
    [(DomainSpec.ball(2), 2, 1, "max"), (ANNULUS, 2, 1, "mixed"), (DomainSpec.ball(3), 3, 2, "max")],
)
def test_discrete_dbar_squares_to_zero(region, n, q, bc):
    R = 6 if n == 3 else 10
    a = assemble_dbar(region, n, 0, q, R, bc)
    # the mixed image lives on the envelope, where the next operator acts
    grid = _with_domain(a.grid, a.grid.masks["envelope"]) if bc == "mixed" else a.grid
    b = assemble_dbar(region, n, 0, q + 1, R, "max", grid=grid)
    prod = (b.matrix @ a.matrix).tocoo()
    assert prod.shape[1] == a.matrix.shape[1]
    assert np.max(np.abs(prod.data), initial=0.0) < 1e-10


def test_box_stencil_is_exact_on_affine_functions():
    op = assemble_dbar(DomainSpec.ball(2), 2, 0, 1, 10, "max")
    f = Form.from_fields(2, 0, 0, {((), ()): lambda zs, zbs: 0.5 + 2.0 * zbs[0] - 1j * zbs[1] + 3.0 * zs[0]})
    df = op.matrix @ sample_form(op.domain_space, op.grid, f)
    sizes = [int(op.range_space.masks[k].sum()) for k in op.range_space.keys()]
    np.testing.assert_allclose(df[: sizes[0]], 2.0, atol=1e-12)
    np.testing.assert_allclose(df[sizes[0] :], -1j, atol=1e-12)


def test_min_norm_solution_matches_pseudoinverse():
    op = assemble_dbar(DomainSpec.ball(1), 1, 0, 1, 8, "max")
    rng = np.random.default_rng(0)
    u0 = rng.normal(size=op.matrix.shape[1]) + 1j * rng.normal(size=op.matrix.shape[1])
    f = op.matrix @ u0
    rep = solve_min_norm(op, f, tol=1e-10)
    expect = np.linalg.pinv(op.matrix.toarray()) @ f
    np.testing.assert_allclose(rep.solution, expect, atol=1e-7)
    assert rep.residual <= 1e-10


def test_zero_data_has_zero_solution():
    op = assemble_dbar(DomainSpec.ball(2), 2, 0, 1, 8, "max")
    rep = solve_min_norm(op, np.zeros(op.matrix.shape[0]), bound=1.0)
    assert rep.ratio == 0.0 and rep.satisfied


def test_closedness_is_checked():
    op = assemble_dbar(DomainSpec.ball(2), 2, 0, 1, 8, "max")
    nxt = assemble_dbar(DomainSpec.ball(2), 2, 0, 2, 8, "max", grid=op.grid)
    f = np.random.default_rng(1).normal(size=op.matrix.shape[0]).astype(complex)
    with pytest.raises(NotClosed):
        solve_min_norm(op, f, closed_op=nxt)


def test_best_constant_is_the_inverse_smallest_nonzero_singular_value():
    op = assemble_dbar(DomainSpec.ball(1), 1, 0, 1, 8, "max")
    s = np.linalg.svd(op.matrix.toarray(), compute_uv=False)
    est = estimate_best_constant(op)
    assert est.value == pytest.approx(1.0 / s[s > 1e-9 * s.max()].min(), rel=1e-12)
    assert est.method == "dense-svd"


def test_dense_normal_tier_agrees_with_dense_svd():
    op = assemble_dbar(DomainSpec.ball(1), 1, 0, 1, 12, "max")
    a = estimate_best_constant(op)
    b = estimate_best_constant(op, dense_limit=10)
    assert b.method == "dense-normal"
    assert b.value == pytest.approx(a.value, rel=1e-6)


def test_ball_has_no_discrete_cohomology():
    assert cohomology_rank(DomainSpec.ball(2), 0, 1, 8).rank == 0


def test_hole_without_vertices_is_too_coarse():
    tiny = AnnulusSpec(DomainSpec.ball(2, 1.0), DomainSpec.ball(2, 0.05, shell_thickness=0.02))
    with pytest.raises(ResolutionTooCoarse):
        cohomology_rank(tiny, 0, 1, 8)


@pytest.mark.parametrize("n,too_coarse,ok", [(1, 3, 4), (2, 7, 8), (3, 3, 4)])
def test_resolution_floor(n, too_coarse, ok):
    with pytest.raises(ResolutionTooCoarse):
        assemble_dbar(DomainSpec.ball(n), n, 0, 1, too_coarse)
    assert assemble_dbar(DomainSpec.ball(n), n, 0, 1, ok).matrix.shape[0] > 0


def test_unknown_boundary_condition():
    with pytest.raises(ValueError):
        assemble_dbar(DomainSpec.ball(2), 2, 0, 1, 8, "robin")


def test_w1_norm_of_a_constant_is_its_l2_norm():
    grid = make_grid(DomainSpec.ball(2), 8)
    space = form_space(grid.masks["domain"], 2, 0, 0)
    u = np.ones(space.size, dtype=complex)
    # a constant has no interior differences
    assert w1_norm(u, space, grid.h) == pytest.approx(math.sqrt(space.size * grid.h**4))


def test_w1_pipeline_solves_on_the_hole():
    pot = Form.from_fields(2, 0, 0, {((), ()): lambda zs, zbs: zs[0] * zbs[1] + zbs[0] * zbs[0]})
    rep = w1_pipeline(DomainSpec.ball(2, 0.4, shell_thickness=0.16), pot, DomainSpec.ball(2, 1.0), 10)
    assert rep.satisfied
    assert rep.residual <= 1e-6
    assert [s.name for s in rep.stages] == ["extension", "mixed", "canonical", "restriction"]


def test_export_coo(tmp_path):
    op = assemble_dbar(DomainSpec.ball(1), 1, 0, 1, 6, "max")
    path = tmp_path / "op.csv"
    op.export_coo(path)
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    m = sp.coo_matrix((data[:, 2] + 1j * data[:, 3], (data[:, 0].astype(int), data[:, 1].astype(int))), shape=op.matrix.shape)
    assert abs(m - op.matrix).max() == 0


def test_disc_kernel_grows_with_resolution():
    dims = []
    for R in (6, 8, 12):
        op = assemble_dbar(DomainSpec.ball(1), 1, 0, 1, R, "max")
        s = singular_values_dense(op)
        dims.append(op.matrix.shape[1] - int(np.sum(s > 1e-9 * s.max())))
    assert dims[0] < dims[1] < dims[2]


def test_best_constant_scales_with_dilation():
    a = estimate_best_constant(assemble_dbar(DomainSpec.ball(1), 1, 0, 1, 10)).value
    b = estimate_best_constant(assemble_dbar(DomainSpec.ball(1, 2.0), 1, 0, 1, 10)).value
    assert b == pytest.approx(2 * a, rel=1e-9)
