from __future__ import annotations

import math

import numpy as np
import pytest

from dbarlab.errors import BoundaryConditionViolated, NotClosed, UnsupportedSupport
from dbarlab.forms import Form, WeightField
from dbarlab.geometry import AnnulusSpec, DomainSpec
from dbarlab.identities import (
    ResidualReport,
    TestForm,
    martinelli_form,
    rho_relations,
    run_identity,
    verify_mkh,
    verify_pairing,
    verify_pointwise,
    verify_pseudoconcave,
)

TestForm.__test__ = False  # not a pytest class

ELLIPSOID = DomainSpec.ellipsoid([1.0, 0.7])
WEIGHT = WeightField.quadratic(0.3)


def _form(p, q, bc="free", side="outside", seed=0, domain=ELLIPSOID):
    return TestForm.random(domain.n, p, q, 0.5 * domain.shell_thickness, np.random.default_rng(seed), bc=bc, side=side)


@pytest.mark.parametrize("domain", [DomainSpec.ball(2), ELLIPSOID, DomainSpec.ellipsoid([1.0, 0.8, 0.6])])
def test_rho_relations(domain):
    reps = rho_relations(domain, 60, seed=1)
    assert reps and all(r.passed for r in reps)


def test_pointwise_suite_on_the_ball_is_at_rounding_level():
    reps = verify_pointwise(DomainSpec.ball(2), WEIGHT, 30, seed=0)
    for r in reps:
        tol = 1e-6 if r.identity.endswith("_fd") else 1e-12
        assert r.rel_residual <= tol, r.identity


def test_pointwise_suite_on_the_ellipsoid():
    assert all(r.passed for r in verify_pointwise(ELLIPSOID, WEIGHT, 30, seed=2))


@pytest.mark.parametrize(
    "name,p,q,bc,side",
    [
        ("int_by_parts", 0, 0, "free", "outside"),
        ("gradient_identity", 0, 1, "free", "outside"),
        ("mkh", 0, 1, "dbar_neumann", "inside"),
        ("pseudoconcave", 0, 1, "dbar_neumann", "outside"),
    ],
)
def test_integral_identities_at_low_resolution(name, p, q, bc, side):
    (r,) = run_identity(name, ELLIPSOID, WEIGHT, [_form(p, q, bc, side)], 16)
    assert r.passed
    if r.slope is not None:
        assert r.slope >= 1.8


def test_mkh_needs_the_boundary_condition():
    with pytest.raises(BoundaryConditionViolated):
        verify_mkh(ELLIPSOID, WEIGHT, _form(0, 1, "free", "inside"), 8)


def test_identity_rejects_the_wrong_side():
    with pytest.raises(UnsupportedSupport):
        verify_mkh(ELLIPSOID, WEIGHT, _form(0, 1, "dbar_neumann", "outside"), 8)


def test_dropping_eta_breaks_the_pseudoconcave_identity_on_an_ellipsoid():
    u = _form(0, 1, "dbar_neumann", "outside", seed=5)
    r = verify_pseudoconcave(ELLIPSOID, WEIGHT, u, 16, drop_eta=True)
    assert not r.passed
    assert r.abs_residual > 100 * max(r.quadrature_estimate, 1e-12)


def test_dropping_eta_is_harmless_on_a_ball():
    ball = DomainSpec.ball(2)
    u = _form(0, 1, "dbar_neumann", "outside", seed=5, domain=ball)
    assert verify_pseudoconcave(ball, WEIGHT, u, 16, drop_eta=True).passed


def test_martinelli_pairing_value():
    # the kernel integrates to (2 pi)^2 against dz1 ^ dz2 around the origin
    a = AnnulusSpec.balls(2, 1.0, 0.4)
    f = Form.from_fields(2, 2, 0, {((0, 1), ()): lambda zs, zbs: 1.0 + 0 * zs[0]})
    r = verify_pairing(a, martinelli_form(2), f, resolution=16)
    assert r.passed
    assert abs(r.rhs) == pytest.approx(4 * math.pi**2, rel=1e-4)


def test_pairing_rejects_non_closed_g():
    a = AnnulusSpec.balls(2, 1.0, 0.4)
    g = Form.from_fields(2, 0, 1, {((), (0,)): lambda zs, zbs: zs[1] * zbs[1]})
    f = Form.from_fields(2, 2, 0, {((0, 1), ()): lambda zs, zbs: 1.0 + 0 * zs[0]})
    with pytest.raises(NotClosed):
        verify_pairing(a, g, f, resolution=8)


def test_report_row_has_all_fields():
    (r,) = run_identity("int_by_parts", ELLIPSOID, WEIGHT, [_form(0, 0)], 8)
    row = r.row()
    assert list(row) == list(ResidualReport.CSV_FIELDS)
    assert row["anchor"]


@pytest.mark.parametrize("name,side", [("gradient_identity", "outside"), ("mkh", "inside"), ("pseudoconcave", "outside")])
def test_zero_form_gives_zero_on_both_sides(name, side):
    (r,) = run_identity(name, ELLIPSOID, WEIGHT, [TestForm.zero(2, 0, 1, 0.05, side)], 8)
    assert r.lhs == 0 and r.rhs == 0
    assert r.passed


def test_pseudoconcave_ball_hole_with_concave_weight():
    ball = DomainSpec.ball(3, 0.4)
    u = _form(0, 2, "dbar_neumann", "outside", seed=3, domain=ball)
    (r,) = run_identity("pseudoconcave", ball, WeightField.quadratic(-0.5), [u], 8)
    assert r.passed


def test_three_dimensional_ellipsoid_identities():
    d = DomainSpec.ellipsoid([1.0, 0.8, 0.6])
    for name, p, q, bc in (("gradient_identity", 1, 1, "free"), ("pseudoconcave", 0, 2, "dbar_neumann")):
        (r,) = run_identity(name, d, WEIGHT, [_form(p, q, bc, "outside", seed=4, domain=d)], 8)
        assert r.passed, name
