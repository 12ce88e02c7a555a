from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dbarlab.errors import ShellTooThin
from dbarlab.geometry import (
    AnnulusSpec,
    DomainSpec,
    boundary_samples,
    cr_frame,
    jet,
    mollify,
    project,
    shell_samples,
    signed_distance,
    to_complex,
    to_real,
)

# nearest-point distance for the ellipse x^2 + (y/0.7)^2 = 1 from (0.5, 0),
# found by bounded scalar minimization over the boundary angle
ELLIPSE_DISTANCE = 0.4998038831067916


def test_real_complex_round_trip():
    z = np.array([[1 + 2j, -0.5 + 0.25j]])
    x = to_real(z)
    assert x.shape == (1, 4)
    np.testing.assert_allclose(to_complex(x), z)


def test_ball_signed_distance_is_radial():
    d = DomainSpec.ball(2, 1.5)
    z = np.array([[0.3, 0.4j], [2.0, 0.0], [0.0, 1.5]])
    np.testing.assert_allclose(signed_distance(d, z), [0.5 - 1.5, 0.5, 0.0], atol=1e-15)


def test_ellipsoid_distance_matches_independent_minimizer():
    d = DomainSpec.ellipsoid([1.0, 0.7])
    assert signed_distance(d, np.array([0.5, 0.0])) == pytest.approx(-ELLIPSE_DISTANCE, abs=1e-10)
    assert signed_distance(d, np.array([0.0, 0.5j])) == pytest.approx(-0.2, abs=1e-12)
    assert signed_distance(d, np.array([1.3, 0.0])) == pytest.approx(0.3, abs=1e-12)


def test_projection_lands_on_boundary():
    d = DomainSpec.ellipsoid([1.0, 0.8, 0.6])
    z = shell_samples(d, 50, seed=2)
    rho, foot, normal = project(d, z)
    np.testing.assert_allclose(signed_distance(d, to_complex(foot)), 0.0, atol=1e-10)
    np.testing.assert_allclose(np.linalg.norm(to_real(z) - foot, axis=-1), np.abs(rho), atol=1e-12)
    np.testing.assert_allclose(np.linalg.norm(normal, axis=-1), 1.0, atol=1e-12)


@pytest.mark.parametrize("n,r", [(2, 1.0), (3, 2.0), (2, 0.4)])
def test_ball_frame_closed_forms(n, r):
    d = DomainSpec.ball(n, r)
    fr = cr_frame(jet(d, boundary_samples(d, 16, seed=1), 2))
    np.testing.assert_allclose(fr.tau, (n - 1) / (2 * r), atol=1e-12)
    np.testing.assert_allclose(fr.eta_squared, 0.0, atol=1e-20)


def test_ellipsoid_eta_is_positive_somewhere():
    d = DomainSpec.ellipsoid([1.0, 0.7])
    fr = cr_frame(jet(d, boundary_samples(d, 200, seed=0), 2))
    assert np.max(fr.eta_squared) > 1e-3
    assert np.min(fr.eta_squared) >= -1e-14


@settings(max_examples=25, deadline=None)
@given(st.floats(0.3, 2.0), st.floats(0.3, 2.0), st.integers(0, 2**31 - 1))
def test_gradient_has_unit_length_in_the_shell(a, b, seed):
    d = DomainSpec.ellipsoid([a, b])
    j = jet(d, shell_samples(d, 20, seed=seed), 2)
    np.testing.assert_allclose(j.gradient_norm(), 1.0, atol=1e-8)
    np.testing.assert_allclose(np.sum(np.abs(j.d) ** 2, axis=-1), 0.25, atol=1e-8)


def test_shell_samples_stay_in_shell():
    d = DomainSpec.ellipsoid([1.0, 0.7])
    for side, sign in (("inside", -1), ("outside", 1)):
        rho = signed_distance(d, shell_samples(d, 100, seed=3, side=side))
        assert np.all(sign * rho >= 0)
        assert np.all(np.abs(rho) < d.shell_thickness)


def test_annulus_membership_and_gap():
    a = AnnulusSpec.balls(2, 1.0, 0.4)
    assert a.gap == pytest.approx(0.6)
    assert a.diameter == pytest.approx(2.0)
    np.testing.assert_array_equal(a.contains(np.array([[0.7, 0], [0.1, 0], [1.2, 0]])), [True, False, False])


def test_annulus_rejects_hole_outside_envelope():
    with pytest.raises(ValueError):
        AnnulusSpec(DomainSpec.ball(2, 1.0), DomainSpec.ball(2, 0.5, center=[0.8, 0]))


def test_mollified_ball_is_close_to_the_ball():
    d = DomainSpec.ball(2, 1.0)
    m = mollify(d, 6)
    z = shell_samples(d, 40, seed=5, fraction=0.5)
    assert np.max(np.abs(signed_distance(m, z) - signed_distance(d, z))) <= 1.0 / 6


def test_mollifier_must_fit_in_the_shell():
    with pytest.raises(ShellTooThin):
        mollify(DomainSpec.ball(2, 1.0), 3)


def test_signed_distance_examples():
    assert signed_distance(DomainSpec.ball(3), np.zeros(3)) == pytest.approx(-1.0)
    assert signed_distance(DomainSpec.ball(3), np.array([0.5, 0, 0])) == pytest.approx(-0.5)
    assert signed_distance(DomainSpec.ball(3), np.array([2.0, 0, 0])) == pytest.approx(1.0)
    assert signed_distance(DomainSpec.ellipsoid([2.0, 1.0]), np.zeros(2)) == pytest.approx(-1.0)


def test_ball_jet_at_a_boundary_point():
    j = jet(DomainSpec.ball(2), np.array([[1.0 + 0j, 0j]]), 2)
    assert j.d[0, 0] == pytest.approx(0.5)
    assert j.ddb[0, 0, 0] == pytest.approx(0.25)
    assert j.ddb[0, 1, 1] == pytest.approx(0.5)


def test_jet_conjugate_symmetry():
    d = DomainSpec.ellipsoid([1.0, 0.8, 0.6])
    j = jet(d, shell_samples(d, 10, seed=4), 2)
    np.testing.assert_allclose(j.ddb, np.conj(np.swapaxes(j.ddb, -1, -2)), atol=1e-12)
    np.testing.assert_allclose(j.dd, np.swapaxes(j.dd, -1, -2), atol=1e-12)


def test_ball_mu_is_radial():
    d = DomainSpec.ball(3)
    z = shell_samples(d, 8, seed=1)
    fr = cr_frame(jet(d, z, 2))
    r2 = np.sum(np.abs(z) ** 2, axis=-1)[:, None]
    np.testing.assert_allclose(fr.mu, 2 * np.conj(z) / r2, atol=1e-12)


def test_mollified_ball_gradient_converges():
    d = DomainSpec.ball(2, 1.0, shell_thickness=0.4)
    z = shell_samples(d, 20, seed=6, fraction=0.1)
    errs = []
    for j in (8, 16):
        g_m = jet(mollify(d, j), z, 2).d
        g = jet(d, z, 2).d
        errs.append(np.max(np.abs(g_m - g)))
    assert errs[1] < errs[0]
    assert errs[1] <= 2.0 / 16
