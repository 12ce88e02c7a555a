from __future__ import annotations

import math

import numpy as np
import pytest

from dbarlab.geometry import AnnulusSpec, DomainSpec, to_real
from dbarlab.quadrature import ShellScheme, boundary_scheme, quadrature, sphere_rule, torus_rule, volume_scheme


@pytest.mark.parametrize("n", [2, 3])
def test_sphere_rule_total_area(n):
    _, w = sphere_rule(n, 8, torus_rule(n, 6))
    assert w.sum() == pytest.approx(2 * math.pi**n / math.factorial(n - 1), rel=1e-13)


def test_lattice_torus_rule_shape():
    t = torus_rule(3, 67, "lattice")
    assert t.shape == (67, 3)
    assert np.all((t >= 0) & (t < 2 * math.pi))


@pytest.mark.parametrize(
    "axes,volume",
    [((1.0, 0.7), math.pi**2 / 2 * 0.49), ((1.0, 0.8, 0.6), math.pi**3 / 6 * 0.64 * 0.36)],
)
def test_boundary_rule_divergence_theorem(axes, volume):
    # the flux of the position field x equals dim * volume
    d = DomainSpec.ellipsoid(list(axes))
    b = boundary_scheme(d, 16)
    flux = np.sum(np.sum(to_real(b.points) * b.normals, axis=-1) * b.weights)
    assert flux == pytest.approx(2 * d.n * volume, rel=1e-5)


def test_volume_rule_converges_for_the_ball():
    exact = math.pi**2 / 2
    e16 = abs(volume_scheme(DomainSpec.ball(2), 16).total() - exact)
    e32 = abs(volume_scheme(DomainSpec.ball(2), 32).total() - exact)
    assert e32 < e16 / 4
    assert e32 < 1e-4


def test_annulus_volume_and_hole_normals():
    a = AnnulusSpec.balls(2, 1.0, 0.4)
    q = quadrature(a, 24)
    assert q.volume.total() == pytest.approx(math.pi**2 / 2 * (1 - 0.4**4), rel=2e-3)
    hole = q.boundary[1]
    # normals on the hole point out of the annulus, toward the origin
    assert np.all(np.sum(to_real(hole.points) * hole.normals, axis=-1) < 0)


def test_shell_scheme_volume_second_order():
    exact = math.pi**2 / 2 * (1.1**4 - 1)
    err = [abs(ShellScheme(DomainSpec.ball(2), "outside", 0.1, R, 16).volume() - exact) for R in (4, 8)]
    assert err[0] / err[1] == pytest.approx(4.0, rel=0.05)


def test_shell_scheme_rejects_bad_side():
    with pytest.raises(ValueError):
        ShellScheme(DomainSpec.ball(2), "sideways", 0.1, 4)


def test_unit_disc_area():
    assert volume_scheme(DomainSpec.ball(1), 64).total() == pytest.approx(math.pi, rel=1e-2)


def test_unit_sphere_area_in_c2():
    assert boundary_scheme(DomainSpec.ball(2), 8).weights.sum() == pytest.approx(2 * math.pi**2, rel=5e-3)
