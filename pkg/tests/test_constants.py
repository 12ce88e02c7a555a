from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dbarlab.constants import (
    build_cutoff,
    compute_constants,
    constant_annulus_l2,
    constant_hormander,
    constant_mixed,
    estimate_B,
    mixed_objective,
    smoothstep,
    smoothstep_slope,
)
from dbarlab.errors import MarginOrder, MissingInputs, QTooSmall
from dbarlab.geometry import AnnulusSpec, DomainSpec, mollify, to_complex, to_real


def test_mixed_constant_hand_value():
    t, c = constant_mixed(0.0, 0.0, 1.0, 2)
    assert t == pytest.approx(0.5, abs=1e-15)
    assert c == pytest.approx(2 * math.sqrt(2) * math.exp(0.5), rel=1e-12)


def test_hormander_constant_unit_ball():
    assert constant_hormander(DomainSpec.ball(2, 1.0), 1) == pytest.approx(2 * math.sqrt(math.e), rel=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.0, 5.0), st.floats(0.0, 5.0), st.floats(0.3, 3.0), st.integers(2, 5))
def test_t_opt_is_the_grid_minimum(A, B, delta, q):
    t, c = constant_mixed(A, B, delta, q)
    lo = (4 * A * A + B) / (q - 1)
    assert t > lo
    grid = np.linspace(lo, 4 * t, 200001)[1:]
    vals = mixed_objective(grid, A, B, delta, q)
    assert np.min(vals) >= c * (1 - 1e-9)
    assert abs(grid[np.argmin(vals)] - t) <= 1e-3 * t + (grid[1] - grid[0])


def test_log_constant_stays_finite():
    t, logc = constant_mixed(200.0, 0.0, 2.0, 2, log=True)
    assert math.isfinite(logc) and logc > 700
    assert constant_mixed(200.0, 0.0, 2.0, 2)[1] == math.inf


def test_q_one_has_no_mixed_constant():
    with pytest.raises(QTooSmall):
        constant_mixed(1.0, 0.0, 1.0, 1)


def test_smoothstep_endpoints_and_max_slope():
    x = np.linspace(0, 1, 100001)
    assert smoothstep(np.array([0.0, 1.0])).tolist() == [0.0, 1.0]
    assert np.max(smoothstep_slope(x)) == pytest.approx(15 / 8, rel=1e-9)
    np.testing.assert_allclose(np.gradient(smoothstep(x), x)[1:-1], smoothstep_slope(x)[1:-1], atol=1e-8)


def test_cutoff_levels_and_gradient_bound():
    a = AnnulusSpec.balls(2, 1.0, 0.4)
    chi = build_cutoff(a, 0.04, 0.12)
    z = np.array([[0.3, 0.0], [0.43, 0.0], [0.6, 0.0]])
    np.testing.assert_allclose(chi(z), [1.0, smoothstep((0.12 - 0.03) / 0.08), 0.0])
    rng = np.random.default_rng(0)
    pts = rng.normal(size=(500, 2)) * (0.3 + 0.3j)
    assert np.max(chi.gradient_norm(pts)) <= chi.A * (1 + 1e-12)


def test_cutoff_dbar_matches_finite_differences():
    chi = build_cutoff(AnnulusSpec.balls(2, 1.0, 0.4), 0.04, 0.12)
    z = np.array([[0.33 + 0.2j, 0.1 - 0.2j]])
    x = to_real(z)[0]
    h = 1e-6
    g = np.array([float(chi(to_complex(x + h * e)) - chi(to_complex(x - h * e))) / (2 * h) for e in np.eye(4)])
    expect = 0.5 * (g[0::2] + 1j * g[1::2])
    np.testing.assert_allclose(chi.dbar(z)[0], expect, atol=1e-7)


@pytest.mark.parametrize("inner,outer", [(0.1, 0.05), (0.0, 0.1), (0.05, 0.5)])
def test_cutoff_margin_order(inner, outer):
    with pytest.raises(MarginOrder):
        build_cutoff(AnnulusSpec.balls(2, 1.0, 0.4), inner, outer)


def test_B_is_zero_for_a_ball_hole_and_positive_for_an_ellipsoid():
    assert estimate_B(AnnulusSpec.balls(2, 1.0, 0.4)).inflated == 0.0
    hole = DomainSpec.ellipsoid([0.4, 0.28])
    b = estimate_B(AnnulusSpec(DomainSpec.ball(2, 1.0), hole), samples=500)
    assert b.raw > 0 and b.inflated == pytest.approx(1.1 * b.raw)


def test_annulus_constant_requires_inputs():
    with pytest.raises(MissingInputs, match="E"):
        constant_annulus_l2(2.0, 1, K=1.0, E=None, C_w1=1.0)
    assert constant_annulus_l2(2.0, 1, 1.0, 2.0, 3.0) == pytest.approx(2 * math.sqrt(math.e) + 6.0)


def test_bundle_rows_carry_anchors():
    b = compute_constants(AnnulusSpec.balls(2, 1.0, 0.4), 0.04, 0.12, K=1.0, E=1.0, C_w1=1.0)
    rows = b.rows()
    assert all(r["anchor"] for r in rows)
    assert {r["quantity"] for r in rows} >= {"t_opt", "C_mix", "C_hormander", "C_annulus", "A", "B", "delta"}
    assert b.A == pytest.approx(15 / 8 / 0.08)


def test_cutoff_slope_bound_for_wide_margins():
    chi = build_cutoff(AnnulusSpec.balls(2, 1.0, 0.4), 0.05, 0.15)
    assert chi.A == pytest.approx(18.75)


def test_cutoff_is_flat_away_from_its_layer():
    chi = build_cutoff(AnnulusSpec.balls(2, 1.0, 0.4), 0.04, 0.12)
    z = np.array([[0.0, 0.0], [0.2, 0.1j], [0.8, 0.0], [0.3j, 0.6]])
    np.testing.assert_allclose(chi(z), [1.0, 1.0, 0.0, 0.0])
    np.testing.assert_allclose(chi.gradient_norm(z), 0.0, atol=1e-15)


def test_B_estimate_is_stable_under_dense_sampling():
    a = AnnulusSpec(DomainSpec.ball(2, 1.0), DomainSpec.ellipsoid([0.4, 0.28]))
    coarse = estimate_B(a, samples=4000).raw
    dense = estimate_B(a, samples=40000, seed=1).raw
    assert coarse == pytest.approx(dense, rel=5e-2)


def test_B_of_a_mollified_ball_is_small():
    assert estimate_B(mollify(DomainSpec.ball(2, 1.0, shell_thickness=0.4), 8), samples=200).raw <= 1e-3


def test_mixed_constant_monotonicity():
    base = constant_mixed(2.0, 1.0, 1.0, 2)[1]
    assert constant_mixed(2.0, 3.0, 1.0, 2)[1] > base
    assert constant_mixed(2.0, 1.0, 1.0, 3)[1] < base


def test_hormander_scaling():
    e = DomainSpec.ellipsoid([2.0, 1.0])
    assert e.diameter == pytest.approx(4.0)
    c1 = constant_hormander(e, 1)
    for q in (2, 4):
        assert constant_hormander(e, q) == pytest.approx(c1 / math.sqrt(q))


def test_annulus_constant_limits():
    a = AnnulusSpec.balls(2, 1.0, 0.4)
    assert constant_annulus_l2(a, 1, 0.0, 0.0, 5.0) == pytest.approx(constant_hormander(DomainSpec.ball(2), 1))
    c1 = constant_annulus_l2(a, 1, 1.0, 1.0, 2.0)
    c2 = constant_annulus_l2(a, 1, 1.0, 2.0, 2.0)
    assert c2 - c1 == pytest.approx(2.0)


def test_bundle_in_three_dimensions_is_finite():
    b = compute_constants(AnnulusSpec.balls(3, 1.0, 0.4), 0.04, 0.12, K=1.0, E=1.0, C_w1=1.0)
    assert all(math.isfinite(float(r["value"])) for r in b.rows() if r["quantity"] != "C_mix")
