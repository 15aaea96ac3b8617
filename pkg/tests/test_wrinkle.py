import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wrinkled_cobordism import wrinkle
from wrinkled_cobordism.contact import alpha_eval

U = st.floats(-2, 2)
X2 = st.floats(-1.5, 1.5)
T = st.floats(-1, 1)


def test_chart_validation():
    assert wrinkle.WrinkleChart().birth_death == (-0.5, 0.5)
    with pytest.raises(ValueError):
        wrinkle.WrinkleChart(T=0.0)
    with pytest.raises(ValueError):
        wrinkle.WrinkleChart(n=1)
    with pytest.raises(ValueError):
        wrinkle.WrinkleChart(birth_death=(-2.0, 0.0))


def test_static_front_values():
    # at u = 0 the front sits on z = 0, x1 = 0 for every v
    F = wrinkle.front_static(0.0, [0.3])
    np.testing.assert_allclose(F, [0.3, 0.0, 0.0])
    F = wrinkle.front_static(1.0, [0.0])
    np.testing.assert_allclose(F, [0.0, -2.0, 1 / 5 - 2 / 3 + 1])


def test_family_front_at_fold():
    z, x1, x2 = wrinkle.front_family(1.0, 0.0, 1.0)
    assert (x1, z) == pytest.approx((-2.0, 8 / 15))


@settings(max_examples=60, deadline=None)
@given(U, X2, T)
def test_lift_is_legendrian(u, x2, t):
    P = wrinkle.lift_family(u, x2, t)
    J = wrinkle.jacobian(u, x2, t)
    assert np.max(np.abs(alpha_eval(P, J))) < 1e-10 * (1 + np.max(np.abs(J)) * (1 + np.max(np.abs(P))))


@settings(max_examples=30, deadline=None)
@given(U, X2, T)
def test_jacobian_matches_central_differences(u, x2, t):
    h = 1e-6
    J = wrinkle.jacobian(u, x2, t)
    du = (wrinkle.lift_family(u + h, x2, t) - wrinkle.lift_family(u - h, x2, t)) / (2 * h)
    dx = (wrinkle.lift_family(u, x2 + h, t) - wrinkle.lift_family(u, x2 - h, t)) / (2 * h)
    np.testing.assert_allclose(J[0], du, atol=1e-6 * (1 + np.abs(du).max()))
    np.testing.assert_allclose(J[1], dx, atol=1e-6 * (1 + np.abs(dx).max()))


def test_isotopy_field_is_time_derivative():
    u, x2, t, h = 0.7, -0.4, 0.3, 1e-6
    d = (wrinkle.lift_family(u, x2, t + h) - wrinkle.lift_family(u, x2, t - h)) / (2 * h)
    np.testing.assert_allclose(wrinkle.isotopy_field_Xt(u, x2, t), d, atol=1e-8)


def test_slow_coordinates_are_inert():
    P = wrinkle.lift_family(0.5, 0.2, 0.1, n=3, slow=[0.7])
    assert P.shape == (7,)
    assert P[2] == 0.7 and P[5] == 0.0
    J = wrinkle.jacobian(0.5, 0.2, 0.1, n=3)
    assert np.max(np.abs(alpha_eval(P, J))) < 1e-12


@settings(max_examples=60, deadline=None)
@given(U, X2, T)
def test_alpha_xt_forms_agree(u, x2, t):
    a = wrinkle.alpha_Xt(u, x2, t)
    assert wrinkle.alpha_Xt_front(u, x2, t) == pytest.approx(a, abs=1e-12 * (1 + abs(a)))
    assert wrinkle.alpha_Xt_composed(u, x2, t) == pytest.approx(a, abs=1e-12 * (1 + abs(a)))
    if abs(x2 * (t - x2 * x2)) >= 1e-6:
        y2 = wrinkle.lift_family(u, x2, t)[3]
        assert wrinkle.alpha_Xt_from_y2(x2, y2) == pytest.approx(a, abs=1e-9 * (1 + abs(a)))


@settings(max_examples=60, deadline=None)
@given(U.filter(lambda u: abs(u) > 1e-3), X2, T)
def test_u_inversions(u, x2, t):
    P = wrinkle.lift_family(u, x2, t)
    assert wrinkle.invert_u_from_y1(P[2], x2, t, np.sign(u)) == pytest.approx(u, rel=1e-8)
    if abs(x2 * (t - x2 * x2)) >= 1e-6:
        assert wrinkle.invert_u_from_y2(P[0], x2, P[3], t) == pytest.approx(u, rel=1e-6, abs=1e-8)


def test_y1_inversion_outside_range_is_nan():
    assert math.isnan(float(wrinkle.invert_u_from_y1(-5.0, 0.0, 0.0, 1.0)))


def test_singular_locus_at_t_one():
    pts = wrinkle.singular_locus(1.0)
    assert len(pts) == 2
    assert (pts[0].u, pts[0].x2) == pytest.approx((0.0, -1.0), abs=1e-6)
    assert (pts[1].u, pts[1].x2) == pytest.approx((0.0, 1.0), abs=1e-6)


def test_no_singular_points_before_birth():
    assert wrinkle.singular_locus(-0.5) == []
    assert wrinkle.singular_locus(0.0) == []


def test_rank_drop_is_genuine():
    sv = wrinkle.singular_values(0.0, 1.0, 1.0)
    assert sv[-1] < 1e-12
    assert wrinkle.singular_values(0.5, 0.5, 1.0)[-1] > 1e-2


def test_nested_validation():
    ok = wrinkle.NestedConfig((wrinkle.NestedChart((0.0, 0.0), 0.05, 1.0),
                               wrinkle.NestedChart((0.1, 0.0), 0.1, 0.5)))
    assert wrinkle.validate_nested(ok).ok
    bad = wrinkle.NestedConfig((wrinkle.NestedChart((0.0, 0.0), 0.3, 1.0),
                                wrinkle.NestedChart((0.5, 0.0), 0.1, 0.2)))
    res = wrinkle.validate_nested(bad)
    assert not res.ok and res.pair == (0, 1) and res.margin < 0
    with pytest.raises(ValueError):
        wrinkle.validate_nested(wrinkle.NestedConfig(()))


def test_sample_grid_shapes():
    U_, X_, P, J = wrinkle.sample_grid(0.5, size=11)
    assert U_.shape == (11, 11) and P.shape == (11, 11, 5) and J.shape == (11, 11, 2, 5)
