import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wrinkled_cobordism.contact import (ContactPoint, ScalarField, SymplectizationPoint, alpha_eval,
                                        conformal_contact_flow, contact_field_from, contact_vector_field,
                                        dalpha_eval, fd_gradient, flow, liouville_eval, reeb_field,
                                        symp_form_eval)

coord = st.floats(-3, 3, allow_nan=False)


def vec(k):
    return st.lists(coord, min_size=k, max_size=k).map(np.array)


def test_contact_point_roundtrip_and_validation():
    p = ContactPoint((1.0, 2.0), (3.0, 4.0), 5.0)
    assert p.n == 2
    assert ContactPoint.from_coords(p.coords) == p
    with pytest.raises(ValueError):
        ContactPoint((1.0,), (1.0, 2.0), 0.0)
    with pytest.raises(ValueError):
        ContactPoint((math.nan,), (0.0,), 0.0)
    assert SymplectizationPoint(p, 0.5).coords[-1] == 0.5


def test_alpha_on_coordinate_vectors():
    p = np.array([0.0, 0.0, 2.0, -1.0, 0.0])
    e = np.eye(5)
    np.testing.assert_array_equal(alpha_eval(p, e), [-2.0, 1.0, 0.0, 0.0, 1.0])


def test_dalpha_is_standard_pairing():
    e = np.eye(5)
    assert dalpha_eval(e[0], e[2]) == 1.0
    assert dalpha_eval(e[2], e[0]) == -1.0
    assert dalpha_eval(e[0], e[3]) == 0.0


def test_dimension_mismatch_raises():
    with pytest.raises(ValueError):
        alpha_eval(np.zeros(5), np.zeros(3))
    with pytest.raises(ValueError):
        alpha_eval(np.zeros(4), np.zeros(4))


@settings(max_examples=40, deadline=None)
@given(vec(6), vec(6), vec(6))
def test_symp_form_is_exterior_derivative_of_liouville(P, W1, W2):
    # for constant fields d lambda(W1, W2) = W1(lambda(W2)) - W2(lambda(W1))
    h = 1e-5
    d1 = (liouville_eval(P + h * W1, W2) - liouville_eval(P - h * W1, W2)) / (2 * h)
    d2 = (liouville_eval(P + h * W2, W1) - liouville_eval(P - h * W2, W1)) / (2 * h)
    ref = d1 - d2
    assert symp_form_eval(P, W1, W2) == pytest.approx(ref, rel=1e-6, abs=1e-6 * math.exp(P[-1]))


def test_symp_form_overflow_guard():
    P = np.zeros(6)
    P[-1] = 800.0
    with pytest.raises(OverflowError):
        symp_form_eval(P, np.eye(6)[0], np.eye(6)[1])


@settings(max_examples=40, deadline=None)
@given(vec(5), vec(5), st.floats(-2, 2))
def test_contact_field_satisfies_alpha_equals_h(p, g, h):
    X = contact_field_from(p, np.asarray(h), g)
    assert alpha_eval(p, X) == pytest.approx(h, abs=1e-12)


def test_reeb_field_is_contact_field_of_one():
    p = np.array([0.3, -0.2, 1.0, 2.0, 0.5])
    H = ScalarField(lambda q: np.ones(q.shape[:-1]), lambda q: np.zeros(q.shape))
    np.testing.assert_array_equal(contact_vector_field(H, p), reeb_field(p))


def test_fd_gradient_of_quadratic():
    f = lambda q: np.sum(q * q, axis=-1) + q[..., 0] * q[..., 4]
    p = np.array([0.5, -1.0, 2.0, 0.1, 3.0])
    ref = 2 * p
    ref[0] += p[4]
    ref[4] += p[0]
    np.testing.assert_allclose(fd_gradient(f, p), ref, rtol=1e-8)
    field = ScalarField(f)
    np.testing.assert_allclose(field.gradient(p), ref, rtol=1e-8)


def test_flow_rk4_order_four_on_linear_field():
    field = lambda t, y: -y
    exact = math.exp(-1.0)
    errs = [abs(flow(field, np.array([1.0, 0.0, 0.0]), 0.0, 1.0, h).state[0] - exact) for h in (0.1, 0.05, 0.025)]
    slope = np.polyfit(np.log([0.1, 0.05, 0.025]), np.log(errs), 1)[0]
    assert 3.8 < slope < 4.2


def test_flow_truncates_escaping_states():
    field = lambda t, y: np.ones_like(y) * np.sign(y[..., :1] + 1e-300)
    res = flow(field, np.array([[0.0, 0.0, 0.0], [-0.5, 0.0, 0.0]]), 0.0, 10.0, 0.1, bound=3.0)
    assert res.truncated.tolist() == [True, True]
    assert np.all(np.abs(res.state) <= 3.0)
    assert res.n_truncated == 2


def test_conformal_exponent_of_dilation():
    # H = z: y and z scale by e^s, so psi^* alpha = e^s alpha
    H = ScalarField(lambda q: q[..., -1], lambda q: np.eye(5)[4] * np.ones(q.shape))
    p = np.array([0.2, 0.1, 0.5, -0.3, 0.7])
    img, h = conformal_contact_flow(H, p, 0.8, step=0.01)
    assert h == pytest.approx(0.8, abs=1e-12)
    np.testing.assert_allclose(img[2:], p[2:] * math.exp(0.8), rtol=1e-9)
    np.testing.assert_allclose(img[:2], p[:2], atol=1e-15)
