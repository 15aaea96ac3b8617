import numpy as np
import pytest

from wrinkled_cobordism.profiles import SMOOTHSTEP_SLOPE, ramp, ramp_deriv, smoothstep, smoothstep_deriv


def test_smoothstep_endpoints_and_symmetry():
    assert smoothstep(0.0) == 0.0 and smoothstep(1.0) == 1.0 and smoothstep(0.5) == 0.5
    x = np.linspace(0, 1, 101)
    np.testing.assert_allclose(smoothstep(x) + smoothstep(1 - x), 1.0, atol=1e-15)
    assert np.all(smoothstep(np.array([-3.0, 4.0])) == [0.0, 1.0])


def test_smoothstep_derivative_and_peak():
    x = np.linspace(0.01, 0.99, 99)
    h = 1e-6
    np.testing.assert_allclose(smoothstep_deriv(x), (smoothstep(x + h) - smoothstep(x - h)) / (2 * h), atol=1e-8)
    assert np.max(smoothstep_deriv(np.linspace(0, 1, 10001))) == pytest.approx(SMOOTHSTEP_SLOPE)
    assert smoothstep_deriv(0.0) == 0.0 and smoothstep_deriv(1.0) == 0.0


def test_ramp_rescales():
    assert ramp(2.0, 1.0, 3.0) == 0.5
    assert ramp_deriv(2.0, 1.0, 3.0) == pytest.approx(SMOOTHSTEP_SLOPE / 2)
    assert ramp(0.0, 1.0, 3.0) == 0.0 and ramp(5.0, 1.0, 3.0) == 1.0
