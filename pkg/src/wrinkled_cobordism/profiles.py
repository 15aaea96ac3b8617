"""Quintic smoothstep and the cutoff profiles built from it (all C^2)."""
from __future__ import annotations

import numpy as np

# max of smoothstep'(x) on [0, 1], attained at x = 1/2
SMOOTHSTEP_SLOPE = 1.875


def smoothstep(x):
    x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
    return x * x * x * (10.0 + x * (-15.0 + 6.0 * x))


def smoothstep_deriv(x):
    x = np.asarray(x, dtype=float)
    inside = (x > 0.0) & (x < 1.0)
    xc = np.clip(x, 0.0, 1.0)
    return np.where(inside, 30.0 * xc * xc * (1.0 - xc) ** 2, 0.0)


def ramp(x, lo: float, hi: float):
    """0 below ``lo``, 1 above ``hi``, smoothstep in between."""
    return smoothstep((np.asarray(x, dtype=float) - lo) / (hi - lo))


def ramp_deriv(x, lo: float, hi: float):
    return smoothstep_deriv((np.asarray(x, dtype=float) - lo) / (hi - lo)) / (hi - lo)

