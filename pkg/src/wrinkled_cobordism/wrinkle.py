"""Wrinkled fronts and the one-parameter wrinkle family with its Legendrian lift.

The family is parametrised by ``(u, x2)`` at family time ``t``; with
``s = t - x2**2`` the front is

    x1 = u^3 - 3 u s,    z = u^5/5 - (2/3) u^3 s + u s^2,

and the Legendrian lift adds ``y1 = (u^2 - s)/3`` and
``y2 = -(2/3) u^3 x2 - 2 u x2 s``.  For ``n > 2`` the remaining coordinates
``x_3..x_n`` are inert parameters with ``y_i = 0``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .contact import alpha_eval, dim_of


@dataclass(frozen=True)
class WrinkleChart:
    t: float = 0.0
    n: int = 2
    T: float = 1.0
    birth_death: Optional[tuple] = None

    def __post_init__(self):
        if self.T <= 0:
            raise ValueError("T must be positive")
        if self.n < 2:
            raise ValueError("n must be at least 2")
        if self.birth_death is None:
            object.__setattr__(self, "birth_death", (-self.T / 2, self.T / 2))
        t0, t1 = self.birth_death
        if not (-self.T <= t0 <= t1 <= self.T):
            raise ValueError(f"wrinkle lifetime {self.birth_death} must lie in [-T, T]")


@dataclass(frozen=True)
class ParamPoint:
    u: float
    v: tuple = (0.0,)

    @property
    def x2(self) -> float:
        return self.v[0]


def front_static(u, v):
    """Static wrinkle ``(v, x1, z)`` with ``|v|^2`` in place of ``x2^2``; ``v`` has shape (..., n-1)."""
    u = np.asarray(u, dtype=float)
    v = np.atleast_1d(np.asarray(v, dtype=float))
    w = 1.0 - np.sum(v * v, axis=-1)
    x1 = u ** 3 - 3.0 * u * w
    z = u ** 5 / 5.0 - (2.0 / 3.0) * u ** 3 * w + u * w * w
    u_b = np.broadcast_to(u, x1.shape)
    v_b = np.broadcast_to(v, u_b.shape + v.shape[-1:])
    return np.concatenate([v_b, x1[..., None], z[..., None]], axis=-1)


def front_family(u, x2, t):
    """Front ``(z, x1, x2)`` of the wrinkle family at time ``t``."""
    u, x2, t = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (u, x2, t)))
    s = t - x2 * x2
    x1 = u ** 3 - 3.0 * u * s
    z = u ** 5 / 5.0 - (2.0 / 3.0) * u ** 3 * s + u * s * s
    return np.stack([z, x1, x2], axis=-1)


def _slow(slow, shape, n):
    if n == 2:
        return np.zeros(shape + (0,))
    if slow is None:
        return np.zeros(shape + (n - 2,))
    return np.broadcast_to(np.asarray(slow, dtype=float), shape + (n - 2,))


def lift_family(u, x2, t, n: int = 2, slow=None):
    """Legendrian lift as contact coordinates ``[x.., y.., z]`` of length 2n+1."""
    u, x2, t = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (u, x2, t)))
    s = t - x2 * x2
    out = np.zeros(u.shape + (2 * n + 1,))
    out[..., 0] = u ** 3 - 3.0 * u * s
    out[..., 1] = x2
    out[..., 2:n] = _slow(slow, u.shape, n)
    out[..., n] = (u * u - s) / 3.0
    out[..., n + 1] = -(2.0 / 3.0) * u ** 3 * x2 - 2.0 * u * x2 * s
    out[..., 2 * n] = u ** 5 / 5.0 - (2.0 / 3.0) * u ** 3 * s + u * s * s
    return out


def jacobian(u, x2, t, n: int = 2):
    """Rows are the partials of :func:`lift_family` in ``u``, ``x2`` and the inert slow coordinates."""
    u, x2, t = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (u, x2, t)))
    s = t - x2 * x2
    J = np.zeros(u.shape + (n, 2 * n + 1))
    J[..., 0, 0] = 3.0 * u * u - 3.0 * s
    J[..., 0, n] = 2.0 * u / 3.0
    J[..., 0, n + 1] = -2.0 * u * u * x2 - 2.0 * x2 * s
    J[..., 0, 2 * n] = (u * u - s) ** 2
    J[..., 1, 0] = 6.0 * u * x2
    J[..., 1, 1] = 1.0
    J[..., 1, n] = 2.0 * x2 / 3.0
    J[..., 1, n + 1] = -(2.0 / 3.0) * u ** 3 - 2.0 * u * s + 4.0 * u * x2 * x2
    J[..., 1, 2 * n] = (4.0 / 3.0) * u ** 3 * x2 - 4.0 * u * s * x2
    for i in range(2, n):
        J[..., i, i] = 1.0
    return J


def isotopy_field_Xt(u, x2, t, n: int = 2):
    """Time derivative of the lift at fixed parameters."""
    u, x2, t = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (u, x2, t)))
    s = t - x2 * x2
    X = np.zeros(u.shape + (2 * n + 1,))
    X[..., 0] = -3.0 * u
    X[..., n] = -1.0 / 3.0
    X[..., n + 1] = -2.0 * u * x2
    X[..., 2 * n] = -(2.0 / 3.0) * u ** 3 + 2.0 * u * s
    return X


def alpha_Xt(u, x2, t):
    u, x2, t = (np.asarray(a, dtype=float) for a in (u, x2, t))
    return u ** 3 / 3.0 + u * (t - x2 * x2)


def alpha_Xt_front(u, x2, t):
    """alpha(X_t) written through the front coordinate: x1/3 + 2 u (t - x2^2)."""
    u, x2, t = (np.asarray(a, dtype=float) for a in (u, x2, t))
    s = t - x2 * x2
    return (u ** 3 - 3.0 * u * s) / 3.0 + 2.0 * u * s


def alpha_Xt_composed(u, x2, t, n: int = 2):
    return alpha_eval(lift_family(u, x2, t, n), isotopy_field_Xt(u, x2, t, n))


def alpha_Xt_from_y2(x2, y2):
    """alpha(X_t) read off the lift coordinate y2 alone: -y2 / (2 x2), singular where x2 (t - x2^2) = 0."""
    x2, y2 = (np.asarray(a, dtype=float) for a in (x2, y2))
    return -y2 / (2.0 * x2)


def invert_u_from_y1(y1, x2, t, sign):
    """u = sign * sqrt(3 y1 - x2^2 + t); NaN where the radicand is negative."""
    r = 3.0 * np.asarray(y1, dtype=float) - np.asarray(x2, dtype=float) ** 2 + t
    with np.errstate(invalid="ignore"):
        return np.sign(sign) * np.sqrt(np.where(r >= 0, r, np.nan))


def invert_u_from_y2(x1, x2, y2, t):
    """u = -(y2 + (2/3) x1 x2) / (4 x2 (t - x2^2))."""
    x1, x2, y2 = (np.asarray(a, dtype=float) for a in (x1, x2, y2))
    return -(y2 + (2.0 / 3.0) * x1 * x2) / (4.0 * x2 * (t - x2 * x2))


def singular_values(u, x2, t, n: int = 2):
    return np.linalg.svd(jacobian(u, x2, t, n), compute_uv=False)


def _refine_singular(u, x2, t, iters=50):
    # the u-row of the Jacobian vanishes iff y1_u = 2u/3 = 0 and x1_u = 3u^2 - 3s = 0
    for _ in range(iters):
        F = np.array([2.0 * u / 3.0, 3.0 * u * u - 3.0 * (t - x2 * x2)])
        J = np.array([[2.0 / 3.0, 0.0], [6.0 * u, 6.0 * x2]])
        if abs(np.linalg.det(J)) < 1e-300:
            break
        step = np.linalg.solve(J, -F)
        u, x2 = u + step[0], x2 + step[1]
        if np.max(np.abs(step)) < 1e-15:
            break
    return u, x2


def singular_locus(t: float, n: int = 2, box: float = 3.0, grid: int = 121,
                   sv_tol: float = 1e-8, guard: float = 1e-2) -> list:
    """Parameter points where the lift drops rank, located and certified numerically.

    A coarse scan of the smallest singular value picks candidate minima and
    Newton on the vanishing u-row refines them.  A refined point is accepted
    when ``sigma_min < sv_tol`` while the ring one grid spacing away has
    ``sigma_min > guard`` and at least 1e6 times the value at the point.
    """
    if t <= 0:
        return []
    g = np.linspace(-box, box, grid)
    U, X2 = np.meshgrid(g, g, indexing="ij")
    smin = singular_values(U, X2, t, n)[..., -1]
    found = []
    for i in range(1, grid - 1):
        for j in range(1, grid - 1):
            patch = smin[i - 1:i + 2, j - 1:j + 2]
            if smin[i, j] == patch.min() and smin[i, j] < 0.5:
                u, x2 = _refine_singular(U[i, j], X2[i, j], t)
                if any(math.hypot(u - a.u, x2 - a.x2) < 1e-6 for a in found):
                    continue
                sv = singular_values(u, x2, t, n)[-1]
                if sv >= sv_tol:
                    continue
                ang = np.linspace(0, 2 * np.pi, 16, endpoint=False)
                h = g[1] - g[0]
                ring = singular_values(u + h * np.cos(ang), x2 + h * np.sin(ang), t, n)[..., -1]
                if np.min(ring) <= guard or np.min(ring) < 1e6 * sv:
                    continue
                found.append(ParamPoint(float(u), (float(x2),) + (0.0,) * (n - 2)))
    found.sort(key=lambda p: (p.x2, p.u))
    return found


@dataclass(frozen=True)
class NestedChart:
    """One wrinkle of a nested configuration, placed in the (u, x2) plane."""

    center: tuple = (0.0, 0.0)
    core_radius: float = 0.1
    region_radius: float = 0.3
    chart: WrinkleChart = field(default_factory=WrinkleChart)


@dataclass(frozen=True)
class NestedConfig:
    charts: tuple
    # (outer, inner) index pairs whose containment is required; default: every i < j
    pairs: Optional[tuple] = None

    def required_pairs(self) -> list:
        if self.pairs is not None:
            return list(self.pairs)
        k = len(self.charts)
        return [(i, j) for i in range(k) for j in range(i + 1, k)]


@dataclass(frozen=True)
class NestedValidation:
    ok: bool
    pair: Optional[tuple] = None
    margin: float = math.inf


def validate_nested(config: NestedConfig) -> NestedValidation:
    """Check that each outer core disc sits inside the pushed region of its inner wrinkle."""
    if not config.charts:
        raise ValueError("nested configuration is empty")
    worst = math.inf
    for i, j in config.required_pairs():
        outer, inner = config.charts[i], config.charts[j]
        gap = math.dist(outer.center, inner.center)
        margin = inner.region_radius - (gap + outer.core_radius)
        if margin < 0:
            return NestedValidation(False, (i, j), margin)
        worst = min(worst, margin)
    return NestedValidation(True, None, worst)


def sample_grid(t: float, n: int = 2, box: Sequence[float] = (-2.0, 2.0), size: int = 41):
    """Lift samples and Jacobian frames on a square parameter grid."""
    g = np.linspace(box[0], box[1], size)
    U, X2 = np.meshgrid(g, g, indexing="ij")
    return U, X2, lift_family(U, X2, t, n), jacobian(U, X2, t, n)
