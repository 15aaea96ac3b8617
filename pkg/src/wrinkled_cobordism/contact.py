"""Standard contact space R^{2n+1} and its symplectization.

Coordinates are stored as arrays whose last axis is laid out as
``[x_1..x_n, y_1..y_n, z]``; tangent vectors use the same layout.  The
contact form is ``alpha = dz - sum_i y_i dx_i`` and ``d alpha = sum_i dx_i ^ dy_i``.
Symplectization points append the R-factor coordinate ``v`` as a final entry,
with exact symplectic form ``omega = d(e^v alpha)``.

Everything here is vectorised over leading axes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

# largest v with a finite e^v in double precision
_V_MAX = math.log(np.finfo(float).max)


def _coords(obj) -> np.ndarray:
    return np.asarray(getattr(obj, "coords", obj), dtype=float)


def dim_of(coords: np.ndarray) -> int:
    """Return n for an array whose last axis has length 2n+1."""
    d = coords.shape[-1]
    if d < 3 or d % 2 == 0:
        raise ValueError(f"contact coordinates need odd length 2n+1 >= 3, got {d}")
    return (d - 1) // 2


def split(coords: np.ndarray):
    n = dim_of(coords)
    return coords[..., :n], coords[..., n:2 * n], coords[..., 2 * n]


def join(x, y, z) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    z = np.asarray(z, dtype=float)
    return np.concatenate([x, y, z[..., None]], axis=-1)


@dataclass(frozen=True)
class ContactPoint:
    x: tuple
    y: tuple
    z: float

    def __post_init__(self):
        if len(self.x) != len(self.y) or len(self.x) < 1:
            raise ValueError("x and y must have the same positive length")
        if not all(math.isfinite(c) for c in (*self.x, *self.y, self.z)):
            raise ValueError("contact point coordinates must be finite")

    @property
    def n(self) -> int:
        return len(self.x)

    @property
    def coords(self) -> np.ndarray:
        return np.array([*self.x, *self.y, self.z], dtype=float)

    @classmethod
    def from_coords(cls, c) -> "ContactPoint":
        c = np.asarray(c, dtype=float)
        x, y, z = split(c)
        return cls(tuple(float(v) for v in x), tuple(float(v) for v in y), float(z))


@dataclass(frozen=True)
class TangentVector:
    dx: tuple
    dy: tuple
    dz: float

    @property
    def coords(self) -> np.ndarray:
        return np.array([*self.dx, *self.dy, self.dz], dtype=float)

    @classmethod
    def from_coords(cls, c) -> "TangentVector":
        c = np.asarray(c, dtype=float)
        x, y, z = split(c)
        return cls(tuple(float(v) for v in x), tuple(float(v) for v in y), float(z))


@dataclass(frozen=True)
class SymplectizationPoint:
    p: ContactPoint
    v: float

    @property
    def coords(self) -> np.ndarray:
        return np.append(self.p.coords, self.v)


def _check_same(a: np.ndarray, b: np.ndarray):
    if a.shape[-1] != b.shape[-1]:
        raise ValueError(f"dimension mismatch: {a.shape[-1]} vs {b.shape[-1]}")


def alpha_eval(p, w):
    """alpha_p(w) = dz - sum_i y_i dx_i."""
    p, w = _coords(p), _coords(w)
    _check_same(p, w)
    n = dim_of(p)
    return w[..., 2 * n] - np.sum(p[..., n:2 * n] * w[..., :n], axis=-1)


def dalpha_eval(p, w1, w2=None):
    """d alpha(w1, w2) = sum_i (dx_i(w1) dy_i(w2) - dy_i(w1) dx_i(w2)).

    The base point is accepted for symmetry with :func:`alpha_eval`; the
    standard form has constant coefficients.  Calling with two arguments
    treats them as ``(w1, w2)``.
    """
    if w2 is None:
        w1, w2 = p, w1
    else:
        _check_same(_coords(p), _coords(w1))
    w1, w2 = _coords(w1), _coords(w2)
    _check_same(w1, w2)
    n = dim_of(w1)
    return np.sum(w1[..., :n] * w2[..., n:2 * n] - w1[..., n:2 * n] * w2[..., :n], axis=-1)


def symp_form_eval(P, W1, W2):
    """omega = d(e^v alpha) evaluated on two tangent vectors at P.

    ``omega(W1, W2) = e^v (d alpha(w1, w2) + dv(W1) alpha(w2) - dv(W2) alpha(w1))``.
    """
    P, W1, W2 = _coords(P), _coords(W1), _coords(W2)
    _check_same(P, W1)
    _check_same(P, W2)
    v = P[..., -1]
    if np.any(np.abs(v) > _V_MAX):
        raise OverflowError(f"|v| exceeds {_V_MAX:.1f}; e^v is not representable")
    p, w1, w2 = P[..., :-1], W1[..., :-1], W2[..., :-1]
    inner = dalpha_eval(w1, w2) + W1[..., -1] * alpha_eval(p, w2) - W2[..., -1] * alpha_eval(p, w1)
    return np.exp(v) * inner


def liouville_eval(P, W):
    """lambda = e^v alpha on the symplectization."""
    P, W = _coords(P), _coords(W)
    return np.exp(P[..., -1]) * alpha_eval(P[..., :-1], W[..., :-1])


def fd_steps(p: np.ndarray, rel: float = 1e-5) -> np.ndarray:
    return rel * np.maximum(1.0, np.abs(p))


def fd_gradient(fn: Callable[[np.ndarray], np.ndarray], p, rel: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of a vectorised scalar function."""
    p = _coords(p)
    d = p.shape[-1]
    h = fd_steps(p, rel)
    eye = np.eye(d)
    # stencil of shape (..., 2, d, d): +/- offset along each axis
    offs = h[..., None, :] * eye
    plus = p[..., None, :] + offs
    minus = p[..., None, :] - offs
    vals = fn(np.stack([plus, minus], axis=-3))
    return (vals[..., 0, :] - vals[..., 1, :]) / (2.0 * h)


@dataclass(frozen=True)
class ScalarField:
    """A function on contact space with an optional closed-form gradient.

    Without ``grad`` the gradient falls back to central differences with
    step ``1e-5 * max(1, |coordinate|)``.
    """

    value: Callable[[np.ndarray], np.ndarray]
    grad: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def __call__(self, p):
        return self.value(_coords(p))

    def gradient(self, p) -> np.ndarray:
        p = _coords(p)
        if self.grad is not None:
            return np.asarray(self.grad(p), dtype=float)
        return fd_gradient(self.value, p)


def contact_field_from(p: np.ndarray, h: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Contact Hamiltonian vector field given the value ``h`` and gradient ``g`` at ``p``.

    dx_i = -H_{y_i},  dy_i = H_{x_i} + y_i H_z,  dz = H - sum_i y_i H_{y_i},
    so that alpha(X_H) = H.
    """
    if not np.all(np.isfinite(g)) or not np.all(np.isfinite(h)):
        raise ValueError("non-finite Hamiltonian value or gradient")
    n = dim_of(p)
    y = p[..., n:2 * n]
    gx, gy, gz = g[..., :n], g[..., n:2 * n], g[..., 2 * n]
    out = np.empty(np.broadcast_shapes(p.shape, g.shape))
    out[..., :n] = -gy
    out[..., n:2 * n] = gx + y * gz[..., None]
    out[..., 2 * n] = h - np.sum(y * gy, axis=-1)
    return out


def contact_vector_field(H: ScalarField, p) -> np.ndarray:
    p = _coords(p)
    return contact_field_from(p, np.asarray(H(p), dtype=float), H.gradient(p))


def reeb_field(p) -> np.ndarray:
    p = _coords(p)
    out = np.zeros_like(p)
    out[..., -1] = 1.0
    return out


def rk4_step(field, t: float, y: np.ndarray, h: float) -> np.ndarray:
    k1 = field(t, y)
    k2 = field(t + h / 2, y + h / 2 * k1)
    k3 = field(t + h / 2, y + h / 2 * k2)
    k4 = field(t + h, y + h * k3)
    return y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def n_steps(t0: float, t1: float, step: float) -> int:
    if step <= 0:
        raise ValueError("step must be positive")
    return max(1, int(math.ceil(abs(t1 - t0) / step - 1e-9)))


@dataclass
class FlowResult:
    state: np.ndarray
    truncated: np.ndarray
    t_exit: np.ndarray

    @property
    def n_truncated(self) -> int:
        return int(np.count_nonzero(self.truncated))


def flow(field, p0, t0: float, t1: float, step: float = 1e-3,
         bound: Optional[float] = None) -> FlowResult:
    """Fixed-step RK4 flow of a time-dependent field ``field(t, state)``.

    ``p0`` may hold many states along its leading axes.  A state that leaves the
    box ``|coord| <= bound`` (or becomes non-finite) is frozen at its last
    in-box value and reported as truncated instead of raising.
    """
    y = np.array(_coords(p0), dtype=float, copy=True)
    single = y.ndim == 1
    if single:
        y = y[None, :]
    lead = y.shape[:-1]
    y = y.reshape(-1, y.shape[-1])
    truncated = np.zeros(len(y), dtype=bool)
    t_exit = np.full(len(y), float(t1))
    steps = n_steps(t0, t1, step)
    h = (t1 - t0) / steps
    for k in range(steps):
        t = t0 + k * h
        active = ~truncated
        if not np.any(active):
            break
        new = rk4_step(field, t, y[active], h)
        bad = ~np.all(np.isfinite(new), axis=-1)
        if bound is not None:
            bad |= np.any(np.abs(new) > bound, axis=-1)
        idx = np.flatnonzero(active)
        ok = idx[~bad]
        y[ok] = new[~bad]
        truncated[idx[bad]] = True
        t_exit[idx[bad]] = t
    y = y.reshape(*lead, y.shape[-1])
    truncated = truncated.reshape(lead)
    t_exit = t_exit.reshape(lead)
    if single:
        return FlowResult(y[0], truncated[0], t_exit[0])
    return FlowResult(y, truncated, t_exit)


def contact_flow(H, p0, t0: float, t1: float, step: float = 1e-3,
                 bound: Optional[float] = None) -> FlowResult:
    """Flow of the contact field of ``H(t)`` where ``H`` maps a time to a ScalarField."""
    def field(t, y):
        return contact_vector_field(H(t), y)
    return flow(field, p0, t0, t1, step, bound)


def conformal_contact_flow(H: ScalarField, p0, duration: float, step: float = 1e-3):
    """Autonomous contact flow together with its conformal exponent.

    Returns ``(image, h)`` with ``psi^* alpha = e^h alpha`` at ``p0``; the
    exponent obeys ``dh/ds = H_z`` along the trajectory.
    """
    p0 = _coords(p0)
    d = p0.shape[-1]

    def field(_t, y):
        p = y[..., :d]
        g = H.gradient(p)
        out = np.empty_like(y)
        out[..., :d] = contact_field_from(p, np.asarray(H(p), dtype=float), g)
        out[..., d] = g[..., d - 1]
        return out

    start = np.concatenate([p0, np.zeros(p0.shape[:-1] + (1,))], axis=-1)
    res = flow(field, start, 0.0, duration, step)
    return res.state[..., :d], res.state[..., d]
