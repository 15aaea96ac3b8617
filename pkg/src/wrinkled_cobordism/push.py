"""Pushing the core disc to infinity along isotropic escape paths.

For a point ``p`` of the core disc the escape path moves ``x1`` at unit speed
while ``z`` follows ``z + tau * y1``; all other coordinates are frozen, so
``alpha(gamma') = y1 - y1 = 0``.  Its Lagrangian projection is a straight
segment in the ``x1`` direction, which gives an explicit tube chart

    tau = x1 - x1(p),   s = y1(p) - y1,   (a, b) = (x_j - x_j(p), y_j - y_j(p)), j >= 2,

and the cutoff Hamiltonian ``G = psi(s) f(tau) phi(a, b)``.  On the plateau
``psi' = 1``, ``f = phi = 1`` the Hamiltonian flow moves ``tau`` at unit rate.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .contact import (_coords, alpha_eval, contact_field_from, dim_of, flow,
                      rk4_step, n_steps, ScalarField)
from .profiles import ramp, ramp_deriv, smoothstep


class ChartError(RuntimeError):
    """A trajectory left the tube chart; ``trajectory`` holds the recorded states."""

    def __init__(self, msg, trajectory=None):
        super().__init__(msg)
        self.trajectory = trajectory


class ClearanceError(RuntimeError):
    pass


@dataclass(frozen=True)
class EscapeProfile:
    T: float = 1.0
    g_cap: float = 10.0

    def __post_init__(self):
        if self.T <= 0 or self.g_cap <= 0:
            raise ValueError("T and g_cap must be positive")


def g_eval(t, profile: EscapeProfile = EscapeProfile()):
    """Escape length: ``g_cap`` on [-T, T], 0 for |t| >= 2T, smoothstep ramps between."""
    t = np.asarray(t, dtype=float)
    T = profile.T
    if np.any(np.abs(t) > 3 * T + 1e-12):
        raise ValueError(f"t must lie in [-3T, 3T] = [{-3 * T}, {3 * T}]")
    return profile.g_cap * (1.0 - ramp(np.abs(t), T, 2 * T))


def gamma(p, tau):
    """Isotropic escape path from ``p``: x1 += tau, z += tau * y1."""
    P = _coords(p)
    n = dim_of(P)
    tau = np.asarray(tau, dtype=float)
    out = np.array(np.broadcast_to(P, tau.shape + P.shape), dtype=float)
    out[..., 0] += tau
    out[..., 2 * n] += tau * P[..., n]
    return out


def gamma_velocity(p, tau=0.0):
    P = _coords(p)
    n = dim_of(P)
    tau = np.asarray(tau, dtype=float)
    w = np.zeros(tau.shape + P.shape)
    w[..., 0] = 1.0
    w[..., 2 * n] = P[..., n]
    return w


@dataclass
class Clearance:
    direction: int
    clearance: float
    flipped: bool
    forward: float
    backward: float


def _distance_to(samples: np.ndarray, pts: np.ndarray, chunk: int = 256) -> np.ndarray:
    out = np.empty(len(pts))
    for i in range(0, len(pts), chunk):
        d = np.linalg.norm(pts[i:i + chunk, None, :] - samples[None, :, :], axis=-1)
        out[i:i + chunk] = d.min(axis=1)
    return out


def gamma_clearance(p, tau_max: float, samples: np.ndarray, threshold: float = 1e-2,
                    tau_min: Optional[float] = None, count: int = 400,
                    refine: Optional[Callable[[np.ndarray], np.ndarray]] = None) -> Clearance:
    """Smallest distance from the escape path to the sampled Legendrian.

    The path is checked on ``[tau_min, tau_max]``, skipping its first stretch
    where it is trivially close to its own starting point.  If the forward
    direction comes within ``threshold`` the reversed path is tried instead.
    ``refine`` may replace the sample distance by an exact one (e.g. a
    nearest-point projection).
    """
    if tau_max <= 0:
        raise ValueError("tau_max must be positive")
    P = _coords(p)
    samples = np.asarray(samples, dtype=float).reshape(-1, P.shape[-1])
    tau_min = min(0.05 * tau_max, 0.1) if tau_min is None else tau_min
    taus = np.linspace(tau_min, tau_max, count)

    def clear(sign):
        pts = gamma(P, sign * taus)
        d = _distance_to(samples, pts)
        if refine is not None:
            d = np.minimum(d, refine(pts))
        return float(d.min())

    fwd = clear(1.0)
    if fwd >= threshold:
        return Clearance(1, fwd, False, fwd, math.nan)
    bwd = clear(-1.0)
    if bwd >= threshold:
        return Clearance(-1, bwd, True, fwd, bwd)
    raise ClearanceError(
        f"escape path meets the Legendrian in both directions "
        f"(forward {fwd:.3g}, backward {bwd:.3g}, threshold {threshold})")


@dataclass(frozen=True)
class CutoffTriple:
    """The three profiles of the cutoff Hamiltonian, at tube scale ``eps``."""

    eps: float = 0.1

    def phi(self, a, b):
        r = np.hypot(a, b) if np.ndim(a) == np.ndim(b) else None
        return 1.0 - ramp(r, self.eps / 4, 3 * self.eps / 4)

    def phi_radial(self, r):
        return 1.0 - ramp(r, self.eps / 4, 3 * self.eps / 4)

    def phi_radial_deriv(self, r):
        return -ramp_deriv(r, self.eps / 4, 3 * self.eps / 4)

    def f(self, tau, g):
        e = self.eps
        return ramp(tau, -e / 2, 0.0) * (1.0 - ramp(tau, g, g + e / 2))

    def f_deriv(self, tau, g):
        e = self.eps
        up, down = ramp(tau, -e / 2, 0.0), 1.0 - ramp(tau, g, g + e / 2)
        return ramp_deriv(tau, -e / 2, 0.0) * down - up * ramp_deriv(tau, g, g + e / 2)

    def _beta(self, s):
        return 1.0 - ramp(np.abs(s), self.eps / 4, 3 * self.eps / 4)

    def psi(self, s):
        s = np.asarray(s, dtype=float)
        return s * self._beta(s)

    def psi_deriv(self, s):
        s = np.asarray(s, dtype=float)
        db = -ramp_deriv(np.abs(s), self.eps / 4, 3 * self.eps / 4) * np.sign(s)
        return self._beta(s) + s * db


@dataclass
class CutoffReport:
    violation: dict
    slope: dict

    @property
    def worst_violation(self) -> float:
        return max(self.violation.values())

    @property
    def worst_slope(self) -> float:
        return max(self.slope.values())


def cutoff_conditions(triple: CutoffTriple, g: float, samples: int = 1000, seed: int = 0) -> CutoffReport:
    """Evaluate the plateau, support and slope conditions of the three profiles.

    ``violation`` holds the largest deviation from each exact plateau or
    support value over ``samples`` random points per condition; ``slope``
    holds eps |phi'|, eps |f'| and |psi'| at their largest (bounded by a small
    constant for profiles at tube scale eps).
    """
    rng = np.random.default_rng(seed)
    e = triple.eps
    m = samples

    def uni(lo, hi):
        return rng.uniform(lo, hi, size=m)

    inner_r = uni(0.0, e / 4)
    outer_r = uni(3 * e / 4, 3 * e)
    plateau = uni(0.0, g)
    outside = np.concatenate([uni(-3 * e, -e / 2), uni(g + e / 2, g + 3 * e)])
    inner_s = uni(-e / 4, e / 4)
    outer_s = np.concatenate([uni(-3 * e, -3 * e / 4 - 1e-15), uni(3 * e / 4 + 1e-15, 3 * e)])
    viol = {
        "phi_plateau": float(np.max(np.abs(triple.phi_radial(inner_r) - 1.0))),
        "phi_support": float(np.max(np.abs(triple.phi_radial(outer_r)))),
        "f_plateau": float(np.max(np.abs(triple.f(plateau, g) - 1.0))),
        "f_support": float(np.max(np.abs(triple.f(outside, g)))),
        "psi_slope_one": float(np.max(np.abs(triple.psi_deriv(inner_s) - 1.0))),
        "psi_support": float(max(np.max(np.abs(triple.psi(outer_s))), np.max(np.abs(triple.psi_deriv(outer_s))))),
    }
    r = uni(0.0, e)
    tau = uni(-e, g + e)
    s = uni(-e, e)
    slope = {
        "phi": float(e * np.max(np.abs(triple.phi_radial_deriv(r)))),
        "f": float(e * np.max(np.abs(triple.f_deriv(tau, g)))),
        "psi": float(np.max(np.abs(triple.psi_deriv(s)))),
    }
    return CutoffReport(viol, slope)


@dataclass(frozen=True)
class TubeCoords:
    tau: np.ndarray
    s: np.ndarray
    a: np.ndarray
    b: np.ndarray


@dataclass(frozen=True)
class TubeChart:
    """Chart around the projected escape path starting at ``origin`` (contact coordinates)."""

    origin: tuple
    eps: float = 0.1

    @property
    def n(self) -> int:
        return (len(self.origin) - 1) // 2

    def coords(self, q) -> TubeCoords:
        """Tube coordinates of points given either in R^{2n} or in contact space."""
        q = np.asarray(q, dtype=float)
        n = self.n
        o = np.asarray(self.origin)
        return TubeCoords(q[..., 0] - o[0], o[n] - q[..., n],
                          q[..., 1:n] - o[1:n], q[..., n + 1:2 * n] - o[n + 1:2 * n])

    def in_domain(self, c: TubeCoords, g: float) -> np.ndarray:
        e = self.eps
        ab = np.sqrt(np.sum(c.a ** 2 + c.b ** 2, axis=-1))
        return (c.tau > -e) & (c.tau < g + e) & (np.abs(c.s) < e) & (ab < e)


def G_eval(c: TubeCoords, triple: CutoffTriple, g_t: float):
    ab = np.sqrt(np.sum(c.a ** 2 + c.b ** 2, axis=-1))
    return triple.psi(c.s) * triple.f(c.tau, g_t) * triple.phi_radial(ab)


class PushHamiltonian:
    """``G`` composed with a tube chart, as a z-independent function on contact space.

    Its gradient is closed form, so points outside the support see an exactly
    zero field and stay fixed.
    """

    def __init__(self, chart: TubeChart, g_t: float, triple: Optional[CutoffTriple] = None):
        self.chart = chart
        self.g_t = g_t
        self.triple = triple or CutoffTriple(chart.eps)

    def value(self, q):
        return G_eval(self.chart.coords(q), self.triple, self.g_t)

    def gradient_xy(self, q):
        """Gradient in the R^{2n} coordinates (x, y) of a point given in R^{2n} or contact space."""
        q = np.asarray(q, dtype=float)
        n = self.chart.n
        c = self.chart.coords(q)
        tr = self.triple
        ab = np.sqrt(np.sum(c.a ** 2 + c.b ** 2, axis=-1))
        ps, dps = tr.psi(c.s), tr.psi_deriv(c.s)
        ff, dff = tr.f(c.tau, self.g_t), tr.f_deriv(c.tau, self.g_t)
        ph, dph = tr.phi_radial(ab), tr.phi_radial_deriv(ab)
        safe = np.where(ab > 0, ab, 1.0)
        radial = np.where(ab > 0, dph / safe, 0.0)
        g = np.zeros(q.shape[:-1] + (2 * n,))
        g[..., 0] = ps * dff * ph
        g[..., n] = -dps * ff * ph
        g[..., 1:n] = (ps * ff * radial)[..., None] * c.a
        g[..., n + 1:2 * n] = (ps * ff * radial)[..., None] * c.b
        return g

    def gradient(self, p):
        P = np.asarray(p, dtype=float)
        g = np.zeros(P.shape)
        g[..., :-1] = self.gradient_xy(P)
        return g

    def scalar_field(self) -> ScalarField:
        return ScalarField(self.value, self.gradient)

    def hamiltonian_field(self, q):
        """X_G on R^{2n} for omega_0 = sum dx ^ dy: dx = -G_y, dy = G_x."""
        n = self.chart.n
        g = self.gradient_xy(q)
        return np.concatenate([-g[..., n:], g[..., :n]], axis=-1)

    def contact_field(self, p):
        P = np.asarray(p, dtype=float)
        return contact_field_from(P, self.value(P), self.gradient(P))


def _guarded_flow(field, start, duration, step, chart, g_t, record):
    y = np.array(start, dtype=float, copy=True)
    steps = n_steps(0.0, duration, step) if duration > 0 else 0
    h = duration / steps if steps else 0.0
    traj = [y.copy()] if record else None
    for k in range(steps):
        y = rk4_step(field, k * h, y, h)
        if record:
            traj.append(y.copy())
        c = chart.coords(y)
        inside = chart.in_domain(c, g_t)
        G = G_eval(c, CutoffTriple(chart.eps), g_t)
        # a point may sit outside the chart only where G vanishes identically
        if np.any(~inside & (G != 0.0)):
            raise ChartError("trajectory crossed the tube chart boundary",
                             np.array(traj) if record else y)
    return y


def XG_flow(start, chart: TubeChart, g_t: float, duration: Optional[float] = None,
            step: float = 1e-2, record: bool = False):
    """Time-``duration`` Hamiltonian flow of G on R^{2n} (default duration ``g_t``)."""
    H = PushHamiltonian(chart, g_t)
    duration = g_t if duration is None else duration
    return _guarded_flow(lambda _t, q: H.hamiltonian_field(q), start, duration, step, chart, g_t, record)


def contact_lift_flow(start, chart: TubeChart, g_t: float, duration: Optional[float] = None,
                      step: float = 1e-2, with_action: bool = False):
    """Flow of the contact field of the z-independent Hamiltonian G on contact space.

    With ``with_action`` the accumulated ``int (G - sum y_i G_{y_i}) ds`` is
    returned too; it equals the change of ``z``.
    """
    H = PushHamiltonian(chart, g_t)
    duration = g_t if duration is None else duration
    P0 = np.asarray(_coords(start), dtype=float)
    d = P0.shape[-1]
    if not with_action:
        return _guarded_flow(lambda _t, y: H.contact_field(y), P0, duration, step, chart, g_t, False)

    def field(_t, y):
        X = H.contact_field(y[..., :d])
        return np.concatenate([X, X[..., -1:]], axis=-1)

    start_aug = np.concatenate([P0, np.zeros(P0.shape[:-1] + (1,))], axis=-1)
    out = _guarded_flow(field, start_aug, duration, step, chart, g_t, False)
    return out[..., :d], out[..., d]


def probe_vectors(dim: int, count: int = 10, seed: int = 0, min_alpha: float = 0.1, p=None):
    """Deterministic random unit probes with |alpha(w)| above ``min_alpha`` at ``p``."""
    rng = np.random.default_rng(seed)
    p = np.zeros(dim) if p is None else _coords(p)
    out = []
    while len(out) < count:
        w = rng.normal(size=dim)
        w /= np.linalg.norm(w)
        if abs(float(alpha_eval(p, w))) > min_alpha:
            out.append(w)
    return np.array(out)


@dataclass
class LambdaMeasurement:
    value: float
    spread: float
    samples: np.ndarray


def measure_lambda(psi: Callable[[np.ndarray], np.ndarray], p, probes=None, h: float = 1e-5,
                   min_alpha: float = 1e-3, seed: int = 0) -> LambdaMeasurement:
    """Conformal factor of a contact map at ``p``: alpha(dPsi w) / alpha(w).

    ``dPsi w`` is a central difference with step ``h``.  The spread over the
    probe directions is reported (it vanishes for a genuine contactomorphism).
    """
    P = _coords(p)
    if probes is None:
        probes = probe_vectors(P.shape[-1], 10, seed, 0.1, P)
    probes = np.atleast_2d(np.asarray(probes, dtype=float))
    a = alpha_eval(P, probes)
    keep = np.abs(a) > min_alpha
    if not np.any(keep):
        raise ValueError("every probe vector is (nearly) tangent to the contact structure")
    probes, a = probes[keep], a[keep]
    pts = np.concatenate([P + h * probes, P - h * probes, P[None, :]], axis=0)
    img = np.asarray(psi(pts))
    k = len(probes)
    dw = (img[:k] - img[k:2 * k]) / (2 * h)
    lam = alpha_eval(img[-1], dw) / a
    return LambdaMeasurement(float(np.mean(lam)), float(np.max(lam) - np.min(lam)), lam)


def push_map(chart: TubeChart, g_t: float, step: float = 1e-2):
    return lambda pts: contact_lift_flow(pts, chart, g_t, step=step)


def reeb_map(s: float):
    def psi(pts):
        out = np.array(pts, dtype=float, copy=True)
        out[..., -1] += s
        return out
    return psi


def lambda_sweep(p, g_caps, eps: float = 0.1, step: float = 1e-2, seed: int = 0):
    """Measured conformal factor of the push map at ``p`` for each cap value."""
    P = _coords(p)
    chart = TubeChart(tuple(P.tolist()), eps)
    return [measure_lambda(push_map(chart, g, step), P, seed=seed) for g in g_caps]


def escape_displacement(p, g_cap: float, eps: float = 0.1, step: float = 1e-2) -> float:
    P = _coords(p)
    chart = TubeChart(tuple(P.tolist()), eps)
    return float(contact_lift_flow(P, chart, g_cap, step=step)[0] - P[0])
