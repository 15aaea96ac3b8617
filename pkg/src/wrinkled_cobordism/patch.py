"""Extension of alpha(X_t) from the wrinkle Legendrian L_t to a tube around it.

The value on L_t is only known through the parameters ``(u, x2)``; to get an
ambient function ``u`` is eliminated in two ways:

* from ``y2`` and ``x1``:  ``H = -y2 / (2 x2)``, usable away from ``x2 = 0``;
* from ``y1``:  ``H = x1/3 + 2 u (t - x2^2)`` with ``u = +-sqrt(3 y1 - x2^2 + t)``,
  usable away from ``u = 0``.

Points are assigned a region by their nearest point on L_t, the two
definitions are blended across the strips ``delta/2 < |u| < delta``, the core
disc ``u^2 + x2^2 < eps`` is tagged for removal, and a smooth bump in the
normal distance cuts everything off between ``rho_tube`` and ``rho_cut``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from . import wrinkle
from .contact import _coords, contact_field_from, dim_of, fd_steps, ScalarField
from .profiles import ramp, ramp_deriv


class ProjectionError(RuntimeError):
    pass


class SingularityError(ValueError):
    pass


class DomainError(ValueError):
    pass


class RegionTag(enum.IntEnum):
    OUTER_X2 = 0
    POS_U = 1
    NEG_U = 2
    BLEND = 3
    CORE_DISC = 4
    FAR = 5


@dataclass(frozen=True)
class PatchParams:
    eps: float = 0.1
    delta: float = 0.3
    rho_tube: float = 0.2
    rho_cut: float = 0.35
    t: float = 0.0

    def __post_init__(self):
        if not (self.eps > 0 and self.delta > 0):
            raise ValueError("eps and delta must be positive")
        if not (0 < self.rho_tube < self.rho_cut):
            raise ValueError("need 0 < rho_tube < rho_cut")
        # the core disc replaces the rectangle {|u| < delta} x {|x2| < eps}
        if self.delta ** 2 + self.eps ** 2 > self.eps * (1 + 1e-12):
            raise ValueError(
                f"core disc u^2 + x2^2 < {self.eps} does not cover the rectangle "
                f"|u| < {self.delta}, |x2| < {self.eps}; need delta^2 + eps^2 <= eps")

    def at(self, t: float) -> "PatchParams":
        return replace(self, t=t)


# ---------------------------------------------------------------------------
# nearest-point projection onto L_t

def _core(P: np.ndarray):
    n = dim_of(P)
    return P[..., [0, 1, n, n + 1, 2 * n]], n


def _lift5(u, x2, t):
    return wrinkle.lift_family(u, x2, t, 2)


def _jac5(u, x2, t):
    return wrinkle.jacobian(u, x2, t, 2)


def _curvature(u, x2, t, r):
    """sum_i r_i d^2 lift_i as the entries (uu, ux, xx) of a symmetric 2x2 matrix."""
    s = t - x2 * x2
    w = u * u - s
    r0, r2, r3, r4 = r[:, 0], r[:, 2], r[:, 3], r[:, 4]
    huu = 6 * u * r0 + (2 / 3) * r2 - 4 * u * x2 * r3 + 4 * u * w * r4
    hux = 6 * x2 * r0 + (-2 * u * u - 2 * s + 4 * x2 * x2) * r3 + 4 * x2 * w * r4
    hxx = 6 * u * r0 + (2 / 3) * r2 + 12 * u * x2 * r3 + ((4 / 3) * u ** 3 - 4 * u * s + 8 * u * x2 * x2) * r4
    return huu, hux, hxx


def _newton_terms(u, x2, t, tgt):
    """Residual, Gauss-Newton matrix, curvature term and gradient of |lift - tgt|^2 / 2."""
    s = t - x2 * x2
    u2 = u * u
    w = u2 - s
    x2sq = x2 * x2
    r0 = u2 * u - 3.0 * u * s - tgt[:, 0]
    r1 = x2 - tgt[:, 1]
    r2 = w / 3.0 - tgt[:, 2]
    r3 = -(2.0 / 3.0) * u2 * u * x2 - 2.0 * u * x2 * s - tgt[:, 3]
    r4 = u2 * u2 * u / 5.0 - (2.0 / 3.0) * u2 * u * s + u * s * s - tgt[:, 4]
    # rows of the Jacobian (the x2-row has a unit entry for the x2 coordinate)
    j00, j02, j03, j04 = 3.0 * w, 2.0 * u / 3.0, -2.0 * x2 * (u2 + s), w * w
    j10, j12 = 6.0 * u * x2, 2.0 * x2 / 3.0
    j13 = -(2.0 / 3.0) * u2 * u - 2.0 * u * s + 4.0 * u * x2sq
    j14 = (4.0 / 3.0) * u2 * u * x2 - 4.0 * u * s * x2
    a = j00 * j00 + j02 * j02 + j03 * j03 + j04 * j04
    b = j00 * j10 + j02 * j12 + j03 * j13 + j04 * j14
    c = j10 * j10 + 1.0 + j12 * j12 + j13 * j13 + j14 * j14
    g0 = j00 * r0 + j02 * r2 + j03 * r3 + j04 * r4
    g1 = j10 * r0 + r1 + j12 * r2 + j13 * r3 + j14 * r4
    huu = 6 * u * r0 + (2 / 3) * r2 - 4 * u * x2 * r3 + 4 * u * w * r4
    hux = 6 * x2 * r0 + (-2 * u2 - 2 * s + 4 * x2sq) * r3 + 4 * x2 * w * r4
    hxx = 6 * u * r0 + (2 / 3) * r2 + 12 * u * x2 * r3 + ((4 / 3) * u2 * u - 4 * u * s + 8 * u * x2sq) * r4
    res = np.sqrt(r0 * r0 + r1 * r1 + r2 * r2 + r3 * r3 + r4 * r4)
    jn = np.sqrt(a + c)
    return res, jn, a, b, c, g0, g1, huu, hux, hxx


def _resid_sq(u, x2, t, tgt):
    s = t - x2 * x2
    u2 = u * u
    r0 = u2 * u - 3.0 * u * s - tgt[:, 0]
    r1 = x2 - tgt[:, 1]
    r2 = (u2 - s) / 3.0 - tgt[:, 2]
    r3 = -(2.0 / 3.0) * u2 * u * x2 - 2.0 * u * x2 * s - tgt[:, 3]
    r4 = u2 * u2 * u / 5.0 - (2.0 / 3.0) * u2 * u * s + u * s * s - tgt[:, 4]
    return r0 * r0 + r1 * r1 + r2 * r2 + r3 * r3 + r4 * r4


def _gauss_newton(target, u, x2, t, iters):
    """Newton on |lift(u, x2) - target|^2, elementwise.

    The exact Hessian is used where it is positive definite and the
    Gauss-Newton matrix elsewhere, with backtracking so that the residual
    never increases.  Only unconverged entries are iterated.
    """
    shape = np.broadcast_shapes(np.shape(u), target.shape[:-1])
    u = np.array(np.broadcast_to(u, shape), dtype=float).reshape(-1)
    x2 = np.array(np.broadcast_to(x2, shape), dtype=float).reshape(-1)
    tgt = np.broadcast_to(target, shape + target.shape[-1:]).reshape(-1, target.shape[-1])
    act = np.arange(u.size)
    for _ in range(iters):
        if act.size == 0:
            break
        ua, xa = u[act], x2[act]
        _, _, a, b, c, g0, g1, huu, hux, hxx = _newton_terms(ua, xa, t, tgt[act])
        na, nb, nc = a + huu, b + hux, c + hxx
        pd = (na > 0) & (na * nc - nb * nb > 1e-12 * (1.0 + a * c))
        a, b, c = np.where(pd, na, a), np.where(pd, nb, b), np.where(pd, nc, c)
        mu = 1e-12 * (1.0 + np.abs(a) + np.abs(c))
        a = a + mu
        c = c + mu
        det = a * c - b * b
        du = -(c * g0 - b * g1) / det
        dx = -(a * g1 - b * g0) / det
        moving = ~(np.abs(du) + np.abs(dx) < 1e-14 * (1.0 + np.abs(ua) + np.abs(xa)))
        ta = tgt[act]
        f0 = _resid_sq(ua, xa, t, ta)
        allow = f0 * (1.0 + 1e-10) + 1e-28
        step = np.ones(ua.shape)
        trial = moving.copy()
        for _ in range(6):
            worse = np.zeros(ua.shape, dtype=bool)
            worse[trial] = ~(_resid_sq(ua[trial] + step[trial] * du[trial], xa[trial] + step[trial] * dx[trial],
                                       t, ta[trial]) <= allow[trial])
            if not worse.any():
                break
            step = np.where(worse, 0.5 * step, step)
            trial = worse
        u[act] = ua + step * du
        x2[act] = xa + step * dx
        # exact-Hessian steps converge quadratically: a step below 1e-8 leaves an error at roundoff
        size = (np.abs(du) + np.abs(dx)) / (1.0 + np.abs(ua) + np.abs(xa))
        done = pd & (step == 1.0) & (size < 1e-8)
        act = act[moving & ~done & np.isfinite(du) & np.isfinite(dx)]
    res, jn, *_, g0, g1 = _newton_terms(u, x2, t, tgt)[:7]
    gn = np.hypot(g0, g1)
    ok = np.isfinite(gn) & (gn <= 1e-8 * (1.0 + jn * res))
    return u.reshape(shape), x2.reshape(shape), res.reshape(shape), ok.reshape(shape)


def _cubic_real_roots(p, q):
    """Real roots of u^3 + p u + q = 0, shape (..., 3), NaN where absent."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    D = (q / 2) ** 2 + (p / 3) ** 3
    out = np.full(p.shape + (3,), np.nan)
    one = D >= 0
    sq = np.sqrt(np.where(one, D, 0.0))
    out[..., 0] = np.where(one, np.cbrt(-q / 2 + sq) + np.cbrt(-q / 2 - sq), np.nan)
    three = ~one
    ps = np.where(three, p, -1.0)
    m = 2.0 * np.sqrt(-ps / 3.0)
    arg = np.clip(3.0 * q / (ps * m), -1.0, 1.0)
    th = np.arccos(arg) / 3.0
    for k in range(3):
        out[..., k] = np.where(three, m * np.cos(th - 2.0 * np.pi * k / 3.0), out[..., k])
    return out


@dataclass
class Projection:
    u: np.ndarray
    x2: np.ndarray
    dist: np.ndarray
    converged: np.ndarray
    # the wide search beat the warm-started local minimum with a different
    # parameter point, i.e. the nearest point jumped across the medial axis
    switched: Optional[np.ndarray] = None


def project(P, t: float, guess: Optional[tuple] = None, iters: int = 40,
            on_tol: float = 1e-7, search: bool = True) -> Projection:
    """Nearest point of L_t to each ambient point, in chart parameters.

    Starts are the warm guess (if given), the two ``y1`` roots and the real
    roots of the front equation ``x1 = u^3 - 3 u s``; the closest converged
    result wins.  A warm start landing within ``on_tol`` of L_t is accepted
    without the wider search; ``search=False`` trusts a converged warm start
    (finite-difference stencils around an already projected centre).
    """
    P = np.asarray(P, dtype=float)
    tgt, n = _core(P)
    slow_resid = np.sum(P[..., n + 2:2 * n] ** 2, axis=-1) if n > 2 else 0.0
    shape = P.shape[:-1]
    best_u = np.zeros(shape)
    best_x = np.zeros(shape)
    best_d = np.full(shape, np.inf)
    best_ok = np.zeros(shape, dtype=bool)
    switched = np.zeros(shape, dtype=bool)
    todo = np.ones(shape, dtype=bool)
    if guess is not None:
        gu = np.broadcast_to(np.asarray(guess[0], dtype=float), shape)
        gx = np.broadcast_to(np.asarray(guess[1], dtype=float), shape)
        u, x2, d, ok = _gauss_newton(tgt, gu, gx, t, iters)
        best_u, best_x, best_d, best_ok = u, x2, d, ok
        todo = ~(d < on_tol) & search | ~ok
    if np.any(todo):
        sub = tgt[todo]
        x1, x2a, y1 = sub[..., 0], sub[..., 1], sub[..., 2]
        s = t - x2a * x2a
        r = np.sqrt(np.maximum(3.0 * y1 - x2a * x2a + t, 0.0))
        starts = [r, -r]
        roots = _cubic_real_roots(-3.0 * s, -x1)
        starts += [roots[..., k] for k in range(3)]
        U0 = np.stack(starts)
        valid = np.isfinite(U0)
        m = len(starts)
        # short pass over every start, then polish the two most promising
        u, x2, d, _ = _gauss_newton(np.broadcast_to(sub, (m,) + sub.shape), np.where(valid, U0, 0.0),
                                    np.broadcast_to(x2a, U0.shape), t, 8)
        d = np.where(valid & np.isfinite(d), d, np.inf)
        top = np.argsort(d, axis=0, kind="stable")[:2]
        cols = np.arange(sub.shape[0])
        u2, x22, d2, ok2 = _gauss_newton(np.broadcast_to(sub, (2,) + sub.shape), u[top, cols],
                                         x2[top, cols], t, iters)
        d2 = np.where(np.isfinite(d[top, cols]) & np.isfinite(d2), d2, np.inf)
        bu, bx, bd, bok = best_u[todo], best_x[todo], best_d[todo], best_ok[todo]
        for k in range(2):
            better = d2[k] < bd - 1e-15
            bu = np.where(better, u2[k], bu)
            bx = np.where(better, x22[k], bx)
            bd = np.where(better, d2[k], bd)
            bok = np.where(better, ok2[k], bok)
        if guess is not None:
            wu, wx = best_u[todo], best_x[todo]
            switched[todo] = np.abs(bu - wu) + np.abs(bx - wx) > 1e-3 * (1.0 + np.abs(wu) + np.abs(wx))
        best_u[todo], best_x[todo], best_d[todo], best_ok[todo] = bu, bx, bd, bok
    dist = np.sqrt(best_d ** 2 + slow_resid)
    return Projection(best_u, best_x, dist, best_ok, switched)


# ---------------------------------------------------------------------------
# regions and branch formulas

def region_codes(u, x2, dist, params: PatchParams) -> np.ndarray:
    u, x2, dist = np.broadcast_arrays(u, x2, dist)
    au, ax = np.abs(u), np.abs(x2)
    d = params.delta
    code = np.where(u >= 0, RegionTag.POS_U, RegionTag.NEG_U).astype(int)
    mid = (au < d) & (ax >= params.eps)
    code = np.where(mid & (au <= d / 2), RegionTag.OUTER_X2, code)
    code = np.where(mid & (au > d / 2), RegionTag.BLEND, code)
    code = np.where(u * u + x2 * x2 < params.eps, RegionTag.CORE_DISC, code)
    code = np.where(dist >= params.rho_cut, RegionTag.FAR, code)
    return code


def classify(p, params: PatchParams) -> RegionTag:
    P = _coords(p)
    pr = project(P, params.t)
    code = RegionTag(int(region_codes(pr.u, pr.x2, pr.dist, params)))
    if code != RegionTag.FAR and not bool(pr.converged):
        raise ProjectionError(
            f"projection onto L_t did not converge at {P.tolist()}: "
            f"u={float(pr.u):.6g} x2={float(pr.x2):.6g} dist={float(pr.dist):.3g}")
    return code


def _outer_raw(P):
    n = dim_of(P)
    x2, y2 = P[..., 1], P[..., n + 1]
    safe = np.where(x2 == 0.0, 1.0, x2)
    return np.where(x2 == 0.0, 0.0, -y2 / (2.0 * safe))


def H_outer(p, t: float = 0.0):
    """-y2 / (2 x2): alpha(X_t) with u eliminated through y2 and x1."""
    P = _coords(p)
    if np.any(np.abs(P[..., 1]) < 1e-9):
        raise SingularityError("H_outer needs |x2| >= 1e-9")
    return _outer_raw(P)


def _radicand(P, t):
    n = dim_of(P)
    return 3.0 * P[..., n] - P[..., 1] ** 2 + t


def _branch_raw(P, t, sign):
    x1, x2 = P[..., 0], P[..., 1]
    root = np.sqrt(np.maximum(_radicand(P, t), 0.0))
    return x1 / 3.0 + 2.0 * np.sign(sign) * root * (t - x2 * x2)


def H_branch_u(p, t: float, sign):
    """x1/3 + 2 sign sqrt(3 y1 - x2^2 + t) (t - x2^2), radicand clamped at 0."""
    P = _coords(p)
    if np.any(_radicand(P, t) < -1e-9):
        raise DomainError("radicand 3 y1 - x2^2 + t is negative")
    return _branch_raw(P, t, sign)


def _projection_gradient(P, u, x2, dist, t):
    """Gradients of the projected (u, x2) and of the distance with respect to P."""
    P = np.asarray(P, dtype=float)
    tgt, n = _core(P)
    shape = u.shape
    uf, xf = u.reshape(-1), x2.reshape(-1)
    r = _lift5(uf, xf, t) - tgt.reshape(-1, 5)
    J = _jac5(uf, xf, t)
    huu, hux, hxx = _curvature(uf, xf, t, r)
    a = np.einsum("ki,ki->k", J[:, 0], J[:, 0]) + huu
    b = np.einsum("ki,ki->k", J[:, 0], J[:, 1]) + hux
    c = np.einsum("ki,ki->k", J[:, 1], J[:, 1]) + hxx
    det = a * c - b * b
    det = np.where(np.abs(det) < 1e-300, 1e-300, det)
    # d(u, x2)/d(core coordinates) = A^{-1} J
    gu = (c[:, None] * J[:, 0] - b[:, None] * J[:, 1]) / det[:, None]
    gx = (a[:, None] * J[:, 1] - b[:, None] * J[:, 0]) / det[:, None]
    idx = [0, 1, n, n + 1, 2 * n]
    d = P.shape[-1]
    du = np.zeros((uf.size, d))
    dx = np.zeros((uf.size, d))
    dd = np.zeros((uf.size, d))
    du[:, idx] = gu
    dx[:, idx] = gx
    distf = dist.reshape(-1)
    safe = np.where(distf > 0, distf, 1.0)
    dd[:, idx] = np.where(distf[:, None] > 0, -r / safe[:, None], 0.0)
    if n > 2:
        ys = P[..., n + 2:2 * n].reshape(-1, n - 2)
        dd[:, n + 2:2 * n] = np.where(distf[:, None] > 0, ys / safe[:, None], 0.0)
    return du.reshape(shape + (d,)), dx.reshape(shape + (d,)), dd.reshape(shape + (d,))


@dataclass
class Evaluation:
    value: np.ndarray
    proj: Projection
    region: np.ndarray


class HamiltonianExtension:
    """The cut-off extension ``H_t`` of alpha(X_t) as an ambient function.

    Off L_t the branch formulas are multiplied by smooth guards (``x2`` away
    from 0, radicand away from 0) that equal 1 wherever the formula is used
    on L_t itself, so the restriction to L_t is untouched.
    """

    def __init__(self, params: PatchParams = PatchParams(), n: int = 2):
        self.params = params
        self.n = n

    def _mix(self, P, u, x2p, dist, t):
        prm = self.params
        eps, dl = prm.eps, prm.delta
        ax = np.abs(P[..., 1])
        outer = _outer_raw(P) * ramp(ax, eps / 4, eps / 2)
        rad = _radicand(P, t)
        branch = _branch_raw(P, t, np.where(u >= 0, 1.0, -1.0)) * ramp(rad, dl * dl / 16, dl * dl / 8)
        w = ramp(np.abs(u), dl / 2, dl)
        val = (1.0 - w) * outer + w * branch
        code = region_codes(u, x2p, dist, prm)
        val = np.where(code == RegionTag.CORE_DISC, wrinkle.alpha_Xt(u, x2p, t), val)
        bump = 1.0 - ramp(dist, prm.rho_tube, prm.rho_cut)
        return val * bump, code

    def evaluate(self, P, t: Optional[float] = None, guess=None, search: bool = True) -> Evaluation:
        t = self.params.t if t is None else t
        P = np.asarray(_coords(P), dtype=float)
        pr = project(P, t, guess, search=search)
        val, code = self._mix(P, pr.u, pr.x2, pr.dist, t)
        return Evaluation(val, pr, code)

    def value(self, P, t: Optional[float] = None):
        return self.evaluate(P, t).value

    def gradient(self, P, t: Optional[float] = None, center: Optional[Evaluation] = None):
        """Closed-form gradient of the branch active at ``P``.

        The projected parameters are differentiated implicitly through the
        nearest-point condition and the distance through the envelope
        theorem, so this is exact up to the projection tolerance.
        """
        t = self.params.t if t is None else t
        P = np.asarray(_coords(P), dtype=float)
        if center is None:
            center = self.evaluate(P, t)
        prm = self.params
        eps, dl = prm.eps, prm.delta
        n = dim_of(P)
        u, x2p, dist = center.proj.u, center.proj.x2, center.proj.dist
        du, dx2, ddist = _projection_gradient(P, u, x2p, dist, t)
        e = lambda k: np.eye(2 * n + 1)[k]

        x2, y1, y2, x1 = P[..., 1], P[..., n], P[..., n + 1], P[..., 0]
        ax = np.abs(x2)
        sx = np.where(x2 >= 0, 1.0, -1.0)
        safe_x = np.where(ax < eps / 8, 1.0, x2)
        ho = np.where(ax < eps / 8, 0.0, -y2 / (2.0 * safe_x))
        rx, rx_d = ramp(ax, eps / 4, eps / 2), ramp_deriv(ax, eps / 4, eps / 2) * sx
        O = ho * rx
        dO = ((np.where(ax < eps / 8, 0.0, y2 / (2.0 * safe_x ** 2)) * rx + ho * rx_d)[..., None] * e(1)
              + np.where(ax < eps / 8, 0.0, -rx / (2.0 * safe_x))[..., None] * e(n + 1))

        sg = np.where(u >= 0, 1.0, -1.0)
        rad = _radicand(P, t)
        root = np.sqrt(np.maximum(rad, 0.0))
        safe_r = np.where(root > 0, root, 1.0)
        live = rad > dl * dl / 32
        s_ = t - x2 * x2
        hb = x1 / 3.0 + 2.0 * sg * root * s_
        rr, rr_d = ramp(rad, dl * dl / 16, dl * dl / 8), ramp_deriv(rad, dl * dl / 16, dl * dl / 8)
        B = hb * rr
        dhb = (e(0) / 3.0
               + np.where(live, 3.0 * sg * s_ / safe_r, 0.0)[..., None] * e(n)
               + np.where(live, 2.0 * sg * (-x2 * s_ / safe_r - 2.0 * x2 * root), 0.0)[..., None] * e(1))
        drad = 3.0 * e(n) - (2.0 * x2)[..., None] * e(1)
        dB = dhb * rr[..., None] + (hb * rr_d)[..., None] * drad

        w = ramp(np.abs(u), dl / 2, dl)
        dw = (ramp_deriv(np.abs(u), dl / 2, dl) * sg)[..., None] * du
        M = (1.0 - w) * O + w * B
        dM = (B - O)[..., None] * dw + (1.0 - w)[..., None] * dO + w[..., None] * dB

        core = center.region == RegionTag.CORE_DISC
        Mc = wrinkle.alpha_Xt(u, x2p, t)
        dMc = (u * u + t - x2p * x2p)[..., None] * du - (2.0 * u * x2p)[..., None] * dx2
        M = np.where(core, Mc, M)
        dM = np.where(core[..., None], dMc, dM)

        bump = 1.0 - ramp(dist, prm.rho_tube, prm.rho_cut)
        dbump = -ramp_deriv(dist, prm.rho_tube, prm.rho_cut)[..., None] * ddist
        return bump[..., None] * dM + M[..., None] * dbump

    def fd_gradient(self, P, t: Optional[float] = None, center: Optional[Evaluation] = None):
        """Central-difference gradient; stencil projections are warm-started from the centre."""
        t = self.params.t if t is None else t
        P = np.asarray(_coords(P), dtype=float)
        if center is None:
            center = self.evaluate(P, t)
        d = P.shape[-1]
        h = fd_steps(P)
        offs = h[..., None, :] * np.eye(d)
        stencil = np.stack([P[..., None, :] + offs, P[..., None, :] - offs], axis=-3)
        guess = (np.broadcast_to(center.proj.u[..., None, None], stencil.shape[:-1]),
                 np.broadcast_to(center.proj.x2[..., None, None], stencil.shape[:-1]))
        vals = self.evaluate(stencil, t, guess, search=False).value
        return (vals[..., 0, :] - vals[..., 1, :]) / (2.0 * h)

    def contact_field(self, P, t: Optional[float] = None, guess=None):
        """Contact vector field of H_t at ``P`` together with the centre evaluation.

        ``guess`` warm-starts the projection (e.g. with the previous step's parameters).
        """
        t = self.params.t if t is None else t
        P = np.asarray(_coords(P), dtype=float)
        ev = self.evaluate(P, t, guess)
        g = self.gradient(P, t, ev)
        return contact_field_from(P, ev.value, g), ev

    def scalar_field(self, t: Optional[float] = None) -> ScalarField:
        t = self.params.t if t is None else t
        return ScalarField(lambda p: self.value(p, t), lambda p: self.gradient(p, t))


def H_ext(p, t: float, params: PatchParams):
    return HamiltonianExtension(params, dim_of(_coords(p))).value(p, t)


# ---------------------------------------------------------------------------
# studies used by tests, the verifier and the CLI

def unit_normals(u, x2, t, k: int = 0):
    """A unit normal to L_t (n = 2) at the given parameters; ``k`` selects one of three."""
    J = wrinkle.jacobian(u, x2, t, 2)
    # complete the two tangent rows to a basis with QR; columns 2.. span the normal space
    A = np.concatenate([np.swapaxes(J, -1, -2), np.broadcast_to(np.eye(5)[:, :3], J.shape[:-2] + (5, 3))], axis=-1)
    Q, _ = np.linalg.qr(A)
    return Q[..., :, 2 + k]


def transport_error(ext: HamiltonianExtension, t: float, delta: float, params_uv,
                    substeps: int = 4) -> np.ndarray:
    """Distance from the flowed L_t samples to L_{t+delta}, with H frozen at time t."""
    from .contact import flow

    u, x2 = (np.asarray(a, dtype=float) for a in params_uv)
    P0 = wrinkle.lift_family(u, x2, t, ext.n)

    def field(_s, y):
        return ext.contact_field(y, t)[0]

    res = flow(field, P0, 0.0, delta, step=delta / substeps)
    return project(res.state, t + delta).dist


@dataclass
class TransportStudy:
    deltas: np.ndarray
    rms: np.ndarray
    max: np.ndarray
    order_rms: float
    order_max: float


def transport_order(ext: HamiltonianExtension, t: float, deltas, params_uv) -> TransportStudy:
    """Log-log slope of the transport error against the step, in RMS and max norms."""
    deltas = np.asarray(deltas, dtype=float)
    E = np.array([transport_error(ext, t, d, params_uv) for d in deltas])
    rms = np.sqrt(np.mean(E ** 2, axis=1))
    mx = E.max(axis=1)
    slope = lambda e: float(np.polyfit(np.log(deltas), np.log(e), 1)[0])
    return TransportStudy(deltas, rms, mx, slope(rms), slope(mx))


def transport_grid(params: PatchParams, box: float = 1.5, size: int = 31):
    """Regular parameter grid with the core disc (and a margin) removed."""
    g = np.linspace(-box, box, size)
    U, X = np.meshgrid(g, g, indexing="ij")
    keep = U * U + X * X > 1.5 * params.eps
    return U[keep], X[keep]


def boundary_jumps(ext: HamiltonianExtension, t: float, count: int = 400, seed: int = 0,
                   max_offset: Optional[float] = None, eta: float = 1e-9) -> np.ndarray:
    """|H| jumps across region boundaries at points near L_t.

    Boundary parameters are drawn on |u| = delta/2 and |u| = delta (outside
    the core disc); each is pushed off L_t along a normal by a random amount
    up to ``max_offset`` and H is compared just either side of the boundary.
    """
    prm = ext.params
    rng = np.random.default_rng(seed)
    max_offset = prm.rho_tube / 4 if max_offset is None else max_offset
    m = count // 2
    au = np.concatenate([np.full(m, prm.delta / 2), np.full(count - m, prm.delta)])
    side = rng.choice([-1.0, 1.0], size=count)
    # |x2| >= eps keeps both boundaries outside the core disc
    x2 = rng.uniform(prm.eps, 1.5, size=count) * rng.choice([-1.0, 1.0], size=count)
    u = side * au
    off = rng.uniform(0.0, max_offset, size=count)
    k = rng.integers(0, 3, size=count)
    nrm = np.stack([unit_normals(u, x2, t, j) for j in range(3)], axis=0)[k, np.arange(count)]
    base_in = wrinkle.lift_family(u - side * eta, x2, t) + off[:, None] * nrm
    base_out = wrinkle.lift_family(u + side * eta, x2, t) + off[:, None] * nrm
    h_in = ext.value(base_in, t)
    h_out = ext.value(base_out, t)
    return np.abs(h_in - h_out)
