"""Symplectization Y x R with omega = d(e^v alpha): lifted maps, the cutoff
Hamiltonian and the trace of L_0 x R under its flow.

Sign convention: the Hamiltonian field of F satisfies ``omega(W, X_F) = dF(W)``.
With this choice the field of ``e^v H`` projects to the contact field of ``H``
(``alpha(X_H) = H``), i.e. the lift of a contact isotopy runs forwards.
Writing ``K = e^-v F`` and ``a = e^-v dF/dv`` the field is

    dx = -K_y,  dy = K_x + y K_z,  dz = a - y . K_y,  dv = -K_z.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import wrinkle
from .contact import _V_MAX, _coords, alpha_eval, dim_of, fd_gradient, n_steps, symp_form_eval
from .patch import HamiltonianExtension, RegionTag
from .profiles import ramp, ramp_deriv
from .push import measure_lambda, probe_vectors


# ---------------------------------------------------------------------------
# lifted contactomorphisms

class ConsistencyError(ValueError):
    pass


def symp_matrix(P) -> np.ndarray:
    """Matrix of omega at P: omega(W1, W2) = W1 . M W2."""
    P = _coords(P)
    d = P.shape[-1]
    eye = np.eye(d)
    return symp_form_eval(np.broadcast_to(P[..., None, None, :], P.shape[:-1] + (d, d, d)),
                          eye[:, None, :], eye[None, :, :])


@dataclass
class LiftedMap:
    """(p, v) -> (psi(p), v - h(p)) for a contact map with psi^* alpha = e^h alpha."""

    psi: Callable[[np.ndarray], np.ndarray]
    h: Callable[[np.ndarray], np.ndarray]

    def __call__(self, P):
        P = _coords(P)
        out = np.empty(P.shape)
        out[..., :-1] = self.psi(P[..., :-1])
        out[..., -1] = P[..., -1] - self.h(P[..., :-1])
        return out

    def differential(self, P, W, step: float = 1e-4):
        P, W = _coords(P), _coords(W)
        return (self(P + step * W) - self(P - step * W)) / (2 * step)

    def symplectic_residual(self, points, pairs: int = 5, seed: int = 0, step: float = 1e-4) -> float:
        """max |omega(dPhi W1, dPhi W2) - omega(W1, W2)| over random unit tangent pairs."""
        pts = np.atleast_2d(_coords(points))
        rng = np.random.default_rng(seed)
        d = pts.shape[-1]
        worst = 0.0
        for P in pts:
            W = rng.normal(size=(2, pairs, d))
            W /= np.linalg.norm(W, axis=-1, keepdims=True)
            img = self(P)
            a = symp_form_eval(P, W[0], W[1])
            b = symp_form_eval(img, self.differential(P, W[0], step), self.differential(P, W[1], step))
            worst = max(worst, float(np.max(np.abs(a - b))))
        return worst


def lift_contactomorphism(psi, h, check_points=None, tol: float = 1e-4, seed: int = 0) -> LiftedMap:
    """Lift a contact map with conformal exponent ``h`` after checking e^h against measured lambda."""
    if check_points is not None:
        for p in np.atleast_2d(_coords(check_points)):
            lam = measure_lambda(psi, p, seed=seed).value
            eh = math.exp(float(h(p)))
            if abs(lam - eh) > tol * max(1.0, abs(lam)):
                raise ConsistencyError(
                    f"e^h = {eh:.10g} disagrees with measured lambda = {lam:.10g} at {p.tolist()}")
    return LiftedMap(psi, h)


def flow_lift(H, duration: float, step: float = 1e-3):
    """Lifted map of the time-``duration`` contact flow of a ScalarField, h from the flow."""
    from .contact import conformal_contact_flow

    cache = {}

    def run(p):
        key = np.asarray(p).tobytes() + np.asarray(np.shape(p)).tobytes()
        if key not in cache:
            cache.clear()
            cache[key] = conformal_contact_flow(H, p, duration, step)
        return cache[key]

    return LiftedMap(lambda p: run(p)[0], lambda p: run(p)[1])


# ---------------------------------------------------------------------------
# the cutoff Hamiltonian on the symplectization

def band_cutoff(v, T_band: float):
    return ramp(v, -T_band, T_band)


def band_cutoff_deriv(v, T_band: float):
    return ramp_deriv(v, -T_band, T_band)


@dataclass
class CutoffLiftedHamiltonian:
    """chi(v) e^v H_t(p) with chi = 0 below -T_band and 1 above T_band.

    ``H`` maps a time to a ScalarField (or anything with ``__call__`` and
    ``gradient``).
    """

    H: Callable
    T_band: float = 1.0

    def __post_init__(self):
        if self.T_band <= 0:
            raise ValueError("T_band must be positive")

    def value(self, P, t: float):
        P = _coords(P)
        v = P[..., -1]
        return band_cutoff(v, self.T_band) * np.exp(v) * self.H(t)(P[..., :-1])

    def gradient(self, P, t: float):
        P = _coords(P)
        v = P[..., -1]
        Ht = self.H(t)
        h = np.asarray(Ht(P[..., :-1]), dtype=float)
        g = np.asarray(Ht.gradient(P[..., :-1]), dtype=float)
        chi, dchi = band_cutoff(v, self.T_band), band_cutoff_deriv(v, self.T_band)
        out = np.empty(np.broadcast_shapes(P.shape, g.shape[:-1] + (P.shape[-1],)))
        out[..., :-1] = (chi * np.exp(v))[..., None] * g
        out[..., -1] = (dchi + chi) * np.exp(v) * h
        return out


def lifted_hamiltonian(H, T_band: float = 1.0) -> CutoffLiftedHamiltonian:
    return CutoffLiftedHamiltonian(H, T_band)


def field_from_gradient(P, dF) -> np.ndarray:
    """Hamiltonian field of F at P from its full gradient (contact part, then d/dv)."""
    P, dF = _coords(P), np.asarray(dF, dtype=float)
    v = P[..., -1]
    if np.any(np.abs(v) > _V_MAX):
        raise OverflowError("|v| too large for e^-v")
    n = dim_of(P[..., :-1])
    y = P[..., n:2 * n]
    k = np.exp(-v)[..., None] * dF
    Ky, Kx, Kz, a = k[..., n:2 * n], k[..., :n], k[..., 2 * n], k[..., 2 * n + 1]
    X = np.empty(np.broadcast_shapes(P.shape, dF.shape))
    X[..., :n] = -Ky
    X[..., n:2 * n] = Kx + y * Kz[..., None]
    X[..., 2 * n] = a - np.sum(y * Ky, axis=-1)
    X[..., 2 * n + 1] = -Kz
    return X


def field_residual(P, X, dF) -> float:
    """max over basis vectors W of |omega(W, X) - dF(W)|."""
    M = symp_matrix(P)
    return float(np.max(np.abs(np.einsum("...ij,...j->...i", M, _coords(X)) - dF)))


def hamiltonian_field_symp(F, P, t: float, check: bool = False, tol: float = 1e-8) -> np.ndarray:
    """Hamiltonian field of ``F`` (with ``gradient(P, t)``, or a callable ``F(P, t)``)."""
    P = _coords(P)
    if hasattr(F, "gradient"):
        dF = F.gradient(P, t)
    else:
        dF = fd_gradient(lambda Q: F(Q, t), P)
    X = field_from_gradient(P, dF)
    if check:
        M = symp_matrix(P)
        assert np.all(np.abs(np.linalg.det(M)) > 0), "omega is degenerate"
        res = field_residual(P, X, dF)
        if res > tol * (1.0 + float(np.max(np.abs(dF)))):
            raise ArithmeticError(f"field residual {res:.3g} above tolerance")
    return X


# ---------------------------------------------------------------------------
# Hamiltonian families used by the trace

@dataclass
class FamilyData:
    value: np.ndarray
    gradient: np.ndarray
    stop: np.ndarray            # nodes that must be flagged as truncated
    guess: Optional[tuple] = None
    crossing: Optional[np.ndarray] = None   # subset of ``stop``: nearest point jumped inside the support


class ZeroFamily:
    def data(self, P, t, guess=None, search=True):
        return FamilyData(np.zeros(P.shape[:-1]), np.zeros(P.shape), np.zeros(P.shape[:-1], dtype=bool))


@dataclass
class FunctionFamily:
    """H(P, t) with an optional closed-form gradient ``grad(P, t)``."""

    fn: Callable
    grad: Optional[Callable] = None

    def data(self, P, t, guess=None, search=True):
        val = np.asarray(self.fn(P, t), dtype=float)
        g = self.grad(P, t) if self.grad is not None else fd_gradient(lambda Q: self.fn(Q, t), P)
        return FamilyData(val, np.asarray(g, dtype=float), np.zeros(P.shape[:-1], dtype=bool))


@dataclass
class ExtensionFamily:
    """The extended Hamiltonian H_t; nodes entering the core disc or crossing the medial axis are stopped."""

    ext: HamiltonianExtension

    def data(self, P, t, guess=None, search=True):
        ev = self.ext.evaluate(P, t, guess, search=search or guess is None)
        g = self.ext.gradient(P, t, ev)
        stop = (ev.region == RegionTag.CORE_DISC) | ~ev.proj.converged & (ev.region != RegionTag.FAR)
        # across the medial axis of L_t the extension is only continuous; a
        # trajectory crossing it inside the cutoff tube is frozen and flagged
        cross = ev.proj.switched & (ev.proj.dist < self.ext.params.rho_cut)
        return FamilyData(ev.value, g, stop | cross, (ev.proj.u, ev.proj.x2), cross)


# ---------------------------------------------------------------------------
# trace of L_0 x R

@dataclass
class TraceGrid:
    u: np.ndarray
    x2: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        for name in ("u", "x2", "v"):
            a = np.asarray(getattr(self, name), dtype=float)
            if a.ndim != 1 or a.size < 3:
                raise ValueError(f"grid axis {name} needs at least 3 nodes")
            setattr(self, name, a)

    @classmethod
    def regular(cls, box: float, v_range: Sequence[float], size: int, v_size: int) -> "TraceGrid":
        g = np.linspace(-box, box, size)
        return cls(g, g.copy(), np.linspace(v_range[0], v_range[1], v_size))

    def subsample(self, k: int) -> "TraceGrid":
        return TraceGrid(self.u[::k], self.x2[::k], self.v[::k])


@dataclass
class MeshedLagrangian:
    """Images of the grid nodes of L_0 x [v range] under the time-one map.

    ``coords`` has shape (Nu, Nx, Nv, 2n+2); ``primitive`` is the action
    primitive of e^v alpha carried along the flow.
    """

    grid: TraceGrid
    coords: np.ndarray
    primitive: np.ndarray
    truncated: np.ndarray
    core: np.ndarray
    t_span: tuple = (0.0, 1.0)
    T_band: float = 1.0
    meta: dict = field(default_factory=dict)
    crossed: Optional[np.ndarray] = None    # truncated because the nearest point jumped

    def __post_init__(self):
        if self.crossed is None:
            self.crossed = np.zeros(self.truncated.shape, dtype=bool)

    @property
    def n(self) -> int:
        return (self.coords.shape[-1] - 2) // 2

    @property
    def shape(self):
        return self.coords.shape[:-1]

    def subsample(self, k: int) -> "MeshedLagrangian":
        s = (slice(None, None, k),) * 3
        return MeshedLagrangian(self.grid.subsample(k), self.coords[s], self.primitive[s],
                                self.truncated[s], self.core[s], self.t_span, self.T_band, dict(self.meta),
                                self.crossed[s])

    def export(self) -> str:
        n = self.n
        cols = ["i", "j", "k", "u", "x2", "v0"]
        cols += [f"x{i + 1}" for i in range(n)] + [f"y{i + 1}" for i in range(n)] + ["z", "v", "f", "flags"]
        lines = ["# wrinkled-cobordism trace mesh",
                 f"# shape {' '.join(str(s) for s in self.shape)}  n {n}",
                 f"# t_span {self.t_span[0]!r} {self.t_span[1]!r}  T_band {self.T_band!r}",
                 "# flags: bit 1 truncated, bit 2 started in core disc, bit 4 truncated at a medial-axis crossing",
                 "# " + " ".join(cols)]
        Nu, Nx, Nv = self.shape
        for i in range(Nu):
            for j in range(Nx):
                for k in range(Nv):
                    c = self.coords[i, j, k]
                    flag = (int(self.truncated[i, j, k]) + 2 * int(self.core[i, j, k])
                            + 4 * int(self.crossed[i, j, k]))
                    row = [str(i), str(j), str(k), repr(float(self.grid.u[i])), repr(float(self.grid.x2[j])),
                           repr(float(self.grid.v[k]))] + [repr(float(a)) for a in c]
                    row += [repr(float(self.primitive[i, j, k])), str(flag)]
                    lines.append(" ".join(row))
        return "\n".join(lines) + "\n"


def cylinder(grid: TraceGrid, t: float, n: int = 2) -> MeshedLagrangian:
    """L_t x R sampled on the grid (no flow)."""
    U, X, V = np.meshgrid(grid.u, grid.x2, grid.v, indexing="ij")
    p = wrinkle.lift_family(U, X, t, n)
    coords = np.concatenate([p, V[..., None]], axis=-1)
    z = np.zeros(U.shape)
    return MeshedLagrangian(grid, coords, z, z.astype(bool), z.astype(bool), (t, t), 1.0)


def cylinder_patches(base, spacings, t: float, n: int = 2) -> list:
    """3x3x3 patches of L_t x R around base nodes (u, x2, v), primitive zero."""
    base = np.atleast_2d(np.asarray(base, dtype=float))
    off = np.array([-1.0, 0.0, 1.0])
    O = np.stack(np.meshgrid(off, off, off, indexing="ij"), axis=-1)
    out = []
    for h in spacings:
        N = base[:, None, None, None, :] + h * O[None]
        p = wrinkle.lift_family(N[..., 0], N[..., 1], t, n)
        coords = np.concatenate([p, N[..., 2:3]], axis=-1)
        z = np.zeros(N.shape[:-1])
        out.append(PatchSet(base, float(h), coords, z, z.astype(bool)))
    return out


def legendrian_residual(grid: TraceGrid, t: float, n: int = 2) -> float:
    U, X = np.meshgrid(grid.u, grid.x2, indexing="ij")
    p = wrinkle.lift_family(U, X, t, n)
    J = wrinkle.jacobian(U, X, t, n)
    return float(np.max(np.abs(alpha_eval(p[..., None, :], J))))


def _upper_field(family, n):
    def field(t, Y, guess, search=True):
        p = Y[:, :2 * n + 1]
        d = family.data(p, t, guess, search)
        out = np.zeros_like(Y)
        out[:, :2 * n + 1] = _contact_rhs(p, d.value, d.gradient, 1.0, 0.0, n)
        # conformal exponent: dh/dt = H_z
        out[:, 2 * n + 1] = d.gradient[:, 2 * n]
        return out, d
    return field


def _contact_rhs(p, H, g, chi, dchi, n):
    y = p[:, n:2 * n]
    gx, gy, gz = g[:, :n], g[:, n:2 * n], g[:, 2 * n]
    out = np.empty(p.shape)
    chi = np.broadcast_to(np.asarray(chi, dtype=float), H.shape)
    dchi = np.broadcast_to(np.asarray(dchi, dtype=float), H.shape)
    out[:, :n] = -chi[:, None] * gy
    out[:, n:2 * n] = chi[:, None] * (gx + y * gz[:, None])
    out[:, 2 * n] = (chi + dchi) * H - chi * np.sum(y * gy, axis=-1)
    return out


def _band_field(family, n, T_band):
    def field(t, Y, guess, search=True):
        p, v = Y[:, :2 * n + 1], Y[:, 2 * n + 1]
        d = family.data(p, t, guess, search)
        chi, dchi = band_cutoff(v, T_band), band_cutoff_deriv(v, T_band)
        out = np.zeros_like(Y)
        out[:, :2 * n + 1] = _contact_rhs(p, d.value, d.gradient, chi, dchi, n)
        out[:, 2 * n + 1] = -chi * d.gradient[:, 2 * n]
        # action primitive: dS/dt = dF/dv - F = chi'(v) e^v H
        out[:, 2 * n + 2] = dchi * np.exp(v) * d.value
        d.stop &= chi > 0
        if d.crossing is not None:
            d.crossing &= chi > 0
        return out, d
    return field


def _integrate(field, Y, t0, t1, step, bound, n, search_every: int = 4):
    """RK4 with per-node freezing on truncation.

    Returns the state, truncated flags, medial-axis crossing flags and the
    running max of column 2n+1.  The wide projection search runs on the
    first stage of every ``search_every``-th step; in between the local
    nearest point is continued, which is smooth, and a crossing is caught at
    the next search.
    """
    trunc = np.zeros(len(Y), dtype=bool)
    crossed = np.zeros(len(Y), dtype=bool)
    guess = None
    steps = n_steps(t0, t1, step)
    h = (t1 - t0) / steps
    running_max = Y[:, 2 * n + 1].copy()
    for k in range(steps):
        act = np.flatnonzero(~trunc)
        if act.size == 0:
            break
        t = t0 + k * h
        y = Y[act]
        g = None if guess is None else (guess[0][act], guess[1][act])
        k1, d1 = field(t, y, g, k % search_every == 0)
        g1 = d1.guess
        k2, d2 = field(t + h / 2, y + h / 2 * k1, g1, False)
        k3, d3 = field(t + h / 2, y + h / 2 * k2, d2.guess, False)
        k4, d4 = field(t + h, y + h * k3, d3.guess, False)
        new = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        bad = d1.stop | d2.stop | d3.stop | d4.stop
        cross = np.zeros(len(act), dtype=bool)
        for d in (d1, d2, d3, d4):
            if d.crossing is not None:
                cross |= d.crossing
        crossed[act[cross]] = True
        bad |= ~np.all(np.isfinite(new), axis=-1)
        bad |= np.any(np.abs(new[:, :2 * n + 1]) > bound, axis=-1)
        ok = act[~bad]
        Y[ok] = new[~bad]
        trunc[act[bad]] = True
        running_max[ok] = np.maximum(running_max[ok], Y[ok, 2 * n + 1])
        if d4.guess is not None:
            if guess is None:
                guess = (np.zeros(len(Y)), np.zeros(len(Y)))
            guess[0][act], guess[1][act] = d4.guess
    return Y, trunc, crossed, running_max


@dataclass
class NodeFlow:
    coords: np.ndarray
    primitive: np.ndarray
    truncated: np.ndarray
    shared: np.ndarray
    crossed: np.ndarray


def flow_nodes(family, u, x2, v, t_span=(-1.0, 1.0), T_band: float = 1.0, step: float = 0.02,
               end_step: Optional[float] = 0.01, bound: float = 50.0, n: int = 2,
               margin: float = 0.05) -> NodeFlow:
    """Time-one images of the nodes (lift(u, x2, t0), v) under chi(v) e^v H_t.

    Nodes below the band never move.  Above the band the field is the lift
    of the contact flow of H_t, so nodes sharing (u, x2) share one contact
    trajectory and differ only by a shift in v; a node is handled that way
    when its v stays above ``T_band + margin`` throughout, and integrated in
    full otherwise.  Shared trajectories use the finer ``end_step`` since
    they carry the end of the cobordism.  Nodes that leave the box ``bound``
    or that the family stops (core disc) are frozen and flagged as truncated.
    """
    end_step = step if end_step is None else end_step
    t0, t1 = t_span
    d = 2 * n + 1
    u, x2, v = (np.asarray(a, dtype=float).reshape(-1) for a in (u, x2, v))
    p0 = wrinkle.lift_family(u, x2, t0, n)
    coords = np.concatenate([p0, v[:, None]], axis=1)
    prim = np.zeros(len(u))
    trunc = np.zeros(len(u), dtype=bool)
    crossed = np.zeros(len(u), dtype=bool)
    shared = np.zeros(len(u), dtype=bool)

    upper = v > T_band + margin
    if np.any(upper):
        pairs, inv = np.unique(np.stack([u[upper], x2[upper]], axis=1), axis=0, return_inverse=True)
        inv = inv.reshape(-1)
        Y = np.concatenate([wrinkle.lift_family(pairs[:, 0], pairs[:, 1], t0, n), np.zeros((len(pairs), 1))], axis=1)
        Y, tr, cr, hmax = _integrate(_upper_field(family, n), Y, t0, t1, end_step, bound, n)
        idx = np.flatnonzero(upper)
        ok = v[idx] - hmax[inv] > T_band + margin
        idx, inv = idx[ok], inv[ok]
        coords[idx, :d] = Y[inv, :d]
        coords[idx, d] = v[idx] - Y[inv, d]
        trunc[idx] = tr[inv]
        crossed[idx] = cr[inv]
        shared[idx] = True

    full = ~shared & (v > -T_band)
    if np.any(full):
        idx = np.flatnonzero(full)
        Y = np.concatenate([coords[idx], np.zeros((len(idx), 1))], axis=1)
        Y, tr, cr, _ = _integrate(_band_field(family, n, T_band), Y, t0, t1, step, bound, n)
        coords[idx] = Y[:, :d + 1]
        prim[idx] = Y[:, d + 1]
        trunc[idx] = tr
        crossed[idx] = cr
    return NodeFlow(coords, prim, trunc, shared, crossed)


def _core_eps(family, core_eps):
    if core_eps is not None:
        return core_eps
    return getattr(getattr(getattr(family, "ext", None), "params", None), "eps", 0.0)


def trace_cobordism(family, grid: TraceGrid, t_span=(-1.0, 1.0), T_band: float = 1.0,
                    step: float = 0.02, end_step: Optional[float] = 0.01, bound: float = 50.0,
                    n: int = 2, margin: float = 0.05, core_eps: Optional[float] = None) -> MeshedLagrangian:
    """Flow L_{t0} x [v range] by the Hamiltonian chi(v) e^v H_t over ``t_span`` (see :func:`flow_nodes`)."""
    res = legendrian_residual(grid, t_span[0], n)
    if res > 1e-8:
        raise ValueError(f"initial samples are not Legendrian (residual {res:.3g})")
    U, X, V = np.meshgrid(grid.u, grid.x2, grid.v, indexing="ij")
    fl = flow_nodes(family, U, X, V, t_span, T_band, step, end_step, bound, n, margin)
    shape = U.shape
    eps = _core_eps(family, core_eps)
    meta = {"step": step, "end_step": step if end_step is None else end_step, "bound": bound,
            "shared_nodes": int(fl.shared.sum()), "full_nodes": int(np.sum(~fl.shared & (V.reshape(-1) > -T_band)))}
    return MeshedLagrangian(grid, fl.coords.reshape(shape + (-1,)), fl.primitive.reshape(shape),
                            fl.truncated.reshape(shape), U * U + X * X < eps, tuple(t_span), T_band, meta,
                            fl.crossed.reshape(shape))


@dataclass
class PatchSet:
    """Small 3x3x3 meshes of spacing ``h`` around base nodes, traced like the main mesh.

    ``coords`` has shape (B, 3, 3, 3, 2n+2).
    """

    base: np.ndarray            # (B, 3) base parameters (u, x2, v)
    h: float
    coords: np.ndarray
    primitive: np.ndarray
    truncated: np.ndarray
    crossed: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.crossed is None:
            self.crossed = np.zeros(self.truncated.shape, dtype=bool)

    def as_meshes(self) -> list:
        out = []
        off = np.array([-self.h, 0.0, self.h])
        for b in range(len(self.base)):
            g = TraceGrid(self.base[b, 0] + off, self.base[b, 1] + off, self.base[b, 2] + off)
            tr = self.truncated[b]
            out.append(MeshedLagrangian(g, self.coords[b], self.primitive[b], tr, np.zeros_like(tr),
                                        crossed=self.crossed[b]))
        return out


def trace_patches(family, base, spacings, t_span=(-1.0, 1.0), T_band: float = 1.0, step: float = 0.02,
                  end_step: Optional[float] = 0.01, bound: float = 50.0, n: int = 2,
                  margin: float = 0.05) -> list:
    """One :class:`PatchSet` per spacing, all traced in a single batch."""
    base = np.atleast_2d(np.asarray(base, dtype=float))
    off = np.array([-1.0, 0.0, 1.0])
    O = np.stack(np.meshgrid(off, off, off, indexing="ij"), axis=-1)   # (3, 3, 3, 3)
    nodes = np.concatenate([base[:, None, None, None, :] + h * O[None] for h in spacings], axis=0)
    fl = flow_nodes(family, nodes[..., 0], nodes[..., 1], nodes[..., 2], t_span, T_band, step,
                    end_step, bound, n, margin)
    B = len(base)
    shape = (len(spacings), B, 3, 3, 3)
    c = fl.coords.reshape(shape + (-1,))
    f = fl.primitive.reshape(shape)
    tr = fl.truncated.reshape(shape)
    cr = fl.crossed.reshape(shape)
    return [PatchSet(base, float(h), c[k], f[k], tr[k], cr[k]) for k, h in enumerate(spacings)]


# ---------------------------------------------------------------------------
# isotopies conjugated by push maps

@dataclass
class ConjugatedSample:
    t: float
    points: np.ndarray
    alpha_new: np.ndarray
    alpha_old: np.ndarray

    @property
    def ratio(self):
        return self.alpha_new / self.alpha_old


def conjugated_isotopy(u, x2, ts, psi_of_t: Callable[[float], Callable], n: int = 2,
                       fd_step: float = 1e-4) -> list:
    """Samples of Psi_t(L_t) and alpha of their central-difference time derivative."""
    if not (fd_step > 1e-12):
        raise ValueError(f"time step {fd_step!r} too small for central differences")
    out = []
    for t in ts:
        Lp = psi_of_t(t + fd_step)(wrinkle.lift_family(u, x2, t + fd_step, n))
        Lm = psi_of_t(t - fd_step)(wrinkle.lift_family(u, x2, t - fd_step, n))
        L0 = psi_of_t(t)(wrinkle.lift_family(u, x2, t, n))
        Xp = (Lp - Lm) / (2 * fd_step)
        old = alpha_eval(wrinkle.lift_family(u, x2, t, n), wrinkle.isotopy_field_Xt(u, x2, t, n))
        out.append(ConjugatedSample(float(t), L0, alpha_eval(L0, Xp), old))
    return out
