"""Certificates for sampled Legendrians and traced Lagrangian cobordisms.

Every check returns a :class:`CheckResult`; a :class:`VerificationReport`
collects them and serializes to ``key = value`` text (values are JSON
literals, so floats round-trip exactly).

Finite-difference checks run on families of small patches traced at
decreasing spacing (see :func:`symplectization.trace_patches`).  The
reported residual is the per-patch Richardson extrapolation of the signed
defect from the two finest spacings, and the convergence order is the
least-squares slope of the largest defect against the spacing.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import patch, wrinkle
from .contact import alpha_eval, symp_form_eval
from .symplectization import MeshedLagrangian, PatchSet

TOLERANCES = {
    "identity": 1e-10,
    "legendrian": 1e-10,
    "lagrangian": 1e-5,
    "exact": 1e-5,
    "ends": 1e-4,
    "end_variance": 1e-6,
}
ORDER_RANGE = (1.8, 2.2)
# raw residuals below this are treated as roundoff, where no order can be measured
FLOOR = 1e-11
MAX_TRUNCATED = 0.2


@dataclass
class CheckResult:
    name: str
    residual: float
    tol: float
    samples: int
    passed: bool
    order: Optional[float] = None
    order_range: Optional[tuple] = None
    truncated: int = 0
    degenerate: bool = False
    floor: bool = False
    note: str = ""
    extra: dict = field(default_factory=dict)

    @property
    def margin(self) -> float:
        """residual / tol (how far above tolerance a failing check sits)."""
        return self.residual / self.tol if self.tol > 0 else float("inf")


@dataclass
class Convergence:
    order: float
    floor: bool
    na: bool


def convergence_study(residuals, spacings, floor: float = FLOOR) -> Convergence:
    """Least-squares slope of log(residual) against log(spacing).

    An all-zero sequence has no order (reported as inf, ``na``).  A sequence
    whose finest value is at roundoff level is flagged ``floor``.
    """
    r = np.asarray(residuals, dtype=float)
    h = np.asarray(spacings, dtype=float)
    if r.size < 3 or r.size != h.size:
        raise ValueError("a convergence study needs at least 3 resolutions")
    if np.all(r == 0.0):
        return Convergence(float("inf"), True, True)
    at_floor = bool(r[np.argmin(h)] <= floor)
    pos = r > 0
    if pos.sum() < 2:
        return Convergence(float("inf"), True, True)
    slope = float(np.polyfit(np.log(h[pos]), np.log(r[pos]), 1)[0])
    return Convergence(slope, at_floor, False)


def _finish(name, residual, tol, samples, conv: Optional[Convergence] = None, order_range=ORDER_RANGE,
            truncated=0, degenerate=False, note="", extra=None) -> CheckResult:
    ok = bool(np.isfinite(residual) and residual <= tol)
    order = None
    floor = False
    rng = None
    if conv is not None:
        order, floor, rng = conv.order, conv.floor, tuple(order_range)
        if not (conv.na or conv.floor):
            ok = ok and rng[0] <= conv.order <= rng[1]
    return CheckResult(name, float(residual), float(tol), int(samples), ok, order, rng, int(truncated),
                       bool(degenerate), bool(floor), note, dict(extra or {}))


# ---------------------------------------------------------------------------
# Legendrian condition

def check_legendrian(points, frames, tol: float = TOLERANCES["legendrian"], name: str = "legendrian") -> CheckResult:
    """max |alpha(w)| over the frame vectors ``frames[..., k, :]`` at ``points``."""
    P = np.asarray(points, dtype=float)
    F = np.asarray(frames, dtype=float)
    if F.shape[:-2] != P.shape[:-1] or F.shape[-1] != P.shape[-1]:
        raise ValueError("frames must have shape points.shape[:-1] + (k, 2n+1)")
    vals = np.abs(alpha_eval(P[..., None, :], F))
    live = np.linalg.norm(F, axis=-1) > 0
    degenerate = not np.any(live)
    res = float(vals.max()) if vals.size else 0.0
    return _finish(name, res, tol, int(np.prod(P.shape[:-1])), degenerate=degenerate,
                   note="all frame vectors vanish" if degenerate else "")


def legendrian_samples(u, x2, t: float, n: int = 2):
    """Lift samples with their exact tangent frames (rows of the jacobian)."""
    return wrinkle.lift_family(u, x2, t, n), wrinkle.jacobian(u, x2, t, n)


# ---------------------------------------------------------------------------
# patch geometry

def _center_tangents(c, h):
    """Central-difference tangents at the centre of (..., 3, 3, 3, d) blocks."""
    return [(c[..., 2, 1, 1, :] - c[..., 0, 1, 1, :]) / (2 * h),
            (c[..., 1, 2, 1, :] - c[..., 1, 0, 1, :]) / (2 * h),
            (c[..., 1, 1, 2, :] - c[..., 1, 1, 0, :]) / (2 * h)]


_PAIRS = ((0, 1), (0, 2), (1, 2))


def _scale(C, a, b):
    return np.exp(C[..., -1]) * np.linalg.norm(a, axis=-1) * np.linalg.norm(b, axis=-1)


def lagrangian_defect(ps: PatchSet) -> np.ndarray:
    """Signed omega(e_i, e_j) / (e^v |e_i| |e_j|) at each patch centre, shape (B, 3)."""
    E = _center_tangents(ps.coords, ps.h)
    C = ps.coords[:, 1, 1, 1]
    out = []
    for i, j in _PAIRS:
        s = _scale(C, E[i], E[j])
        out.append(symp_form_eval(C, E[i], E[j]) / np.where(s > 0, s, 1.0))
    return np.stack(out, axis=-1)


def liouville_edge(A, B) -> np.ndarray:
    """Trapezoid rule for the integral of e^v alpha along the chord from A to B."""
    n = (A.shape[-1] - 2) // 2
    ea, eb = np.exp(A[..., -1]), np.exp(B[..., -1])
    dz = B[..., 2 * n] - A[..., 2 * n]
    dx = B[..., :n] - A[..., :n]
    ya, yb = A[..., n:2 * n], B[..., n:2 * n]
    return 0.5 * (ea + eb) * dz - 0.5 * np.sum((ea[..., None] * ya + eb[..., None] * yb) * dx, axis=-1)


def _face(c, axes, i, j):
    idx = [1, 1, 1]
    idx[axes[0]], idx[axes[1]] = i, j
    return c[..., idx[0], idx[1], idx[2], :]


_RING = ((0, 0), (1, 0), (2, 0), (2, 1), (2, 2), (1, 2), (0, 2), (0, 1))


def loop_defect(ps: PatchSet) -> np.ndarray:
    """Signed loop integral of e^v alpha around the three centre faces over e^v |e_i| |e_j| area, (B, 3)."""
    c = ps.coords
    E = _center_tangents(c, ps.h)
    C = c[:, 1, 1, 1]
    out = []
    for a, b in _PAIRS:
        ring = [_face(c, (a, b), i, j) for i, j in _RING]
        tot = sum(liouville_edge(ring[k], ring[(k + 1) % 8]) for k in range(8))
        s = _scale(C, E[a], E[b]) * (2 * ps.h) ** 2
        out.append(tot / np.where(s > 0, s, 1.0))
    return np.stack(out, axis=-1)


def _grid_path(target):
    """Grid nodes from the centre (1, 1, 1) to ``target``, moving along axes 0, 1, 2 in turn."""
    cur = [1, 1, 1]
    path = [tuple(cur)]
    for ax in range(3):
        step = 1 if target[ax] > cur[ax] else -1
        while cur[ax] != target[ax]:
            cur[ax] += step
            path.append(tuple(cur))
    return path


def path_defect(ps: PatchSet) -> np.ndarray:
    """Primitive against path integration from the centre to every other patch node, (B, 26).

    Each entry is (f(node) - f(centre) - path integral) / (e^v_centre * path length).
    """
    c, f = ps.coords, ps.primitive
    ev = np.exp(c[:, 1, 1, 1, -1])
    out = []
    for i in range(3):
        for j in range(3):
            for k in range(3):
                if (i, j, k) == (1, 1, 1):
                    continue
                nodes = _grid_path((i, j, k))
                tot = 0.0
                length = 0.0
                for a, b in zip(nodes[:-1], nodes[1:]):
                    A, B = c[:, a[0], a[1], a[2]], c[:, b[0], b[1], b[2]]
                    tot = tot + liouville_edge(A, B)
                    length = length + np.linalg.norm(B - A, axis=-1)
                diff = f[:, i, j, k] - f[:, 1, 1, 1] - tot
                out.append(diff / np.where(length > 0, ev * length, 1.0))
    return np.stack(out, axis=-1)


def _excluded(ps: PatchSet) -> np.ndarray:
    B = len(ps.base)
    bad = ps.truncated.reshape(B, -1).any(axis=1)
    if ps.crossed is not None:
        bad |= ps.crossed.reshape(B, -1).any(axis=1)
    return bad


def _family_check(name, family: Sequence[PatchSet], defect, tol, order_range, note=""):
    fam = sorted(family, key=lambda p: -p.h)
    if len(fam) < 3:
        raise ValueError(f"{name}: need patches at 3 or more spacings")
    B = len(fam[0].base)
    if any(len(p.base) != B for p in fam):
        raise ValueError(f"{name}: every spacing must carry the same base nodes")
    bad = np.zeros(B, dtype=bool)
    for p in fam:
        bad |= _excluded(p)
    keep = ~bad
    hs = np.array([p.h for p in fam])
    if not np.any(keep):
        return _finish(name, float("inf"), tol, 0, truncated=int(bad.sum()), degenerate=True,
                       note="every patch was truncated")
    D = [defect(p)[keep] for p in fam]
    maxes = np.array([float(np.max(np.abs(d))) for d in D])
    rms = np.array([float(np.sqrt(np.mean(d ** 2))) for d in D])
    conv = convergence_study(maxes, hs)
    q2 = (hs[-2] / hs[-1]) ** 2
    rich = (q2 * D[-1] - D[-2]) / (q2 - 1.0)
    residual = float(np.max(np.abs(rich)))
    rms_conv = convergence_study(rms, hs)
    extra = {"spacings": [float(h) for h in hs], "max_defect": [float(m) for m in maxes],
             "rms_defect": [float(r) for r in rms], "order_rms": rms_conv.order,
             "finest_max": float(maxes[-1]), "patches": int(keep.sum())}
    return _finish(name, residual, tol, int(keep.sum()), conv, order_range, truncated=int(bad.sum()),
                   note=note, extra=extra)


def _mesh_lagrangian(mesh: MeshedLagrangian, tol):
    """Single-resolution defect over interior nodes (central differences on the grid)."""
    c = mesh.coords
    g = [mesh.grid.u, mesh.grid.x2, mesh.grid.v]
    inner = (slice(1, -1),) * 3
    E = []
    for ax in range(3):
        hi = [slice(1, -1)] * 3
        lo = [slice(1, -1)] * 3
        hi[ax], lo[ax] = slice(2, None), slice(None, -2)
        shape = [1, 1, 1]
        shape[ax] = -1
        span = (g[ax][2:] - g[ax][:-2]).reshape(shape)
        E.append((c[tuple(hi)] - c[tuple(lo)]) / span[..., None])
    C = c[inner]
    bad = mesh.truncated | mesh.core | mesh.crossed
    near = np.zeros_like(bad[inner])
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            for dk in (-1, 0, 1):
                near |= bad[1 + di:bad.shape[0] - 1 + di, 1 + dj:bad.shape[1] - 1 + dj, 1 + dk:bad.shape[2] - 1 + dk]
    vals = []
    for i, j in _PAIRS:
        s = _scale(C, E[i], E[j])
        vals.append(np.abs(symp_form_eval(C, E[i], E[j])) / np.where(s > 0, s, 1.0))
    V = np.max(np.stack(vals, -1), -1)[~near]
    res = float(V.max()) if V.size else float("inf")
    return _finish("lagrangian", res, tol, int(V.size), truncated=int(near.sum()), degenerate=V.size == 0)


def check_lagrangian(data, tol: float = TOLERANCES["lagrangian"], order_range=ORDER_RANGE,
                     name: str = "lagrangian") -> CheckResult:
    """omega on finite-difference tangent planes, normalized by e^v |e_i| |e_j|.

    ``data`` is either a list of :class:`PatchSet` at three or more spacings
    (residual extrapolated, order measured) or a single :class:`MeshedLagrangian`
    (largest interior defect at its own resolution, no order).
    """
    if isinstance(data, MeshedLagrangian):
        return _mesh_lagrangian(data, tol)
    return _family_check(name, data, lagrangian_defect, tol, order_range)


def check_exact(family: Sequence[PatchSet], mesh: Optional[MeshedLagrangian] = None, band: Optional[float] = None,
                tol: float = TOLERANCES["exact"], var_tol: float = TOLERANCES["end_variance"],
                order_range=ORDER_RANGE) -> list:
    """Exactness of e^v alpha on the trace, as three entries.

    ``exact_loops``: loop integrals around patch faces (discrete Stokes).
    ``exact_paths``: the carried primitive against path integration on the patches.
    ``end_variance``: variance of the primitive over each end band of ``mesh``
    (nodes starting with |v| > ``band``), when a mesh is given.
    """
    out = [_family_check("exact_loops", family, loop_defect, tol, order_range),
           _family_check("exact_paths", family, path_defect, tol, order_range)]
    if mesh is not None:
        out.append(check_end_variance(mesh, band, var_tol))
    return out


def _end_masks(mesh: MeshedLagrangian, band: float):
    V0 = np.broadcast_to(mesh.grid.v[None, None, :], mesh.shape)
    ok = ~(mesh.truncated | mesh.core | mesh.crossed)
    return (V0 > band) & ok, (V0 < -band) & ok


def check_end_variance(mesh: MeshedLagrangian, band: Optional[float] = None,
                       tol: float = TOLERANCES["end_variance"]) -> CheckResult:
    band = 3 * mesh.T_band if band is None else band
    up, lo = _end_masks(mesh, band)
    f = mesh.primitive
    var_up = float(np.var(f[up])) if up.any() else 0.0
    var_lo = float(np.var(f[lo])) if lo.any() else 0.0
    degenerate = not (up.any() and lo.any())
    res = max(var_up, var_lo) if not degenerate else float("inf")
    return _finish("end_variance", res, tol, int(up.sum() + lo.sum()), degenerate=degenerate,
                   note="an end band holds no nodes" if degenerate else "",
                   extra={"upper": var_up, "lower": var_lo, "band": float(band)})


def check_ends(mesh: MeshedLagrangian, band: Optional[float] = None, tol: float = TOLERANCES["ends"],
               t_lower: Optional[float] = None, t_upper: Optional[float] = None) -> CheckResult:
    """Distance from end-band nodes to the cylinders over L_{t_lower} and L_{t_upper}.

    Upper-band nodes (starting v > band) are measured against L_{t_upper},
    lower-band nodes against L_{t_lower}; the v coordinate is free on a
    cylinder.  Distances are nearest-point distances to the continuous
    Legendrian rather than to a finite sample of it.
    """
    band = 3 * mesh.T_band if band is None else band
    t_lower = mesh.t_span[0] if t_lower is None else t_lower
    t_upper = mesh.t_span[1] if t_upper is None else t_upper
    up, lo = _end_masks(mesh, band)
    d = 2 * mesh.n + 1
    note = ""
    if band < mesh.T_band:
        note = f"band {band:g} lies inside the active region |v| < T_band = {mesh.T_band:g}"
    dists = {}
    for key, mask, t in (("upper", up, t_upper), ("lower", lo, t_lower)):
        P = mesh.coords[mask][:, :d]
        dists[key] = patch.project(P, t).dist if len(P) else np.zeros(0)
    counts = {k: int(v.size) for k, v in dists.items()}
    if min(counts.values()) == 0:
        return _finish("ends", float("inf"), tol, 0, degenerate=True, note=note or "an end band holds no nodes")
    worst = {k: float(np.max(v)) for k, v in dists.items()}
    res = max(worst.values())
    V = mesh.coords[..., -1]
    drift = int(np.sum(up & (V <= band))) + int(np.sum(lo & (V >= -band)))
    if res > tol and not note:
        note = "end nodes are displaced from the cylinders"
    extra = {"upper_max": worst["upper"], "lower_max": worst["lower"], "upper_nodes": counts["upper"],
             "lower_nodes": counts["lower"], "band": float(band), "drifted_into_band": drift}
    return _finish("ends", res, tol, sum(counts.values()), note=note, extra=extra)


def truncation_fraction(mesh: MeshedLagrangian) -> float:
    """Fraction of nodes outside the starting core disc that were truncated."""
    live = ~mesh.core
    if not live.any():
        return 0.0
    return float(np.mean(mesh.truncated[live]))


# ---------------------------------------------------------------------------
# negative controls

def perturbed_lift(u, x2, t: float, amp: float = 1e-3, n: int = 2):
    """Lift with z += amp * sin(3u) cos(2x2): points and exact tangents of the perturbed map."""
    P, J = legendrian_samples(u, x2, t, n)
    u, x2 = np.broadcast_arrays(np.asarray(u, dtype=float), np.asarray(x2, dtype=float))
    P = P.copy()
    J = J.copy()
    P[..., 2 * n] += amp * np.sin(3 * u) * np.cos(2 * x2)
    J[..., 0, 2 * n] += 3 * amp * np.cos(3 * u) * np.cos(2 * x2)
    J[..., 1, 2 * n] -= 2 * amp * np.sin(3 * u) * np.sin(2 * x2)
    return P, J


def graph_patches(base, spacings, c: float = 1.0) -> list:
    """Patches of the graph y = c(-x2, x1), z = 0 over (x1, x2, v): not Lagrangian for c != 0.

    ``base`` rows are (x1, x2, v).
    """
    base = np.atleast_2d(np.asarray(base, dtype=float))
    off = np.array([-1.0, 0.0, 1.0])
    O = np.stack(np.meshgrid(off, off, off, indexing="ij"), axis=-1)
    out = []
    for h in spacings:
        N = base[:, None, None, None, :] + h * O[None]
        x1, x2, v = N[..., 0], N[..., 1], N[..., 2]
        coords = np.stack([x1, x2, -c * x2, c * x1, np.zeros_like(x1), v], axis=-1)
        z = np.zeros(x1.shape)
        out.append(PatchSet(base, float(h), coords, z, z.astype(bool)))
    return out


def sheared_patches(family: Sequence[PatchSet], c: float = 0.1) -> list:
    """Apply y1 += c * x2 to traced patches without touching the primitive (a non-Hamiltonian map)."""
    out = []
    for p in family:
        coords = p.coords.copy()
        n = (coords.shape[-1] - 2) // 2
        coords[..., n] += c * coords[..., 1]
        out.append(PatchSet(p.base, p.h, coords, p.primitive.copy(), p.truncated.copy(), p.crossed.copy()))
    return out


# ---------------------------------------------------------------------------
# reports

def _dump(v) -> str:
    if isinstance(v, tuple):
        v = list(v)
    if isinstance(v, np.generic):
        v = v.item()
    return json.dumps(v, sort_keys=True)


_FIELDS = ("residual", "tol", "samples", "passed", "order", "order_range", "truncated", "degenerate", "floor", "note")


@dataclass
class VerificationReport:
    checks: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)
    valid: bool = True
    invalid_reason: str = ""

    @property
    def passed(self) -> bool:
        return self.valid and all(c.passed for c in self.checks)

    def get(self, name: str) -> CheckResult:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_text(self) -> str:
        lines = ["# wrinkled-cobordism verification report",
                 "# one 'key = value' per line; values are JSON literals"]
        lines.append(f"report.passed = {_dump(self.passed)}")
        lines.append(f"report.valid = {_dump(self.valid)}")
        lines.append(f"report.invalid_reason = {_dump(self.invalid_reason)}")
        lines.append(f"report.checks = {_dump([c.name for c in self.checks])}")
        for k in sorted(self.meta):
            lines.append(f"meta.{k} = {_dump(self.meta[k])}")
        for c in self.checks:
            for f in _FIELDS:
                lines.append(f"check.{c.name}.{f} = {_dump(getattr(c, f))}")
            for k in sorted(c.extra):
                lines.append(f"check.{c.name}.extra.{k} = {_dump(c.extra[k])}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "VerificationReport":
        kv = {}
        for raw in text.splitlines():
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, val = line.partition(" = ")
            if not sep:
                raise ValueError(f"malformed report line: {raw!r}")
            kv[key] = json.loads(val)
        names = kv.get("report.checks", [])
        meta = {k[5:]: v for k, v in kv.items() if k.startswith("meta.")}
        checks = []
        for name in names:
            pre = f"check.{name}."
            args = {f: kv[pre + f] for f in _FIELDS}
            rng = args["order_range"]
            args["order_range"] = tuple(rng) if rng is not None else None
            extra = {k[len(pre) + 6:]: v for k, v in kv.items() if k.startswith(pre + "extra.")}
            checks.append(CheckResult(name=name, extra=extra, **args))
        return cls(checks, meta, kv.get("report.valid", True), kv.get("report.invalid_reason", ""))

    def summary_lines(self) -> list:
        out = []
        for c in self.checks:
            order = "" if c.order is None else f" order={c.order:.3f}"
            out.append(f"{'PASS' if c.passed else 'FAIL'} {c.name}: residual={c.residual:.3e} tol={c.tol:.1e}"
                       f"{order} samples={c.samples} truncated={c.truncated}")
        if not self.valid:
            out.append(f"INVALID: {self.invalid_reason}")
        return out
