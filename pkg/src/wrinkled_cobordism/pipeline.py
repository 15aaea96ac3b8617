"""Run configuration and the end-to-end verification, sweep and render runs."""
from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields, replace
from typing import Optional

import numpy as np

from . import patch, push, render, symplectization as symp, verifier, wrinkle
from .contact import alpha_eval
from .verifier import CheckResult, VerificationReport


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    n: int = 2
    T: float = 1.0
    eps: float = 0.1
    delta: float = 0.3
    rho_tube: float = 0.2
    rho_cut: float = 0.35
    g_cap: float = 10.0
    # formula identities
    identity_size: int = 101
    identity_t_size: int = 11
    # isotopy transport
    transport_ts: tuple = (-0.5, 0.5, 1.0)
    transport_deltas: tuple = (0.02, 0.01, 0.005)
    # global trace (ends)
    mesh_size: int = 13
    mesh_box: float = 1.5
    v_range: tuple = (-4.0, 4.0)
    v_size: int = 9
    trace_step: float = 0.01
    end_step: float = 0.005
    # convergence patches: bases are (patch_u[i], patch_x2[i], v) for v in patch_v
    patch_spacings: tuple = (0.004, 0.002, 0.001)
    patch_step: float = 0.000625
    patch_u: tuple = (0.4, -1.2, 1.2, -0.4)
    patch_x2: tuple = (0.4, 0.4, -1.2, -1.2)
    patch_v: tuple = (-4.0, -0.5, 0.3, 4.0)
    # push to infinity
    g_caps: tuple = (5.0, 10.0, 20.0)
    push_samples: int = 1000
    # tolerances
    tol_identity: float = 1e-10
    tol_inversion: float = 1e-8
    tol_legendrian: float = 1e-10
    tol_singular: float = 1e-6
    tol_isotropy: float = 1e-14
    tol_lagrangian: float = 1e-5
    tol_exact: float = 1e-5
    tol_ends: float = 1e-4
    tol_end_variance: float = 1e-6
    tol_conformal: float = 1e-3
    order_min: float = 1.8
    order_max: float = 2.2
    # rendering
    render_ts: tuple = (-0.5, 0.5, 1.0, 2.0)
    projections: tuple = ("x1z", "x2z", "ux2")
    resolution: int = 200
    # run control
    out: str = "wcl_out"
    seed: int = 0
    jobs: int = 0
    negative_control: bool = False

    def __post_init__(self):
        err = []
        if self.n != 2:
            err.append("n: the traced pipeline is implemented for n = 2")
        for k in ("T", "eps", "delta", "rho_tube", "rho_cut", "g_cap", "mesh_box", "trace_step", "end_step",
                  "patch_step", "resolution"):
            if not getattr(self, k) > 0:
                err.append(f"{k}: must be positive")
        for k in [f.name for f in fields(self) if f.name.startswith("tol_")]:
            if not getattr(self, k) >= 0:
                err.append(f"{k}: must be non-negative")
        if not self.rho_tube < self.rho_cut:
            err.append("rho_tube: must be below rho_cut")
        if self.delta ** 2 + self.eps ** 2 > self.eps * (1 + 1e-12):
            err.append("delta: the core disc must cover |u| < delta, |x2| < eps (delta^2 + eps^2 <= eps)")
        if len(self.patch_spacings) < 3 or any(h <= 0 for h in self.patch_spacings):
            err.append("patch_spacings: need at least 3 positive spacings")
        if len(self.transport_deltas) < 3:
            err.append("transport_deltas: need at least 3 steps")
        if not len(self.patch_u) == len(self.patch_x2):
            err.append("patch_x2: must have as many entries as patch_u")
        if not (len(self.v_range) == 2 and self.v_range[0] < -3 * self.T and self.v_range[1] > 3 * self.T):
            err.append("v_range: must reach beyond the end bands |v| > 3T")
        if self.mesh_size < 3 or self.v_size < 3:
            err.append("mesh_size, v_size: need at least 3 nodes per axis")
        if not self.order_min < self.order_max:
            err.append("order_min: must be below order_max")
        if self.resolution < 16:
            err.append("resolution: must be at least 16")
        bad = [p for p in self.projections if p not in render.PROJECTIONS]
        if bad:
            err.append(f"projections: unknown {bad}; expected from {list(render.PROJECTIONS)}")
        bad_t = [t for t in self.render_ts if abs(t) > 3 * self.T]
        if bad_t:
            err.append(f"render_ts: {bad_t} outside [-3T, 3T]")
        if self.jobs < 0:
            err.append("jobs: must be >= 0 (0 means all cores)")
        if err:
            raise ConfigError("; ".join(err))

    @property
    def params(self) -> patch.PatchParams:
        return patch.PatchParams(self.eps, self.delta, self.rho_tube, self.rho_cut)

    @property
    def workers(self) -> int:
        return self.jobs or os.cpu_count() or 1

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            lines.append(f"{f.name} = {_format(v)}")
        return "\n".join(lines) + "\n"


def _format(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, tuple):
        return ", ".join(_format(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


_DEFAULTS = RunConfig.__new__(RunConfig)
for _f in fields(RunConfig):
    object.__setattr__(_DEFAULTS, _f.name, _f.default)


def _parse_value(key: str, text: str):
    proto = getattr(_DEFAULTS, key)
    text = text.strip()
    try:
        if isinstance(proto, bool):
            low = text.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if isinstance(proto, int):
            return int(text)
        if isinstance(proto, float):
            return float(text)
        if isinstance(proto, tuple):
            items = [s.strip() for s in text.split(",") if s.strip()]
            if proto and isinstance(proto[0], str):
                return tuple(items)
            return tuple(float(s) for s in items)
        return text
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {text!r} as {type(proto).__name__}") from None


def parse_config(text: str, source: str = "<config>") -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment.  Returns raw overrides."""
    out = {}
    known = {f.name for f in fields(RunConfig)}
    for no, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition("=")
        key = key.strip()
        if not sep:
            raise ConfigError(f"{source}:{no}: expected 'key = value', got {raw.strip()!r}")
        if key not in known:
            raise ConfigError(f"{source}:{no}: unknown key {key!r}")
        out[key] = _parse_value(key, val)
    return out


def tolerance_key(name: str) -> str:
    """Accept ``lagrangian`` or ``tol_lagrangian`` for a tolerance override."""
    key = name if name.startswith("tol_") or name.startswith("order_") else f"tol_{name}"
    if not hasattr(_DEFAULTS, key):
        raise ConfigError(f"unknown tolerance {name!r}")
    return key


def make_config(overrides: Optional[dict] = None) -> RunConfig:
    try:
        return RunConfig(**(overrides or {}))
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


# ---------------------------------------------------------------------------
# individual check groups

def _identity_grid(cfg: RunConfig):
    g = np.linspace(-2.0, 2.0, cfg.identity_size)
    t = np.linspace(-cfg.T, cfg.T, cfg.identity_t_size)
    return np.meshgrid(g, g, t, indexing="ij")


def identity_checks(cfg: RunConfig) -> list:
    """The three forms of alpha(X_t) and both u-inversions on a (u, x2, t) grid."""
    U, X, Tt = _identity_grid(cfg)
    a = wrinkle.alpha_Xt(U, X, Tt)
    b = wrinkle.alpha_Xt_front(U, X, Tt)
    c = wrinkle.alpha_Xt_composed(U, X, Tt, cfg.n)
    P = wrinkle.lift_family(U, X, Tt, cfg.n)
    keep = np.abs(X * (Tt - X * X)) >= 1e-6
    d = wrinkle.alpha_Xt_from_y2(X[keep], P[..., cfg.n + 1][keep])
    res = max(np.max(np.abs(a - b)), np.max(np.abs(a - c)), np.max(np.abs(a[keep] - d)))
    out = [verifier._finish("identity", res, cfg.tol_identity, a.size,
                            extra={"y2_form_samples": int(keep.sum())})]
    # the y1 inversion needs the branch sign, which is undefined on the fold u = 0
    off_fold = U != 0.0
    u1 = wrinkle.invert_u_from_y1(P[..., cfg.n][off_fold], X[off_fold], Tt[off_fold], np.sign(U[off_fold]))
    u2 = wrinkle.invert_u_from_y2(P[..., 0][keep], X[keep], P[..., cfg.n + 1][keep], Tt[keep])
    e1 = np.abs(u1 - U[off_fold]) / np.abs(U[off_fold])
    e2 = np.abs(u2 - U[keep]) / np.where(U[keep] == 0.0, 1.0, np.abs(U[keep]))
    e1 = np.where(np.isnan(e1), np.inf, e1)
    res = float(max(np.max(e1), np.max(e2)))
    out.append(verifier._finish("inversion", res, cfg.tol_inversion, e1.size + e2.size,
                                extra={"y1_max": float(np.max(e1)), "y2_max": float(np.max(e2)),
                                       "fold_excluded": int((~off_fold).sum())}))
    return out


def legendrian_checks(cfg: RunConfig) -> list:
    U, X, Tt = _identity_grid(cfg)
    P = wrinkle.lift_family(U, X, Tt, cfg.n)
    J = wrinkle.jacobian(U, X, Tt, cfg.n)
    out = [verifier.check_legendrian(P, J, cfg.tol_legendrian)]
    found = wrinkle.singular_locus(1.0, cfg.n)
    want = [(0.0, -1.0), (0.0, 1.0)]
    if len(found) != 2:
        out.append(verifier._finish("singular_locus", float("inf"), cfg.tol_singular, len(found),
                                    note=f"expected 2 rank-drop points at t = 1, found {len(found)}"))
    else:
        res = max(math.hypot(p.u - w[0], p.x2 - w[1]) for p, w in zip(found, want))
        out.append(verifier._finish("singular_locus", res, cfg.tol_singular, 2))
    return out


def transport_check(cfg: RunConfig) -> CheckResult:
    """Order of the error of one frozen-Hamiltonian flow step onto L_{t+delta}, away from the core disc.

    The order gate uses the RMS error over the samples; the max-norm order is
    reported alongside.
    """
    ext = patch.HamiltonianExtension(cfg.params, cfg.n)
    uv = patch.transport_grid(cfg.params)
    orders, orders_max, finest = [], [], []
    for t in cfg.transport_ts:
        st = patch.transport_order(ext, t, cfg.transport_deltas, uv)
        orders.append(st.order_rms)
        orders_max.append(st.order_max)
        finest.append(float(st.rms[-1]))
    worst = min(orders)
    ok = worst >= cfg.order_min
    res = CheckResult("transport", float(max(finest)), float("inf"), len(uv[0]) * len(cfg.transport_ts), ok,
                      worst, (cfg.order_min, float("inf")), note="gated on the RMS order only",
                      extra={"ts": list(cfg.transport_ts), "order_rms": orders, "order_max": orders_max,
                             "finest_rms": finest})
    return res


def _core_point(cfg: RunConfig, t: float = 1.0):
    r = 0.5 * math.sqrt(cfg.eps)
    return wrinkle.lift_family(r / math.sqrt(2), r / math.sqrt(2), t, cfg.n)


def push_checks(cfg: RunConfig) -> list:
    rng = np.random.default_rng(cfg.seed)
    m = cfg.push_samples
    out = []
    # isotropy of escape paths from random core-disc points
    rad = math.sqrt(cfg.eps) * np.sqrt(rng.uniform(0, 1, m))
    ang = rng.uniform(0, 2 * np.pi, m)
    ts = rng.uniform(-cfg.T, cfg.T, m)
    P = wrinkle.lift_family(rad * np.cos(ang), rad * np.sin(ang), ts, cfg.n)
    tau = rng.uniform(0.0, cfg.g_cap, m)
    res = float(np.max(np.abs(alpha_eval(push.gamma(P, tau), push.gamma_velocity(P, tau)))))
    out.append(verifier._finish("isotropy", res, cfg.tol_isotropy, m))

    triple = push.CutoffTriple(cfg.eps)
    rep = push.cutoff_conditions(triple, cfg.g_cap, m, cfg.seed)
    out.append(verifier._finish("cutoff", rep.worst_violation, cfg.tol_identity, 6 * m, extra=rep.violation))
    out.append(verifier._finish("cutoff_slope", rep.worst_slope, 4.0, 3 * m, extra=rep.slope,
                                note="eps times the profile slopes"))

    # points well outside the support are fixed exactly
    p0 = _core_point(cfg)
    chart = push.TubeChart(tuple(p0.tolist()), cfg.eps)
    far = p0 + np.concatenate([rng.normal(size=(m, 2 * cfg.n)), np.zeros((m, 1))], axis=1)
    c = chart.coords(far)
    ab = np.sqrt(np.sum(c.a ** 2 + c.b ** 2, axis=-1))
    away = (np.abs(c.s) > 2 * cfg.eps) | (ab > 2 * cfg.eps) | (c.tau < -2 * cfg.eps) | (c.tau > cfg.g_cap + 2 * cfg.eps)
    moved = push.contact_lift_flow(far[away], chart, cfg.g_cap, step=0.05)
    out.append(verifier._finish("support", float(np.max(np.abs(moved - far[away]))), 0.0, int(away.sum())))

    probes = push.probe_vectors(2 * cfg.n + 1, 10, cfg.seed, 0.1, p0)
    lam_id = push.measure_lambda(lambda q: np.array(q, copy=True), p0, probes)
    lam_reeb = push.measure_lambda(push.reeb_map(0.7), p0, probes)
    res = max(abs(lam_id.value - 1.0), abs(lam_reeb.value - 1.0), lam_id.spread, lam_reeb.spread)
    out.append(verifier._finish("lambda_unit", res, cfg.tol_identity, 2 * len(probes),
                                extra={"identity": lam_id.value, "reeb": lam_reeb.value}))

    lam = push.measure_lambda(push.push_map(chart, cfg.g_cap), p0, probes)
    out.append(verifier._finish("conformal", lam.spread / abs(lam.value), cfg.tol_conformal, len(probes),
                                extra={"lambda": lam.value}))

    disp = [push.escape_displacement(p0, g, cfg.eps) for g in cfg.g_caps]
    short = max(0.0, max(0.8 - d / g for d, g in zip(disp, cfg.g_caps)))
    out.append(verifier._finish("escape", short, 0.0, len(cfg.g_caps),
                                note="shortfall of x1 displacement below 0.8 g_cap",
                                extra={"g_caps": list(cfg.g_caps), "displacement": disp}))
    return out


def lambda_trend(cfg: RunConfig, values=None) -> CheckResult:
    """Measured conformal factor of the push map at a core point across caps; must strictly increase."""
    values = tuple(cfg.g_caps if values is None else values)
    p0 = _core_point(cfg)
    lams = [m.value for m in push.lambda_sweep(p0, values, cfg.eps, seed=cfg.seed)]
    drops = sum(1 for a, b in zip(lams[:-1], lams[1:]) if not b > a + 1e-9)
    note = "" if drops == 0 else "lambda does not increase with the cap"
    return verifier._finish("lambda_trend", float(drops), 0.0, len(values), note=note,
                            extra={"g_caps": list(values), "lambda": lams})


# ---------------------------------------------------------------------------
# traces

def family(cfg: RunConfig):
    return symp.ExtensionFamily(patch.HamiltonianExtension(cfg.params, cfg.n))


def patch_bases(cfg: RunConfig) -> np.ndarray:
    return np.array([(u, x2, v) for v in cfg.patch_v for u, x2 in zip(cfg.patch_u, cfg.patch_x2)])


def _trace_chunk(args):
    cfg, base = args
    return symp.trace_patches(family(cfg), base, cfg.patch_spacings, (-cfg.T, cfg.T), cfg.T,
                              cfg.patch_step, cfg.patch_step, n=cfg.n)


def trace_patch_family(cfg: RunConfig, base: Optional[np.ndarray] = None) -> list:
    """Patch families at every spacing; bases are split across worker processes.

    Every node is integrated independently, so the split does not change the result.
    """
    base = patch_bases(cfg) if base is None else np.atleast_2d(base)
    jobs = min(cfg.workers, len(base))
    if jobs <= 1:
        return _trace_chunk((cfg, base))
    chunks = [c for c in np.array_split(base, jobs) if len(c)]
    with ProcessPoolExecutor(jobs) as pool:
        parts = list(pool.map(_trace_chunk, [(cfg, c) for c in chunks]))
    out = []
    for k, h in enumerate(cfg.patch_spacings):
        sets = [p[k] for p in parts]
        out.append(symp.PatchSet(base, float(h), np.concatenate([s.coords for s in sets]),
                                 np.concatenate([s.primitive for s in sets]),
                                 np.concatenate([s.truncated for s in sets]),
                                 np.concatenate([s.crossed for s in sets])))
    return out


def trace_mesh(cfg: RunConfig) -> symp.MeshedLagrangian:
    g = np.linspace(-cfg.mesh_box, cfg.mesh_box, cfg.mesh_size)
    grid = symp.TraceGrid(g, g, np.linspace(cfg.v_range[0], cfg.v_range[1], cfg.v_size))
    return symp.trace_cobordism(family(cfg), grid, (-cfg.T, cfg.T), cfg.T, cfg.trace_step, cfg.end_step, n=cfg.n)


def cobordism_checks(cfg: RunConfig, patches=None, mesh=None) -> tuple:
    """Lagrangian and exactness certificates on patches plus the end checks on the global mesh.

    Returns (checks, validity reason or "").
    """
    patches = trace_patch_family(cfg) if patches is None else patches
    mesh = trace_mesh(cfg) if mesh is None else mesh
    rng = (cfg.order_min, cfg.order_max)
    band = 3 * cfg.T
    out = [verifier.check_lagrangian(patches, cfg.tol_lagrangian, rng)]
    out += verifier.check_exact(patches, mesh, band, cfg.tol_exact, cfg.tol_end_variance, rng)
    out.append(verifier.check_ends(mesh, band, cfg.tol_ends))
    frac = verifier.truncation_fraction(mesh)
    reason = ""
    if frac > verifier.MAX_TRUNCATED:
        reason = f"{frac:.1%} of the non-core mesh nodes were truncated (limit {verifier.MAX_TRUNCATED:.0%})"
    return out, reason, frac


def control_checks(cfg: RunConfig, patches=None) -> list:
    """The three negative controls, reported under their own names; each must fail."""
    u = np.linspace(-2.0, 2.0, 41)
    U, X = np.meshgrid(u, np.linspace(-1.5, 1.5, 41), indexing="ij")
    out = [verifier.check_legendrian(*verifier.perturbed_lift(U, X, 1.0, 1e-3, cfg.n), cfg.tol_legendrian,
                                     name="control_legendrian")]
    rng = (cfg.order_min, cfg.order_max)
    base = np.array([(0.3, -0.2, 0.0), (-0.5, 0.7, 1.0), (1.0, 0.4, -1.0)])
    out.append(verifier.check_lagrangian(verifier.graph_patches(base, cfg.patch_spacings), cfg.tol_lagrangian, rng,
                                         name="control_lagrangian"))
    if patches is None:
        patches = symp.cylinder_patches(patch_bases(cfg), cfg.patch_spacings, cfg.T, cfg.n)
    loops, paths = verifier.check_exact(verifier.sheared_patches(patches, 0.1), None, None, cfg.tol_exact,
                                        cfg.tol_end_variance, rng)
    paths.name = "control_exact"
    out.append(paths)
    return out


def run_verify(cfg: RunConfig, patches=None, mesh=None) -> VerificationReport:
    """All certificates of a run (or, with ``negative_control``, the controls in their place)."""
    meta = {"config": cfg.to_text().strip().replace("\n", "; "), "seed": cfg.seed}
    if cfg.negative_control:
        return VerificationReport(control_checks(cfg), meta)
    checks = identity_checks(cfg) + legendrian_checks(cfg) + [transport_check(cfg)] + push_checks(cfg)
    cob, reason, frac = cobordism_checks(cfg, patches, mesh)
    meta["truncated_fraction"] = frac
    return VerificationReport(checks + cob, meta, not reason, reason)


# ---------------------------------------------------------------------------
# sweeps

SWEEP_PARAMETERS = ("g_cap", "eps", "delta", "mesh")


@dataclass
class SweepTable:
    parameter: str
    columns: tuple
    rows: list
    flags: dict

    def to_text(self) -> str:
        lines = [f"# sweep over {self.parameter}", "\t".join(self.columns)]
        for r in self.rows:
            lines.append("\t".join(repr(x) if isinstance(x, float) else str(x) for x in r))
        for k in sorted(self.flags):
            lines.append(f"# {k} = {verifier._dump(self.flags[k])}")
        return "\n".join(lines) + "\n"


def run_sweep(cfg: RunConfig, parameter: str, values) -> SweepTable:
    if parameter not in SWEEP_PARAMETERS:
        raise ConfigError(f"sweep parameter {parameter!r} not in {SWEEP_PARAMETERS}")
    values = [float(v) for v in values]
    if not values:
        raise ConfigError("sweep needs at least one value")
    if parameter == "g_cap":
        p0 = _core_point(cfg)
        lams = push.lambda_sweep(p0, values, cfg.eps, seed=cfg.seed)
        disp = [push.escape_displacement(p0, g, cfg.eps) for g in values]
        rows = [(g, m.value, m.spread, d) for g, m, d in zip(values, lams, disp)]
        inc = all(b[1] > a[1] for a, b in zip(rows[:-1], rows[1:]))
        dinc = all(b[3] > a[3] for a, b in zip(rows[:-1], rows[1:]))
        return SweepTable("g_cap", ("g_cap", "lambda", "lambda_spread", "escape_x1"), rows,
                          {"lambda_increasing": inc, "escape_increasing": dinc})
    if parameter == "mesh":
        if len(values) < 3:
            raise ConfigError("a mesh sweep needs at least 3 spacings")
        sub = replace(cfg, patch_spacings=tuple(values))
        fam = trace_patch_family(sub)
        rng = (cfg.order_min, cfg.order_max)
        rows = []
        lag = verifier.check_lagrangian(fam, cfg.tol_lagrangian, rng)
        loops, paths = verifier.check_exact(fam, None, None, cfg.tol_exact, cfg.tol_end_variance, rng)
        for k, h in enumerate(sorted(values, reverse=True)):
            rows.append((h, lag.extra["max_defect"][k], loops.extra["max_defect"][k], paths.extra["max_defect"][k]))
        return SweepTable("mesh", ("h", "lagrangian", "exact_loops", "exact_paths"), rows,
                          {"order_lagrangian": lag.order, "order_loops": loops.order, "order_paths": paths.order})
    rows = []
    for v in values:
        try:
            sub = replace(cfg, **{parameter: v})
        except ConfigError as exc:
            rows.append((v, "invalid", str(exc)))
            continue
        tr = transport_check(sub)
        rows.append((v, tr.order, tr.residual))
    return SweepTable(parameter, (parameter, "transport_order", "transport_rms"), rows, {})


def run_render(cfg: RunConfig) -> dict:
    return render.render_all(cfg.render_ts, cfg.projections, cfg.params, cfg.resolution, T=cfg.T)
