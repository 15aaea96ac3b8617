"""Deterministic SVG figures: front slices, the parameter-plane region diagram and nested wrinkles.

Output is plain SVG 1.1 text built from fixed-precision numbers, so equal
inputs give byte-identical documents.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from . import wrinkle
from .patch import PatchParams

PROJECTIONS = ("x1z", "x2z", "ux2")
OVERLAYS = ("singular", "regions", "core")
WIDTH, HEIGHT, MARGIN = 480, 360, 30
_PALETTE = ("#1f4e79", "#b03a2e", "#1e8449", "#7d3c98", "#b9770e", "#117864")


@dataclass(frozen=True)
class RenderSpec:
    projection: str = "x1z"
    ts: tuple = (1.0,)
    resolution: int = 200
    overlays: tuple = ("singular",)
    x2_slice: float = 0.0
    u_range: tuple = (-2.2, 2.2)
    T: float = 1.0

    def __post_init__(self):
        if self.projection not in PROJECTIONS:
            raise ValueError(f"unknown projection {self.projection!r}; expected one of {PROJECTIONS}")
        if self.resolution < 16:
            raise ValueError("resolution must be at least 16")
        bad = [o for o in self.overlays if o not in OVERLAYS]
        if bad:
            raise ValueError(f"unknown overlays {bad}")
        for t in self.ts:
            if not abs(t) <= 3 * self.T:
                raise ValueError(f"t = {t} outside [-3T, 3T] = [{-3 * self.T}, {3 * self.T}]")


def _num(x: float) -> str:
    s = f"{x:.3f}".rstrip("0").rstrip(".")
    return "0" if s in ("-0", "") else s


class _Canvas:
    """Maps data coordinates to the page with fixed margins and y pointing up."""

    def __init__(self, xs, ys, width=WIDTH, height=HEIGHT, margin=MARGIN, equal=False):
        x0, x1 = (min(xs), max(xs)) if len(xs) else (-1.0, 1.0)
        y0, y1 = (min(ys), max(ys)) if len(ys) else (-1.0, 1.0)
        if x1 - x0 < 1e-12:
            x0, x1 = x0 - 1.0, x1 + 1.0
        if y1 - y0 < 1e-12:
            y0, y1 = y0 - 1.0, y1 + 1.0
        self.w, self.h, self.m = width, height, margin
        sx = (width - 2 * margin) / (x1 - x0)
        sy = (height - 2 * margin) / (y1 - y0)
        if equal:
            sx = sy = min(sx, sy)
        self.sx, self.sy = sx, sy
        # centre the box on the page
        self.ox = margin + 0.5 * ((width - 2 * margin) - sx * (x1 - x0)) - sx * x0
        self.oy = margin + 0.5 * ((height - 2 * margin) - sy * (y1 - y0)) + sy * y1
        self.items = []

    def px(self, x, y):
        return self.ox + self.sx * x, self.oy - self.sy * y

    def polyline(self, xs, ys, color, width=1.5, cls="curve"):
        pts = " ".join(f"{_num(a)},{_num(b)}" for a, b in (self.px(x, y) for x, y in zip(xs, ys)))
        self.items.append(f'<polyline class="{cls}" points="{pts}" fill="none" stroke="{color}" '
                          f'stroke-width="{_num(width)}"/>')

    def marker(self, x, y, color, cls="cusp", r=3.5):
        a, b = self.px(x, y)
        self.items.append(f'<circle class="{cls}" cx="{_num(a)}" cy="{_num(b)}" r="{_num(r)}" fill="{color}"/>')

    def rect(self, x0, y0, x1, y1, fill, cls):
        a, b = self.px(min(x0, x1), max(y0, y1))
        w, h = abs(x1 - x0) * self.sx, abs(y1 - y0) * self.sy
        self.items.append(f'<rect class="{cls}" x="{_num(a)}" y="{_num(b)}" width="{_num(w)}" '
                          f'height="{_num(h)}" fill="{fill}" stroke="#333333" stroke-width="0.5"/>')

    def ellipse(self, cx, cy, r, fill, stroke, cls):
        a, b = self.px(cx, cy)
        self.items.append(f'<ellipse class="{cls}" cx="{_num(a)}" cy="{_num(b)}" rx="{_num(r * self.sx)}" '
                          f'ry="{_num(r * self.sy)}" fill="{fill}" stroke="{stroke}" stroke-width="1"/>')

    def text(self, x, y, s):
        self.items.append(f'<text x="{_num(x)}" y="{_num(y)}" font-family="monospace" font-size="11">{s}</text>')

    def document(self, title: str, defs: str = "") -> str:
        head = (f'<?xml version="1.0" encoding="UTF-8"?>\n'
                f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{self.w}" height="{self.h}" '
                f'viewBox="0 0 {self.w} {self.h}">\n<title>{title}</title>\n')
        body = (f"<defs>{defs}</defs>\n" if defs else "") + "".join(i + "\n" for i in self.items)
        return head + body + "</svg>\n"


def empty_svg(title: str = "empty") -> str:
    return _Canvas([], []).document(title)


def cusp_points(t: float, x2: float = 0.0):
    """Cusps of the x1-z front slice at fixed x2: the fold points u = +-sqrt(t - x2^2)."""
    s = t - x2 * x2
    if s <= 0:
        return []
    out = []
    for u in (-math.sqrt(s), math.sqrt(s)):
        z, x1, _ = wrinkle.front_family(u, x2, t)
        out.append((u, float(x1), float(z)))
    return out


def _front_curves(spec: RenderSpec, t: float):
    u = np.linspace(spec.u_range[0], spec.u_range[1], spec.resolution)
    if spec.projection == "x1z":
        F = wrinkle.front_family(u, spec.x2_slice, t)
        return [(F[:, 1], F[:, 0])]
    if spec.projection == "x2z":
        # x2-z profiles of the front along a few fixed u
        x2 = np.linspace(-1.5, 1.5, spec.resolution)
        curves = []
        for uu in np.linspace(spec.u_range[0], spec.u_range[1], 5):
            F = wrinkle.front_family(uu, x2, t)
            curves.append((F[:, 2], F[:, 0]))
        return curves
    # parameter plane: the fold circle u^2 + x2^2 = t
    if t <= 0:
        return []
    a = np.linspace(0.0, 2 * np.pi, spec.resolution)
    r = math.sqrt(t)
    return [(r * np.cos(a), r * np.sin(a))]


def render_front(spec: RenderSpec) -> str:
    """All of ``spec.ts`` overlaid in one document; cusps are marked when ``singular`` is on."""
    if not spec.ts:
        return empty_svg(f"front {spec.projection} (no slices)")
    curves, cusps = [], []
    for k, t in enumerate(spec.ts):
        color = _PALETTE[k % len(_PALETTE)]
        for xs, ys in _front_curves(spec, t):
            curves.append((xs, ys, color))
        if "singular" in spec.overlays:
            if spec.projection == "x1z":
                cusps += [(x1, z, color) for _, x1, z in cusp_points(t, spec.x2_slice)]
            elif spec.projection == "ux2":
                cusps += [(p.u, p.x2, color) for p in wrinkle.singular_locus(t)]
    xs = np.concatenate([c[0] for c in curves]) if curves else np.zeros(0)
    ys = np.concatenate([c[1] for c in curves]) if curves else np.zeros(0)
    cv = _Canvas(list(xs), list(ys), equal=spec.projection == "ux2")
    for x, y, color in curves:
        cv.polyline(x, y, color)
    for x, y, color in cusps:
        cv.marker(x, y, color)
    label = ", ".join(_num(t) for t in spec.ts)
    cv.text(MARGIN, 18, f"{spec.projection} t = {label}")
    return cv.document(f"front {spec.projection}")


def front_filename(t: float, projection: str) -> str:
    return f"front_t{_num(t)}_{projection}.svg"


def front_files(spec: RenderSpec) -> dict:
    """One document per slice, keyed by file name (empty for an empty t list)."""
    return {front_filename(t, spec.projection): render_front(replace(spec, ts=(t,))) for t in spec.ts}


_STRIPES = ('<pattern id="stripes" patternUnits="userSpaceOnUse" width="6" height="6" '
            'patternTransform="rotate(45)"><rect width="6" height="6" fill="#ffffff"/>'
            '<line x1="0" y1="0" x2="0" y2="6" stroke="#555555" stroke-width="2"/></pattern>')


def render_regions(params: PatchParams = PatchParams(), spec: Optional[RenderSpec] = None,
                   box: float = 1.0) -> str:
    """The u-x2 plane with |u| >= delta shaded, the strips {|x2| >= eps, |u| <= delta/2}
    striped and the core disc u^2 + x2^2 < eps outlined."""
    spec = spec or RenderSpec(projection="ux2", ts=(), overlays=("regions", "core"))
    d, e = params.delta, params.eps
    box = max(box, 1.5 * d, 1.5 * math.sqrt(e))
    cv = _Canvas([-box, box], [-box, box], equal=True)
    cv.rect(-box, -box, box, box, "#ffffff", "blend")
    if "regions" in spec.overlays:
        cv.rect(-box, -box, -d, box, "#c8c8c8", "shaded")
        cv.rect(d, -box, box, box, "#c8c8c8", "shaded")
        if e < box:
            cv.rect(-d / 2, e, d / 2, box, "url(#stripes)", "striped")
            cv.rect(-d / 2, -box, d / 2, -e, "url(#stripes)", "striped")
    if "core" in spec.overlays:
        r = math.sqrt(e)
        if r * cv.sx < 0.5:
            cv.marker(0.0, 0.0, "#b03a2e", cls="core", r=1.5)
        else:
            cv.ellipse(0.0, 0.0, r, "none", "#b03a2e", "core")
    if "singular" in spec.overlays:
        for k, t in enumerate(spec.ts):
            for xs, ys in _front_curves(replace(spec, projection="ux2"), t):
                cv.polyline(xs, ys, _PALETTE[k % len(_PALETTE)], cls="fold")
    cv.text(MARGIN, 18, f"u-x2 plane, eps = {_num(e)}, delta = {_num(d)}")
    return cv.document("parameter regions", _STRIPES)


def render_nested(config: wrinkle.NestedConfig, spec: Optional[RenderSpec] = None) -> str:
    """Singular spheres (circles of ``region_radius``) and core discs of a nested configuration."""
    spec = spec or RenderSpec(projection="ux2", ts=())
    xs, ys = [], []
    for c in config.charts:
        xs += [c.center[0] - c.region_radius, c.center[0] + c.region_radius]
        ys += [c.center[1] - c.region_radius, c.center[1] + c.region_radius]
    cv = _Canvas(xs, ys, equal=True)
    for k, c in enumerate(config.charts):
        color = _PALETTE[k % len(_PALETTE)]
        cv.ellipse(c.center[0], c.center[1], c.region_radius, "none", color, "singular")
        cv.ellipse(c.center[0], c.center[1], c.core_radius, "#e5e5e5", color, "core")
    cv.text(MARGIN, 18, "singular locus of nested wrinkles")
    return cv.document("nested wrinkles")


def default_nested() -> wrinkle.NestedConfig:
    """An outer wrinkle containing a central and two side wrinkles."""
    outer = wrinkle.NestedChart((0.0, 0.0), 0.05, 1.0)
    centre = wrinkle.NestedChart((0.0, 0.0), 0.1, 0.4)
    left = wrinkle.NestedChart((-0.6, 0.0), 0.05, 0.2)
    right = wrinkle.NestedChart((0.6, 0.0), 0.05, 0.2)
    return wrinkle.NestedConfig((outer, centre, left, right), ((0, 1),))


def render_all(ts: Sequence[float], projections: Sequence[str] = ("x1z",), params: PatchParams = PatchParams(),
               resolution: int = 200, nested: bool = True, T: float = 1.0) -> dict:
    """Every figure of a render run keyed by file name."""
    out = {}
    for proj in projections:
        out.update(front_files(RenderSpec(proj, tuple(ts), resolution, ("singular",), T=T)))
    if ts:
        out["regions_ux2.svg"] = render_regions(params, RenderSpec("ux2", tuple(ts), resolution,
                                                                   ("regions", "core", "singular"), T=T))
        if nested:
            out["nested_ux2.svg"] = render_nested(default_nested())
    return out
