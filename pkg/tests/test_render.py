import re
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from wrinkled_cobordism import render, wrinkle
from wrinkled_cobordism.patch import PatchParams
from wrinkled_cobordism.render import RenderSpec

SVG = "{http://www.w3.org/2000/svg}"


def parse(doc):
    return ET.fromstring(doc.encode())


def polyline_points(el):
    return np.array([[float(a) for a in p.split(",")] for p in el.get("points").split()])


def test_rendering_is_deterministic():
    spec = RenderSpec("x1z", (-0.5, 0.5, 1.0))
    assert render.render_front(spec) == render.render_front(spec)
    assert render.render_all((0.5, 1.0), render.PROJECTIONS) == render.render_all((0.5, 1.0), render.PROJECTIONS)


def test_cusps_land_on_the_front_within_a_pixel():
    spec = RenderSpec("x1z", (1.0,), resolution=400)
    root = parse(render.render_front(spec))
    line = root.find(f"{SVG}polyline")
    pix = polyline_points(line)
    u = np.linspace(*spec.u_range, spec.resolution)
    z, x1, _ = wrinkle.front_family(u, 0.0, 1.0).T
    # recover the affine page map from the curve itself
    ax, bx = np.polyfit(x1, pix[:, 0], 1)
    ay, by = np.polyfit(z, pix[:, 1], 1)
    marks = sorted((float(c.get("cx")), float(c.get("cy"))) for c in root.iter(f"{SVG}circle"))
    assert len(marks) == 2
    want = sorted((ax * X + bx, ay * Z + by) for X, Z in ((-2.0, 8 / 15), (2.0, -8 / 15)))
    for m, w in zip(marks, want):
        assert np.hypot(m[0] - w[0], m[1] - w[1]) < 1.0


def test_cusp_points_at_t_one():
    pts = render.cusp_points(1.0)
    assert [(x1, z) for _, x1, z in pts] == [pytest.approx((2.0, -8 / 15)), pytest.approx((-2.0, 8 / 15))]


def test_no_cusps_before_birth():
    for t in (-0.5, 0.0):
        assert render.cusp_points(t) == []
        root = parse(render.render_front(RenderSpec("x1z", (t,))))
        assert not list(root.iter(f"{SVG}circle"))
        assert len(list(root.iter(f"{SVG}polyline"))) == 1


def test_empty_slice_list_gives_valid_document():
    root = parse(render.render_front(RenderSpec("x1z", ())))
    assert root.tag == f"{SVG}svg"
    assert render.render_all(()) == {}


def test_front_file_names():
    assert render.front_filename(0.5, "x1z") == "front_t0.5_x1z.svg"
    assert render.front_filename(-0.5, "ux2") == "front_t-0.5_ux2.svg"
    assert render.front_filename(2.0, "x2z") == "front_t2_x2z.svg"
    assert set(render.front_files(RenderSpec("x2z", (1.0, 2.0)))) == {"front_t1_x2z.svg", "front_t2_x2z.svg"}


def test_render_all_counts():
    figs = render.render_all((-0.5, 0.5, 1.0, 2.0), render.PROJECTIONS)
    assert len(figs) == 14
    for doc in figs.values():
        parse(doc)


def test_fold_circle_in_parameter_plane():
    root = parse(render.render_front(RenderSpec("ux2", (1.0,))))
    pts = polyline_points(root.find(f"{SVG}polyline"))
    centre = pts.mean(axis=0)
    r = np.hypot(*(pts - centre).T)
    assert r.std() < 1e-2 * r.mean()


def test_region_diagram_layers():
    doc = render.render_regions(PatchParams())
    classes = re.findall(r'class="(\w+)"', doc)
    assert classes.count("shaded") == 2 and classes.count("striped") == 2 and "core" in classes
    tiny = render.render_regions(PatchParams(eps=1e-8, delta=1e-5))
    assert '<circle class="core"' in tiny


def test_nested_diagram_draws_every_chart():
    doc = render.render_nested(render.default_nested())
    assert doc.count('class="singular"') == 4 and doc.count('class="core"') == 4


def test_spec_validation():
    with pytest.raises(ValueError):
        RenderSpec("xyz")
    with pytest.raises(ValueError):
        RenderSpec("x1z", (4.0,))
    with pytest.raises(ValueError):
        RenderSpec("x1z", resolution=4)
    with pytest.raises(ValueError):
        RenderSpec("x1z", overlays=("shadow",))
