import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wrinkled_cobordism import symplectization as symp, verifier
from wrinkled_cobordism.verifier import CheckResult, VerificationReport

SPACINGS = (0.1, 0.05, 0.025)
BASES = [(0.6, 0.3, 0.0), (-0.8, 0.5, 1.0), (1.1, -0.7, -2.0)]


@pytest.fixture(scope="module")
def cylinder():
    return symp.cylinder_patches(BASES, SPACINGS, 0.5)


def test_convergence_study_recovers_order():
    h = np.array([0.1, 0.05, 0.025])
    c = verifier.convergence_study(3.0 * h ** 2, h)
    assert c.order == pytest.approx(2.0) and not c.floor and not c.na


def test_convergence_study_special_cases():
    h = [0.1, 0.05, 0.025]
    c = verifier.convergence_study([0.0, 0.0, 0.0], h)
    assert c.na and math.isinf(c.order)
    assert verifier.convergence_study([1e-9, 1e-10, 1e-13], h).floor
    with pytest.raises(ValueError):
        verifier.convergence_study([1.0, 0.5], [0.1, 0.05])


def test_order_outside_range_fails_even_below_tolerance():
    c = verifier._finish("x", 1e-9, 1e-5, 10, verifier.convergence_study([1e-7, 5e-8, 2.5e-8], [0.1, 0.05, 0.025]))
    assert not c.passed and c.order == pytest.approx(1.0)


def test_legendrian_check_passes_on_lift_and_flags_zero_frames():
    u, x2 = np.meshgrid(np.linspace(-2, 2, 21), np.linspace(-1.5, 1.5, 21), indexing="ij")
    P, J = verifier.legendrian_samples(u, x2, 1.0)
    assert verifier.check_legendrian(P, J).passed
    res = verifier.check_legendrian(P, np.zeros_like(J))
    assert res.degenerate and res.note
    with pytest.raises(ValueError):
        verifier.check_legendrian(P, J[..., 0, :])


def test_cylinder_is_lagrangian_at_second_order(cylinder):
    res = verifier.check_lagrangian(cylinder)
    assert res.passed
    assert 1.8 <= res.order <= 2.2
    assert res.residual < 1e-6


def test_cylinder_is_exact_at_second_order(cylinder):
    loops, paths = verifier.check_exact(cylinder)
    for r in (loops, paths):
        assert r.passed, r
        assert 1.8 <= r.order <= 2.2


def test_liouville_edge_is_exact_for_linear_paths():
    # on a v = const plane e^v alpha has constant coefficients along x1 when y1 is fixed
    A = np.array([0.0, 0.0, 0.5, 0.0, 1.0, 0.3])
    B = np.array([1.0, 0.0, 0.5, 0.0, 1.0, 0.3])
    assert verifier.liouville_edge(A, B) == pytest.approx(-0.5 * math.exp(0.3))


def test_negative_controls_fail_by_wide_margins(cylinder):
    u, x2 = np.meshgrid(np.linspace(-2, 2, 41), np.linspace(-1.5, 1.5, 41), indexing="ij")
    leg = verifier.check_legendrian(*verifier.perturbed_lift(u, x2, 1.0))
    lag = verifier.check_lagrangian(verifier.graph_patches(BASES, SPACINGS))
    exact = verifier.check_exact(verifier.sheared_patches(cylinder, 0.1))[1]
    for r in (leg, lag, exact):
        assert not r.passed
        assert r.margin >= 1e3


def test_truncated_patches_are_excluded(cylinder):
    fam = [symp.PatchSet(p.base, p.h, p.coords, p.primitive, p.truncated.copy()) for p in cylinder]
    fam[0].truncated[1, 0, 0, 0] = True
    res = verifier.check_lagrangian(fam)
    assert res.truncated == 1 and res.samples == 2
    for p in fam:
        p.truncated[:] = True
    res = verifier.check_lagrangian(fam)
    assert res.degenerate and not res.passed


def test_family_needs_three_spacings(cylinder):
    with pytest.raises(ValueError):
        verifier.check_lagrangian(cylinder[:2])


@pytest.fixture(scope="module")
def zero_trace():
    grid = symp.TraceGrid.regular(1.0, (-4, 4), 5, 9)
    return symp.trace_cobordism(symp.ZeroFamily(), grid, t_span=(0.5, 0.5), step=0.5)


def test_ends_of_unmoved_cylinder(zero_trace):
    res = verifier.check_ends(zero_trace)
    assert res.passed and res.residual < 1e-10
    assert res.extra["upper_nodes"] == res.extra["lower_nodes"] == 25
    assert verifier.check_end_variance(zero_trace).passed


def test_ends_against_wrong_slice_fail(zero_trace):
    res = verifier.check_ends(zero_trace, t_upper=1.0)
    assert not res.passed and res.note


def test_misplaced_end_band_is_noted(zero_trace):
    res = verifier.check_ends(zero_trace, band=0.5)
    assert "inside the active region" in res.note
    empty = verifier.check_ends(zero_trace, band=10.0)
    assert empty.degenerate and not empty.passed


def test_mesh_lagrangian_single_resolution(zero_trace):
    res = verifier.check_lagrangian(zero_trace)
    assert res.order is None and res.samples > 0


def test_truncation_fraction():
    grid = symp.TraceGrid.regular(1.0, (-2, 2), 3, 3)
    mesh = symp.cylinder(grid, 0.5)
    mesh.truncated[0] = True
    assert verifier.truncation_fraction(mesh) == pytest.approx(1 / 3)


def test_report_marks_invalid_runs():
    rep = VerificationReport([CheckResult("a", 0.0, 1.0, 1, True)], valid=False, invalid_reason="too many truncated")
    assert not rep.passed
    assert rep.summary_lines()[-1].startswith("INVALID")


finite = st.floats(-1e6, 1e6, allow_nan=False)
names = st.text("abcdefghijklmnopqrstuvwxyz_", min_size=1, max_size=12)


@st.composite
def check_results(draw):
    order = draw(st.none() | finite)
    return CheckResult(draw(names), draw(finite), draw(st.floats(0, 1) | st.just(math.inf)),
                       draw(st.integers(0, 10 ** 6)), draw(st.booleans()), order,
                       None if order is None else (draw(finite), draw(finite)), draw(st.integers(0, 100)),
                       draw(st.booleans()), draw(st.booleans()), draw(st.text(max_size=30)),
                       draw(st.dictionaries(names, finite | st.lists(finite, max_size=3), max_size=3)))


@settings(max_examples=60, deadline=None)
@given(st.lists(check_results(), max_size=5, unique_by=lambda c: c.name),
       st.dictionaries(names, finite | st.text(max_size=20), max_size=3), st.booleans(), st.text(max_size=20))
def test_report_round_trip(checks, meta, valid, reason):
    rep = VerificationReport(checks, meta, valid, reason)
    back = VerificationReport.from_text(rep.to_text())
    assert back == rep
    assert back.to_text() == rep.to_text()


def test_malformed_report_line():
    with pytest.raises(ValueError):
        VerificationReport.from_text("report.valid true\n")
