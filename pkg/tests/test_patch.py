import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wrinkled_cobordism import patch, wrinkle
from wrinkled_cobordism.contact import alpha_eval
from wrinkled_cobordism.patch import PatchParams, RegionTag


@pytest.fixture(scope="module")
def ext():
    return patch.HamiltonianExtension()


@pytest.fixture(scope="module")
def samples():
    rng = np.random.default_rng(1)
    u = rng.uniform(-1.5, 1.5, 300)
    x2 = rng.uniform(-1.5, 1.5, 300)
    return u, x2


def test_params_validation():
    with pytest.raises(ValueError):
        PatchParams(eps=0.1, delta=0.5)
    with pytest.raises(ValueError):
        PatchParams(rho_tube=0.4, rho_cut=0.3)
    with pytest.raises(ValueError):
        PatchParams(eps=0.0)
    assert PatchParams().at(0.7).t == 0.7


def test_projection_of_points_on_legendrian(samples):
    u, x2 = samples
    L = wrinkle.lift_family(u, x2, 0.5)
    pr = patch.project(L, 0.5)
    assert pr.dist.max() < 1e-12
    np.testing.assert_allclose(pr.u, u, atol=1e-10)
    np.testing.assert_allclose(pr.x2, x2, atol=1e-10)


def test_projection_along_normal_recovers_offset(samples):
    u, x2 = samples
    Q = wrinkle.lift_family(u, x2, 0.5) + 0.05 * patch.unit_normals(u, x2, 0.5, 1)
    pr = patch.project(Q, 0.5)
    # within the reach the offset is the distance
    assert np.median(np.abs(pr.dist - 0.05)) < 1e-12
    assert np.mean(np.abs(pr.dist - 0.05) < 1e-9) > 0.95
    assert np.all(pr.dist <= 0.05 + 1e-12)


def test_warm_start_without_search_keeps_branch():
    P = wrinkle.lift_family(0.8, 0.3, 1.0) + 1e-3
    cold = patch.project(P, 1.0)
    warm = patch.project(P, 1.0, guess=(cold.u, cold.x2), search=False)
    assert warm.dist == pytest.approx(cold.dist, abs=1e-14)
    assert not warm.switched


def test_region_codes():
    prm = PatchParams()
    codes = patch.region_codes(np.array([1.0, -1.0, 0.1, 0.2, 0.05, 1.0]),
                               np.array([0.0, 0.0, 0.8, 0.8, 0.05, 0.0]),
                               np.array([0.0, 0.0, 0.0, 0.0, 0.0, 0.4]), prm)
    assert codes.tolist() == [RegionTag.POS_U, RegionTag.NEG_U, RegionTag.OUTER_X2, RegionTag.BLEND,
                              RegionTag.CORE_DISC, RegionTag.FAR]


def test_classify_point_on_legendrian():
    prm = PatchParams(t=1.0)
    assert patch.classify(wrinkle.lift_family(1.0, 0.0, 1.0), prm) == RegionTag.POS_U
    assert patch.classify(wrinkle.lift_family(0.0, 0.0, 1.0), prm) == RegionTag.CORE_DISC


@settings(max_examples=50, deadline=None)
@given(st.floats(-2, 2), st.floats(-1.5, 1.5).filter(lambda x: abs(x) > 1e-3), st.floats(-1, 1))
def test_branch_formulas_restrict_to_alpha_xt(u, x2, t):
    P = wrinkle.lift_family(u, x2, t)
    a = wrinkle.alpha_Xt(u, x2, t)
    assert patch.H_outer(P, t) == pytest.approx(a, abs=1e-9 * (1 + abs(a)))
    assert patch.H_branch_u(P, t, np.sign(u) or 1.0) == pytest.approx(a, abs=1e-6 * (1 + abs(a)))


def test_branch_formula_domain_errors():
    with pytest.raises(patch.SingularityError):
        patch.H_outer(wrinkle.lift_family(0.5, 0.0, 1.0), 1.0)
    P = np.array([0.0, 0.0, -2.0, 0.0, 0.0])
    with pytest.raises(patch.DomainError):
        patch.H_branch_u(P, 0.0, 1.0)


def test_extension_restricts_to_alpha_xt(ext, samples):
    u, x2 = samples
    for t in (-0.5, 0.5, 1.0):
        ev = ext.evaluate(wrinkle.lift_family(u, x2, t), t)
        np.testing.assert_allclose(ev.value, wrinkle.alpha_Xt(u, x2, t), atol=1e-12)


def test_extension_vanishes_far_from_legendrian(ext):
    P = np.array([10.0, 10.0, 10.0, 10.0, 10.0])
    assert ext.value(P, 0.5) == 0.0
    assert np.all(ext.gradient(P, 0.5) == 0.0)


def test_closed_form_gradient_matches_differences(ext, samples):
    u, x2 = samples
    t = 0.5
    Q = wrinkle.lift_family(u, x2, t) + 0.05 * patch.unit_normals(u, x2, t, 0)
    ev = ext.evaluate(Q, t)
    g = ext.gradient(Q, t, ev)
    f = ext.fd_gradient(Q, t, ev)
    err = np.abs(g - f).max(axis=1) / (1 + np.abs(f).max(axis=1))
    assert np.median(err) < 1e-8
    assert np.quantile(err, 0.95) < 1e-6


def test_contact_field_has_alpha_equal_to_h(ext, samples):
    u, x2 = samples
    Q = wrinkle.lift_family(u, x2, 1.0) + 0.03 * patch.unit_normals(u, x2, 1.0, 2)
    X, ev = ext.contact_field(Q, 1.0)
    np.testing.assert_allclose(alpha_eval(Q, X), ev.value, atol=1e-12)


def test_h_ext_wrapper(ext):
    P = wrinkle.lift_family(0.9, 0.6, 0.5)
    assert patch.H_ext(P, 0.5, PatchParams()) == ext.value(P, 0.5)


def test_continuity_across_region_boundaries(ext):
    for t in (-0.5, 1.0):
        assert patch.boundary_jumps(ext, t).max() < 1e-6


def test_transport_converges_at_second_order(ext):
    g = np.linspace(-1.5, 1.5, 13)
    U, X = np.meshgrid(g, g, indexing="ij")
    keep = U * U + X * X > 0.15
    st_ = patch.transport_order(ext, 0.5, [0.02, 0.01, 0.005], (U[keep], X[keep]))
    assert st_.order_rms >= 1.8
    assert np.all(np.diff(st_.rms) < 0)


def test_transport_grid_avoids_core():
    U, X = patch.transport_grid(PatchParams(), size=21)
    assert np.all(U * U + X * X > 0.1)
