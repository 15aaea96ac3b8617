import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wrinkled_cobordism import push, symplectization as symp, wrinkle
from wrinkled_cobordism.contact import ScalarField, contact_field_from, fd_gradient

coord = st.floats(-2, 2)


def vec(k):
    return st.lists(coord, min_size=k, max_size=k).map(np.array)


@settings(max_examples=40, deadline=None)
@given(vec(6), vec(6))
def test_field_solves_omega_equation(P, dF):
    X = symp.field_from_gradient(P, dF)
    assert symp.field_residual(P, X, dF) < 1e-10 * (1 + np.abs(dF).max()) * np.exp(abs(P[-1]))


@settings(max_examples=40, deadline=None)
@given(vec(5), vec(5), st.floats(-2, 2), st.floats(-2, 2))
def test_lift_of_eh_projects_to_contact_field(p, g, h, v):
    P = np.append(p, v)
    dF = np.exp(v) * np.append(g, h)
    X = symp.field_from_gradient(P, dF)
    np.testing.assert_allclose(X[:5], contact_field_from(p, np.asarray(h), g), atol=1e-12)
    assert X[5] == pytest.approx(-g[4])


def test_band_cutoff_profile():
    v = np.linspace(-3, 3, 601)
    chi = symp.band_cutoff(v, 1.0)
    assert np.all(chi[v <= -1] == 0) and np.all(chi[v >= 1] == 1)
    assert np.all(np.diff(chi) >= 0)
    assert np.all(symp.band_cutoff_deriv(v[np.abs(v) > 1], 1.0) == 0)


def test_cutoff_hamiltonian_gradient():
    H = ScalarField(lambda q: q[..., 0] * q[..., 4] + q[..., 2] ** 2)
    F = symp.lifted_hamiltonian(lambda t: H, 1.0)
    P = np.array([0.3, -0.2, 0.5, 0.1, 0.7, 0.4])
    np.testing.assert_allclose(F.gradient(P, 0.0), fd_gradient(lambda Q: F.value(Q, 0.0), P), rtol=1e-6)
    with pytest.raises(ValueError):
        symp.lifted_hamiltonian(lambda t: H, 0.0)


def test_lifted_reeb_shift_is_symplectic():
    lift = symp.lift_contactomorphism(push.reeb_map(0.7), lambda p: 0.0, check_points=np.zeros((1, 5)))
    P = np.array([0.1, 0.2, 0.3, 0.4, 0.5, 0.6])
    assert lift(P)[4] == pytest.approx(1.2)
    assert lift.symplectic_residual(P[None]) < 1e-8


def test_wrong_conformal_exponent_is_rejected():
    with pytest.raises(symp.ConsistencyError):
        symp.lift_contactomorphism(push.reeb_map(0.7), lambda p: 1.0, check_points=np.zeros((1, 5)))


def test_dilation_flow_lift_is_symplectic():
    H = ScalarField(lambda q: q[..., -1], lambda q: np.eye(5)[4] * np.ones(q.shape))
    lift = symp.flow_lift(H, 0.5, step=0.01)
    assert lift.symplectic_residual(np.array([[0.2, -0.1, 0.3, 0.4, 0.5, 0.2]])) < 1e-6


def test_trace_grid_validation():
    with pytest.raises(ValueError):
        symp.TraceGrid(np.zeros(2), np.zeros(3), np.zeros(3))
    g = symp.TraceGrid.regular(1.0, (-2, 2), 9, 5)
    assert g.subsample(2).u.size == 5


def test_zero_hamiltonian_trace_is_the_cylinder():
    grid = symp.TraceGrid.regular(1.0, (-3, 3), 5, 5)
    mesh = symp.trace_cobordism(symp.ZeroFamily(), grid, step=0.1, end_step=0.1)
    ref = symp.cylinder(grid, -1.0)
    np.testing.assert_array_equal(mesh.coords, ref.coords)
    assert not mesh.truncated.any() and np.all(mesh.primitive == 0)


def test_reeb_hamiltonian_trace_shifts_upper_end():
    fam = symp.FunctionFamily(lambda P, t: np.ones(P.shape[:-1]), lambda P, t: np.zeros(P.shape))
    grid = symp.TraceGrid(np.linspace(-1, 1, 3), np.linspace(-1, 1, 3), np.array([-3.0, -2.0, 2.0, 3.0]))
    mesh = symp.trace_cobordism(fam, grid, step=0.05, end_step=0.05)
    ref = symp.cylinder(grid, -1.0)
    np.testing.assert_array_equal(mesh.coords[:, :, :2], ref.coords[:, :, :2])
    np.testing.assert_allclose(mesh.coords[:, :, 2:, 4], ref.coords[:, :, 2:, 4] + 2.0, atol=1e-12)
    np.testing.assert_allclose(mesh.coords[:, :, 2:, 5], ref.coords[:, :, 2:, 5], atol=1e-12)
    assert mesh.meta["shared_nodes"] == 18


def test_stepping_outside_box_truncates():
    fam = symp.FunctionFamily(lambda P, t: np.ones(P.shape[:-1]), lambda P, t: np.zeros(P.shape))
    grid = symp.TraceGrid(np.linspace(-1, 1, 3), np.linspace(-1, 1, 3), np.array([2.0, 2.5, 3.0]))
    mesh = symp.trace_cobordism(fam, grid, step=0.05, bound=1.5)
    assert mesh.truncated.all()


def test_export_format():
    grid = symp.TraceGrid.regular(1.0, (-2, 2), 3, 3)
    mesh = symp.cylinder(grid, 0.5)
    mesh.truncated[0, 0, 0] = True
    mesh.crossed[0, 0, 0] = True
    lines = mesh.export().splitlines()
    header = [l for l in lines if l.startswith("#")]
    rows = [l.split() for l in lines if not l.startswith("#")]
    assert len(rows) == 27
    cols = header[-1][2:].split()
    assert cols[-2:] == ["f", "flags"] and len(cols) == len(rows[0]) == 14
    assert rows[0][-1] == "5" and rows[1][-1] == "0"
    assert float(rows[5][5]) == grid.v[2]


def test_cylinder_patches_shape():
    ps = symp.cylinder_patches([[0.5, 0.2, 0.0], [-0.3, 0.1, 1.0]], [0.1, 0.05], 0.5)
    assert len(ps) == 2 and ps[1].h == 0.05
    assert ps[0].coords.shape == (2, 3, 3, 3, 6)
    np.testing.assert_allclose(ps[0].coords[1, 1, 1, 1], wrinkle.lift_family(-0.3, 0.1, 0.5).tolist() + [1.0])
    assert len(ps[0].as_meshes()) == 2


def test_conjugation_by_identity_preserves_alpha_of_isotopy():
    u = np.linspace(-1, 1, 7)
    x2 = np.linspace(-1, 1, 7)
    out = symp.conjugated_isotopy(u, x2, [0.2, 0.6], lambda t: (lambda p: p))
    for s in out:
        np.testing.assert_allclose(s.alpha_new, s.alpha_old, atol=1e-6)
    with pytest.raises(ValueError):
        symp.conjugated_isotopy(u, x2, [0.2], lambda t: (lambda p: p), fd_step=0.0)
