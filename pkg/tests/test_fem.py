import math

import numpy as np
import pytest

from wavedg import fem
from wavedg.fem import ExactField
from wavedg.problems import BUILTIN
from wavedg.sparse import quadratic_form

SIN = ExactField(lambda x, t: np.sin(x) + 0.0 * t, lambda x, t: np.cos(x) + 0.0 * t)


def space(nx, a=0.0, b=math.pi):
    return fem.FeSpace(fem.build_uniform_mesh(a, b, nx))


def hat(sp, j, x):
    e = np.zeros(sp.n_dof)
    e[j] = 1.0
    return np.interp(x, sp.mesh.nodes, sp.full_nodal(e))


def dense_oracle(sp, derivative=False):
    """Entries by 10-point Gauss on every element, hats evaluated by interpolation."""
    n = sp.n_dof
    out = np.zeros((n, n))
    x, w = sp.mesh.quadrature(10)
    x, w = x.ravel(), w.ravel()
    if derivative:
        widths = np.repeat(sp.mesh.widths, 10)
        elem = np.repeat(np.arange(sp.mesh.nx), 10)
        vals = []
        for j in range(n):
            node = j + 1
            d = np.where(elem == node - 1, 1.0 / widths, np.where(elem == node, -1.0 / widths, 0.0))
            vals.append(d)
    else:
        vals = [hat(sp, j, x) for j in range(n)]
    for i in range(n):
        for j in range(n):
            out[i, j] = np.sum(w * vals[i] * vals[j])
    return out


def test_uniform_mesh():
    m = fem.build_uniform_mesh(0.0, math.pi, 4)
    np.testing.assert_allclose(m.nodes, [0, math.pi / 4, math.pi / 2, 3 * math.pi / 4, math.pi])
    sp = fem.FeSpace(fem.build_uniform_mesh(0.0, 1.0, 2))
    assert sp.n_dof == 1 and sp.mesh.nodes[sp.dof_nodes[0]] == 0.5
    assert fem.build_uniform_mesh(0.0, math.pi, 64).h == pytest.approx(math.pi / 64, rel=1e-15)
    with pytest.raises(ValueError):
        fem.build_uniform_mesh(0.0, 1.0, 1)


def test_mass_rows():
    sp = space(8, 0.0, 4.0)
    M = fem.assemble_mass(sp).to_dense()
    h = 0.5
    np.testing.assert_allclose(M[3, 2:5], [h / 6, 4 * h / 6, h / 6], rtol=1e-15)
    np.testing.assert_allclose(M[2:6].sum(axis=1), h, rtol=1e-14)
    one = fem.assemble_mass(fem.FeSpace(fem.build_uniform_mesh(0.0, 1.0, 2))).to_dense()
    assert one[0, 0] == pytest.approx(1.0 / 3.0, rel=1e-15)


def test_stiffness_rows():
    A = fem.assemble_stiffness(space(8, 0.0, 4.0)).to_dense()
    np.testing.assert_allclose(A[3, 2:5], [-2.0, 4.0, -2.0], rtol=1e-15)
    A1 = fem.assemble_stiffness(space(3, 0.0, 3.0)).to_dense()
    np.testing.assert_array_equal(A1, [[2.0, -1.0], [-1.0, 2.0]])


@pytest.mark.parametrize("nx", [2, 3, 5, 8])
def test_assembly_matches_dense_quadrature(nx):
    rng = np.random.default_rng(nx)
    nodes = np.sort(np.concatenate([[0.0, 2.0], rng.uniform(0.1, 1.9, nx - 1)]))
    sp = fem.FeSpace(fem.Mesh1D(nodes))
    np.testing.assert_allclose(fem.assemble_mass(sp).to_dense(), dense_oracle(sp), atol=1e-13)
    np.testing.assert_allclose(fem.assemble_stiffness(sp).to_dense(), dense_oracle(sp, True), atol=1e-13)


def test_matrices_spd():
    rng = np.random.default_rng(0)
    sp = space(20)
    M, A = fem.assemble_mass(sp), fem.assemble_stiffness(sp)
    for mat in (M, A):
        d = mat.to_dense()
        assert np.abs(d - d.T).max() <= 1e-13 * np.abs(d).max()
        for _ in range(100):
            x = rng.standard_normal(sp.n_dof)
            assert quadratic_form(mat, x, x) > 0


def test_load_vectors():
    sp = space(10, 0.0, 5.0)
    assert np.array_equal(fem.assemble_load(sp, lambda x: 0.0 * x), np.zeros(9))
    np.testing.assert_allclose(fem.assemble_load(sp, lambda x: 1.0 + 0.0 * x), 0.5, rtol=1e-14)


def test_load_of_sine_approaches_mass_times_nodal_values():
    sp = space(32)
    M = fem.assemble_mass(sp).to_dense()
    nodal = np.sin(sp.mesh.nodes[1:-1])
    b = fem.assemble_load(sp, np.sin)
    # high-order reference: 12-point Gauss
    ref = fem.assemble_load(sp, np.sin, n_quad=12)
    assert np.abs(b - ref).max() < 1e-14
    assert np.abs(b - M @ nodal).max() < sp.mesh.h ** 2


def test_ritz_reproduces_p1_functions():
    sp = space(7)
    coeffs = np.random.default_rng(2).standard_normal(sp.n_dof)
    nodes, vals = sp.mesh.nodes, sp.full_nodal(coeffs)
    slopes = np.diff(vals) / np.diff(nodes)
    field = ExactField(lambda x, t: np.interp(x, nodes, vals),
                       lambda x, t: slopes[np.clip(np.searchsorted(nodes, x) - 1, 0, len(slopes) - 1)])
    np.testing.assert_allclose(fem.ritz_project(sp, field).coeffs, coeffs, atol=1e-12)
    np.testing.assert_allclose(fem.l2_project(sp, field.at(0.0)).coeffs, coeffs, atol=1e-12)


@pytest.mark.parametrize("nx", [8, 33, 64])
def test_orthogonality(nx):
    sp = space(nx)
    r = fem.ritz_project(sp, SIN)
    p = fem.l2_project(sp, np.sin)
    assert fem.orthogonality_residual(sp, r.coeffs, SIN, "ritz") <= 1e-10
    assert fem.orthogonality_residual(sp, p.coeffs, np.sin, "l2") <= 1e-10


def test_projection_rates():
    errs_r, errs_p = [], []
    for nx in (8, 16, 32, 64, 128):
        sp = space(nx)
        errs_r.append(fem.error_norms(sp, fem.ritz_project(sp, SIN), SIN, 0.0)[0])
        errs_p.append(fem.error_norms(sp, fem.l2_project(sp, np.sin), SIN, 0.0)[0])
    for errs in (errs_r, errs_p):
        rates = np.log2(np.array(errs[:-1]) / errs[1:])
        assert 1.8 <= rates[-1] <= 2.2


def test_ritz_is_energy_best():
    rng = np.random.default_rng(11)
    sp = space(16)
    r = fem.ritz_project(sp, SIN)
    best = fem.error_norms(sp, r, SIN, 0.0)[1]
    l2_best = fem.error_norms(sp, fem.l2_project(sp, np.sin), SIN, 0.0)[0]
    for _ in range(20):
        w = r.coeffs + 0.01 * rng.standard_normal(sp.n_dof)
        assert best <= fem.error_norms(sp, w, SIN, 0.0)[1] + 1e-12
        assert l2_best <= fem.error_norms(sp, w, SIN, 0.0)[0] + 1e-12


def test_error_norms():
    lin = ExactField(lambda x, t: 0.0 * x, lambda x, t: 0.0 * x)
    sp = space(5)
    assert max(fem.error_norms(sp, np.zeros(sp.n_dof), lin, 0.0)) <= 1e-13
    # exact linear function on (0, 1) vanishing at 0 and 1 is only zero; use a hat instead
    hatfield = ExactField(lambda x, t: np.interp(x, [0, 0.5, 1], [0, 1, 0]),
                          lambda x, t: np.where(x < 0.5, 2.0, -2.0))
    sp2 = space(4, 0.0, 1.0)
    u = sp2.interpolate(hatfield.at(0.0))
    assert max(fem.error_norms(sp2, u, hatfield, 0.0)) <= 1e-13
    sp3 = space(256)
    l2, h1 = fem.error_norms(sp3, np.zeros(sp3.n_dof), SIN, 0.0)
    assert l2 == pytest.approx(math.sqrt(math.pi / 2), rel=1e-12)
    assert h1 == pytest.approx(math.sqrt(math.pi / 2), rel=1e-12)


@pytest.mark.parametrize("name", sorted(BUILTIN))
def test_exact_field_derivatives(name):
    sol = BUILTIN[name]()
    rng = np.random.default_rng(5)
    for fieldobj in (sol.u1, sol.u2):
        for _ in range(20):
            x, t = rng.uniform(0.05, math.pi - 0.05), rng.uniform(0, 2)
            if name == "polyt" and abs(x - math.pi / 2) < 1e-3:
                continue
            eps = 1e-6
            fd = (fieldobj.value(x + eps, t) - fieldobj.value(x - eps, t)) / (2 * eps)
            assert fd == pytest.approx(fieldobj.dx(x, t), abs=1e-6)


def test_basis_at():
    sp = space(4, 0.0, 4.0)
    np.testing.assert_allclose(sp.basis_at(1.25), [0.75, 0.25, 0.0])
    np.testing.assert_allclose(sp.basis_at(2.0), [0.0, 1.0, 0.0])
