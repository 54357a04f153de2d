"""Galerkin assembly: mass and convection integrals, boundary identity,
block sparse algebra and Dirichlet row replacement."""

import numpy as np
import pytest

from shockfem import physics
from shockfem.assembly import DirichletBC, FEAssembly
from shockfem.mesh import build_structured_quad
from shockfem.physics import conserved_from_primitive
from shockfem.sparse import BlockSparseMatrix


@pytest.fixture(scope="module")
def fa4():
    return FEAssembly(build_structured_quad(4, 4))


def test_total_mass(fa4):
    assert fa4.lumped_mass.sum() == pytest.approx(1.0, abs=1e-14)
    assert fa4.mass_data.sum() == pytest.approx(1.0, abs=1e-14)


def test_unit_cell_mass_entries():
    # single [0,1]^2 cell: diagonal 1/9, edge-neighbor 1/18, diagonal pair 1/36
    fa = FEAssembly(build_structured_quad(1, 1))
    m = fa.mass_e[0]
    assert m[0, 0] == pytest.approx(1.0 / 9.0, abs=1e-14)
    assert m[0, 1] == pytest.approx(1.0 / 18.0, abs=1e-14)
    assert m[0, 2] == pytest.approx(1.0 / 36.0, abs=1e-14)
    assert fa.lumped_mass[0] == pytest.approx(0.25, abs=1e-14)


def test_unit_cell_convection_entries():
    fa = FEAssembly(build_structured_quad(1, 1))
    c = fa.cvec_e[0]
    # c_00 = int phi_0 grad phi_0 = (-1/6, -1/6) on the unit cell
    assert np.allclose(c[0, 0], (-1.0 / 6.0, -1.0 / 6.0), atol=1e-14)
    # partition of unity: sum_j grad phi_j = 0 pointwise
    assert np.allclose(c.sum(axis=1), 0.0, atol=1e-14)


def test_c_row_and_column_sums(fa4):
    # partition of unity: row sums sum_j c_ij vanish everywhere; column sums
    # sum_i c_ij reduce to the boundary integral of phi_j, nonzero only for
    # boundary columns
    mesh = fa4.mesh
    rows = np.repeat(np.arange(mesh.n_nodes), np.diff(fa4.indptr))
    row_sums = np.zeros((mesh.n_nodes, 2))
    np.add.at(row_sums, rows, fa4.cvec)
    assert np.allclose(row_sums, 0.0, atol=1e-14)
    col_sums = np.zeros((mesh.n_nodes, 2))
    np.add.at(col_sums, fa4.indices, fa4.cvec)
    interior = np.setdiff1d(np.arange(mesh.n_nodes), mesh.boundary_nodes)
    assert np.allclose(col_sums[interior], 0.0, atol=1e-14)
    assert np.linalg.norm(col_sums[mesh.boundary_nodes]) > 1e-3


def test_integration_by_parts_identity(fa4):
    # sum_j c_ij f(u_j) equals -(f_h, grad phi_i) + boundary term; for nodal
    # group fluxes the whole difference against the independent boundary-edge
    # assembly plus volume term must vanish to roundoff
    mesh = fa4.mesh
    r = np.random.default_rng(3)
    u = conserved_from_primitive(1.0 + 0.3 * r.random(mesh.n_nodes),
                                 r.random((mesh.n_nodes, 2)) - 0.5,
                                 1.0 + 0.2 * r.random(mesh.n_nodes))
    f = physics.flux(u)
    # volume part: -(f_h . grad phi_i) with c_ji weights
    n = mesh.n_nodes
    import scipy.sparse as sp
    cx = sp.csr_matrix((fa4.cvec[:, 0], fa4.indices, fa4.indptr), shape=(n, n))
    cy = sp.csr_matrix((fa4.cvec[:, 1], fa4.indices, fa4.indptr), shape=(n, n))
    vol = -(cx.T.dot(f[:, :, 0]) + cy.T.dot(f[:, :, 1]))
    total = fa4.galerkin_residual(u)
    bnd = fa4.boundary_flux_residual(u)
    assert np.max(np.abs(total - (vol + bnd))) < 1e-13


def test_galerkin_residual_constant_state(fa4):
    # constant state: flux divergence vanishes row-wise in the interior
    u = np.tile(np.array([1.0, 0.5, -0.2, 3.0]), (fa4.mesh.n_nodes, 1))
    r = fa4.galerkin_residual(u)
    interior = np.setdiff1d(np.arange(fa4.mesh.n_nodes), fa4.mesh.boundary_nodes)
    assert np.allclose(r[interior], 0.0, atol=1e-13)


def test_assemble_K_reproduces_residual(fa4):
    # flux homogeneity: K(u) u = group-FEM residual
    mesh = fa4.mesh
    r = np.random.default_rng(4)
    u = conserved_from_primitive(1.0 + 0.3 * r.random(mesh.n_nodes),
                                 r.random((mesh.n_nodes, 2)) - 0.5,
                                 1.0 + 0.2 * r.random(mesh.n_nodes))
    K = fa4.assemble_K(u)
    assert np.allclose(K.matvec(u), fa4.galerkin_residual(u),
                       rtol=1e-12, atol=1e-12)


def test_block_sparse_roundtrip(fa4):
    r = np.random.default_rng(5)
    data = r.standard_normal((len(fa4.indices), 4, 4))
    mat = BlockSparseMatrix(fa4.indptr, fa4.indices, data)
    u = r.standard_normal((fa4.mesh.n_nodes, 4))
    dense = mat.toarray()
    assert np.allclose(mat.matvec(u), (dense @ u.ravel()).reshape(-1, 4))
    assert np.allclose(mat.tocsr().toarray(), dense)
    i, j = int(fa4.rows[7]), int(fa4.indices[7])
    assert np.allclose(mat.block(i, j), data[7])


def test_scalar_matvec(fa4):
    u = np.random.default_rng(6).standard_normal((fa4.mesh.n_nodes, 4))
    got = fa4.scalar_matvec(fa4.mass_data, u)
    want = fa4.mass_consistent().matvec(u)
    assert np.allclose(got, want, atol=1e-14)


def test_dirichlet_scalar_rows():
    mesh = build_structured_quad(3, 3)
    bc = DirichletBC(mesh)
    node = int(mesh.boundary_nodes[0])
    bc.add_state(node, np.array([2.0, 1.0, 0.0, 9.0]))
    bc.finalize()
    u = np.ones((mesh.n_nodes, 4))
    r = np.full((mesh.n_nodes, 4), 7.0)
    bc.apply_to_residual(r, u)
    assert np.allclose(r[node], [1.0 - 2.0, 0.0, 1.0, 1.0 - 9.0])
    assert not bc.free_mask[node].any()


def test_dirichlet_wall_rotation():
    mesh = build_structured_quad(3, 3)
    bc = DirichletBC(mesh)
    node = 1  # left edge, not a corner
    nrm = np.array([-1.0, 0.0])
    bc.add_wall(node, nrm)
    bc.finalize()
    u = np.zeros((mesh.n_nodes, 4))
    u[node, 1:3] = (0.4, 0.7)
    r = np.zeros((mesh.n_nodes, 4))
    r[node, 1:3] = (3.0, 5.0)
    bc.apply_to_residual(r, u)
    # tangent (0, -1) for normal (-1, 0): tangential residual kept in row 1,
    # the constraint row 2 measures n . m
    assert r[node, 1] == pytest.approx(-5.0)
    assert r[node, 2] == pytest.approx(-0.4)


def test_dirichlet_matrix_rows_match_residual_linearization():
    mesh = build_structured_quad(3, 3)
    bc = DirichletBC(mesh)
    bc.add_wall(1, np.array([-1.0, 0.0]))
    bc.add_scalar(int(mesh.boundary_nodes[-1]), 0, 1.5)
    bc.finalize()
    fa = FEAssembly(mesh)
    data = np.random.default_rng(7).standard_normal((len(fa.indices), 4, 4))
    mat = BlockSparseMatrix(fa.indptr, fa.indices, data.copy())
    bc.apply_to_matrix(mat)
    # constrained rows: exact FD of the replaced residual rows
    u = np.random.default_rng(8).standard_normal((mesh.n_nodes, 4))

    def res(v):
        r = BlockSparseMatrix(fa.indptr, fa.indices, data.copy()).matvec(v)
        return bc.apply_to_residual(r, v)

    h = 1e-6
    dense = mat.toarray()
    rng = np.random.default_rng(9)
    for _ in range(5):
        dv = rng.standard_normal(u.shape)
        fd = (res(u + h * dv) - res(u - h * dv)) / (2 * h)
        assert np.allclose((dense @ dv.ravel()).reshape(-1, 4), fd,
                           rtol=1e-6, atol=1e-6)


def test_set_initial_projects_wall_momentum():
    mesh = build_structured_quad(3, 3)
    bc = DirichletBC(mesh)
    bc.add_wall(1, np.array([-1.0, 0.0]))
    bc.finalize()
    u = np.ones((mesh.n_nodes, 4))
    bc.set_initial(u)
    assert u[1, 1] == pytest.approx(0.0)   # normal momentum removed
    assert u[1, 2] == pytest.approx(1.0)   # tangential kept
