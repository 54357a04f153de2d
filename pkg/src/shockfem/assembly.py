"""Galerkin building blocks on Q1 meshes.

Everything is assembled over the node-adjacency sparsity of the mesh using the
group-FEM form: with c_ij = (grad phi_j, phi_i) integrated over the whole
domain, the convective operator blocks are K_ij = f'(u_j) . c_ij and the
convective residual is R*_i = sum_j c_ij . f(u_j) - G_i (flux homogeneity).
The boundary surface term is contained in c_ij automatically (integration by
parts identity); an independent boundary-edge assembly is kept for testing.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from . import physics
from .mesh import Mesh
from .sparse import BlockSparseMatrix

# 2x2 Gauss rule on [-1, 1]^2
_G = 1.0 / np.sqrt(3.0)
_QP = np.array([(-_G, -_G), (_G, -_G), (_G, _G), (-_G, _G)])
_QW = np.ones(4)

# reference Q1 nodes, counterclockwise
_XI = np.array([(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)])


def _shape(xi, eta):
    return 0.25 * (1.0 + _XI[:, 0] * xi) * (1.0 + _XI[:, 1] * eta)


def _shape_grad(xi, eta):
    d = np.empty((4, 2))
    d[:, 0] = 0.25 * _XI[:, 0] * (1.0 + _XI[:, 1] * eta)
    d[:, 1] = 0.25 * _XI[:, 1] * (1.0 + _XI[:, 0] * xi)
    return d


class FEAssembly:
    """Precomputed geometric integrals and scatter maps for one mesh."""

    def __init__(self, mesh: Mesh):
        self.mesh = mesh
        n = mesh.n_nodes
        cells = mesh.cells
        coords = mesh.coords[cells]  # (E, 4, 2)

        mass_e = np.zeros((len(cells), 4, 4))
        cvec_e = np.zeros((len(cells), 4, 4, 2))
        for (xi, eta), w in zip(_QP, _QW):
            phi = _shape(xi, eta)            # (4,)
            dref = _shape_grad(xi, eta)      # (4, 2)
            J = np.einsum("eak,al->ekl", coords, dref)       # (E, 2, 2)
            detJ = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
            Jinv = np.empty_like(J)
            Jinv[:, 0, 0] = J[:, 1, 1]
            Jinv[:, 0, 1] = -J[:, 0, 1]
            Jinv[:, 1, 0] = -J[:, 1, 0]
            Jinv[:, 1, 1] = J[:, 0, 0]
            Jinv /= detJ[:, None, None]
            dphys = np.einsum("bl,elk->ebk", dref, Jinv)     # (E, 4, 2)
            mass_e += w * detJ[:, None, None] * np.einsum("a,b->ab", phi, phi)
            cvec_e += w * (detJ[:, None, None, None]
                           * phi[None, :, None, None] * dphys[:, None, :, :])
        if np.any(detJ <= 0):
            raise ValueError("degenerate cell Jacobian")
        self.mass_e = mass_e
        self.cvec_e = cvec_e

        # global scatter: position of (cells[e,a], cells[e,b]) in adjacency nnz
        indptr, indices = mesh.adj_indptr, mesh.adj_indices
        self.indptr, self.indices = indptr, indices
        nnz = len(indices)
        self.rows = np.repeat(np.arange(n), np.diff(indptr))
        key = self.rows.astype(np.int64) * n + indices
        qa = np.repeat(cells[:, :, None], 4, axis=2).astype(np.int64)
        qb = np.repeat(cells[:, None, :], 4, axis=1).astype(np.int64)
        self.pos_e = np.searchsorted(key, qa * n + qb)  # (E, 4, 4)

        self.mass_data = np.zeros(nnz)
        np.add.at(self.mass_data, self.pos_e.ravel(), mass_e.ravel())
        self.lumped_mass = np.asarray(
            sp.csr_matrix((self.mass_data, indices, indptr), shape=(n, n)).sum(axis=1)
        ).ravel()

        self.cvec = np.zeros((nnz, 2))
        np.add.at(self.cvec[:, 0], self.pos_e.ravel(), cvec_e[..., 0].ravel())
        np.add.at(self.cvec[:, 1], self.pos_e.ravel(), cvec_e[..., 1].ravel())

        self._cx = sp.csr_matrix((self.cvec[:, 0], indices, indptr), shape=(n, n))
        self._cy = sp.csr_matrix((self.cvec[:, 1], indices, indptr), shape=(n, n))

        self.diag_pos = np.array([self.pos_of(i, i) for i in range(n)])
        self.offdiag_mask = self.rows != indices

    def pos_of(self, i, j):
        lo, hi = self.indptr[i], self.indptr[i + 1]
        k = lo + np.searchsorted(self.indices[lo:hi], j)
        if k >= hi or self.indices[k] != j:
            raise KeyError(f"({i}, {j}) not in adjacency")
        return k

    # -- matrices ---------------------------------------------------------

    def mass_consistent(self) -> BlockSparseMatrix:
        data = np.zeros((len(self.indices), 4, 4))
        idx = np.arange(4)
        data[:, idx, idx] = self.mass_data[:, None]
        return BlockSparseMatrix(self.indptr, self.indices, data)

    def scalar_matvec(self, scalar_data, u):
        """(scalar_data x I) @ u for blockwise-scalar matrices; u is (N, 4)."""
        mat = sp.csr_matrix((scalar_data, self.indices, self.indptr),
                            shape=(self.mesh.n_nodes, self.mesh.n_nodes))
        return mat.dot(u)

    def assemble_K(self, u, gamma=physics.GAMMA) -> BlockSparseMatrix:
        """Convection blocks K_ij = f'(u_j) . c_ij."""
        data = physics.flux_jacobian(u[self.indices], self.cvec, gamma)
        return BlockSparseMatrix(self.indptr, self.indices, data)

    def galerkin_residual(self, u, forcing=None, gamma=physics.GAMMA):
        """Group-FEM convective residual R*_i = sum_j c_ij . f(u_j) - G_i."""
        f = physics.flux(u, gamma)
        r = self._cx.dot(f[:, :, 0]) + self._cy.dot(f[:, :, 1])
        if forcing is not None:
            r = r - forcing
        return r

    # -- independent boundary/volume assembly used by the test oracle -----

    def boundary_flux_residual(self, u, gamma=physics.GAMMA):
        """(n . f_h, phi_i)_dOmega with nodal fluxes and 2-point edge quadrature."""
        mesh = self.mesh
        f = physics.flux(u, gamma)
        r = np.zeros_like(np.asarray(u, dtype=float))
        ge = np.array([-_G, _G])
        for (a, b), nrm in zip(mesh.boundary_edges, mesh.boundary_edge_normals):
            length = np.linalg.norm(mesh.coords[b] - mesh.coords[a])
            fn_a = f[a, :, 0] * nrm[0] + f[a, :, 1] * nrm[1]
            fn_b = f[b, :, 0] * nrm[0] + f[b, :, 1] * nrm[1]
            for t in ge:
                pa = 0.5 * (1.0 - t)
                pb = 0.5 * (1.0 + t)
                fn = pa * fn_a + pb * fn_b
                w = 0.5 * length
                r[a] += w * pa * fn
                r[b] += w * pb * fn
        return r


class DirichletBC:
    """Strong boundary conditions by row replacement.

    Scalar constraints prescribe a conserved component at a node.  Wall
    constraints prescribe zero normal momentum; for non-axis-aligned walls the
    two momentum rows are rotated so the tangential equation is kept in the
    m_x slot and the constraint occupies the m_y slot.
    """

    def __init__(self, mesh: Mesh):
        self.mesh = mesh
        self.nodes = []
        self.comps = []
        self.values = []
        self.wall_nodes = []
        self.wall_normals = []

    def add_scalar(self, node, comp, value):
        if not self._on_boundary(node):
            raise ValueError(f"node {node} is not on the boundary")
        self.nodes.append(int(node))
        self.comps.append(int(comp))
        self.values.append(float(value))

    def add_state(self, node, state):
        for comp in range(4):
            self.add_scalar(node, comp, state[comp])

    def add_wall(self, node, normal=None):
        if not self._on_boundary(node):
            raise ValueError(f"node {node} is not on the boundary")
        if normal is None:
            normal = self.mesh.boundary_normal(node)
        self.wall_nodes.append(int(node))
        self.wall_normals.append(np.asarray(normal, dtype=float))

    def _on_boundary(self, node):
        bn = self.mesh.boundary_nodes
        k = np.searchsorted(bn, node)
        return k < len(bn) and bn[k] == node

    def finalize(self):
        self.nodes = np.asarray(self.nodes, dtype=np.int64)
        self.comps = np.asarray(self.comps, dtype=np.int64)
        self.values = np.asarray(self.values)
        self.wall_nodes = np.asarray(self.wall_nodes, dtype=np.int64)
        self.wall_normals = (np.asarray(self.wall_normals)
                             if self.wall_nodes.size else np.zeros((0, 2)))
        mask = np.ones((self.mesh.n_nodes, 4), dtype=bool)
        mask[self.wall_nodes, 2] = False
        mask[self.nodes, self.comps] = False
        self.free_mask = mask
        return self

    def set_initial(self, u):
        """Force prescribed values onto a state array (in place)."""
        wn = self.wall_nodes
        if wn.size:
            mom = u[wn, 1:3]
            nrm = self.wall_normals
            mn = mom[:, 0] * nrm[:, 0] + mom[:, 1] * nrm[:, 1]
            u[wn, 1:3] = mom - mn[:, None] * nrm
        u[self.nodes, self.comps] = self.values
        return u

    def apply_to_residual(self, r, u):
        wn = self.wall_nodes
        if wn.size:
            nrm = self.wall_normals
            tx, ty = -nrm[:, 1], nrm[:, 0]
            tang = tx * r[wn, 1] + ty * r[wn, 2]
            r[wn, 1] = tang
            r[wn, 2] = nrm[:, 0] * u[wn, 1] + nrm[:, 1] * u[wn, 2]
        r[self.nodes, self.comps] = (u[self.nodes, self.comps] - self.values)
        return r

    def apply_to_matrix(self, mat: BlockSparseMatrix):
        indptr, indices, data = mat.indptr, mat.indices, mat.data
        for node, nrm in zip(self.wall_nodes, self.wall_normals):
            lo, hi = indptr[node], indptr[node + 1]
            blk = data[lo:hi]
            tang = -nrm[1] * blk[:, 1, :] + nrm[0] * blk[:, 2, :]
            blk[:, 1, :] = tang
            blk[:, 2, :] = 0.0
            diag = lo + np.searchsorted(indices[lo:hi], node)
            data[diag, 2, 1] = nrm[0]
            data[diag, 2, 2] = nrm[1]
        for node, comp in zip(self.nodes, self.comps):
            lo, hi = indptr[node], indptr[node + 1]
            data[lo:hi, comp, :] = 0.0
            diag = lo + np.searchsorted(indices[lo:hi], node)
            data[diag, comp, comp] = 1.0
        return mat
