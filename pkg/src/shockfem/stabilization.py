"""Detector-modulated Rusanov diffusion and the blended mass matrix.

The diffusion matrix has blocks nu_ij * l(i,j) * I with l(i,j) = 2 delta_ij - 1
(a graph Laplacian without geometric weights), where nu_ij sums elemental
viscosities nu^e_ij = max(beta_i lam_ij, beta_j lam_ji) built from Roe-averaged
wave speeds and the elemental convection vectors c^e_ij.
"""

from __future__ import annotations

import numpy as np

from . import physics
from .assembly import FEAssembly
from .detector import DetectorParams, smooth_max


class StabContext:
    """Element-pair arrays for assembling the diffusion and blended mass."""

    def __init__(self, fa: FEAssembly):
        self.fa = fa
        cells = fa.mesh.cells
        # unordered local pairs of a quad
        combos = [(a, b) for a in range(4) for b in range(a + 1, 4)]
        ai = np.array([c[0] for c in combos])
        bi = np.array([c[1] for c in combos])
        self.ep_i = cells[:, ai].ravel()
        self.ep_j = cells[:, bi].ravel()
        self.c_ij = fa.cvec_e[:, ai, bi, :].reshape(-1, 2)
        self.c_ji = fa.cvec_e[:, bi, ai, :].reshape(-1, 2)
        self.pos_ij = fa.pos_e[:, ai, bi].ravel()
        self.pos_ji = fa.pos_e[:, bi, ai].ravel()
        self.pos_ii = fa.pos_e[:, ai, ai].ravel()
        self.pos_jj = fa.pos_e[:, bi, bi].ravel()
        coords = fa.mesh.coords
        self.h_pair = np.linalg.norm(coords[self.ep_i] - coords[self.ep_j], axis=1)

    def elemental_nu(self, u, beta, differentiable,
                     eps_h_pair=0.0, sigma_h_pair=0.0, gamma=physics.GAMMA):
        """nu^e_ij for every element pair (symmetric in i <-> j)."""
        avg = physics.roe_average(u[self.ep_i], u[self.ep_j], gamma)
        if differentiable:
            lam_ij = physics.spectral_radius(avg, self.c_ij, eps_h_pair)
            lam_ji = physics.spectral_radius(avg, self.c_ji, eps_h_pair)
            return smooth_max(beta[self.ep_i] * lam_ij,
                              beta[self.ep_j] * lam_ji, sigma_h_pair)
        lam_ij = physics.spectral_radius(avg, self.c_ij, 0.0)
        lam_ji = physics.spectral_radius(avg, self.c_ji, 0.0)
        return np.maximum(beta[self.ep_i] * lam_ij, beta[self.ep_j] * lam_ji)

    def diffusion_data(self, nu):
        """Scalar block data of B over the adjacency pattern (row sums zero)."""
        data = np.zeros(len(self.fa.indices), dtype=nu.dtype)
        np.subtract.at(data, self.pos_ij, nu)
        np.subtract.at(data, self.pos_ji, nu)
        np.add.at(data, self.pos_ii, nu)
        np.add.at(data, self.pos_jj, nu)
        return data

    def assemble_B(self, u, beta, params: DetectorParams,
                   eps_h_pair=0.0, sigma_h_pair=0.0, gamma=physics.GAMMA):
        nu = self.elemental_nu(u, beta, params.differentiable,
                               eps_h_pair, sigma_h_pair, gamma)
        return self.diffusion_data(nu)

    def blended_mass_data(self, beta, differentiable, sigma_h_node=0.0):
        """Scalar block data of the detector-blended mass matrix."""
        fa = self.fa
        bi = beta[fa.rows]
        bj = beta[fa.indices]
        if differentiable:
            sig = np.asarray(sigma_h_node) * np.ones(fa.mesh.n_nodes)
            theta = smooth_max(bi, bj, sig[fa.rows])
        else:
            theta = np.maximum(bi, bj)
        data = (1.0 - theta) * fa.mass_data
        data = data.astype(theta.dtype, copy=False)
        data[fa.diag_pos] += theta[fa.diag_pos] * fa.lumped_mass
        return data
