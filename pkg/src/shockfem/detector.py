"""Per-node shock detector in hard and regularized (differentiable) form.

The detector measures how far a nodal field is from being locally linear:
it is 0 on linear data, 1 exactly at a local discrete extremum, and in [0, 1]
otherwise.  The differentiable variant replaces absolute values and max with
smooth surrogates so the whole residual becomes twice differentiable; all
smooth primitives accept complex input for complex-step differentiation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .mesh import Mesh, PairGeometry


def smooth_abs_up(x, eps_h):
    """Upper smooth |x|: sqrt(x^2 + eps_h) >= |x|."""
    return np.sqrt(x * x + eps_h)


def smooth_abs_down(x, eps_h):
    """Lower smooth |x|: x^2 / sqrt(x^2 + eps_h) <= |x|."""
    return x * x / np.sqrt(x * x + eps_h)


def smooth_max(x, y, sigma_h):
    """Smooth maximum >= max(x, y); exact at sigma_h = 0."""
    return 0.5 * smooth_abs_up(x - y, sigma_h) + 0.5 * (x + y)


def limiter_Z(x):
    """C^2 ramp: 2x^4 - 5x^3 + 3x^2 + x for x < 1, clamped to 1 above."""
    x = np.asarray(x)
    below = x.real < 1.0
    poly = ((2.0 * x - 5.0) * x + 3.0) * x * x + x
    return np.where(below, poly, 1.0 + 0.0 * x)


def scale_params(eps, sigma, zeta, h, L, lambda_max_ref, d=2):
    """Mesh/physics scaling of the regularization parameters."""
    eps_h = eps * L ** -4 * h ** 2
    sigma_h = sigma * lambda_max_ref ** 2 * L ** (2 * (d - 3)) * h ** 4
    zeta_h = zeta / L
    return eps_h, sigma_h, zeta_h


@dataclass
class DetectorParams:
    q: float = 10.0
    eps: float = 1e-4
    sigma: float = 1e-2
    zeta: float = 1e-10
    differentiable: bool = True
    components: tuple = (0,)   # conserved components driving the detector

    def with_continuation(self, eps_k):
        """Effective parameters for continuation value eps_k (sigma = 100 eps)."""
        return DetectorParams(q=self.q, eps=eps_k, sigma=100.0 * eps_k,
                              zeta=self.zeta, differentiable=self.differentiable,
                              components=self.components)


_MEAN_FLOOR = 1e-300  # "otherwise" branch trigger for the hard detector


class ShockDetector:
    """Detector evaluation over all nodes of a mesh, vectorized over pairs."""

    def __init__(self, mesh: Mesh, geom: PairGeometry):
        self.mesh = mesh
        self.geom = geom
        npair = geom.n_pairs
        self._scatter = sp.csr_matrix(
            (np.ones(npair), (geom.pair_i, np.arange(npair))),
            shape=(mesh.n_nodes, npair))
        # sym-point interpolation as one sparse op: vals at pairs
        cols = np.concatenate([geom.pair_j, geom.sym_a, geom.sym_b])
        rows = np.tile(np.arange(npair), 3)
        w = np.concatenate([np.ones(npair), geom.w_a, geom.w_b])
        self._gather_j = sp.csr_matrix((np.ones(npair), (np.arange(npair), geom.pair_j)),
                                       shape=(npair, mesh.n_nodes))
        self._gather_sym = sp.csr_matrix(
            (np.concatenate([geom.w_a, geom.w_b]),
             (np.tile(np.arange(npair), 2), np.concatenate([geom.sym_a, geom.sym_b]))),
            shape=(npair, mesh.n_nodes))

    def pair_slopes(self, values):
        """One-sided slope pairs ((u_j-u_i)/|r|, (u_sym-u_i)/|r_sym|)."""
        g = self.geom
        vi = values[g.pair_i]
        s1 = (self._gather_j.dot(values) - vi) / g.r_len
        s2 = (self._gather_sym.dot(values) - vi) / g.r_sym_len
        return s1, s2

    def jump_and_mean(self, values, differentiable=False, eps_h_pair=0.0):
        """Per-pair jump and mean of the linearized directional gradient."""
        s1, s2 = self.pair_slopes(values)
        jump = s1 + s2
        if differentiable:
            mean = 0.5 * (smooth_abs_down(s1, eps_h_pair)
                          + smooth_abs_down(s2, eps_h_pair))
        else:
            mean = 0.5 * (np.abs(s1) + np.abs(s2))
        return jump, mean

    def alpha(self, values, q, differentiable, eps_h_node=0.0, zeta_h=0.0):
        """Detector values in [0, 1] for one nodal scalar field."""
        g = self.geom
        eps_h_node = np.asarray(eps_h_node) * np.ones(self.mesh.n_nodes)
        eps_h_pair = eps_h_node[g.pair_i]
        jump, mean = self.jump_and_mean(values, differentiable, eps_h_pair)
        num = self._scatter.dot(jump)
        den = 2.0 * self._scatter.dot(mean)
        if differentiable:
            ratio = (smooth_abs_up(num, eps_h_node) + zeta_h) / (den + zeta_h)
            return limiter_Z(ratio) ** q
        out = np.zeros(self.mesh.n_nodes)
        active = den > _MEAN_FLOOR
        out[active] = np.minimum(np.abs(num[active]) / den[active], 1.0) ** q
        return out

    def system_beta(self, u, params: DetectorParams, eps_h_node=0.0,
                    sigma_h_node=0.0, zeta_h=0.0):
        """Combined detector: (smooth) max of per-component detectors."""
        comps = tuple(params.components)
        if not comps:
            raise ValueError("component set must be non-empty")
        u = np.asarray(u)
        beta = None
        for c in sorted(comps):
            a = self.alpha(u[:, c], params.q, params.differentiable,
                           eps_h_node, zeta_h)
            if beta is None:
                beta = a
            elif params.differentiable:
                beta = smooth_max(beta, a, sigma_h_node)
            else:
                beta = np.maximum(beta, a)
        return beta
