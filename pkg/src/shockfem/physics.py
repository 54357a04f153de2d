"""Pointwise ideal-gas Euler physics in 2D.

Conserved states are stored as arrays of shape (..., 4) with components
(rho, mx, my, rhoE).  All operations are vectorized over leading axes and
accept complex input so that complex-step differentiation can be driven
through them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

GAMMA = 1.4

RHO, MX, MY, RHOE = 0, 1, 2, 3


class InadmissibleStateError(ValueError):
    """Raised when a state has non-positive density or internal energy."""

    def __init__(self, message, nodes=None):
        super().__init__(message)
        self.nodes = nodes


def pressure(u, gamma=GAMMA):
    """EOS pressure p = (gamma-1)(rhoE - |m|^2/(2 rho))."""
    u = np.asarray(u)
    ke = 0.5 * (u[..., MX] ** 2 + u[..., MY] ** 2) / u[..., RHO]
    return (gamma - 1.0) * (u[..., RHOE] - ke)


def velocity(u):
    u = np.asarray(u)
    return u[..., MX:MY + 1] / u[..., RHO, None]


def sound_speed(u, gamma=GAMMA):
    return np.sqrt(gamma * pressure(u, gamma) / np.asarray(u)[..., RHO])


def mach_number(u, gamma=GAMMA):
    v = velocity(u)
    return np.sqrt(v[..., 0] ** 2 + v[..., 1] ** 2) / sound_speed(u, gamma)


def check_admissible(u, gamma=GAMMA, where="state"):
    """Raise InadmissibleStateError if rho <= 0 or internal energy <= 0."""
    u = np.asarray(u)
    rho = u[..., RHO].real
    rho_e = u[..., RHOE].real - 0.5 * (u[..., MX].real ** 2
                                       + u[..., MY].real ** 2) / np.where(rho > 0, rho, 1.0)
    bad = (rho <= 0.0) | (rho_e <= 0.0)
    if np.any(bad):
        nodes = np.flatnonzero(np.atleast_1d(bad))
        raise InadmissibleStateError(
            f"inadmissible {where}: rho or internal energy non-positive "
            f"at {nodes.size} entries (first ids: {nodes[:8].tolist()})",
            nodes=nodes,
        )


def is_admissible(u, gamma=GAMMA):
    u = np.asarray(u)
    rho = u[..., RHO].real
    with np.errstate(invalid="ignore", divide="ignore"):
        rho_e = u[..., RHOE].real - 0.5 * (u[..., MX].real ** 2
                                           + u[..., MY].real ** 2) / rho
    return np.all(rho > 0.0) and np.all(rho_e > 0.0)


def primitive_from_conserved(u, gamma=GAMMA):
    """Return (rho, vel, p) with vel of shape (..., 2)."""
    u = np.asarray(u)
    return u[..., RHO], velocity(u), pressure(u, gamma)


def conserved_from_primitive(rho, vel, p, gamma=GAMMA):
    rho = np.asarray(rho, dtype=float)
    vel = np.asarray(vel, dtype=float)
    p = np.asarray(p, dtype=float)
    u = np.empty(rho.shape + (4,))
    u[..., RHO] = rho
    u[..., MX] = rho * vel[..., 0]
    u[..., MY] = rho * vel[..., 1]
    u[..., RHOE] = p / (gamma - 1.0) + 0.5 * rho * (vel[..., 0] ** 2 + vel[..., 1] ** 2)
    return u


def flux(u, gamma=GAMMA):
    """Physical flux, shape (..., 4, 2): columns are the x- and y-fluxes."""
    u = np.asarray(u)
    rho = u[..., RHO]
    vx = u[..., MX] / rho
    vy = u[..., MY] / rho
    p = pressure(u, gamma)
    f = np.empty(u.shape[:-1] + (4, 2), dtype=u.dtype if u.dtype.kind == "c" else float)
    f[..., RHO, 0] = u[..., MX]
    f[..., RHO, 1] = u[..., MY]
    f[..., MX, 0] = u[..., MX] * vx + p
    f[..., MX, 1] = u[..., MX] * vy
    f[..., MY, 0] = u[..., MY] * vx
    f[..., MY, 1] = u[..., MY] * vy + p
    h = u[..., RHOE] + p
    f[..., RHOE, 0] = vx * h
    f[..., RHOE, 1] = vy * h
    return f


def flux_jacobian(u, direction, gamma=GAMMA):
    """Directional flux Jacobian d(f.n)/du, shape (..., 4, 4).

    `direction` broadcasts against the leading axes of `u` and need not be
    a unit vector.
    """
    u = np.asarray(u)
    direction = np.asarray(direction)
    nx = direction[..., 0]
    ny = direction[..., 1]
    rho = u[..., RHO]
    vx = u[..., MX] / rho
    vy = u[..., MY] / rho
    q2 = 0.5 * (vx ** 2 + vy ** 2)
    p = pressure(u, gamma)
    H = (u[..., RHOE] + p) / rho
    vn = vx * nx + vy * ny
    g1 = gamma - 1.0

    dtype = np.result_type(u.dtype, direction.dtype, float)
    a = np.zeros(np.broadcast(u[..., 0], nx).shape + (4, 4), dtype=dtype)
    a[..., RHO, MX] = nx
    a[..., RHO, MY] = ny

    a[..., MX, RHO] = g1 * q2 * nx - vx * vn
    a[..., MX, MX] = vn + (2.0 - gamma) * vx * nx
    a[..., MX, MY] = vx * ny - g1 * vy * nx
    a[..., MX, RHOE] = g1 * nx

    a[..., MY, RHO] = g1 * q2 * ny - vy * vn
    a[..., MY, MX] = vy * nx - g1 * vx * ny
    a[..., MY, MY] = vn + (2.0 - gamma) * vy * ny
    a[..., MY, RHOE] = g1 * ny

    a[..., RHOE, RHO] = (g1 * q2 - H) * vn
    a[..., RHOE, MX] = H * nx - g1 * vx * vn
    a[..., RHOE, MY] = H * ny - g1 * vy * vn
    a[..., RHOE, RHOE] = gamma * vn
    return a


@dataclass
class RoeAverage:
    """Density-weighted mean state between two conserved states."""

    rho: np.ndarray
    vel: np.ndarray   # (..., 2)
    H: np.ndarray
    c_s: np.ndarray

    @property
    def mom(self):
        return self.rho[..., None] * self.vel

    def conserved(self, gamma=GAMMA):
        u = np.empty(np.shape(self.rho) + (4,), dtype=np.result_type(self.rho, float))
        u[..., RHO] = self.rho
        u[..., MX] = self.rho * self.vel[..., 0]
        u[..., MY] = self.rho * self.vel[..., 1]
        m2 = self.rho ** 2 * (self.vel[..., 0] ** 2 + self.vel[..., 1] ** 2)
        u[..., RHOE] = (self.rho * self.H + (gamma - 1.0) * m2 / (2.0 * self.rho)) / gamma
        return u


def roe_average(ui, uj, gamma=GAMMA, check=False):
    """Roe mean of two conserved states (vectorized)."""
    ui = np.asarray(ui)
    uj = np.asarray(uj)
    si = np.sqrt(ui[..., RHO])
    sj = np.sqrt(uj[..., RHO])
    wsum = si + sj
    rho = si * sj
    vel = (velocity(ui) * si[..., None] + velocity(uj) * sj[..., None]) / wsum[..., None]
    Hi = (ui[..., RHOE] + pressure(ui, gamma)) / ui[..., RHO]
    Hj = (uj[..., RHOE] + pressure(uj, gamma)) / uj[..., RHO]
    H = (Hi * si + Hj * sj) / wsum
    c2 = (gamma - 1.0) * (H - 0.5 * (vel[..., 0] ** 2 + vel[..., 1] ** 2))
    if check and np.any(np.asarray(c2).real <= 0.0):
        raise InadmissibleStateError("Roe average has non-positive sound speed squared")
    return RoeAverage(rho=rho, vel=vel, H=H, c_s=np.sqrt(c2))


def wave_speeds(avg: RoeAverage, c_vec):
    """Eigenvalues (v.c, v.c, v.c - cs|c|, v.c + cs|c|) of the directional Jacobian."""
    c_vec = np.asarray(c_vec)
    vn = avg.vel[..., 0] * c_vec[..., 0] + avg.vel[..., 1] * c_vec[..., 1]
    cnorm = np.sqrt(c_vec[..., 0] ** 2 + c_vec[..., 1] ** 2)
    lam = np.empty(np.shape(vn) + (4,), dtype=np.result_type(vn, float))
    lam[..., 0] = vn
    lam[..., 1] = vn
    lam[..., 2] = vn - avg.c_s * cnorm
    lam[..., 3] = vn + avg.c_s * cnorm
    return lam


def spectral_radius(avg: RoeAverage, c_vec, eps_h=0.0):
    """|v.c| + cs|c|, with the first term smoothed to sqrt((v.c)^2 + eps_h)."""
    c_vec = np.asarray(c_vec)
    vn = avg.vel[..., 0] * c_vec[..., 0] + avg.vel[..., 1] * c_vec[..., 1]
    cnorm = np.sqrt(c_vec[..., 0] ** 2 + c_vec[..., 1] ** 2)
    return np.sqrt(vn ** 2 + eps_h) + avg.c_s * cnorm
