"""Benchmark problem definitions, reference solutions and error metrics.

Five built-in cases: a smooth sinusoidal density translation, a supersonic
compression corner, a Mach 2.9 reflected shock, the Sod shock tube on a thin
strip and a Mach 3 scramjet channel.  Reference data comes from closed-form
oblique-shock relations and the exact Riemann solver.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace as dc_replace

import numpy as np
import scipy.optimize as opt

from . import physics
from .assembly import DirichletBC
from .detector import DetectorParams
from .mesh import Mesh, build_polygonal_channel, build_structured_quad
from .physics import GAMMA, conserved_from_primitive
from .solver import EulerProblem, SolverConfig


# -- oblique shock relations ----------------------------------------------

def theta_beta_mach(beta, M1, gamma=GAMMA):
    """Deflection angle theta (radians) for shock angle beta and Mach M1."""
    mn2 = (M1 * np.sin(beta)) ** 2
    return np.arctan(2.0 / np.tan(beta) * (mn2 - 1.0)
                     / (M1 ** 2 * (gamma + np.cos(2.0 * beta)) + 2.0))


def oblique_shock(M1, deflection_deg, gamma=GAMMA):
    """Weak oblique shock for inflow Mach M1 deflected by the given angle.

    Returns (shock angle from the incoming-flow direction in degrees,
    density ratio, pressure ratio, post-shock Mach number).
    """
    theta = np.radians(deflection_deg)
    mu = np.arcsin(1.0 / M1)  # Mach angle
    if theta == 0.0:
        return np.degrees(mu), 1.0, 1.0, M1
    # weak branch: smallest beta > mu with theta(beta) = theta
    beta_max = opt.minimize_scalar(lambda b: -theta_beta_mach(b, M1, gamma),
                                   bounds=(mu, np.pi / 2), method="bounded").x
    if theta > theta_beta_mach(beta_max, M1, gamma):
        raise ValueError("deflection beyond detachment angle: no attached shock")
    beta = opt.brentq(lambda b: theta_beta_mach(b, M1, gamma) - theta,
                      mu + 1e-12, beta_max)
    mn1 = M1 * np.sin(beta)
    mn1sq = mn1 ** 2
    rho_ratio = (gamma + 1.0) * mn1sq / ((gamma - 1.0) * mn1sq + 2.0)
    p_ratio = 1.0 + 2.0 * gamma / (gamma + 1.0) * (mn1sq - 1.0)
    mn2 = np.sqrt((1.0 + 0.5 * (gamma - 1.0) * mn1sq)
                  / (gamma * mn1sq - 0.5 * (gamma - 1.0)))
    M2 = mn2 / np.sin(beta - theta)
    return np.degrees(beta), rho_ratio, p_ratio, M2


# -- error metrics ---------------------------------------------------------

_G3 = np.sqrt(3.0 / 5.0)
_GP3 = np.array([-_G3, 0.0, _G3])
_GW3 = np.array([5.0, 8.0, 5.0]) / 9.0


def l1_error(nodal, exact, mesh: Mesh):
    """L1 norm of (interpolated nodal field - exact) by 3x3 Gauss per cell."""
    nodal = np.asarray(nodal, dtype=float)
    coords = mesh.coords[mesh.cells]           # (E, 4, 2)
    vals = nodal[mesh.cells]                   # (E, 4)
    total = 0.0
    sgn = np.array([(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)])
    for p, (xi, wx) in enumerate(zip(_GP3, _GW3)):
        for q, (eta, wy) in enumerate(zip(_GP3, _GW3)):
            phi = 0.25 * (1.0 + sgn[:, 0] * xi) * (1.0 + sgn[:, 1] * eta)
            dphi = np.empty((4, 2))
            dphi[:, 0] = 0.25 * sgn[:, 0] * (1.0 + sgn[:, 1] * eta)
            dphi[:, 1] = 0.25 * sgn[:, 1] * (1.0 + sgn[:, 0] * xi)
            J = np.einsum("eak,al->ekl", coords, dphi)
            detJ = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
            x = np.einsum("a,eak->ek", phi, coords)
            uh = vals @ phi
            total += np.sum(wx * wy * detJ * np.abs(uh - exact(x[:, 0], x[:, 1])))
    return float(total)


def probe_value(mesh: Mesh, field, point):
    """Linearly interpolated nodal field value at an interior point."""
    from scipy.interpolate import LinearNDInterpolator
    interp = LinearNDInterpolator(mesh.coords, np.asarray(field, dtype=float))
    val = interp(np.asarray(point, dtype=float)[None, :]).item()
    if np.isnan(val):
        raise ValueError(f"probe point {point} outside the mesh")
    return val


def convergence_rate(errors, hs):
    """Least-squares slope of log(error) against log(h)."""
    errors = np.asarray(errors, dtype=float)
    hs = np.asarray(hs, dtype=float)
    if errors.size < 2 or np.any(errors <= 0) or np.any(hs <= 0):
        raise ValueError("need at least two positive (error, h) pairs")
    return float(np.polyfit(np.log(hs), np.log(errors), 1)[0])


# -- case container --------------------------------------------------------

@dataclass
class BenchmarkCase:
    name: str
    mesh: Mesh
    bc: DirichletBC
    u0: np.ndarray
    steady: bool
    params: DetectorParams
    config: SolverConfig
    exact_density: object = None      # callable (x, y, t) -> rho, if known
    update_bc: object = None          # callable (bc, t) for transient BCs
    probes: dict = field(default_factory=dict)
    pseudo_transient: bool = False    # drive to steady state with growing dt

    def problem(self):
        return EulerProblem(self.mesh, self.bc, self.params, steady=self.steady)


# -- sinusoidal translation ------------------------------------------------

def sinusoidal_state(x, y, t=0.0):
    """Conserved exact state of the translating density bump."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    r = np.sqrt((0.5 + t - x) ** 2 + (0.5 - y) ** 2)
    rho = np.where(r < 0.5, 1.0 + 0.9999 * np.cos(2.0 * np.pi * r), 1e-4)
    vel = np.stack([np.ones_like(rho), np.zeros_like(rho)], axis=-1)
    return conserved_from_primitive(rho, vel, np.ones_like(rho))


def sinusoidal_density(x, y, t=0.0):
    return sinusoidal_state(x, y, t)[..., 0]


def sinusoidal_case(n=32, dt=None, t_end=None, differentiable=True):
    mesh = build_structured_quad(n, n)
    h = 1.0 / n
    if dt is None:
        dt = 0.25 * h
    if t_end is None:
        t_end = dt
    bc = DirichletBC(mesh)
    bnodes = mesh.boundary_nodes
    u_b = sinusoidal_state(mesh.coords[bnodes, 0], mesh.coords[bnodes, 1], 0.0)
    for k, node in enumerate(bnodes):
        bc.add_state(node, u_b[k])
    bc.finalize()

    def update_bc(bc, t):
        ub = sinusoidal_state(mesh.coords[bnodes, 0], mesh.coords[bnodes, 1], t)
        bc.values = ub.reshape(-1)

    u0 = sinusoidal_state(mesh.coords[:, 0], mesh.coords[:, 1], 0.0)
    params = DetectorParams(q=10.0, eps=1e-4, sigma=1e-2, zeta=1e-10,
                            differentiable=differentiable)
    # smooth problem: Newton is safe almost immediately, so switch early
    config = SolverConfig(tol1=0.5, tol2=1e-10, tol_increment=1e-6,
                          max_iters=30, dt=dt, t_end=t_end)
    return BenchmarkCase("sinusoidal", mesh, bc, u0, steady=False,
                         params=params, config=config,
                         exact_density=sinusoidal_density, update_bc=update_bc)


# -- compression corner ----------------------------------------------------

CORNER_MACH = 2.0
CORNER_DEFLECTION = 10.0


def corner_states(gamma=GAMMA):
    """Pre-/post-shock conserved states and the shock angle from the wall."""
    beta_deg, rr, pr, M2 = oblique_shock(CORNER_MACH, CORNER_DEFLECTION, gamma)
    th = np.radians(CORNER_DEFLECTION)
    rho1, p1 = 1.0, 1.0
    a1 = np.sqrt(gamma * p1 / rho1)
    v1 = CORNER_MACH * a1 * np.array([np.cos(th), -np.sin(th)])
    rho2, p2 = rho1 * rr, p1 * pr
    a2 = np.sqrt(gamma * p2 / rho2)
    v2 = M2 * a2 * np.array([1.0, 0.0])    # deflected parallel to the wall
    u1 = conserved_from_primitive(rho1, v1, p1, gamma)
    u2 = conserved_from_primitive(rho2, v2, p2, gamma)
    return u1, u2, beta_deg - CORNER_DEFLECTION


def corner_density(x, y, t=0.0):
    u1, u2, shock_from_wall = corner_states()
    above = y > np.tan(np.radians(shock_from_wall)) * x
    return np.where(above, u1[0], u2[0])


def corner_case(n=32, differentiable=True):
    mesh = build_structured_quad(n, n)
    u1, u2, _ = corner_states()
    bc = DirichletBC(mesh)
    coords = mesh.coords
    tol = 1e-12
    for node in mesh.boundary_nodes:
        x, y = coords[node]
        if x < tol or y > 1.0 - tol:
            bc.add_state(node, u1)           # supersonic inflow: left and top
        elif y < tol:
            bc.add_wall(node, (0.0, -1.0))   # slip wall; outflow right is free
    bc.finalize()
    u0 = np.tile(u1, (mesh.n_nodes, 1))
    params = DetectorParams(q=10.0, eps=1e-4, sigma=1e-2, zeta=1e-10,
                            differentiable=differentiable)
    config = SolverConfig(tol1=1e-2, tol2=1e-10, tol_increment=1e-6,
                          max_iters=150, continuation=True, eps_tilde=1e-4)
    return BenchmarkCase("corner", mesh, bc, u0, steady=True,
                         params=params, config=config,
                         exact_density=corner_density)


# -- reflected shock -------------------------------------------------------

def reflected_shock_states():
    """Conserved states of the three flow regions (inflow, incident, reflected).

    The tabulated total energies are specific (per unit mass); the conserved
    energy component is rho * E.
    """
    a = np.array([1.0, 2.9, 0.0, 1.0 * 5.99075])
    b = np.array([1.7, 1.7 * 2.62, 1.7 * -0.506, 1.7 * 5.8046])
    c = np.array([2.687, 2.687 * 2.401, 0.0, 2.687 * 5.6122])
    return a, b, c


def reflected_shock_case(q=10.0, differentiable=True, eps_tilde=1.0,
                         nx=60, ny=20):
    mesh = build_structured_quad(nx, ny, ((0.0, 0.0), (4.1, 1.0)))
    ua, ub, uc = reflected_shock_states()
    bc = DirichletBC(mesh)
    coords = mesh.coords
    tol = 1e-12
    for node in mesh.boundary_nodes:
        x, y = coords[node]
        if y > 1.0 - tol and x > tol:
            bc.add_state(node, ub)           # incident-shock inflow from above
        elif x < tol:
            bc.add_state(node, ua)
        elif y < tol:
            bc.add_wall(node, (0.0, -1.0))
    bc.finalize()
    u0 = np.tile(ua, (mesh.n_nodes, 1))
    params = DetectorParams(q=q, eps=1e-4, sigma=1e-2, zeta=1e-10,
                            differentiable=differentiable)
    config = SolverConfig(tol1=1e-2, tol2=1e-3, max_iters=150,
                          continuation=differentiable, eps_tilde=eps_tilde)
    return BenchmarkCase("reflected_shock", mesh, bc, u0, steady=True,
                         params=params, config=config,
                         probes={"region_c": (3.5, 0.15)})


# -- Sod shock tube --------------------------------------------------------

SOD_LEFT = np.array([1.0, 0.0, 0.0, 2.5])
SOD_RIGHT = np.array([0.125, 0.0, 0.0, 0.25])


def sod_case(q=10.0, differentiable=True, eps=1e-5, sigma=1e-3,
             dx=0.01, dt=0.001, t_end=0.2):
    nx = int(round(1.0 / dx))
    mesh = build_structured_quad(nx, 1, ((0.0, 0.0), (1.0, 0.01)))
    bc = DirichletBC(mesh)
    coords = mesh.coords
    tol = 1e-12
    for node in mesh.boundary_nodes:
        x = coords[node, 0]
        if x < tol or x > 1.0 - tol:
            bc.add_state(node, SOD_LEFT if x < 0.5 else SOD_RIGHT)
        else:
            bc.add_scalar(node, physics.MY, 0.0)  # keep the strip 1D
    bc.finalize()
    u0 = np.where(coords[:, 0:1] <= 0.5, SOD_LEFT, SOD_RIGHT)
    params = DetectorParams(q=q, eps=eps, sigma=sigma, zeta=1e-10,
                            differentiable=differentiable)
    config = SolverConfig(tol1=5e-3, tol2=1e-6, max_iters=150,
                          dt=dt, t_end=t_end)
    return BenchmarkCase("sod", mesh, bc, u0, steady=False,
                         params=params, config=config)


# -- scramjet channel ------------------------------------------------------

SCRAMJET_WALL = np.array([
    (0.0, 3.5), (0.4, 3.5), (4.9, 2.9), (12.6, 2.12), (14.25, 1.92), (16.9, 1.7)])
SCRAMJET_OBSTACLE = np.array([
    (4.9, -1.4), (8.9, -0.5), (9.4, -0.5), (14.25, -1.2)])
SCRAMJET_OBSTACLE_WALLSIDE = np.array([
    (4.9, -1.4), (12.6, -1.4), (14.25, -1.2)])
SCRAMJET_INFLOW_MACH = 3.0


def scramjet_inflow_state(gamma=GAMMA):
    rho, p = 1.4, 1.0
    a = np.sqrt(gamma * p / rho)
    return conserved_from_primitive(rho, np.array([SCRAMJET_INFLOW_MACH * a, 0.0]),
                                    p, gamma)


def scramjet_case(q=2.0, differentiable=True, eps_tilde=1.0, target_h=0.08):
    mesh = build_polygonal_channel(SCRAMJET_WALL, SCRAMJET_OBSTACLE,
                                   target_h=target_h,
                                   obstacle_wallside=SCRAMJET_OBSTACLE_WALLSIDE)
    # unit regularization reference length: the channel coordinates are
    # already nondimensional, and the bounding-box diagonal (~18) would
    # collapse the L^-4-scaled continuation widths to round-off level
    mesh = dc_replace(mesh, L_char=1.0)
    u_in = scramjet_inflow_state()
    bc = DirichletBC(mesh)
    coords = mesh.coords
    x_out = SCRAMJET_WALL[-1, 0]
    tol = 1e-9
    for node in mesh.boundary_nodes:
        x = coords[node, 0]
        if x < tol:
            bc.add_state(node, u_in)
        elif x < x_out - tol:
            bc.add_wall(node)                # channel walls and obstacles
    bc.finalize()
    u0 = np.tile(u_in, (mesh.n_nodes, 1))
    # base widths match the continuation law (sigma = 100 eps) at the 1e-2
    # steady target, so the monitored operator and the final continuation
    # operator coincide there; the baseline smoothing also damps the
    # centerline shock-interaction oscillation left by a hard detector
    params = DetectorParams(q=q, eps=1e-2, sigma=1.0, zeta=1e-10,
                            differentiable=differentiable)
    # per-step settings of the pseudo-transient drive; steps are solved
    # loosely with Picard only (no Jacobian assembly on this mesh size) and
    # the steady residual target lives with the drive, not here
    config = SolverConfig(tol1=0.0, tol2=5e-2, tol_increment=1e-4,
                          max_iters=8, use_newton=False, linesearch_iters=8,
                          continuation=True, eps_tilde=eps_tilde, dt=0.05)
    return BenchmarkCase("scramjet", mesh, bc, u0, steady=False,
                         params=params, config=config, pseudo_transient=True)


def builtin_cases():
    return [sinusoidal_case(), corner_case(), reflected_shock_case(),
            sod_case(), scramjet_case()]
