"""Exact solution of the 1D Riemann problem for the Euler equations.

Star-region pressure is found with Newton iteration on the standard
pressure function; sampling follows the usual shock/rarefaction case split
in similarity variable x/t.  Used as an independent reference for the
shock tube benchmarks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .physics import GAMMA


@dataclass
class RiemannState:
    rho: float
    u: float
    p: float

    def sound_speed(self, gamma=GAMMA):
        return np.sqrt(gamma * self.p / self.rho)


def _pressure_function(p, s: RiemannState, gamma):
    """f_K(p) and its derivative for one side of the contact."""
    a = s.sound_speed(gamma)
    if p > s.p:  # shock
        A = 2.0 / ((gamma + 1.0) * s.rho)
        B = (gamma - 1.0) / (gamma + 1.0) * s.p
        root = np.sqrt(A / (p + B))
        f = (p - s.p) * root
        df = root * (1.0 - 0.5 * (p - s.p) / (p + B))
    else:  # rarefaction
        f = 2.0 * a / (gamma - 1.0) * ((p / s.p) ** ((gamma - 1.0) / (2.0 * gamma)) - 1.0)
        df = 1.0 / (s.rho * a) * (p / s.p) ** (-(gamma + 1.0) / (2.0 * gamma))
    return f, df


def solve_star(left: RiemannState, right: RiemannState, gamma=GAMMA,
               tol=1e-12, max_iter=100):
    """Star-region pressure and velocity (p*, u*)."""
    al, ar = left.sound_speed(gamma), right.sound_speed(gamma)
    du = right.u - left.u
    if 2.0 * (al + ar) / (gamma - 1.0) <= du:
        raise ValueError("initial states generate vacuum")
    # two-rarefaction guess, positive by construction
    z = (gamma - 1.0) / (2.0 * gamma)
    p = ((al + ar - 0.5 * (gamma - 1.0) * du)
         / (al / left.p ** z + ar / right.p ** z)) ** (1.0 / z)
    p = max(p, 1e-10)
    for _ in range(max_iter):
        fl, dfl = _pressure_function(p, left, gamma)
        fr, dfr = _pressure_function(p, right, gamma)
        g = fl + fr + du
        dp = g / (dfl + dfr)
        p_new = p - dp
        if p_new <= 0:
            p_new = 0.5 * p
        if abs(p_new - p) < tol * max(p, p_new):
            p = p_new
            break
        p = p_new
    fl, _ = _pressure_function(p, left, gamma)
    fr, _ = _pressure_function(p, right, gamma)
    u = 0.5 * (left.u + right.u) + 0.5 * (fr - fl)
    return p, u


def sample(left: RiemannState, right: RiemannState, xi, gamma=GAMMA,
           star=None):
    """Solution (rho, u, p) at similarity points xi = x / t (vectorized)."""
    if star is None:
        star = solve_star(left, right, gamma)
    ps, us = star
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    rho = np.empty_like(xi)
    u = np.empty_like(xi)
    p = np.empty_like(xi)
    gm, gp = gamma - 1.0, gamma + 1.0

    for k, x in enumerate(xi):
        if x <= us:
            s = left
            sgn = 1.0
        else:
            s = right
            sgn = -1.0
        a = s.sound_speed(gamma)
        if ps > s.p:  # shock on this side
            ratio = ps / s.p
            speed = s.u - sgn * a * np.sqrt(gp / (2.0 * gamma) * ratio
                                            + gm / (2.0 * gamma))
            if sgn * (x - speed) <= 0:
                rho[k], u[k], p[k] = s.rho, s.u, s.p
            else:
                rho[k] = s.rho * (ratio + gm / gp) / (gm / gp * ratio + 1.0)
                u[k], p[k] = us, ps
        else:  # rarefaction on this side
            a_star = a * (ps / s.p) ** (gm / (2.0 * gamma))
            head = s.u - sgn * a
            tail = us - sgn * a_star
            if sgn * (x - head) <= 0:
                rho[k], u[k], p[k] = s.rho, s.u, s.p
            elif sgn * (x - tail) >= 0:
                rho[k] = s.rho * (ps / s.p) ** (1.0 / gamma)
                u[k], p[k] = us, ps
            else:  # inside the fan
                fac = 2.0 / gp + sgn * gm / (gp * a) * (s.u - x)
                rho[k] = s.rho * fac ** (2.0 / gm)
                u[k] = 2.0 / gp * (sgn * a + gm / 2.0 * s.u + x)
                p[k] = s.p * fac ** (2.0 * gamma / gm)
    return rho, u, p


def sod_states():
    """Classic shock tube initial data."""
    return RiemannState(1.0, 0.0, 1.0), RiemannState(0.125, 0.0, 0.1)
