"""Implicit nonlinear solver: stabilized residual, Picard matrix with
detector-forced diffusion, colored complex-step/finite-difference Jacobian,
golden-section line search, regularization continuation, the hybrid
Picard-Newton driver and Backward-Euler time stepping.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import physics
from .assembly import DirichletBC, FEAssembly
from .detector import DetectorParams, ShockDetector, scale_params
from .mesh import Mesh, compute_pair_geometry
from .sparse import BlockSparseMatrix
from .stabilization import StabContext

GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


class SolverError(RuntimeError):
    pass


class SingularSystemError(SolverError):
    pass


@dataclass
class SolverConfig:
    tol1: float = 1e-2            # Picard -> Newton switch (relative residual)
    tol2: float = 1e-6            # final relative residual
    tol_increment: float = 0.0    # alternative criterion on |dU|/|U| (0: off)
    max_iters: int = 150
    use_newton: bool = True       # False: Picard-only (pseudo-transient steps)
    continuation: bool = False
    eps_tilde: float = 1.0
    linesearch_bracket: tuple = (0.0, 2.0)
    linesearch_iters: int = 20
    dt: float | None = None
    t_end: float | None = None
    abs_tol: float = 1e-13        # residual considered identically zero
    divergence_factor: float = 1e6


@dataclass
class IterationRecord:
    k: int
    phase: str
    rel_residual: float
    rel_galerkin: float
    rel_increment: float
    lam: float
    eps_k: float


@dataclass
class SolveReport:
    iterations: list = field(default_factory=list)
    converged: bool = False
    n_iters: int = 0
    final_rel_residual: float = np.inf
    wall_time: float = 0.0

    def iters_to(self, rel_tol):
        """First iteration index reaching the given relative residual."""
        for rec in self.iterations:
            if rec.rel_residual < rel_tol:
                return rec.k
        return None


def linear_solve(mat: BlockSparseMatrix, rhs):
    """Direct sparse solve; rhs of shape (N, m)."""
    csc = mat.tobsr().tocsc()
    try:
        lu = spla.splu(csc)
    except RuntimeError as exc:
        raise SingularSystemError(f"sparse factorization failed: {exc}") from exc
    x = lu.solve(np.asarray(rhs, dtype=float).reshape(-1))
    if not np.all(np.isfinite(x)):
        raise SingularSystemError("linear solve produced non-finite values")
    return x.reshape(rhs.shape)


def golden_section_linesearch(phi, bracket=(0.0, 2.0), iters=20):
    """Minimize phi over the bracket; returns (lam_best, phi_best).

    phi may return +inf for infeasible steps.  The returned point is the best
    of all samples, so the objective never exceeds the sampled minimum.
    """
    a, b = bracket
    samples = []

    def ev(lam):
        val = phi(lam)
        samples.append((lam, val))
        return val

    if a <= 1.0 <= b:
        ev(1.0)
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = ev(c), ev(d)
    for _ in range(iters):
        # ties between infeasible probes shrink toward a, where feasible
        # steps live
        if fc < fd or not np.isfinite(fd):
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = ev(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = ev(d)
    lam, val = min(samples, key=lambda t: t[1])
    return lam, val


class EulerProblem:
    """Assembled stabilized Euler problem on one mesh with one BC set."""

    def __init__(self, mesh: Mesh, bc: DirichletBC, params: DetectorParams,
                 forcing=None, steady=True, gamma=physics.GAMMA):
        self.mesh = mesh
        self.bc = bc
        self.params = params
        self.forcing = forcing
        self.steady = steady
        self.gamma = gamma
        self.fa = FEAssembly(mesh)
        self.geom = compute_pair_geometry(mesh)
        self.det = ShockDetector(mesh, self.geom)
        self.stab = StabContext(self.fa)
        self._jac_pattern = None
        self._complex_step = 1e-100
        self._fd_step = 1e-7

    # -- parameter scaling -------------------------------------------------

    def lambda_ref(self, u):
        v = physics.velocity(np.real(u))
        c = physics.sound_speed(np.real(u), self.gamma)
        return float(np.max(np.hypot(v[:, 0], v[:, 1]) + c))

    def scaled_params(self, params: DetectorParams, lam_ref):
        L = self.mesh.L_char
        eps_n, sig_n, zeta_h = scale_params(params.eps, params.sigma, params.zeta,
                                            self.mesh.h_char, L, lam_ref)
        eps_p, sig_p, _ = scale_params(params.eps, params.sigma, params.zeta,
                                       self.stab.h_pair, L, lam_ref)
        return dict(eps_h_node=eps_n, sigma_h_node=sig_n, zeta_h=zeta_h,
                    eps_h_pair=eps_p, sigma_h_pair=sig_p)

    def detectors(self, u, params: DetectorParams, scaled=None):
        if scaled is None:
            scaled = self.scaled_params(params, self.lambda_ref(u))
        return self.det.system_beta(u, params, scaled["eps_h_node"],
                                    scaled["sigma_h_node"], scaled["zeta_h"])

    # -- residual ----------------------------------------------------------

    def galerkin_residual(self, u):
        return self.fa.galerkin_residual(u, self.forcing, self.gamma)

    def _stab_parts(self, u, u_old, dt, params, scaled, beta=None):
        if beta is None:
            beta = self.detectors(u, params, scaled)
        b_data = self.stab.assemble_B(u, beta, params,
                                      scaled["eps_h_pair"], scaled["sigma_h_pair"],
                                      self.gamma)
        r = self.fa.scalar_matvec(b_data, u)
        if not self.steady:
            m_data = self.stab.blended_mass_data(beta, params.differentiable,
                                                 scaled["sigma_h_node"])
            r = r + self.fa.scalar_matvec(m_data - self.fa.mass_data,
                                          (u - u_old) * self._dt_inv(dt))
        return r

    def _dt_inv(self, dt):
        # scalar dt, or per-node dt (local time stepping: M diag(1/dt))
        if np.ndim(dt):
            return (1.0 / np.asarray(dt))[:, None]
        return 1.0 / dt

    def _base_residual(self, u, u_old, dt):
        r = self.galerkin_residual(u)
        if not self.steady:
            r = r + self.fa.scalar_matvec(self.fa.mass_data,
                                          (u - u_old) * self._dt_inv(dt))
        return r

    def residual(self, u, u_old=None, dt=None, params=None, scaled=None,
                 apply_bc=True):
        """Full stabilized residual (Dirichlet rows replaced unless disabled)."""
        params = params or self.params
        if scaled is None:
            scaled = self.scaled_params(params, self.lambda_ref(u))
        r = self._base_residual(u, u_old, dt) + self._stab_parts(
            u, u_old, dt, params, scaled)
        if apply_bc:
            r = self.bc.apply_to_residual(r, u)
        return r

    def residual_norm(self, r):
        return float(np.linalg.norm(np.real(r)[self.bc.free_mask]))

    # -- matrices ----------------------------------------------------------

    def picard_matrix(self, u, u_old=None, dt=None, params=None, scaled=None):
        """LHS with detectors forced to one (lumped mass, full Rusanov)."""
        params = params or self.params
        if scaled is None:
            scaled = self.scaled_params(params, self.lambda_ref(u))
        mat = self.fa.assemble_K(u, self.gamma)
        ones = np.ones(self.mesh.n_nodes)
        b_data = self.stab.assemble_B(u, ones, params,
                                      scaled["eps_h_pair"], scaled["sigma_h_pair"],
                                      self.gamma)
        idx = np.arange(4)
        mat.data[:, idx, idx] += b_data[:, None]
        if not self.steady:
            # theta forced to 1 exactly: fully lumped mass
            m_data = self.stab.blended_mass_data(ones, False, 0.0)
            inv = self._dt_inv(dt)
            if np.ndim(dt):
                inv = inv[self.fa.indices, 0]
            mat.data[:, idx, idx] += (m_data * inv)[:, None]
        self.bc.apply_to_matrix(mat)
        return mat

    # -- Jacobian via analytic Galerkin part + colored steps ---------------

    def _build_jacobian_pattern(self):
        n = self.mesh.n_nodes
        a1 = sp.csr_matrix((np.ones(len(self.fa.indices), dtype=np.int8),
                            self.fa.indices, self.fa.indptr), shape=(n, n))
        a2 = (a1 @ a1).tocsr()
        a2.data[:] = 1
        a2.sort_indices()
        indptr2, indices2 = a2.indptr, a2.indices
        rows2 = np.repeat(np.arange(n), np.diff(indptr2))
        # narrow -> wide position map
        key2 = rows2.astype(np.int64) * n + indices2
        key1 = self.fa.rows.astype(np.int64) * n + self.fa.indices
        narrow_in_wide = np.searchsorted(key2, key1)
        # distance-4 conflict graph for column coloring
        conflict = (a2.T @ a2).tocsr()
        colors = -np.ones(n, dtype=np.int64)
        for i in range(n):
            used = {colors[j] for j in conflict.indices[conflict.indptr[i]:conflict.indptr[i + 1]]
                    if colors[j] >= 0}
            c = 0
            while c in used:
                c += 1
            colors[i] = c
        ncolors = int(colors.max()) + 1
        col_color = colors[indices2]
        color_sel = [np.flatnonzero(col_color == g) for g in range(ncolors)]
        color_nodes = [np.flatnonzero(colors == g) for g in range(ncolors)]
        self._jac_pattern = dict(indptr2=indptr2, indices2=indices2, rows2=rows2,
                                 narrow_in_wide=narrow_in_wide,
                                 color_sel=color_sel, color_nodes=color_nodes)
        return self._jac_pattern

    def jacobian(self, u, u_old=None, dt=None, params=None, scaled=None):
        """Full Jacobian of the stabilized residual.

        Galerkin + consistent-mass part is analytic; the stabilization part
        (detector, diffusion and mass blending derivatives) is assembled
        column-block-wise with graph-colored complex-step differentiation in
        differentiable mode, or central finite differences otherwise.
        """
        params = params or self.params
        if scaled is None:
            scaled = self.scaled_params(params, self.lambda_ref(u))
        pat = self._jac_pattern or self._build_jacobian_pattern()

        wide = BlockSparseMatrix(pat["indptr2"], pat["indices2"],
                                 np.zeros((len(pat["indices2"]), 4, 4)))
        k_narrow = self.fa.assemble_K(u, self.gamma)
        if not self.steady:
            idx = np.arange(4)
            inv = self._dt_inv(dt)
            if np.ndim(dt):
                inv = inv[self.fa.indices, 0]
            k_narrow.data[:, idx, idx] += (self.fa.mass_data * inv)[:, None]
        wide.data[pat["narrow_in_wide"]] += k_narrow.data

        rows2 = pat["rows2"]
        if params.differentiable:
            h = self._complex_step
            for sel, nodes in zip(pat["color_sel"], pat["color_nodes"]):
                for c in range(4):
                    uc = u.astype(complex)
                    uc[nodes, c] += 1j * h
                    r = self._stab_parts(uc, u_old, dt, params, scaled)
                    wide.data[sel, :, c] += r.imag[rows2[sel]] / h
        else:
            for sel, nodes in zip(pat["color_sel"], pat["color_nodes"]):
                for c in range(4):
                    step = self._fd_step * max(1.0, float(np.max(np.abs(u[:, c]))))
                    up = u.copy()
                    up[nodes, c] += step
                    um = u.copy()
                    um[nodes, c] -= step
                    dr = (self._stab_parts(up, u_old, dt, params, scaled)
                          - self._stab_parts(um, u_old, dt, params, scaled))
                    wide.data[sel, :, c] += dr[rows2[sel]] / (2.0 * step)
        self.bc.apply_to_matrix(wide)
        return wide


def hybrid_solve(problem: EulerProblem, u0, config: SolverConfig,
                 u_old=None, dt=None, params=None, callback=None):
    """Hybrid Picard-Newton iteration with line search and continuation.

    callback, if given, is invoked with each IterationRecord as it is made.
    """
    t_start = time.perf_counter()
    base = params or problem.params
    report = SolveReport()
    u = problem.bc.set_initial(np.array(u0, dtype=float))
    if u_old is None:
        u_old = u.copy()

    if config.continuation:
        eps_k = config.eps_tilde
        eff = base.with_continuation(eps_k)
    else:
        eps_k = base.eps
        eff = base

    r = problem.residual(u, u_old, dt, eff)
    rnorm = problem.residual_norm(r)
    r0 = rnorm
    gal0 = problem.residual_norm(problem._base_residual(u, u_old, dt))
    if r0 <= config.abs_tol:
        report.converged = True
        report.final_rel_residual = 0.0
        report.wall_time = time.perf_counter() - t_start
        return u, report

    best_u, best_norm = u.copy(), rnorm
    unorm = max(np.linalg.norm(u), 1e-300)
    damped_streak = 0
    slow_streak = 0
    phase = "picard"

    for k in range(1, config.max_iters + 1):
        rel = rnorm / r0
        # two sequential loops: once in the Newton phase, stay there
        if phase == "picard" and rel < config.tol1 and config.use_newton:
            phase = "newton"
        if phase == "picard":
            mat = problem.picard_matrix(u, u_old, dt, eff)
        else:
            mat = problem.jacobian(u, u_old, dt, eff)
        du = linear_solve(mat, -r)

        def phi(lam):
            cand = u + lam * du
            if not physics.is_admissible(cand, problem.gamma):
                return np.inf
            return problem.residual_norm(problem.residual(cand, u_old, dt, eff))

        bracket = config.linesearch_bracket
        lam, newnorm = golden_section_linesearch(phi, bracket,
                                                 config.linesearch_iters)
        for _ in range(10):
            if np.isfinite(newnorm):
                break
            bracket = (bracket[0], 0.5 * (bracket[1] - bracket[0]) + bracket[0])
            lam, newnorm = golden_section_linesearch(phi, bracket,
                                                     config.linesearch_iters)
        if not np.isfinite(newnorm):
            raise SolverError("line search found no admissible step")

        stalled = lam < 1e-8 or newnorm >= rnorm * (1.0 - 1e-4)
        if stalled and phase == "picard" and config.use_newton:
            # Picard direction stopped descending before tol1: hand over to
            # Newton early rather than stagnating
            phase = "newton"
            mat = problem.jacobian(u, u_old, dt, eff)
            du = linear_solve(mat, -r)
            lam, newnorm = golden_section_linesearch(
                phi, config.linesearch_bracket, config.linesearch_iters)
            stalled = lam < 1e-8 or newnorm >= rnorm * (1.0 - 1e-4)
        if stalled:
            # flat or non-descending direction: single damped step
            lam = 1e-3
            cand_norm = phi(lam)
            if not np.isfinite(cand_norm):
                break
            newnorm = cand_norm
            damped_streak += 1
            if damped_streak >= 3:
                break
        else:
            damped_streak = 0

        if phase == "picard" and config.use_newton:
            # Picard contraction has flattened out: move on to Newton
            slow_streak = slow_streak + 1 if newnorm > 0.98 * rnorm else 0
            if slow_streak >= 2:
                phase = "newton"

        u = u + lam * du
        rel_inc = lam * float(np.linalg.norm(du)) / unorm
        unorm = max(np.linalg.norm(u), 1e-300)

        if config.continuation:
            eps_k = config.eps_tilde * newnorm / r0
            eff = base.with_continuation(eps_k)
            r = problem.residual(u, u_old, dt, eff)
            rnorm = problem.residual_norm(r)
        else:
            r = problem.residual(u, u_old, dt, eff)
            rnorm = newnorm

        gal = problem.residual_norm(problem._base_residual(u, u_old, dt))
        report.iterations.append(IterationRecord(
            k=k, phase=phase, rel_residual=rnorm / r0,
            rel_galerkin=gal / max(gal0, 1e-300),
            rel_increment=rel_inc, lam=lam, eps_k=eps_k))
        if callback is not None:
            callback(report.iterations[-1])

        if rnorm < best_norm:
            best_norm = rnorm
            best_u = u.copy()
        if rnorm > config.divergence_factor * best_norm:
            break
        if rnorm / r0 < config.tol2:
            report.converged = True
            break
        if config.tol_increment and rel_inc < config.tol_increment:
            report.converged = True
            break

    if not report.converged:
        u = best_u
        rnorm = best_norm
    report.n_iters = len(report.iterations)
    report.final_rel_residual = rnorm / r0
    report.wall_time = time.perf_counter() - t_start
    return u, report


def pseudo_transient_drive(problem: EulerProblem, u0, config: SolverConfig,
                           dt0=None, dt_growth=1.4, dt_max=0.5, target=1e-2,
                           max_steps=100, callback=None,
                           cfl0=None, cfl_growth=1.5, cfl_max=1000.0,
                           patience=8):
    """Drive a transient problem toward steady state with a growing time step.

    Evaluating the transient residual at u_old = u removes the mass term, so
    the monitored quantity is exactly the steady residual.  With continuation
    enabled, the per-step regularization scale is tied to the current steady
    residual.  If cfl0 is given, local time stepping is used instead of a
    global dt: dt_i = cfl * h_i / (|v_i| + c_i) with h_i from the lumped
    mass, and the CFL number grows by cfl_growth per step up to cfl_max.
    Equalizing the per-cell CFL keeps the loosely solved implicit steps
    uniformly tractable on graded meshes.  The drive stops early when no
    step has improved the best steady residual for `patience` consecutive
    steps.  Returns (u_best, steady relative residual history) where u_best
    is the best state visited.
    """
    from dataclasses import replace

    if problem.steady:
        raise ValueError("pseudo_transient_drive requires a transient problem")
    if dt0 is None and cfl0 is None:
        raise ValueError("pseudo_transient_drive needs dt0 or cfl0")
    u = problem.bc.set_initial(np.array(u0, dtype=float))
    r0 = problem.residual_norm(problem.residual(u, u, 1.0))
    if r0 <= config.abs_tol:
        return u, [0.0]
    dt = dt0
    cfl = cfl0
    h_node = np.sqrt(problem.fa.lumped_mass)
    rel = 1.0
    best_rel, best_u = np.inf, u.copy()
    stalled = 0
    history = []
    for step in range(max_steps):
        cfg = config
        if config.continuation:
            cfg = replace(config, eps_tilde=config.eps_tilde * rel)
        if cfl is not None:
            v = physics.velocity(u)
            c = physics.sound_speed(u, problem.gamma)
            dt = cfl * h_node / (np.hypot(v[:, 0], v[:, 1]) + c)
        u, rep = hybrid_solve(problem, u, cfg, u_old=u, dt=dt)
        rel = problem.residual_norm(problem.residual(u, u, 1.0)) / r0
        history.append(rel)
        if callback is not None:
            callback(step, dt, u, rep, rel)
        if not np.isfinite(rel) or rel > config.divergence_factor:
            raise SolverError(f"pseudo-transient drive diverged at step {step}")
        if rel < best_rel:
            best_rel, best_u = rel, u.copy()
            stalled = 0
        else:
            stalled += 1
            if stalled >= patience:
                break
        if rel <= target:
            break
        if rel > 1.02 * best_rel:
            # trust-region style control: a worsening step is discarded and
            # retried from the best state with a shorter pseudo-time step
            u = best_u.copy()
            rel = best_rel
            if cfl is not None:
                cfl = max(cfl * 0.4, 1e-3)
            else:
                dt = max(dt * 0.4, 1e-6 * dt_max)
            continue
        if cfl is not None:
            cfl = min(cfl * cfl_growth, cfl_max)
        else:
            dt = min(dt * dt_growth, dt_max)
    if best_rel < rel:
        u = best_u
    return u, history


def backward_euler_run(problem: EulerProblem, u0, config: SolverConfig,
                       params=None, callback=None):
    """March the transient problem to t_end with Backward Euler."""
    if problem.steady:
        raise ValueError("backward_euler_run requires a transient problem")
    dt = config.dt
    t_end = config.t_end
    if dt is None or dt <= 0 or t_end is None:
        raise ValueError("transient run needs positive dt and t_end")
    u = problem.bc.set_initial(np.array(u0, dtype=float))
    t = 0.0
    reports = []
    step = 0
    while t < t_end - 1e-12:
        step_dt = min(dt, t_end - t)
        u_new, rep = hybrid_solve(problem, u, config, u_old=u, dt=step_dt,
                                  params=params)
        if not rep.converged and rep.final_rel_residual > config.tol1:
            raise SolverError(
                f"time step {step} failed to converge "
                f"(rel residual {rep.final_rel_residual:.3e})")
        u = u_new
        t += step_dt
        step += 1
        reports.append(rep)
        if callback is not None:
            callback(step, t, u, rep)
    return u, reports
