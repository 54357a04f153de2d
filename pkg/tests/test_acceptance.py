"""End-to-end acceptance suite.

Each test covers one release criterion and prints a single PASS/FAIL line
with the measured quantities.  Budgets are wall-clock on one core.
"""

import os
import time

import numpy as np
import pytest

from shockfem import physics, riemann
from shockfem.benchmarks import (convergence_rate, corner_case, corner_density,
                                 l1_error, probe_value, reflected_shock_case,
                                 scramjet_case, sinusoidal_case, sod_case)
from shockfem.detector import ShockDetector, limiter_Z
from shockfem.mesh import build_structured_quad, compute_pair_geometry
from shockfem.solver import (backward_euler_run, hybrid_solve,
                             pseudo_transient_drive)

DATA_DIR = os.path.join(os.path.dirname(__file__), "data")


def _line(num, ok, detail):
    print(f"\n[criterion {num}] {'PASS' if ok else 'FAIL'}: {detail}")


def _march(case, t_end):
    """Backward Euler march with translating boundary data; returns state."""
    prob = case.problem()
    dt = case.config.dt

    def cb(step, t, u, rep):
        case.update_bc(case.bc, min(t + dt, t_end))

    case.update_bc(case.bc, dt)
    u, reps = backward_euler_run(prob, case.u0, case.config, callback=cb)
    return u, reps


def test_criterion_1_convergence_rates():
    t0 = time.perf_counter()
    ns = (16, 24, 32, 48)

    t_end = 1.0 / 64.0
    errs = []
    for n in ns:
        case = sinusoidal_case(n=n, dt=0.125 / n, t_end=t_end)
        u, _ = _march(case, t_end)
        errs.append(l1_error(u[:, 0],
                             lambda x, y: case.exact_density(x, y, t_end),
                             case.mesh))
    rate_smooth = convergence_rate(errs, [1.0 / n for n in ns])

    errs_c = []
    for n in ns:
        case = corner_case(n=n)
        u, rep = hybrid_solve(case.problem(), case.u0, case.config)
        errs_c.append(l1_error(u[:, 0], lambda x, y: corner_density(x, y),
                               case.mesh))
    rate_corner = convergence_rate(errs_c, [1.0 / n for n in ns])

    elapsed = time.perf_counter() - t0
    ok = (1.6 <= rate_smooth <= 2.1 and 0.8 <= rate_corner <= 1.05
          and elapsed <= 900.0)
    _line(1, ok, f"sinusoidal rate {rate_smooth:.3f} (band [1.6, 2.1]), "
                 f"corner rate {rate_corner:.3f} (band [0.8, 1.05]), "
                 f"{elapsed:.0f}s (budget 900s)")
    assert 1.6 <= rate_smooth <= 2.1
    assert 0.8 <= rate_corner <= 1.05
    assert elapsed <= 900.0


def test_criterion_2_reflected_shock():
    t0 = time.perf_counter()
    case = reflected_shock_case(q=10.0, differentiable=True, eps_tilde=1.0)
    u, rep = hybrid_solve(case.problem(), case.u0, case.config)
    iters = rep.iters_to(1e-3)
    rho_probe = probe_value(case.mesh, u[:, 0], case.probes["region_c"])
    elapsed = time.perf_counter() - t0
    ok = (iters is not None and iters <= 150
          and abs(rho_probe - 2.687) / 2.687 <= 0.03 and elapsed <= 300.0)
    _line(2, ok, f"probe density {rho_probe:.4f} (target 2.687 +-3%), "
                 f"residual 1e-3 in {iters} iters (max 150), "
                 f"{elapsed:.0f}s (budget 300s)")
    assert iters is not None and iters <= 150
    assert abs(rho_probe - 2.687) / 2.687 <= 0.03
    assert elapsed <= 300.0


def test_criterion_3_differentiability_benefit():
    results = {}
    for q in (2.0, 5.0, 10.0):
        row = {}
        for diff in (True, False):
            case = reflected_shock_case(q=q, differentiable=diff,
                                        eps_tilde=1.0)
            _, rep = hybrid_solve(case.problem(), case.u0, case.config)
            row[diff] = rep.iters_to(1e-3)
        results[q] = row
    details = []
    ok = True
    for q, row in results.items():
        d, nd = row[True], row[False]
        ok &= d is not None and nd is not None and d <= nd
        pct = 100.0 * (nd - d) / nd if nd else float("nan")
        details.append(f"q={q:g}: {d} vs {nd} ({pct:.0f}% fewer)")
    _line(3, ok, "differentiable+continuation vs non-differentiable "
                 "iterations to 1e-3: " + "; ".join(details))
    for q, row in results.items():
        assert row[True] is not None and row[False] is not None
        assert row[True] <= row[False]


def test_criterion_4_sod_tube():
    t0 = time.perf_counter()
    star = riemann.solve_star(*riemann.sod_states())

    def run(q):
        case = sod_case(q=q)
        u, reps = backward_euler_run(case.problem(), case.u0, case.config)
        t_end = case.config.t_end

        def exact_rho(x, y):
            r, _, _ = riemann.sample(*riemann.sod_states(), (x - 0.5) / t_end,
                                     star=star)
            return r

        # errors per unit strip height: the 1D L1 norm
        return l1_error(u[:, 0], exact_rho, case.mesh) / 0.01

    errs = {q: run(q) for q in (1.0, 5.0, 10.0)}
    elapsed = time.perf_counter() - t0
    ok = (errs[10.0] <= 0.02 and errs[1.0] > errs[5.0] > errs[10.0]
          and elapsed <= 600.0)
    _line(4, ok, f"L1 errors q=1: {errs[1.0]:.4f}, q=5: {errs[5.0]:.4f}, "
                 f"q=10: {errs[10.0]:.4f} (bound 0.02, decreasing in q), "
                 f"{elapsed:.0f}s (budget 600s)")
    assert errs[10.0] <= 0.02
    assert errs[1.0] > errs[5.0] > errs[10.0]
    assert elapsed <= 600.0


def test_criterion_5_smooth_nonlinear_convergence():
    case = sinusoidal_case(n=32)
    dt = case.config.dt
    case.config.t_end = 4 * dt
    u, reps = _march(case, case.config.t_end)
    iters = [rep.n_iters for rep in reps]
    final_incs = [rep.iterations[-1].rel_increment for rep in reps]
    ok = all(rep.converged for rep in reps) and max(iters) <= 10 \
        and max(final_incs) < 1e-6
    _line(5, ok, f"32^2 backward Euler steps: iterations {iters} (max 10), "
                 f"final increments all < 1e-6")
    assert all(rep.converged for rep in reps)
    assert max(iters) <= 10
    assert max(final_incs) < 1e-6


def test_criterion_6_property_suites():
    t0 = time.perf_counter()
    rng = np.random.default_rng(1234)

    def rand_states(n):
        return physics.conserved_from_primitive(
            0.1 + 4.0 * rng.random(n), 6.0 * rng.random((n, 2)) - 3.0,
            0.1 + 4.0 * rng.random(n))

    # detector bounds / extremum activation / linearity on >= 1e4 stencils
    mesh = build_structured_quad(9, 9)
    det = ShockDetector(mesh, compute_pair_geometry(mesh))
    interior = np.setdiff1d(np.arange(mesh.n_nodes), mesh.boundary_nodes)
    stencils = 0
    for _ in range(160):
        f = rng.standard_normal(mesh.n_nodes)
        a = det.alpha(f, q=rng.uniform(1, 10), differentiable=True,
                      eps_h_node=1e-8, zeta_h=1e-10)
        assert np.all((a >= -1e-12) & (a <= 1.0 + 1e-12))
        stencils += len(interior)
    assert stencils >= 10_000
    lin = mesh.coords[:, 0] - 0.5 * mesh.coords[:, 1]
    assert np.allclose(det.alpha(lin, 10.0, False)[interior], 0.0, atol=1e-12)
    spike = np.zeros(mesh.n_nodes)
    spike[interior[0]] = 1.0
    assert det.alpha(spike, 10.0, False)[interior[0]] == pytest.approx(1.0)

    # Roe consistency and wave speeds vs dense eigensolver, 1e3 states
    ui, uj = rand_states(1000), rand_states(1000)
    d = rng.standard_normal((1000, 2))
    avg = physics.roe_average(ui, uj)
    same = physics.roe_average(ui, ui)
    assert np.allclose(same.conserved(), ui, rtol=1e-12, atol=1e-12)
    lam = np.sort(physics.wave_speeds(avg, d), axis=1)
    eig = np.sort(np.linalg.eigvals(
        physics.flux_jacobian(avg.conserved(), d)).real, axis=1)
    assert np.max(np.abs(lam - eig) / (np.abs(lam).max(axis=1, keepdims=True)
                                       + 1.0)) < 1e-8

    # shifted-Jacobian eigenvalue non-positivity, 500 configs
    ui, uj = rand_states(500), rand_states(500)
    cij = rng.standard_normal((500, 2))
    cji = rng.standard_normal((500, 2))
    avg = physics.roe_average(ui, uj)
    nu = np.maximum(physics.spectral_radius(avg, cij, 0.0),
                    physics.spectral_radius(avg, cji, 0.0))
    a = physics.flux_jacobian(avg.conserved(), cij)
    a[:, np.arange(4), np.arange(4)] -= nu[:, None]
    assert np.max(np.linalg.eigvals(a).real) <= 1e-10

    # B row sums zero and smooth-over-hard viscosity dominance
    from shockfem.assembly import FEAssembly
    from shockfem.stabilization import StabContext
    import scipy.sparse as sp
    fa = FEAssembly(build_structured_quad(6, 6))
    st = StabContext(fa)
    u = rand_states(fa.mesh.n_nodes)
    beta = rng.random(fa.mesh.n_nodes)
    hard = st.elemental_nu(u, beta, False)
    soft = st.elemental_nu(u, beta, True, eps_h_pair=1e-8, sigma_h_pair=1e-8)
    assert np.all(soft >= hard - 1e-12)
    bmat = sp.csr_matrix((st.diffusion_data(hard), fa.indices, fa.indptr),
                         shape=(fa.mesh.n_nodes,) * 2)
    assert np.max(np.abs(np.asarray(bmat.sum(axis=1)).ravel())) < 1e-10

    # Jacobian vs central FD, 20 directions
    case = sinusoidal_case(n=6)
    prob = case.problem()
    uu = case.u0
    scaled = prob.scaled_params(case.params, prob.lambda_ref(uu))
    J = prob.jacobian(uu, uu, case.config.dt, case.params, scaled)
    h = 1e-6
    for _ in range(20):
        v = rng.standard_normal(uu.shape)
        v /= np.linalg.norm(v)
        fd = (prob.residual(uu + h * v, uu, case.config.dt, case.params, scaled)
              - prob.residual(uu - h * v, uu, case.config.dt, case.params,
                              scaled)) / (2 * h)
        assert (np.linalg.norm(J.matvec(v) - fd)
                / max(np.linalg.norm(fd), 1e-12)) < 1e-5

    # limiter C2 continuity at the clamp
    hh = 1e-4
    l2 = (limiter_Z(1.0) - 2 * limiter_Z(1.0 - hh)
          + limiter_Z(1.0 - 2 * hh)) / hh ** 2
    assert abs(l2) < 50 * hh

    # exact-Riemann Rankine-Hugoniot residual across the Sod shock
    left, right = riemann.sod_states()
    ps, us = riemann.solve_star(left, right)
    g = physics.GAMMA
    ar = right.sound_speed()
    ratio = ps / right.p
    speed = right.u + ar * np.sqrt((g + 1) / (2 * g) * ratio
                                   + (g - 1) / (2 * g))
    gp = (g + 1.0) / (g - 1.0)
    rho_star = right.rho * (ratio * gp + 1.0) / (gp + ratio)
    pre = np.array([right.rho, right.rho * right.u,
                    right.p / (g - 1) + 0.5 * right.rho * right.u ** 2])
    post = np.array([rho_star, rho_star * us,
                     ps / (g - 1) + 0.5 * rho_star * us ** 2])

    def f1d(w, p):
        return np.array([w[1], w[1] ** 2 / w[0] + p,
                         w[1] / w[0] * (w[2] + p)])

    rh = speed * (post - pre) - (f1d(post, ps) - f1d(pre, right.p))
    assert np.max(np.abs(rh)) <= 1e-10

    elapsed = time.perf_counter() - t0
    ok = elapsed < 120.0
    _line(6, ok, f"property suites (detector bounds on {stencils} stencils, "
                 f"Roe/eigen, shifted-Jacobian eigenvalues, B row sums, "
                 f"Jacobian FD, limiter C2, Rankine-Hugoniot) in "
                 f"{elapsed:.1f}s (budget 120s)")
    assert elapsed < 120.0


@pytest.mark.slow
def test_criterion_7_scramjet():
    t0 = time.perf_counter()
    case = scramjet_case()
    n_elem = case.mesh.n_cells
    elem_ok = abs(n_elem - 18_000) / 18_000 <= 0.20
    prob = case.problem()
    u, history = pseudo_transient_drive(prob, case.u0, case.config,
                                        dt0=case.config.dt)
    rel = min(history)
    mach = physics.mach_number(u)

    golden_path = os.path.join(DATA_DIR, "scramjet_mach_golden.npy")
    if not os.path.exists(golden_path):
        os.makedirs(DATA_DIR, exist_ok=True)
        np.save(golden_path, mach)
        snap_dev = 0.0
        snap_note = "golden snapshot generated"
    else:
        golden = np.load(golden_path)
        snap_dev = float(np.max(np.abs(mach - golden)))
        snap_note = f"snapshot deviation {snap_dev:.2e} (tol 1e-8)"

    elapsed = time.perf_counter() - t0
    ok = elem_ok and rel <= 1e-2 and snap_dev <= 1e-8 and elapsed <= 1800.0
    _line(7, ok, f"{n_elem} elements (18k +-20%), steady residual "
                 f"{rel:.2e} (target 1e-2), {snap_note}, "
                 f"{elapsed:.0f}s (budget 1800s)")
    assert elem_ok
    assert rel <= 1e-2
    assert snap_dev <= 1e-8
    assert elapsed <= 1800.0
