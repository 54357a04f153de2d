"""Command-line entry points: run a configured case, sweep a parameter grid,
or run the quick self-verification of the reference oracles."""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

import numpy as np

from . import benchmarks, riemann, vtkio
from .config import ConfigError, load_config
from .solver import (SolverError, backward_euler_run, hybrid_solve,
                     pseudo_transient_drive)


def _build_case(cfg):
    kw = {}
    if cfg.case == "sinusoidal":
        if cfg.resolution:
            kw["n"] = cfg.resolution
        if cfg.dt > 0:
            kw["dt"] = cfg.dt
        if cfg.t_end > 0:
            kw["t_end"] = cfg.t_end
        case = benchmarks.sinusoidal_case(differentiable=cfg.differentiable, **kw)
    elif cfg.case == "corner":
        case = benchmarks.corner_case(n=cfg.resolution or 32,
                                      differentiable=cfg.differentiable)
    elif cfg.case == "reflected_shock":
        case = benchmarks.reflected_shock_case(q=cfg.q,
                                               differentiable=cfg.differentiable,
                                               eps_tilde=cfg.eps_tilde)
    elif cfg.case == "sod":
        case = benchmarks.sod_case(q=cfg.q, differentiable=cfg.differentiable,
                                   eps=cfg.eps, sigma=cfg.sigma)
    elif cfg.case == "scramjet":
        case = benchmarks.scramjet_case(q=cfg.q,
                                        differentiable=cfg.differentiable,
                                        eps_tilde=cfg.eps_tilde)
    else:
        raise ConfigError(f"unknown case '{cfg.case}'")
    case.params = cfg.detector_params()
    # case-specific tolerances stay unless the config overrides them
    sc = case.config
    for name in ("tol1", "tol2", "tol_increment", "max_iters",
                 "continuation", "eps_tilde"):
        default = getattr(type(cfg)(), name)
        if getattr(cfg, name) != default:
            setattr(sc, name, getattr(cfg, name))
    if cfg.dt > 0:
        sc.dt = cfg.dt
    if cfg.t_end > 0:
        sc.t_end = cfg.t_end
    return case


def _write_history(path, reports):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["step", "iter", "phase", "rel_residual",
                    "rel_galerkin_residual", "rel_increment", "lambda", "eps_k"])
        for step, rep in enumerate(reports):
            for rec in rep.iterations:
                w.writerow([step, rec.k, rec.phase,
                            f"{rec.rel_residual:.16e}",
                            f"{rec.rel_galerkin:.16e}",
                            f"{rec.rel_increment:.16e}",
                            f"{rec.lam:.16e}", f"{rec.eps_k:.16e}"])


def _execute(case):
    """Solve a benchmark case; returns (u, reports list, converged)."""
    problem = case.problem()
    if case.steady:
        u, rep = hybrid_solve(problem, case.u0, case.config)
        return problem, u, [rep], rep.converged
    if case.pseudo_transient:
        reports = []
        u, history = pseudo_transient_drive(
            problem, case.u0, case.config, dt0=case.config.dt,
            callback=lambda step, dt, uu, rep, rel: reports.append(rep))
        return problem, u, reports, min(history) <= 1e-2
    reports = []

    def cb(step, t, u, rep):
        reports.append(rep)
        if case.update_bc is not None:
            case.update_bc(case.bc, t + (case.config.dt or 0.0))

    if case.update_bc is not None:
        case.update_bc(case.bc, case.config.dt)
    u, _ = backward_euler_run(problem, case.u0, case.config, callback=cb)
    return problem, u, reports, all(r.converged for r in reports)


def cmd_run(args):
    cfg = load_config(args.config)
    os.makedirs(cfg.output_dir, exist_ok=True)
    case = _build_case(cfg)
    try:
        problem, u, reports, converged = _execute(case)
    except SolverError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    _write_history(os.path.join(cfg.output_dir, f"{case.name}_history.csv"),
                   reports)
    summary = {
        "case": case.name,
        "converged": bool(converged),
        "total_iterations": int(sum(r.n_iters for r in reports)),
        "final_rel_residual": float(reports[-1].final_rel_residual),
    }
    if case.exact_density is not None:
        t = case.config.t_end if not case.steady else 0.0
        summary["l1_density_error"] = benchmarks.l1_error(
            u[:, 0], lambda x, y: case.exact_density(x, y, t), case.mesh)
    if cfg.write_vtk:
        beta = problem.detectors(u, case.params)
        vtkio.write_vtk(os.path.join(cfg.output_dir, f"{case.name}.vtk"),
                        case.mesh, u, detector=beta)
    with open(os.path.join(cfg.output_dir, f"{case.name}_summary.json"), "w") as f:
        json.dump(summary, f, indent=2)
    print(json.dumps(summary, indent=2))
    return 0 if converged else 2


def _parse_grid(spec):
    """Grid spec 'q=1,2,5;eps=1e-4,1e-5;differentiable=true,false'."""
    grid = {}
    if not spec:
        return grid
    for part in spec.split(";"):
        key, _, vals = part.partition("=")
        key = key.strip()
        if key not in ("q", "eps", "sigma", "differentiable"):
            raise ConfigError(f"cannot sweep over '{key}'")
        items = []
        for v in vals.split(","):
            v = v.strip()
            items.append(v.lower() == "true" if key == "differentiable"
                         else float(v))
        grid[key] = items
    return grid


def cmd_sweep(args):
    cfg = load_config(args.config)
    os.makedirs(cfg.output_dir, exist_ok=True)
    grid = _parse_grid(args.grid)
    keys = sorted(grid)
    combos = [[]]
    for k in keys:
        combos = [c + [(k, v)] for c in combos for v in grid[k]]
    out_path = os.path.join(cfg.output_dir, f"{cfg.case}_sweep.csv")
    with open(out_path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(keys + ["total_iterations", "l1_density_error", "converged",
                           "failed"])
        if not grid:
            print(f"wrote {out_path}")
            return 0
        for combo in combos:
            row_cfg = load_config(args.config)
            for k, v in combo:
                setattr(row_cfg, k, v)
            row = [v for _, v in combo]
            try:
                case = _build_case(row_cfg)
                _, u, reports, converged = _execute(case)
                err = ""
                if case.name == "sod":
                    star = riemann.solve_star(*riemann.sod_states())
                    t_end = case.config.t_end

                    def exact_rho(x, y):
                        r, _, _ = riemann.sample(*riemann.sod_states(),
                                                 (x - 0.5) / t_end, star=star)
                        return r
                    err = benchmarks.l1_error(u[:, 0], exact_rho, case.mesh)
                elif case.exact_density is not None:
                    t = case.config.t_end if not case.steady else 0.0
                    err = benchmarks.l1_error(
                        u[:, 0], lambda x, y: case.exact_density(x, y, t),
                        case.mesh)
                w.writerow(row + [sum(r.n_iters for r in reports), err,
                                  bool(converged), False])
            except Exception as exc:  # keep sweeping past failed combinations
                print(f"sweep point {combo} failed: {exc}", file=sys.stderr)
                w.writerow(row + ["", "", False, True])
    print(f"wrote {out_path}")
    return 0


def cmd_verify(args):
    """Quick self-checks of the reference oracles."""
    ok = True
    left, right = riemann.sod_states()
    p, u = riemann.solve_star(left, right)
    ok &= abs(p - 0.30313) < 1e-4 and abs(u - 0.92745) < 1e-4
    print(f"riemann star state: p*={p:.5f} u*={u:.5f} "
          f"{'ok' if ok else 'FAIL'}")
    beta, rr, pr, m2 = benchmarks.oblique_shock(2.0, 10.0)
    good = abs(beta - 39.3) < 0.1
    ok &= good
    print(f"oblique shock M=2 at 10 deg: beta={beta:.2f} deg "
          f"(from wall {beta - 10.0:.2f}), rho2/rho1={rr:.4f}, M2={m2:.4f} "
          f"{'ok' if good else 'FAIL'}")
    ua, ub, uc = benchmarks.reflected_shock_states()
    from . import physics
    good = all(physics.is_admissible(s) for s in (ua, ub, uc))
    ok &= good
    print(f"reflected shock region states admissible: {'ok' if good else 'FAIL'}")
    return 0 if ok else 1


def main(argv=None):
    parser = argparse.ArgumentParser(prog="shockfem",
                                     description="implicit stabilized Euler solver")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="solve one configured case")
    p_run.add_argument("config")
    p_run.set_defaults(func=cmd_run)
    p_sweep = sub.add_parser("sweep", help="parameter grid over one case")
    p_sweep.add_argument("config")
    p_sweep.add_argument("--grid", default="",
                         help="e.g. 'q=1,2,5;eps=1e-4,1e-5'")
    p_sweep.set_defaults(func=cmd_sweep)
    p_verify = sub.add_parser("verify", help="oracle self-tests")
    p_verify.set_defaults(func=cmd_verify)
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
