"""Run configuration: INI-style files mapped onto solver parameters."""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields

from .detector import DetectorParams
from .solver import SolverConfig

_CASES = ("sinusoidal", "corner", "reflected_shock", "sod", "scramjet")


@dataclass
class RunConfig:
    case: str = "sod"
    # detector
    q: float = 10.0
    eps: float = 1e-4
    sigma: float = 1e-2
    zeta: float = 1e-10
    differentiable: bool = True
    # solver
    continuation: bool = False
    eps_tilde: float = 1.0
    tol1: float = 1e-2
    tol2: float = 1e-6
    tol_increment: float = 0.0
    max_iters: int = 150
    # discretization
    resolution: int = 0           # 0: case default
    dt: float = 0.0               # 0: steady / case default
    t_end: float = 0.0
    # output
    output_dir: str = "out"
    write_vtk: bool = True
    vtk_every: int = 0            # 0: only final state

    def detector_params(self):
        return DetectorParams(q=self.q, eps=self.eps, sigma=self.sigma,
                              zeta=self.zeta, differentiable=self.differentiable)

    def solver_config(self):
        return SolverConfig(
            tol1=self.tol1, tol2=self.tol2, tol_increment=self.tol_increment,
            max_iters=self.max_iters, continuation=self.continuation,
            eps_tilde=self.eps_tilde,
            dt=self.dt if self.dt > 0 else None,
            t_end=self.t_end if self.t_end > 0 else None)


_SECTIONS = {
    "run": ("case", "resolution", "dt", "t_end"),
    "detector": ("q", "eps", "sigma", "zeta", "differentiable"),
    "solver": ("continuation", "eps_tilde", "tol1", "tol2",
               "tol_increment", "max_iters"),
    "output": ("output_dir", "write_vtk", "vtk_every"),
}
_FIELD_SECTION = {name: sec for sec, names in _SECTIONS.items() for name in names}


class ConfigError(ValueError):
    pass


def load_config(path) -> RunConfig:
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise ConfigError(f"config file not found: {path}")
    cfg = RunConfig()
    types = {f.name: f.type for f in fields(RunConfig)}
    for sec in parser.sections():
        if sec not in _SECTIONS:
            raise ConfigError(f"unknown section [{sec}]")
        for key in parser[sec]:
            if key not in _SECTIONS[sec]:
                raise ConfigError(f"unknown key '{key}' in section [{sec}]")
            kind = types[key]
            if kind == "bool":
                val = parser[sec].getboolean(key)
            elif kind == "int":
                val = parser[sec].getint(key)
            elif kind == "float":
                val = parser[sec].getfloat(key)
            else:
                val = parser[sec][key]
            setattr(cfg, key, val)
    if cfg.case not in _CASES:
        raise ConfigError(f"unknown case '{cfg.case}' (choose from {_CASES})")
    return cfg


def save_config(cfg: RunConfig, path):
    parser = configparser.ConfigParser()
    for sec, names in _SECTIONS.items():
        parser[sec] = {}
        for name in names:
            val = getattr(cfg, name)
            parser[sec][name] = repr(val) if isinstance(val, float) else str(val)
    with open(path, "w") as f:
        parser.write(f)
