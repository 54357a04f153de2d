"""Implicit continuous-Galerkin solver for the 2D compressible Euler equations
with differentiable local-bounds-preserving shock-capturing stabilization."""

from .physics import (GAMMA, InadmissibleStateError, conserved_from_primitive,
                      flux, flux_jacobian, mach_number, pressure,
                      primitive_from_conserved, roe_average, sound_speed,
                      spectral_radius, wave_speeds)
from .mesh import (Mesh, build_polygonal_channel, build_structured_quad,
                   classify_inflow, compute_pair_geometry)
from .sparse import BlockSparseMatrix
from .assembly import DirichletBC, FEAssembly
from .detector import DetectorParams, ShockDetector, limiter_Z, scale_params
from .stabilization import StabContext
from .solver import (EulerProblem, SolveReport, SolverConfig, SolverError,
                     backward_euler_run, golden_section_linesearch,
                     hybrid_solve, pseudo_transient_drive)
from .benchmarks import (BenchmarkCase, builtin_cases, convergence_rate,
                         l1_error, oblique_shock)
from . import riemann, vtkio

__version__ = "0.1.0"

__all__ = [
    "GAMMA", "InadmissibleStateError", "conserved_from_primitive", "flux",
    "flux_jacobian", "mach_number", "pressure", "primitive_from_conserved",
    "roe_average", "sound_speed", "spectral_radius", "wave_speeds",
    "Mesh", "build_polygonal_channel", "build_structured_quad",
    "classify_inflow", "compute_pair_geometry", "BlockSparseMatrix",
    "DirichletBC", "FEAssembly", "DetectorParams", "ShockDetector",
    "limiter_Z", "scale_params", "StabContext", "EulerProblem", "SolveReport",
    "SolverConfig", "SolverError", "backward_euler_run",
    "golden_section_linesearch", "hybrid_solve", "pseudo_transient_drive",
    "BenchmarkCase",
    "builtin_cases", "convergence_rate", "l1_error", "oblique_shock",
    "riemann", "vtkio",
]
