"""Legacy ASCII VTK output of nodal solution fields."""

from __future__ import annotations

import numpy as np

from . import physics


def write_vtk(path, mesh, u, detector=None, gamma=physics.GAMMA):
    """Write the mesh and derived fields as an unstructured-grid VTK file."""
    u = np.asarray(u, dtype=float)
    rho, vel, p = physics.primitive_from_conserved(u, gamma)
    mach = physics.mach_number(u, gamma)
    n = mesh.n_nodes
    with open(path, "w") as f:
        f.write("# vtk DataFile Version 3.0\n")
        f.write("shockfem solution\nASCII\nDATASET UNSTRUCTURED_GRID\n")
        f.write(f"POINTS {n} double\n")
        for x, y in mesh.coords:
            f.write(f"{x:.16g} {y:.16g} 0\n")
        e = mesh.n_cells
        f.write(f"CELLS {e} {5 * e}\n")
        for cell in mesh.cells:
            f.write("4 " + " ".join(str(int(c)) for c in cell) + "\n")
        f.write(f"CELL_TYPES {e}\n")
        f.write("9\n" * e)
        f.write(f"POINT_DATA {n}\n")
        _scalar(f, "density", rho)
        _scalar(f, "pressure", p)
        _scalar(f, "mach", mach)
        f.write("VECTORS velocity double\n")
        for vx, vy in vel:
            f.write(f"{vx:.16g} {vy:.16g} 0\n")
        if detector is not None:
            _scalar(f, "detector", np.asarray(detector, dtype=float))


def _scalar(f, name, vals):
    f.write(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n")
    for v in vals:
        f.write(f"{v:.16g}\n")
