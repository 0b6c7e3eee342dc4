"""Manufactured solutions, the 3D vortex counterexample and convergence studies."""
from .counterexample import Counterexample3D, exact_3d_field, locate_anchor_points, muckenhoupt_diagnostic
from .errors import EocTable, ErrorReport, compute_eoc, error_quantities
from .manufactured import ManufacturedCase2D, exact_2d
from .study import run_convergence, run_diagnostic

__all__ = [
    "Counterexample3D", "exact_3d_field", "locate_anchor_points", "muckenhoupt_diagnostic",
    "EocTable", "ErrorReport", "compute_eoc", "error_quantities", "ManufacturedCase2D", "exact_2d",
    "run_convergence", "run_diagnostic",
]
