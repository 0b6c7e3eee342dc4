"""LDG discretization of the steady p-Navier-Stokes system."""
from .dg import BrokenField, DGSpace
from .estimator import PNavierStokesLDG
from .mesh import Mesh, mesh_chain, red_refine, unit_cube_kuhn, unit_square_initial
from .orlicz import NFunctionSpec, ShiftedSpec
from .quadrature import QuadRule, cell_rule, face_rule
from .solver import DiscreteState, LDGProblem, NewtonReport, SolverConfig, newton_solve

__all__ = [
    "BrokenField", "DGSpace", "PNavierStokesLDG", "Mesh", "mesh_chain", "red_refine", "unit_cube_kuhn",
    "unit_square_initial", "NFunctionSpec", "ShiftedSpec", "QuadRule", "cell_rule", "face_rule",
    "DiscreteState", "LDGProblem", "NewtonReport", "SolverConfig", "newton_solve",
]
__version__ = "0.1.0"
