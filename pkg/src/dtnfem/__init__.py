"""Helmholtz scattering by a penetrable obstacle with a truncated DtN boundary condition.

P1 finite elements on interface-fitted meshes with exact circular-arc cells on
the artificial boundary, a Fourier-truncated Dirichlet-to-Neumann operator, a
fixed-point solver for Kerr-type nonlinearities and a separable reference
solution for disk obstacles.
"""
from .config import ConfigError, load_config
from .dtn import DtnOperator, FourierTrace, apply_dtn, adjoint_apply, truncation_gap_constant
from .femspace import AssembledForms, DofMap, FeFunction, assemble_forms, interpolate
from .harness import StudyResult, run
from .kernels import KernelDomainError, KernelTable, WaveContext, Zn, hankel1, zn
from .mesh import GeometryError, Mesh, ObstacleSpec, ResolutionError, build_mesh, refine
from .oracle import SeriesSolution, mie_disk_solve
from .solver import (
    ContrastModel,
    LinearSystem,
    NoContraction,
    ProblemData,
    SolverError,
    assemble_system,
    fixed_point_solve,
    solve_adjoint,
    solve_linear,
)

__version__ = "0.1.0"

__all__ = [
    "AssembledForms", "ConfigError", "ContrastModel", "DofMap", "DtnOperator", "FeFunction",
    "FourierTrace", "GeometryError", "KernelDomainError", "KernelTable", "LinearSystem", "Mesh",
    "NoContraction", "ObstacleSpec", "ProblemData", "ResolutionError", "SeriesSolution",
    "SolverError", "StudyResult", "WaveContext", "Zn", "adjoint_apply", "apply_dtn",
    "assemble_forms", "assemble_system", "build_mesh", "fixed_point_solve", "hankel1",
    "interpolate", "load_config", "mie_disk_solve", "refine", "run", "solve_adjoint",
    "solve_linear", "truncation_gap_constant", "zn",
]
