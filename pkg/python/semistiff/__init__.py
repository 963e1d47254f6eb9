"""semistiff: 环域上半刚性边界条件 Ginzburg-Landau 能量的数值实验."""

from .domain import Annulus, Chart, Contour, Grid, ScalarField, chart, solve_V
from .errors import (
    AdmissibilityError,
    ConfigError,
    DegreeUndefinedError,
    SectorError,
    SemistiffError,
    SolverError,
    StagnationError,
    TruncationError,
    ValidationError,
)
from .field import ComplexField, EnergyReport, energy, gl_gradient, renormalize_boundary
from .harmonic import harmonic_minimizer, i0
from .minimize import MinimizeConfig, MinimizeResult, minimize, sector_protocol
from .topology import Vortex, VortexSet, abdeg, boundary_degree, find_vortices

__version__ = "0.1.0"

__all__ = [
    "AdmissibilityError",
    "Annulus",
    "Chart",
    "ComplexField",
    "ConfigError",
    "Contour",
    "DegreeUndefinedError",
    "EnergyReport",
    "Grid",
    "MinimizeConfig",
    "MinimizeResult",
    "ScalarField",
    "SectorError",
    "SemistiffError",
    "SolverError",
    "StagnationError",
    "TruncationError",
    "ValidationError",
    "Vortex",
    "VortexSet",
    "abdeg",
    "boundary_degree",
    "chart",
    "energy",
    "find_vortices",
    "gl_gradient",
    "harmonic_minimizer",
    "i0",
    "minimize",
    "renormalize_boundary",
    "sector_protocol",
    "solve_V",
]
