"""Linear-elastic FEM with a nonlocal surface penalty against self-interpenetration."""

from .errors import ConfigError, MeshError, ReductionError, SelfContactError, SolverError

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "MeshError",
    "ReductionError",
    "SelfContactError",
    "SolverError",
]
