"""Exception types shared across the package."""


class SelfContactError(Exception):
    """Base class for all package errors."""


class ConfigError(SelfContactError):
    """Invalid configuration value or unsupported parameter combination."""


class MeshError(SelfContactError):
    """Mesh integrity violation (non-manifold faces, degenerate elements)."""


class ReductionError(SelfContactError):
    """Dirichlet elimination or Schur reduction failed (singular block)."""


class SolverError(SelfContactError):
    """Energy minimization hit a non-recoverable state (non-finite energy)."""
