"""Exception types shared across the solver."""


class CevPutError(Exception):
    """Base class for all package errors."""


class InvalidParameterError(CevPutError, ValueError):
    """A market or numerical parameter violates its constraints."""


class AlignmentError(CevPutError, ValueError):
    """A stencil offset does not coincide with a grid node."""


class ModeMismatchError(CevPutError, ValueError):
    """Operator assembly requested for a grid built in a different mode."""


class DegenerateOffsetsError(CevPutError, ValueError):
    """Two stencil offsets coincide; the weight system is singular."""


class SingularSystemError(CevPutError, ValueError):
    """A dense or banded linear system is (numerically) singular."""


class BoundaryEscapeError(CevPutError, RuntimeError):
    """The exercise boundary left (0, E] during a stage; signals blow-up."""


class StagnationError(CevPutError, RuntimeError):
    """The adaptive step controller is stuck at the minimum step size."""


class SorConvergenceError(CevPutError, RuntimeError):
    """Projected SOR hit its iteration cap without converging."""


class ConfigError(CevPutError, ValueError):
    """A run-configuration file could not be parsed or validated."""
