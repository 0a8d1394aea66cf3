from typing import Optional


class ToolkitError(Exception):
    """Base error. Carries the process exit code the CLI maps it to."""

    exit_code = 1

    def __init__(self, detail: str):
        super().__init__(detail)
        self.detail = detail


class ConfigError(ToolkitError):
    exit_code = 2


class InadmissibleFluxError(ConfigError):
    pass


class RangeError(ConfigError):
    pass


class AlgebraMismatchError(ConfigError, ValueError):
    pass


class GapClosureError(ToolkitError):
    exit_code = 3

    def __init__(self, detail: str, eigenvalue: Optional[float] = None, gap: Optional[float] = None):
        super().__init__(detail)
        self.eigenvalue = eigenvalue
        self.gap = gap


class ResidueError(ToolkitError):
    exit_code = 4

    def __init__(self, detail: str, residue: float = 0.0, tolerance: float = 0.0):
        super().__init__(detail)
        self.residue = residue
        self.tolerance = tolerance


class OutputError(ToolkitError):
    exit_code = 5


class EvenExtentWarning(UserWarning):
    """Even torus extents break the antisymmetry of the periodic distance."""
