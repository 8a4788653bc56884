"""Error types for the lab, with the exit codes the CLI maps them to."""
from typing import Any, Dict, Optional


class LabError(Exception):
    """Base class for all lab errors."""

    exit_code: int = 1


class InvalidInputError(LabError, ValueError):
    """Input violates a documented precondition."""

    exit_code = 2


class ResolutionTooCoarseError(InvalidInputError):
    """No admissible lattice loop (or check) exists at this resolution."""


class DeltaTooLargeError(InvalidInputError):
    """No Cδ-grid loop encloses the base point."""


class InvalidQueryError(InvalidInputError):
    """Annulus or quadrilateral query is not on the boundary, or is degenerate."""


class InvalidConfigurationError(InvalidInputError):
    """Experiment configuration or obstacle configuration is invalid."""


class NotSimpleError(InvalidInputError):
    """Trace touches itself at resolution, or has too few points to unzip."""


class NoRadialLimitError(InvalidInputError):
    """Boundary point is not the radial limit of a tabulated conformal ray."""


class PoleError(InvalidInputError):
    """Point is a pole of the requested map."""


class SingularityError(InvalidInputError):
    """Kernel evaluated on its diagonal."""


class NotFoundError(InvalidInputError):
    """Requested geometric object does not exist."""


class NumericFailureError(LabError):
    """A numerical procedure failed to converge or produced non-finite values."""

    exit_code = 3

    def __init__(self, message: str, diagnostics: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class SamplingFailureError(NumericFailureError):
    """Random sampler exhausted its budget."""
