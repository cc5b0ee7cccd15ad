"""Exception taxonomy shared by all modules.

The CLI maps these onto its exit-code contract: configuration problems
exit 2, numerical failures exit 3, data-integrity violations exit 4.
"""


class PdmShapeError(Exception):
    """Base class for all package errors."""


class ConfigurationError(PdmShapeError):
    """Invalid parameters, infeasible rate/gamma combinations, bad schemas."""


class InfeasibleRateError(ConfigurationError):
    """A requested matcher or shaping rate cannot be met."""


class CompositionError(PdmShapeError):
    """A sequence does not have the composition required by a matcher code."""

    def __init__(self, message, level=None):
        super().__init__(message)
        self.level = level


class OutOfCodebookError(PdmShapeError):
    """Sequence has a valid composition but lies outside the 2^k codebook."""


class QuadratureError(PdmShapeError):
    """Numerical integration failed to reach the requested tolerance."""


class BracketError(PdmShapeError):
    """A root/target bracketing search failed on the configured range."""


class ConvergenceError(PdmShapeError):
    """An iterative optimizer exceeded its iteration cap."""
