"""Exception hierarchy for the simulator.

All errors raised by this package derive from LZSimError so callers can
catch simulator failures without masking programming errors.
"""


class LZSimError(Exception):
    """Base class for every error raised by this package."""


class DegenerateSpectrum(LZSimError):
    """Two instantaneous eigenvalues coincide within the degeneracy tolerance.

    Raised instead of guessing an eigenvector basis inside a degenerate
    subspace.
    """


class CrossingInsideSegment(LZSimError):
    """An adiabatic segment was requested across an avoided-crossing time."""


class NoCrossing(LZSimError):
    """The drive never reaches an avoided crossing, so no impulse schedule
    can be built."""


class StepFailure(LZSimError):
    """The adaptive integrator could not take a step (step-size underflow
    or step budget exhausted)."""


class ParseError(LZSimError):
    """Config text could not be parsed.  Carries the 1-based line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = "line %d: %s" % (line, message)
        super().__init__(message)


class ValidationError(LZSimError):
    """Config parsed but a field value is invalid or inconsistent.
    Carries the offending field name."""

    def __init__(self, message: str, field: str | None = None):
        self.field = field
        if field is not None:
            message = "%s: %s" % (field, message)
        super().__init__(message)


class InsufficientResolution(LZSimError):
    """A sweep grid is too coarse for the requested feature-matching
    tolerance."""


class NoBeat(LZSimError):
    """No beat structure found: envelope modulation depth below threshold."""
