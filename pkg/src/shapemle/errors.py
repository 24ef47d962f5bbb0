"""Exception types raised by the estimation library."""


class ShapeMLEError(Exception):
    """Base class for all library errors."""


class InvalidInput(ShapeMLEError, ValueError):
    """Input data or parameters are malformed (non-finite, wrong shape, bad domain)."""


class DegenerateSample(ShapeMLEError, ValueError):
    """Fewer than two distinct support points."""


class NonIntegrable(ShapeMLEError, ArithmeticError):
    """The integral of exp(theta) against the reference measure is infinite."""


class Overflow(ShapeMLEError, OverflowError):
    """An exponential-moment integral exceeds the floating point range."""


class NoProgress(ShapeMLEError, RuntimeError):
    """Step halving failed to produce a sufficient increase of the objective."""


class IterationCap(ShapeMLEError, RuntimeError):
    """An iteration limit was reached before convergence."""


class FactorizationFailure(ShapeMLEError, ArithmeticError):
    """The tridiagonal LDL^T factorization failed even after ridge retries."""


class EmptyCandidates(ShapeMLEError, ValueError):
    """A multi-knot proposal was requested without any candidate knot."""


class InvalidEnvelope(ShapeMLEError, ValueError):
    """The rejection envelope cannot dominate the target density."""
