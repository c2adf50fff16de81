"""Exception hierarchy shared by all tdof modules."""


class TdofError(Exception):
    """Base class for all library errors."""


class DomainError(TdofError, ValueError):
    """An argument is outside the mathematical domain of an operation."""


class NumericError(TdofError, ArithmeticError):
    """A numerical procedure failed to produce a trustworthy result."""


class ConvergenceError(NumericError):
    """An iterative solver did not converge within its iteration budget."""


class BracketError(NumericError):
    """No sign change could be established for a root solve."""


class NonFiniteEvalError(NumericError):
    """A function evaluation returned a non-finite value.

    Carries the offending abscissa so callers can report where
    differentiation or integration broke down.
    """

    def __init__(self, abscissa, message=None):
        self.abscissa = abscissa
        super().__init__(message or f"non-finite function value at x={abscissa!r}")


class RejectionCapError(NumericError):
    """A rejection sampler exceeded its proposal budget."""

    def __init__(self, proposals, context=None):
        self.proposals = proposals
        self.context = dict(context or {})
        detail = ", ".join(f"{k}={v}" for k, v in self.context.items())
        super().__init__(
            f"rejection sampler exceeded {proposals} proposals" + (f" ({detail})" if detail else "")
        )


class DegenerateChainError(TdofError):
    """A chain is constant (or too short) for the requested diagnostic."""


class DataError(TdofError, ValueError):
    """Input data file is malformed or fails validation."""
