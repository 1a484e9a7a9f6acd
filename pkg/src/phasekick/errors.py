"""Exception types shared across the package.

The CLI maps these onto process exit codes, so library code should raise
the most specific one that applies rather than a bare Exception.
"""


class ValidationError(ValueError):
    """Bad user input: malformed config, impossible parameters, schema violations."""


class TruncationError(RuntimeError):
    """A Fock-space computation leaked too much population past the trusted band."""


class FitError(RuntimeError):
    """An iterative fit failed to converge or produced an unusable result."""

    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = residuals


class InfeasibleError(ValidationError):
    """A requested measurement plan cannot be realized by the hardware model."""
