"""Exception hierarchy.

The CLI maps :class:`ValidationError` to exit code 1 and
:class:`NumericalContractError` to exit code 2.
"""


class CsqptError(Exception):
    pass


class ValidationError(CsqptError, ValueError):
    """Input violates a schema or a documented precondition."""


class NumericalContractError(CsqptError, ArithmeticError):
    """A numerical guarantee (positivity, truncation, monotonicity) failed."""


class TruncationError(NumericalContractError):
    """An operation would discard more population than the cutoff allows."""

    def __init__(self, message, discarded=None):
        super().__init__(message)
        self.discarded = discarded


class ConvergenceWarning(UserWarning):
    pass
