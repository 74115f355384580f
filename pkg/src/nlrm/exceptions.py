"""Exception hierarchy shared by every module of the laboratory."""


class NLRMError(Exception):
    """Base class for all errors raised by :mod:`nlrm`."""


class ConfigurationError(NLRMError, ValueError):
    """Invalid shapes, parameters or regime/initializer combinations."""


class ContractViolation(NLRMError, ValueError):
    """An operation was called outside its precondition."""


class NumericalError(NLRMError, ArithmeticError):
    """Non-finite intermediate values or a solver that failed to converge.

    ``diagnostics`` carries whatever the failing routine knows about the
    failure (layer index, sweep count, residual, ...).
    """

    def __init__(self, message, **diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics


class InsufficientDataError(NLRMError):
    """Too few usable Monte-Carlo points for a fit; reported, not fatal."""

    def __init__(self, message, **diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics
