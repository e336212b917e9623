"""Exception hierarchy shared by all modules."""


class WienerLabError(Exception):
    """Base class for every error raised by the package."""


class InvalidArgumentError(WienerLabError, ValueError):
    pass


class ResourceLimitError(WienerLabError):
    """A configured size cap would be exceeded."""

    def __init__(self, message, cap=None):
        super().__init__(message)
        self.cap = cap


class EmptyDomainError(WienerLabError, ValueError):
    """An average was requested over an empty set of lattice points."""


class DomainError(WienerLabError, ValueError):
    """A symbol was evaluated outside of the region where it is defined."""


class ConsolidationError(WienerLabError):
    pass


class UnsatisfiableAtScaleError(WienerLabError):
    def __init__(self, message, failing=()):
        super().__init__(message)
        self.failing = tuple(failing)


class InvariantViolationError(WienerLabError):
    pass


class InternalError(WienerLabError):
    """A guaranteed property failed to hold; indicates a bug, not bad input."""


class PreconditionError(WienerLabError):
    pass


class DegenerateFitWarning(UserWarning):
    pass
