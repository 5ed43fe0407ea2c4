"""Exception types shared across the package."""


class DimensionError(ValueError):
    """Raised when an array does not have the dimension an operation expects."""

    def __init__(self, expected, got, what="vector"):
        self.expected = expected
        self.got = got
        super().__init__(f"{what} has dimension {got}, expected {expected}")


class InvalidSetError(ValueError):
    """The set violates a precondition (e.g. does not contain the origin)."""


class UnsupportedError(NotImplementedError):
    """The operation has no implementation for this set variant or penalty kind."""


class OverlappingGroupsError(ValueError):
    pass


class RankDeficiencyError(ValueError):
    """The Fisher information is singular on the model subspace."""


class DomainError(ValueError):
    """A loss was evaluated outside its domain (e.g. a non-PD precision matrix)."""


class PreconditionError(ValueError):
    pass


class IndeterminateError(RuntimeError):
    """A numerical test could not be decided; carries the bracketing interval."""

    def __init__(self, message, lower, upper):
        self.lower = lower
        self.upper = upper
        super().__init__(f"{message} (bracket [{lower:.6g}, {upper:.6g}])")


class NotPSDWarning(RuntimeWarning):
    pass
