class EquiclassError(Exception):
    """Base class for all errors raised by equiclass."""


class NonPositiveInput(EquiclassError):
    pass


class DimensionMismatch(EquiclassError):
    pass


class NonFiniteEntry(EquiclassError):
    pass


class ObjectNotInCategory(EquiclassError):
    pass


class BadExplicitShape(EquiclassError):
    pass


class SolverFailure(EquiclassError):
    """Raised when every tolerance profile fails to certify a solve."""

    def __init__(self, message, status=None):
        super().__init__(message)
        self.status = status


class CapabilityNotReached(EquiclassError):
    pass


class InfeasibleSizes(EquiclassError):
    pass


class MissingColumn(EquiclassError):
    pass


class ParseError(EquiclassError):
    def __init__(self, message, row=None, column=None):
        super().__init__(message)
        self.row = row
        self.column = column
