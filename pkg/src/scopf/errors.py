"""Exception hierarchy shared across the package."""


class ScopfError(Exception):
    """Base class for all errors raised by this package."""


class NetworkError(ScopfError, ValueError):
    """Structural or validation problem in a network description."""


class DisconnectedNetworkError(NetworkError):
    """The reference-reduced susceptance matrix is singular."""


class IslandingError(ScopfError):
    """An outage separates the grid and the IMML update does not apply."""


class InfeasibleError(ScopfError):
    """An optimization problem has no feasible point."""

    def __init__(self, message, cuts=()):
        super().__init__(message)
        self.cuts = tuple(cuts)


class ConvergenceError(ScopfError):
    """The decomposition loop exceeded its pass guard."""


class CaseFormatError(ScopfError, ValueError):
    """A case file could not be parsed."""
