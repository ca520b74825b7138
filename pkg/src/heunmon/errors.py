"""Exception hierarchy.

Every numerical failure derives from :class:`HeunmonError` so the CLI can
map it onto exit code 3 in one place.
"""

from __future__ import annotations


class HeunmonError(Exception):
    """Base class for numerical and precondition failures."""


class DomainError(HeunmonError, ValueError):
    """Input outside the mathematical domain (e.g. Im tau <= 0)."""


class PoleError(HeunmonError):
    """Evaluation at (or within the pole threshold of) a pole.

    ``lattice`` holds the integer coordinates (m, n) of the offending pole
    m + n*tau (half-integers for poles sitting at half periods).
    """

    def __init__(self, message: str, location: complex, lattice: tuple):
        super().__init__(message)
        self.location = complex(location)
        self.lattice = tuple(lattice)


class PreconditionError(HeunmonError, ValueError):
    pass


class DegeneracyError(HeunmonError):
    pass


class ConsistencyError(HeunmonError):
    pass


class PathTooCloseError(HeunmonError):
    def __init__(self, message: str, waypoint: complex | None = None):
        super().__init__(message)
        self.waypoint = waypoint


class IntegratorAccuracyError(HeunmonError):
    pass


class InvalidInputError(HeunmonError, ValueError):
    pass


class NotCompletelyReducibleError(HeunmonError):
    pass


class ZeroLocalizationError(HeunmonError):
    pass


class SignResolutionError(HeunmonError):
    pass


class UnitarityError(HeunmonError):
    pass


class UnsupportedFormError(HeunmonError, KeyError):
    def __str__(self):
        return Exception.__str__(self)
