"""Exception hierarchy shared by all modules."""


class KoopmanError(Exception):
    """Base class for errors raised by :mod:`koopman_lattice`."""


class DomainError(KoopmanError, ValueError):
    """A state lies outside the declared state space of a map or observable."""


class InvariantError(KoopmanError, ValueError):
    """A constructed object violates one of its stated invariants."""


class NoCatalogError(KoopmanError):
    """The requested system has no catalog of closed-form eigenpairs."""


class EvaluationError(KoopmanError):
    """An observable could not be evaluated at some sample point.

    The offending point is kept on ``point``.
    """

    def __init__(self, msg, point=None):
        super().__init__(msg)
        self.point = point


class NumericalError(KoopmanError):
    """A numerical routine produced non-finite output or failed to converge."""


class PreconditionError(KoopmanError, ValueError):
    """The inputs of an analysis do not satisfy its precondition."""


class ConfigError(KoopmanError, ValueError):
    """Invalid run configuration; ``path`` names the offending field."""

    def __init__(self, msg, path=""):
        super().__init__(f"{path}: {msg}" if path else msg)
        self.path = path
