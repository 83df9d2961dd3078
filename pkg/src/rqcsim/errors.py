"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain of the operation."""


class CapacityError(ValueError):
    """The requested size exceeds what the implementation supports."""


class ImpossibleOutcomeError(ValueError):
    """A forced measurement outcome has (numerically) zero probability."""


class NumericalError(RuntimeError):
    """A numerical routine failed to converge.

    ``diagnostics`` carries whatever the routine knew when it gave up.
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})
