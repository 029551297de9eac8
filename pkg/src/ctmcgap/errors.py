"""Exception types shared across the package."""


class InvalidInputError(ValueError):
    """Raised when arguments violate a documented precondition.

    Covers malformed model files, non-probability vectors, out-of-range
    indices, empty grids, and similar caller mistakes.
    """


class NumericalFailureError(RuntimeError):
    """Raised when a numerical routine cannot meet its accuracy contract.

    Parameters
    ----------
    message : str
        Human-readable description of the failure.
    residual : float, optional
        The residual achieved when the routine gave up, if meaningful.
    """

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class ExplosionGuardError(NumericalFailureError):
    """Raised when a simulated trajectory exceeds the jump-count guard."""
