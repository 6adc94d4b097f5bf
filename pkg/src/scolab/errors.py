"""Exception types shared across the library."""


class InputError(ValueError):
    """Bad argument, dimension mismatch, or malformed configuration."""


class UnsupportedOperationError(InputError):
    """Requested an operation the given norm family does not support exactly."""


class SizingError(InputError):
    """A requested construction would exceed its configured size cap."""


class IntegrityError(RuntimeError):
    """A cross-check between two independent computations failed."""


class CertificateError(IntegrityError):
    """First-order certificate construction could not reach the tolerance.

    Carries the mean subgradient and the worst feasible direction so the
    failure is inspectable.
    """

    def __init__(self, message, mean_subgradient=None, direction=None):
        super().__init__(message)
        self.mean_subgradient = mean_subgradient
        self.direction = direction
