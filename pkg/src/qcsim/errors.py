"""Exception hierarchy."""


class QcsError(Exception):
    """Base class for errors raised by qcsim."""


class InvalidStateError(QcsError, ValueError):
    """A state violates a structural or physical constraint."""


class NumericalError(QcsError):
    """A computation is numerically unreliable for the given input."""


class CutoffError(NumericalError):
    """The Fock cutoff is too small for the requested truncation tolerance."""

    def __init__(self, message: str, required_cutoff: int | None = None):
        super().__init__(message)
        self.required_cutoff = required_cutoff


class ConditioningError(NumericalError):
    """The parity denominator of the photon-counting estimator is too small."""

    def __init__(self, message: str, parity: float):
        super().__init__(message)
        self.parity = parity
