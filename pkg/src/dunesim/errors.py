"""Exception types shared across the package."""


class DuneSimError(Exception):
    """Base class for all package errors."""


class ConfigurationError(DuneSimError):
    """Invalid grid, law, forcing, regime or solver configuration."""


class SteppingError(DuneSimError):
    """An implicit step failed; carries the step index and linear residual."""

    def __init__(self, message: str, step: int | None = None, residual: float | None = None):
        super().__init__(message)
        self.step = step
        self.residual = residual


class FixedPointError(DuneSimError):
    """A continuation entry of the period-map iteration did not converge."""

    def __init__(self, message: str, entry: tuple[float, float] | None = None,
                 last_ratio: float | None = None, last_distance: float | None = None):
        super().__init__(message)
        self.entry = entry
        self.last_ratio = last_ratio
        self.last_distance = last_distance


class SolvabilityError(DuneSimError):
    """A source term violates the zero-mean compatibility requirement."""
