"""Exception types shared across the package."""


class WaveChannelsError(Exception):
    """Base class for all package errors."""


class DomainError(WaveChannelsError):
    """An argument lies outside the domain of an operation."""


class ConfigError(WaveChannelsError):
    """An experiment or evolution configuration violates an invariant."""


class InstabilityError(WaveChannelsError):
    """The time integrator produced non-finite values."""

    def __init__(self, message: str, step: int):
        super().__init__(f"{message} (step {step})")
        self.step = step


class ConstructionError(WaveChannelsError):
    """An ODE/basis construction failed its internal certificate."""


class FitError(WaveChannelsError):
    """A power-law or exponent fit is too ambiguous to report."""
