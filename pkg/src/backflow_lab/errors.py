"""Exception types shared across the package."""


class BackflowLabError(Exception):
    """Base class for all errors raised by this package."""


class ContractViolationError(BackflowLabError):
    """An input does not satisfy a documented precondition or invariant."""


class NotPsdError(ContractViolationError):
    """A matrix expected to be positive semidefinite has a genuinely
    negative eigenvalue (below the noise-clipping band)."""


class IntegrationDivergedError(BackflowLabError):
    """A propagated state stopped satisfying its invariants mid-run."""

    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time


class GeneratorSingularityError(BackflowLabError):
    """The propagator is singular or too ill-conditioned to invert, so the
    time-local generator is undefined there."""

    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time


class ConfigError(BackflowLabError):
    """A run configuration failed schema validation."""
