"""Exception types shared across the package."""


class PhflowError(Exception):
    """Base class for all package-specific errors."""


class SchemaError(PhflowError):
    """A network or scenario file violates the expected schema."""


class BuildError(PhflowError):
    """Discrete spaces or operators could not be constructed."""


class DomainError(PhflowError):
    """A state lies outside the admissible set of the constitutive law."""


class StateError(PhflowError):
    """A field evaluation produced an inadmissible value, e.g. at a quadrature point."""


class StepFailure(PhflowError):
    """A time step did not converge.

    Carries the failing time so callers can report it.
    """

    def __init__(self, t, message, stats=None):
        super().__init__(f"time step at t={t!r} failed: {message}")
        self.t = t
        self.stats = stats
