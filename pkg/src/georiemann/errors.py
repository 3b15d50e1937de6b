"""Exception hierarchy shared by all modules.

The CLI maps each class to an exit code (see ``cli.EXIT_CODES``).
"""


class GeoRiemannError(Exception):
    """Base class for every error raised by the package."""


class ModelValidationError(GeoRiemannError):
    """Malformed model file or physically invalid parameter."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class AssumptionViolation(ModelValidationError):
    """The fractional flow is not S-shaped (names the failed clause)."""


class DegenerateModel(ModelValidationError):
    """No admissible pivot exists for the elimination."""


class NumericalError(GeoRiemannError):
    """A numerical procedure could not produce a result."""


class StateOnCs(NumericalError):
    """State lies on the surface f = s where the reduction is singular."""


class Resonant(NumericalError):
    """Saturation coincides with a reduced eigenvalue (s = Lambda)."""


class BackSubstitutionSingular(NumericalError):
    """A pivot used to recover the s or u eigenvector component vanished."""

    def __init__(self, which):
        self.which = which
        super().__init__(f"zero pivot in back substitution for the {which} component")


class NonHyperbolicRegion(NumericalError):
    """Complex reduced eigenvalues at a state."""


class UPlusIndeterminate(NumericalError):
    """Every denominator of the u+ formula vanishes."""


class ShockSpeedUndefined(NumericalError):
    """All accumulation jumps vanish, so the shock speed is 0/0."""


class NoSequenceFound(GeoRiemannError):
    """No implemented wave-sequence template matches the Riemann data."""

    def __init__(self, message, trace=None):
        self.trace = list(trace or [])
        super().__init__(message)
