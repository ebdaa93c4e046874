"""Exception and warning types raised by fmbs."""


class DomainError(ValueError):
    """An argument lies outside the domain of the operation."""


class UnsupportedConfigurationError(ValueError):
    """The operation is not defined for the given model configuration."""


class NumericalError(ArithmeticError):
    """A numerical routine failed to converge or produced unusable output.

    ``diagnostics`` carries whatever the failing routine knew at the time.
    """

    def __init__(self, message, **diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics


class DegenerateComponentError(NumericalError):
    """A mixture component lost (almost) all of its posterior mass."""

    def __init__(self, component, mass, **diagnostics):
        super().__init__(
            f"component {component} is degenerate (posterior mass {mass:.3g})",
            component=component, mass=mass, **diagnostics)
        self.component = component
        self.mass = mass


class SingularInformationError(NumericalError):
    """The information matrix cannot be inverted."""


class HazardUnderflowWarning(RuntimeWarning):
    """The survival function underflowed; the hazard was reported as +inf."""


class InitializationWarning(UserWarning):
    """An initialization strategy fell back to its deterministic default."""
