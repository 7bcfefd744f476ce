"""Exception types shared across the toolkit."""


class ViabilityError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(ViabilityError):
    """Run configuration failed to parse or validate."""


class NumericalError(ViabilityError):
    """A numerical routine failed in a way that invalidates its result."""


class DegenerateGradient(NumericalError):
    """The level-set gradient vanished where a normal vector was required."""


class NoConvergence(NumericalError):
    """An iterative solver exhausted its iteration budget."""


class ToleranceNotMet(NumericalError):
    """An adaptive quadrature could not reach the requested tolerance."""


class ImmediateExit(ViabilityError):
    """A simulation was started from a point outside the domain."""


class NonFinite(NumericalError):
    """A trajectory left the representable range (overflow or NaN)."""
