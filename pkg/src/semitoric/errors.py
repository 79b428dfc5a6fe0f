"""Exception hierarchy shared across the toolkit."""


class SemitoricError(Exception):
    """Base class for all toolkit errors."""


class DimensionError(SemitoricError):
    """Inputs have inconsistent or invalid dimensions."""


class DomainError(SemitoricError):
    """Input lies outside the mathematical domain of an operation."""


class NumericalError(SemitoricError):
    """A numerical procedure produced non-finite or unusable output."""


class IntegrationError(NumericalError):
    """ODE integration failed (step-size underflow, chart escape, ...)."""


class ChartError(SemitoricError):
    """A point lies outside the requested chart domain."""


class NoIntegerDirection(SemitoricError):
    """No acceptable integer direction vector within the denominator bound."""


class NotAGraph(SemitoricError):
    """A sampled value set is multivalued over its parameter domain."""


class ConfigError(SemitoricError):
    """Run configuration is malformed or contains unknown keys."""
