class OpenBookError(Exception):
    """Root of all errors raised by openbook; subclasses also derive from ``ValueError`` or ``RuntimeError``."""


class DomainError(OpenBookError, ValueError):
    """An argument lies outside the documented domain of an operation."""


class ConstructionError(OpenBookError, ValueError):
    """Input data cannot produce a valid object; the message names the violated constraint."""


class FeasibilityError(ConstructionError):
    """The requested contact perturbation is too large for the profile."""


class IntegrationError(OpenBookError, RuntimeError):
    """The ODE integrator could not continue (step underflow or state out of range)."""


class DegenerateOrbitError(OpenBookError, ValueError):
    """A linearized return map has eigenvalue 1."""


class ParityError(OpenBookError, ValueError):
    """Index data whose arithmetic requires an even number received an odd one."""


class ConfigError(OpenBookError, ValueError):
    """A run configuration failed validation.

    Args:
        message: Human readable summary.
        fields: Names of the offending fields (or constraint names).
    """

    def __init__(self, message: str, fields=None):
        super().__init__(message)
        self.fields = list(fields or [])
