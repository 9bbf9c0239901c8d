"""Exception types shared across the package."""


class EvobarrierError(Exception):
    """Base class for all package errors."""


class ModelSchemaError(EvobarrierError):
    """Model file violates the JSON schema or its value constraints."""


class InadmissibleGraphError(EvobarrierError):
    """Cost graph is not strongly connected through finite-cost edges."""


class StochasticityError(EvobarrierError):
    """No strictly positive eps yields a stochastic kernel."""


class EnumerationCapError(EvobarrierError):
    """Tree enumeration would exceed the configured cap."""


class NumericalError(EvobarrierError):
    """A numerical routine failed to meet its accuracy contract."""


class ScheduleError(EvobarrierError):
    """Mutation schedule incompatible with the model."""
