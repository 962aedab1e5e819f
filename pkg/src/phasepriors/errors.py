"""Exception types shared across the package."""


class DimensionError(ValueError):
    """Array shapes or lengths are incompatible with the operator."""


class ParameterError(ValueError):
    """A numeric parameter is outside its admissible range."""


class ValidationError(ValueError):
    """Input data violates a documented precondition.

    Carries the offending flat indices (truncated) in ``indices``.
    """

    def __init__(self, message, indices=()):
        super().__init__(message)
        self.indices = tuple(indices)


class MetricError(ValueError):
    """A metric is undefined for the given inputs (e.g. zero vectors)."""


class MissingCapabilityError(RuntimeError):
    """A plugin does not provide a capability the caller requires."""


class DivergenceError(RuntimeError):
    """A solver produced a non-finite iterate. Carries the partial trace."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class BridgeError(RuntimeError):
    """The external denoiser/regularizer bridge failed.

    ``iteration`` is the solver step during which the failure occurred,
    or None outside a solver loop.
    """

    def __init__(self, message, iteration=None):
        super().__init__(message)
        self.iteration = iteration
