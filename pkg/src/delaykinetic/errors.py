"""Exception types shared across the library."""


class DomainError(ValueError):
    """A time argument lies outside the interval where the object is defined."""


class ShapeError(ValueError):
    """Operands have incompatible dimensions, delays or grids."""


class DiscontinuityError(ValueError):
    """Splicing two paths that do not meet at the splice time."""


class ConfigError(ValueError):
    """Invalid integrator or experiment configuration."""


class DivergenceError(RuntimeError):
    """The integrator produced non-finite or runaway states.

    Attributes:
        step: index of the offending time step.
        time: the corresponding time.
    """

    def __init__(self, message, step=None, time=None):
        super().__init__(message)
        self.step = step
        self.time = time


class NonConvergenceError(RuntimeError):
    """Picard iteration did not reach the requested tolerance.

    The per-iteration residual trace is attached for diagnosis.
    """

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace if trace is not None else []
