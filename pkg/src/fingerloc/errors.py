"""Exception types shared across the toolkit."""


class ConfigError(ValueError):
    """Invalid experiment or scenario configuration (bad schema, field, or value)."""

    def __init__(self, message, path=None):
        if path:
            message = f"{message} (at {path})"
        super().__init__(message)
        self.path = path


class NumericError(RuntimeError):
    """A numerical routine could not produce a reliable result."""


class InfeasibleError(RuntimeError):
    """A constrained problem has no feasible solution.

    Carries the indices of the constraints/locations that cannot be met.
    """

    def __init__(self, message, violated=()):
        super().__init__(message)
        self.violated = tuple(violated)


class DegenerateUpdateError(RuntimeError):
    """Every particle received zero likelihood during a filter update.

    The offending likelihood values are attached for diagnosis.
    """

    def __init__(self, message, likelihoods=None):
        super().__init__(message)
        self.likelihoods = likelihoods
