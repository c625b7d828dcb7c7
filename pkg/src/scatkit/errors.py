"""Exception types shared across the package."""


class InvalidInputError(ValueError):
    """An argument violates an operation's preconditions."""


class MetricUndefinedError(ValueError):
    """A relative metric was requested against a zero-norm reference."""
