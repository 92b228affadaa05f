class ConfigurationError(ValueError):
    """Invalid parameters, grid, control dimensions or config file contents."""


class NumericalFailure(ArithmeticError):
    """Non-finite objective, constraint or gradient value."""


class DegenerateFrontError(ValueError):
    """Front has no well-defined knee (too few points or all collinear)."""
