"""Exception types shared across the package.

The CLI maps these onto exit codes: ConfigurationError -> 1,
NumericalError -> 2, OSError -> 3.
"""


class ConfigurationError(ValueError):
    """Invalid configuration: bad field value, mismatched shapes, missing file."""


class NumericalError(RuntimeError):
    """A numerical routine failed to converge or produced invalid state."""
