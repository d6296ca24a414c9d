"""Exception types shared across the package.

The CLI maps each family to its own exit code.
"""


class ConfigError(ValueError):
    """Invalid configuration or instance parameters."""


class DataError(ValueError):
    """Malformed or inconsistent input data."""


class InfeasibleError(RuntimeError):
    """A construction that should always succeed came out empty.

    Raised e.g. when the price-difference region of a contract is empty,
    which can only happen on a bug or an invalid classification.
    """
