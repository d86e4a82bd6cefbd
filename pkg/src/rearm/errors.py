"""Exception types shared across the package.

The CLI maps these onto exit codes: ConfigError -> 1 (usage),
DataError -> 2, NumericError -> 3.
"""


class ConfigError(Exception):
    """Invalid configuration: unknown key, bad value, conflicting flags."""


class DataError(Exception):
    """Malformed or missing input data, or an artifact/dataset mismatch."""


class NumericError(Exception):
    """Non-finite values encountered during training or evaluation."""
