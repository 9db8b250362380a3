"""Exception hierarchy.

Errors split into two families that the CLI maps to distinct exit codes:
``ConfigError`` (bad input, exit 2) and ``InvariantError`` (a numerical
contract was violated, exit 1).
"""


class TypicalWorldsError(Exception):
    """Base class for all package errors."""


class ConfigError(TypicalWorldsError, ValueError):
    """Malformed or out-of-range input."""


class DimensionError(ConfigError):
    """Shapes do not agree, or a product space would exceed the size cap."""


class CapExceededError(ConfigError):
    """An enumeration would exceed the configured tuple-space cap."""


class InvariantError(TypicalWorldsError):
    """A structural invariant failed to hold within tolerance."""


class NotHermitianError(InvariantError, ValueError):
    pass


class NotUnitaryError(InvariantError, ValueError):
    pass


class NotOrthonormalError(InvariantError, ValueError):
    pass


class CompletenessError(InvariantError):
    """Measurement operators do not satisfy sum_m M_m^dag M_m = I."""


class ConvergenceError(InvariantError):
    pass


class ZeroProbabilityError(InvariantError, ValueError):
    """Conditioning on, or post-selecting, an event of probability zero."""
