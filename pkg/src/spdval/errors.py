"""Exception hierarchy.

Every numerical or validation failure raised by the library derives from
:class:`SpdvalError`. The CLI maps :class:`ConfigError` to exit status 2 and
every other :class:`SpdvalError` to exit status 1.
"""


class SpdvalError(Exception):
    """Base class for all library errors."""


class ConfigError(SpdvalError):
    """Malformed configuration or input file."""


class NonNormalized(SpdvalError):
    pass


class NegativeDensity(SpdvalError):
    pass


class OutOfRange(SpdvalError, ValueError):
    pass


class DivergentIntegral(SpdvalError):
    pass


class TooFewSamples(SpdvalError):
    pass


class InsufficientQuotes(SpdvalError):
    pass


class UnrepairableQuotes(SpdvalError):
    """Quotes are too far from any arbitrage-free curve to be repaired."""

    def __init__(self, message, max_relative_move=None):
        super().__init__(message)
        self.max_relative_move = max_relative_move


class OutOfDomain(SpdvalError, ValueError):
    pass


class SlopeOutOfRange(SpdvalError):
    pass


class NegativeMass(SpdvalError):
    pass


class InconsistentContext(SpdvalError):
    pass


class TargetDensityVanishes(SpdvalError):
    pass


class DomainNotCovered(SpdvalError):
    pass


class NonPositiveScale(SpdvalError, ValueError):
    pass


class NotUnimodal(SpdvalError):
    pass


class ZeroVariance(SpdvalError):
    pass


class UnboundedQ(SpdvalError):
    pass


class NotEquivalent(SpdvalError):
    pass
