"""Exception hierarchy shared by all modules.

Every numeric-domain failure derives from :class:`HawkesRegenError`, so callers
(the CLI in particular) can report the error by class name.
"""


class HawkesRegenError(Exception):
    """Base class for all package errors."""


class NotSubcritical(HawkesRegenError, ValueError):
    """The transfer function has L1 norm >= 1."""


class ZeroKernel(HawkesRegenError, ValueError):
    """A delay was requested from a kernel with zero mass."""


class SizeCapExceeded(HawkesRegenError, RuntimeError):
    """A branching cluster grew past the hard size cap.

    The partially grown cluster is kept on ``partial``.
    """

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class UnsortedInput(HawkesRegenError, ValueError):
    pass


class MismatchedReport(HawkesRegenError, ValueError):
    pass


class NonConvergent(HawkesRegenError, RuntimeError):
    pass


class PoleAt(HawkesRegenError, ValueError):
    def __init__(self, s):
        super().__init__(f"series has a pole at s={s!r}")
        self.s = s


class DegenerateDenominator(HawkesRegenError, ZeroDivisionError):
    pass


class OutOfDomain(HawkesRegenError, ValueError):
    pass


class Divergent(OutOfDomain):
    """A transform or moment is infinite at the requested argument."""


class HorizonExceeded(HawkesRegenError, ValueError):
    pass


class SupportViolation(HawkesRegenError, ValueError):
    pass


class InsufficientCycles(HawkesRegenError, ValueError):
    pass


class AlphaOutOfRange(HawkesRegenError, ValueError):
    pass


class ConfigError(HawkesRegenError, ValueError):
    """Invalid experiment configuration; ``field`` names the offending key."""

    def __init__(self, message, field=None):
        super().__init__(message if field is None else f"{field}: {message}")
        self.field = field
