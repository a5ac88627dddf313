"""Exception types raised across the package."""


class CSSError(Exception):
    """Base class for all package errors."""


class GridError(CSSError, ValueError):
    """Invalid grid parameters (odd or too small N, nonpositive L)."""


class OddN(GridError):
    pass


class DomainTooSmall(CSSError):
    """The field does not decay below tolerance on the boundary ring."""


class SupportsOverlap(CSSError, ValueError):
    pass


class SupportExceedsDomain(CSSError, ValueError):
    pass


class NotRadial(CSSError, ValueError):
    pass


class Overflow(CSSError, ArithmeticError):
    """Exponent argument of the nonlinearity exceeded the configured cap."""


class NotSupercritical(CSSError, ValueError):
    pass


class NoBracket(CSSError):
    """No sign change of the fiber constraint in the admissible scaling range."""


class NotUnique(CSSError):
    """The fiber root is not a strict maximum of the fiber energy."""


class ZeroMass(CSSError, ValueError):
    pass


class NoRoot(CSSError, ValueError):
    pass


class MaxSteps(CSSError):
    pass


class NoFixedPoint(CSSError):
    """The truncation level never dominated the sup-norm of the solution."""


class ConfigError(CSSError, ValueError):
    """Invalid run configuration; message carries the offending field path."""
