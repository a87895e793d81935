"""Exception types raised by the solvers, estimators and scenarios."""


class DAGameError(Exception):
    """Base class for every error raised by this package."""


class FiniteEscape(DAGameError):
    """A Riccati solution blew up before reaching the end of the horizon."""

    def __init__(self, message, t=None):
        super().__init__(message)
        self.t = t


class OutOfRange(DAGameError):
    pass


class DomainError(DAGameError):
    pass


class NonFinite(DAGameError):
    pass


class SingularOmega(DAGameError):
    """I - gamma^-2 Y X is singular (or not positive) where it must be inverted."""


class SingularGain(DAGameError):
    pass


class FiniteEscapeGain(DAGameError):
    pass


class InfeasibleGamma(DAGameError):
    pass


class NoFeasibleGamma(DAGameError):
    pass


class TooManyFailures(DAGameError):
    pass


class DegenerateDenominator(DAGameError):
    pass


class ConfigError(DAGameError):
    pass
