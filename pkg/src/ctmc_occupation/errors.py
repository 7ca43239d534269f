"""Exception hierarchy shared by all modules."""


class CtmcLabError(Exception):
    """Base class for every error raised by this package."""


class NotAGenerator(CtmcLabError, ValueError):
    """Negative off-diagonal rate, non-square input, or a row that does not sum to zero."""


class Reducible(CtmcLabError, ValueError):
    """The positive-rate transition graph is not strongly connected."""


class SingularSystem(CtmcLabError, ArithmeticError):
    """A linear system is singular or too badly conditioned to trust."""


class NotPSD(CtmcLabError, ValueError):
    """A matrix that should be positive semidefinite has a clearly negative eigenvalue."""


class ZeroExitRate(CtmcLabError, ValueError):
    """Some state has no outgoing rate, so the jump chain is undefined there."""


class HorizonTooLong(CtmcLabError, ValueError):
    """The expected number of jumps exceeds the configured cap."""


class OutOfHorizon(CtmcLabError, ValueError):
    """A query time lies outside [0, T]."""


class DomainMismatch(CtmcLabError, ValueError):
    """An integrand is not defined on the whole integration interval, or shapes disagree."""


class NotBinaryPath(CtmcLabError, ValueError):
    """An integrator path takes values outside {0, 1} or is not piecewise constant."""


class GridTooSmall(CtmcLabError, ValueError):
    """A monotonicity claim needs at least two grid points."""


class DegenerateProjection(CtmcLabError, ValueError):
    """The normality projection has zero limiting variance."""


class ConfigError(CtmcLabError, ValueError):
    """Malformed or inconsistent experiment configuration."""


class IoFailure(CtmcLabError, OSError):
    """Writing a report to disk failed."""
