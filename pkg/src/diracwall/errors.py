"""Exception types raised by the solver."""


class DiracWallError(Exception):
    """Base class for all solver errors."""


class ThresholdEnergy(DiracWallError, ValueError):
    """Energy too close to a band threshold E**2 = 2n."""


class MissingEnergy(DiracWallError, ValueError):
    """A wavenumber-dependent potential family was built without E0."""


class NotPropagating(DiracWallError, ValueError):
    """A propagating mode was required but the wavenumber is complex."""


class InvalidRegime(DiracWallError, ValueError):
    """Well parameters outside the trapped-mode regime."""


class NoRoot(DiracWallError, ValueError):
    """Root finder found no admissible solution."""


class ConfigError(DiracWallError, ValueError):
    """Invalid experiment configuration."""


class NearSingular(DiracWallError, ArithmeticError):
    """The leaf system I + V G is numerically singular.

    Usually signals an embedded eigenvalue (localized mode) at this energy.
    """

    def __init__(self, message, condition=None, sigma_min=None, where=None):
        super().__init__(message)
        self.condition = condition
        self.sigma_min = sigma_min
        self.where = where


class MergeSingular(DiracWallError, ArithmeticError):
    """An inner resolvent of a TR merge is numerically singular."""

    def __init__(self, message, condition=None, where=None):
        super().__init__(message)
        self.condition = condition
        self.where = where
