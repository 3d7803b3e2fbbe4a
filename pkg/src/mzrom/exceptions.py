"""Exception types shared across the package."""

__all__ = [
    "MzromError",
    "ShapeError",
    "InvalidArgumentError",
    "IntegrationError",
    "AdjointConsistencyError",
    "RankDeficiencyError",
    "SingularFactorError",
    "UndefinedMetricError",
    "ConfigError",
]


class MzromError(Exception):
    """Base class for all package errors."""


class ShapeError(MzromError, ValueError):
    """An array argument has an incompatible shape."""


class InvalidArgumentError(MzromError, ValueError):
    """An argument violates a documented precondition."""


class IntegrationError(MzromError, RuntimeError):
    """Time integration failed to reach the requested tolerance."""


class AdjointConsistencyError(MzromError, RuntimeError):
    """A matrix-free operator pair failed the adjoint inner-product test."""


class RankDeficiencyError(MzromError, RuntimeError):
    """A design matrix that must have full column rank does not."""


class SingularFactorError(MzromError, RuntimeError):
    """An implicit time-marching factor is numerically singular."""


class UndefinedMetricError(MzromError, ValueError):
    """A relative error metric is undefined (zero reference norm)."""


class ConfigError(MzromError, ValueError):
    """An experiment configuration file is malformed or inconsistent."""
