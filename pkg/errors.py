"""
Exception hierarchy for the despeckling toolkit.
"""

from typing import Optional


class SpeckleError(Exception):
    """Base class for every error raised by the toolkit."""


class DomainError(SpeckleError, ValueError):
    """A numeric input lies outside the domain of the operation."""


class DegenerateSampleError(SpeckleError):
    """A sample or image has zero variance where a positive one is required."""


class GeometryError(SpeckleError):
    """The phantom layout does not fit the requested raster size."""


class ConfigError(SpeckleError):
    """An effective configuration value is invalid."""


class QuadratureError(SpeckleError):
    """Adaptive quadrature did not reach the requested tolerance."""

    def __init__(self, message: str, abserr: Optional[float] = None):
        self.abserr = abserr
        detail = message if abserr is None else f"{message} (error estimate {abserr:.3e})"
        super().__init__(detail)


class RasterFormatError(SpeckleError):
    """A raster or label file could not be parsed."""

    def __init__(self, message: str, offset: int):
        self.offset = offset
        super().__init__(f"{message} at byte offset {offset}")
