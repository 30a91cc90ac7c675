"""Domain exceptions shared across the toolkit.

All errors raised by the library derive from :class:`ColorVibError` so
callers (and the CLI) can distinguish domain failures from programming
errors.
"""

from __future__ import annotations


class ColorVibError(Exception):
    """Base class for all domain errors."""


class DegenerateChromaticity(ColorVibError):
    """Chromaticity y-coordinate too close to zero to convert."""


class OutOfGamut(ColorVibError):
    """A color fell outside the displayable sRGB gamut.

    Attributes:
        linear: the offending linear RGB channel values, when known.
        max_feasible_ratio: largest amplitude ratio that would have stayed
            in gamut, when the failure came from a vibration pair.
    """

    def __init__(self, message, linear=None, max_feasible_ratio=None):
        super().__init__(message)
        self.linear = linear
        self.max_feasible_ratio = max_feasible_ratio


class CatalogInvalid(ColorVibError):
    """Ellipse catalog failed structural validation."""


class WeightOutOfRange(ColorVibError):
    """Color-fitting weight outside the open interval (0, 1)."""


class NoFeasibleRatio(ColorVibError):
    """No vibration amplitude keeps the pair displayable (center itself is out of gamut)."""


class DegenerateData(ColorVibError):
    """Response data admits no psychometric fit (no 0/1 crossing)."""


class ConvergenceFailure(ColorVibError):
    """Iterative fit exceeded its iteration cap without converging."""


class ProbabilityOutOfRange(ColorVibError):
    """Requested probability not strictly between 0 and 1."""


class OutsideInterpolationRange(ColorVibError):
    """Eccentricity outside the validated interpolation ranges."""


class UnknownDiameter(ColorVibError):
    """Requested circle diameter is not a threshold-table grid level."""


class MissingCell(ColorVibError):
    """Threshold-table cell absent (degenerate fit upstream)."""


class EmptyImage(ColorVibError):
    """Image raster has no pixels."""


class AnisotropicPixels(ColorVibError):
    """Display profile pixel pitch differs between axes beyond tolerance."""


class GeometryOverflow(ColorVibError):
    """Requested stimulus geometry does not fit on the panel."""


class PerPixelGamutViolation(ColorVibError):
    """A pixel's vibration pair left the sRGB gamut at that pixel's luminance."""


class DegenerateConfiguration(ColorVibError):
    """Fiducial correspondences are collinear or coincident."""


class PointAtInfinity(ColorVibError):
    """Projective mapping produced a vanishing homogeneous coordinate."""


class SequenceViolation(ColorVibError):
    """A response was posted for a protocol phase that is not active."""


class StorageFailure(ColorVibError):
    """Session log could not be written or parsed."""
