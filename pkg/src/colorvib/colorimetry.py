"""CIE color-space conversions and sRGB gamut validation.

Implements the xyY -> XYZ -> linear sRGB -> gamma-encoded 8-bit pipeline
used throughout the toolkit. All conversions are pure functions over
double-precision values; the gamma helpers also accept numpy arrays so the
stimulus renderer can vectorize them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateChromaticity, OutOfGamut

# XYZ -> linear sRGB (D65, IEC 61966-2-1 primaries).
XYZ_TO_LINEAR_SRGB = np.array(
    [
        [3.2406, -1.5372, -0.4986],
        [-0.9689, 1.8758, 0.0415],
        [0.0557, -0.2040, 1.0570],
    ]
)

# Relative luminance of linear sRGB channels (second row of the inverse).
LINEAR_SRGB_TO_XYZ = np.linalg.inv(XYZ_TO_LINEAR_SRGB)

GAMMA_BREAKPOINT = 0.0031308
GAMUT_TOLERANCE = 1e-6
_Y_EPSILON = 1e-12


@dataclass(frozen=True)
class XyChromaticity:
    """Point on the CIE 1931 xy chromaticity diagram."""

    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError("chromaticity coordinates must be finite")
        if self.x < 0 or self.y < 0:
            raise ValueError(f"chromaticity ({self.x}, {self.y}) has a negative coordinate")
        if self.x + self.y > 1 + 1e-12:
            raise ValueError(f"chromaticity ({self.x}, {self.y}) lies outside x + y <= 1")


@dataclass(frozen=True)
class XyYColor:
    """Chromaticity plus relative luminance Y, with Y normalized to [0, 1]."""

    chroma: XyChromaticity
    Y: float

    def __post_init__(self):
        if not 0 <= self.Y <= 1:
            raise ValueError(f"luminance Y={self.Y} outside [0, 1]")


@dataclass(frozen=True)
class XyzColor:
    """CIE 1931 tristimulus values."""

    X: float
    Y: float
    Z: float

    def __post_init__(self):
        for name, v in (("X", self.X), ("Y", self.Y), ("Z", self.Z)):
            if not math.isfinite(v) or v < 0:
                raise ValueError(f"tristimulus {name}={v} must be finite and >= 0")


@dataclass(frozen=True)
class LinearRgb:
    """Linear-light sRGB channels; values outside [0, 1] indicate out-of-gamut colors."""

    r: float
    g: float
    b: float


@dataclass(frozen=True)
class Srgb8:
    """Gamma-encoded 8-bit sRGB triple."""

    r: int
    g: int
    b: int

    def __post_init__(self):
        for name, v in (("r", self.r), ("g", self.g), ("b", self.b)):
            if not isinstance(v, int) or not 0 <= v <= 255:
                raise ValueError(f"channel {name}={v} not an integer in [0, 255]")

    def as_tuple(self):
        return (self.r, self.g, self.b)


def xyy_to_xyz(c: XyYColor) -> XyzColor:
    """Convert xyY to XYZ: X = xY/y, Z = (1 - x - y)Y/y; Y is passed through untouched.

    Raises:
        DegenerateChromaticity: if y is too close to zero to divide by.
    """
    x, y = c.chroma.x, c.chroma.y
    if y <= _Y_EPSILON:
        raise DegenerateChromaticity(f"chromaticity y={y} too small for xyY -> XYZ")
    return XyzColor(X=x * c.Y / y, Y=c.Y, Z=(1 - x - y) * c.Y / y)


def xyz_to_linear_rgb(c: XyzColor) -> LinearRgb:
    """Convert XYZ to linear sRGB without clamping, so out-of-gamut values survive."""
    r, g, b = XYZ_TO_LINEAR_SRGB @ (c.X, c.Y, c.Z)
    return LinearRgb(float(r), float(g), float(b))


def gamma_encode(c):
    """sRGB transfer function: 1.055 c^(1/2.4) - 0.055 above the breakpoint, 12.92 c below.

    Negative inputs take the linear branch so gamut diagnostics keep their sign.
    Accepts scalars or numpy arrays.
    """
    c = np.asarray(c, dtype=float)
    encoded = np.where(
        c >= GAMMA_BREAKPOINT,
        1.055 * np.power(np.abs(c), 1 / 2.4) - 0.055,
        12.92 * c,
    )
    return float(encoded) if encoded.ndim == 0 else encoded


def gamma_decode(e):
    """Inverse of :func:`gamma_encode` on [0, 1]; accepts scalars or numpy arrays."""
    e = np.asarray(e, dtype=float)
    breakpoint_encoded = 12.92 * GAMMA_BREAKPOINT
    linear = np.where(
        e >= breakpoint_encoded,
        np.power((np.abs(e) + 0.055) / 1.055, 2.4),
        e / 12.92,
    )
    return float(linear) if linear.ndim == 0 else linear


def _round_half_away(v: float) -> int:
    return int(math.floor(v + 0.5)) if v >= 0 else -int(math.floor(-v + 0.5))


def linear_rgb_channels(c: XyYColor) -> tuple[float, float, float]:
    """Unclamped linear sRGB channels of an xyY color, for gamut diagnostics."""
    lin = xyz_to_linear_rgb(xyy_to_xyz(c))
    return (lin.r, lin.g, lin.b)


def in_gamut(c: XyYColor) -> bool:
    """True iff every linear channel lies within [-tol, 1 + tol]."""
    try:
        channels = linear_rgb_channels(c)
    except DegenerateChromaticity:
        return False
    return all(-GAMUT_TOLERANCE <= v <= 1 + GAMUT_TOLERANCE for v in channels)


def xyy_to_srgb8(c: XyYColor) -> Srgb8:
    """Full display conversion: xyY -> XYZ -> linear RGB -> gamma -> rounded 8-bit.

    Raises:
        OutOfGamut: if any linear channel falls outside [0, 1] beyond tolerance;
            the exception carries the offending linear values.
    """
    channels = linear_rgb_channels(c)
    if any(v < -GAMUT_TOLERANCE or v > 1 + GAMUT_TOLERANCE for v in channels):
        raise OutOfGamut(
            f"linear RGB {channels} not displayable for xyY "
            f"({c.chroma.x}, {c.chroma.y}, {c.Y})",
            linear=channels,
        )
    encoded = [gamma_encode(min(max(v, 0.0), 1.0)) for v in channels]
    r, g, b = (_round_half_away(e * 255) for e in encoded)
    return Srgb8(r, g, b)
