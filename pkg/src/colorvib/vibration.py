"""Isoluminant color-vibration pairs along MacAdam-ellipse major axes.

A pair is two chromaticities displaced from an ellipse center along its
major axis, scaled by an amplitude ratio r and optionally skewed by a
per-user weight w. The "+" endpoint is the yellowish end (larger x + y).
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from importlib import resources

from .colorimetry import Srgb8, XyChromaticity, XyYColor, in_gamut, xyy_to_srgb8
from .errors import CatalogInvalid, NoFeasibleRatio, OutOfGamut, WeightOutOfRange

CATALOG_SIZE = 25
# Sanity bounds on semi-axis lengths in raw xy units; catches files that
# kept the x1000 presentation scaling of common reprints.
_AXIS_MIN = 1e-4
_AXIS_MAX = 5e-2

DEFAULT_GAMUT_RATIO_CAP = 100.0


@dataclass(frozen=True)
class MacAdamEllipse:
    """One chromaticity-discrimination ellipse: center, rotation, semi-axes."""

    index: int
    center: XyChromaticity
    rotation: float  # radians
    major: float  # semi-axis, xy units
    minor: float

    def __post_init__(self):
        if not 1 <= self.index <= CATALOG_SIZE:
            raise ValueError(f"ellipse index {self.index} outside 1..{CATALOG_SIZE}")
        if not self.major >= self.minor > 0:
            raise ValueError(f"ellipse axes must satisfy major >= minor > 0, got {self.major}, {self.minor}")

    @property
    def axis_direction(self) -> tuple[float, float]:
        """Unit vector along the major axis, (sin theta, cos theta)."""
        return (math.sin(self.rotation), math.cos(self.rotation))


@dataclass(frozen=True)
class EllipseCatalog:
    """Immutable, validated collection of the 25 ellipses."""

    ellipses: tuple[MacAdamEllipse, ...]
    source: str

    def by_index(self, n: int) -> MacAdamEllipse:
        for e in self.ellipses:
            if e.index == n:
                return e
        raise KeyError(f"no ellipse with index {n}")

    def at_center(self, x: float, y: float, tol: float = 1e-9) -> MacAdamEllipse:
        """Ellipse whose center matches (x, y) within tol."""
        for e in self.ellipses:
            if abs(e.center.x - x) <= tol and abs(e.center.y - y) <= tol:
                return e
        raise KeyError(f"no catalog ellipse centered at ({x}, {y})")


@dataclass(frozen=True)
class VibrationPair:
    """Two isoluminant chromaticities plus amplitude/weight metadata."""

    plus: XyChromaticity  # yellowish end
    minus: XyChromaticity  # bluish end
    luminance: float
    ratio: float
    weight: float
    source_ellipse: int

    @property
    def separation(self) -> float:
        return math.hypot(self.plus.x - self.minus.x, self.plus.y - self.minus.y)


def load_catalog(source) -> EllipseCatalog:
    """Parse an ellipse catalog from a text stream, string, or path.

    Format: one ellipse per line, `n x y theta_deg major minor`, `#` comments.
    Angles are stored in degrees for auditability and converted on load.

    Raises:
        CatalogInvalid: wrong entry count, duplicate indices, bad axes, or
            missing base ellipse.
    """
    if isinstance(source, str) and "\n" not in source:
        with open(source, "r", encoding="utf-8") as f:
            text = f.read()
    elif isinstance(source, str):
        text = source
    elif isinstance(source, io.IOBase) or hasattr(source, "read"):
        text = source.read()
        if isinstance(text, bytes):
            text = text.decode("utf-8")
    else:
        raise TypeError(f"unsupported catalog source {type(source)!r}")

    header_lines = []
    ellipses = []
    seen = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            header_lines.append(line.lstrip("# "))
            continue
        parts = line.split()
        if len(parts) != 6:
            raise CatalogInvalid(f"line {lineno}: expected 6 fields, got {len(parts)}")
        try:
            n = int(parts[0])
            x, y, theta_deg, major, minor = map(float, parts[1:])
        except ValueError as exc:
            raise CatalogInvalid(f"line {lineno}: {exc}") from exc
        if n in seen:
            raise CatalogInvalid(f"line {lineno}: duplicate ellipse index {n}")
        seen.add(n)
        if not major >= minor > 0:
            raise CatalogInvalid(f"line {lineno}: axes must satisfy major >= minor > 0")
        if not _AXIS_MIN < major < _AXIS_MAX:
            raise CatalogInvalid(
                f"line {lineno}: major axis {major} outside plausible xy-unit range "
                f"({_AXIS_MIN}, {_AXIS_MAX}); is the file still in x1000 units?"
            )
        try:
            center = XyChromaticity(x, y)
        except ValueError as exc:
            raise CatalogInvalid(f"line {lineno}: {exc}") from exc
        ellipses.append(
            MacAdamEllipse(index=n, center=center, rotation=math.radians(theta_deg), major=major, minor=minor)
        )

    if len(ellipses) != CATALOG_SIZE:
        raise CatalogInvalid(f"expected {CATALOG_SIZE} ellipses, got {len(ellipses)}")
    catalog = EllipseCatalog(
        ellipses=tuple(sorted(ellipses, key=lambda e: e.index)),
        source="; ".join(header_lines) or "unspecified",
    )
    try:
        catalog.at_center(0.305, 0.323, tol=1e-6)
    except KeyError:
        raise CatalogInvalid("catalog lacks the base ellipse centered at (0.305, 0.323)")
    return catalog


def load_default_catalog() -> EllipseCatalog:
    """Load the bundled MacAdam (1942) catalog."""
    text = resources.files("colorvib.data").joinpath("macadam1942.txt").read_text(encoding="utf-8")
    return load_catalog(text)


def base_ellipse(catalog: EllipseCatalog) -> MacAdamEllipse:
    """The near-neutral ellipse centered at (0.305, 0.323) used as the display base."""
    return catalog.at_center(0.305, 0.323, tol=1e-6)


def _endpoints(ellipse: MacAdamEllipse, r: float, w: float) -> tuple[XyChromaticity, XyChromaticity]:
    """Endpoint chromaticities for amplitude r and weight w.

    Total separation is always 2 r a; w splits it w : (1 - w) between the
    yellowish and bluish sides of the center.
    """
    ux, uy = ellipse.axis_direction
    # Orient u toward the yellowish (larger x + y) side.
    if ux + uy < 0:
        ux, uy = -ux, -uy
    cx, cy = ellipse.center.x, ellipse.center.y
    d_plus = 2 * r * ellipse.major * w
    d_minus = 2 * r * ellipse.major * (1 - w)
    plus = XyChromaticity(cx + d_plus * ux, cy + d_plus * uy)
    minus = XyChromaticity(cx - d_minus * ux, cy - d_minus * uy)
    return plus, minus


def weighted_pair(ellipse: MacAdamEllipse, r: float, w: float, Y: float) -> VibrationPair:
    """Vibration pair with user weight w; w = 0.5 is the symmetric pair.

    Raises:
        WeightOutOfRange: w outside the open interval (0, 1).
        OutOfGamut: either endpoint undisplayable at Y; carries the largest
            feasible r.
    """
    if not 0 < w < 1:
        raise WeightOutOfRange(f"weight w={w} outside (0, 1)")
    if r < 0:
        raise ValueError(f"ratio r={r} must be >= 0")
    try:
        plus, minus = _endpoints(ellipse, r, w)
    except ValueError:
        # Endpoint left the chromaticity triangle, which is a fortiori out of gamut.
        try:
            max_r = max_gamut_ratio(ellipse, w, Y)
        except NoFeasibleRatio:
            max_r = None
        raise OutOfGamut(
            f"pair endpoint outside the chromaticity triangle at r={r} (max feasible r={max_r})",
            max_feasible_ratio=max_r,
        ) from None
    for end in (plus, minus):
        if not in_gamut(XyYColor(end, Y)):
            try:
                max_r = max_gamut_ratio(ellipse, w, Y)
            except NoFeasibleRatio:
                max_r = None
            raise OutOfGamut(
                f"pair endpoint ({end.x:.5f}, {end.y:.5f}) out of sRGB gamut at Y={Y} "
                f"(r={r}, max feasible r={max_r})",
                max_feasible_ratio=max_r,
            )
    return VibrationPair(plus=plus, minus=minus, luminance=Y, ratio=r, weight=w, source_ellipse=ellipse.index)


def pair_at(ellipse: MacAdamEllipse, r: float, Y: float) -> VibrationPair:
    """Symmetric vibration pair at c +/- r * a * (sin theta, cos theta)."""
    return weighted_pair(ellipse, r, 0.5, Y)


def pair_to_display(pair: VibrationPair) -> tuple[Srgb8, Srgb8]:
    """Both endpoints converted to display 8-bit sRGB."""
    return (
        xyy_to_srgb8(XyYColor(pair.plus, pair.luminance)),
        xyy_to_srgb8(XyYColor(pair.minus, pair.luminance)),
    )


def _feasible(ellipse: MacAdamEllipse, r: float, w: float, Y: float) -> bool:
    try:
        plus, minus = _endpoints(ellipse, r, w)
    except ValueError:
        # Endpoint left the chromaticity triangle entirely.
        return False
    return in_gamut(XyYColor(plus, Y)) and in_gamut(XyYColor(minus, Y))


def max_gamut_ratio(
    ellipse: MacAdamEllipse,
    w: float,
    Y: float,
    cap: float = DEFAULT_GAMUT_RATIO_CAP,
    tol: float = 1e-3,
) -> float:
    """Largest r keeping the weighted pair in gamut, by bisection to +/- tol.

    Feasibility is monotone in r (endpoints move linearly in chromaticity),
    so bisection is valid. Returns `cap` when even the cap is feasible.

    Raises:
        WeightOutOfRange: w outside (0, 1).
        NoFeasibleRatio: the ellipse center itself is undisplayable at Y.
    """
    if not 0 < w < 1:
        raise WeightOutOfRange(f"weight w={w} outside (0, 1)")
    if not _feasible(ellipse, 0.0, w, Y):
        raise NoFeasibleRatio(f"ellipse {ellipse.index} center out of gamut at Y={Y}")
    if _feasible(ellipse, cap, w, Y):
        return cap
    lo, hi = 0.0, cap
    for _ in range(64):
        if hi - lo <= tol:
            break
        mid = 0.5 * (lo + hi)
        if _feasible(ellipse, mid, w, Y):
            lo = mid
        else:
            hi = mid
    return lo
