"""Display geometry, image preparation, and stimulus frame synthesis.

Frames come in pairs that differ only inside a vibration circle; alternating
them at the display refresh produces the color vibration. Per-pixel
luminance comes from the prepared grayscale image; only chromaticity is
modulated, keeping the pair isoluminant at every pixel.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from PIL import Image

from . import colorimetry
from .colorimetry import (
    XyChromaticity,
    XyYColor,
    gamma_decode,
    gamma_encode,
    linear_rgb_channels,
    xyy_to_srgb8,
)
from .errors import (
    AnisotropicPixels,
    EmptyImage,
    GeometryOverflow,
    OutOfGamut,
    PerPixelGamutViolation,
)
from .psychometry import Condition, ThresholdTable, UserCalibration, interpolate_threshold, interpolate_weight
from .vibration import MacAdamEllipse, base_ellipse, load_default_catalog, weighted_pair

BASE_LUMINANCE = 0.4
GRAY_REMAP_LOW = 60
GRAY_REMAP_HIGH = 196
ROI_DIAMETER_MM = 44.0
VIBRATION_DIAMETER_MM = 80.0
GUIDANCE_TABLE_DIAMETER_MM = 80.0
OUTLINE_WIDTH_PX = 3
DEFAULT_OUTLINE_RGB = (255, 0, 0)

_PIXEL_ASPECT_TOLERANCE = 0.005
_MIN_ALTERNATION_HZ = 25.0


@dataclass(frozen=True)
class DisplayProfile:
    """Physical panel geometry, native resolution, and viewing distance."""

    width_mm: float
    height_mm: float
    width_px: int
    height_px: int
    viewing_distance_mm: float
    refresh_hz: float

    def __post_init__(self):
        for name in ("width_mm", "height_mm", "width_px", "height_px", "viewing_distance_mm", "refresh_hz"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        # Alternating two frames halves the effective frequency, which must
        # stay above the chromatic fusion frequency (~25 Hz).
        if self.refresh_hz < 2 * _MIN_ALTERNATION_HZ:
            raise ValueError(
                f"refresh {self.refresh_hz} Hz gives {self.refresh_hz / 2} Hz alternation, "
                f"below the {_MIN_ALTERNATION_HZ} Hz fusion limit"
            )

    def to_dict(self) -> dict:
        return {
            "width_mm": self.width_mm,
            "height_mm": self.height_mm,
            "width_px": self.width_px,
            "height_px": self.height_px,
            "viewing_distance_mm": self.viewing_distance_mm,
            "refresh_hz": self.refresh_hz,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DisplayProfile":
        return cls(
            width_mm=float(d["width_mm"]),
            height_mm=float(d["height_mm"]),
            width_px=int(d["width_px"]),
            height_px=int(d["height_px"]),
            viewing_distance_mm=float(d["viewing_distance_mm"]),
            refresh_hz=float(d["refresh_hz"]),
        )


def reference_display_profile() -> DisplayProfile:
    """42.5-inch 16:9 4K panel viewed at 500 mm, 60 Hz."""
    diag_mm = 42.5 * 25.4
    width_mm = diag_mm * 16 / math.hypot(16, 9)
    height_mm = diag_mm * 9 / math.hypot(16, 9)
    return DisplayProfile(
        width_mm=width_mm,
        height_mm=height_mm,
        width_px=3840,
        height_px=2160,
        viewing_distance_mm=500.0,
        refresh_hz=60.0,
    )


def load_display_profile(path) -> DisplayProfile:
    with open(path, "r", encoding="utf-8") as f:
        return DisplayProfile.from_dict(json.load(f))


def mm_to_px(profile: DisplayProfile, length_mm: float) -> float:
    """Convert a physical length to pixels, requiring square pixels within 0.5%."""
    sx = profile.width_px / profile.width_mm
    sy = profile.height_px / profile.height_mm
    if abs(sx / sy - 1) > _PIXEL_ASPECT_TOLERANCE:
        raise AnisotropicPixels(f"pixel pitch differs between axes: {1 / sx:.4f} vs {1 / sy:.4f} mm/px")
    return length_mm * sx


def px_to_mm(profile: DisplayProfile, length_px: float) -> float:
    return length_px / mm_to_px(profile, 1.0)


def eccentricity_to_angle(profile: DisplayProfile, l_mm: float) -> float:
    """Visual angle in degrees subtended at l_mm from the display center."""
    if l_mm < 0:
        raise ValueError("eccentricity must be >= 0")
    return math.degrees(math.atan(l_mm / profile.viewing_distance_mm))


class GuidanceCondition(Enum):
    UNMODIFIED = "unmodified"
    UNOBTRUSIVE_VIBRATION = "unobtrusive_vibration"
    OBTRUSIVE_VIBRATION = "obtrusive_vibration"
    EXPLICIT_CIRCLE = "explicit_circle"


@dataclass(frozen=True)
class RoiSpec:
    """Target circle and surrounding vibration circle, in image coordinates."""

    center_px: tuple[float, float]
    roi_diameter_mm: float = ROI_DIAMETER_MM
    vibration_diameter_mm: float = VIBRATION_DIAMETER_MM

    def __post_init__(self):
        if self.vibration_diameter_mm < self.roi_diameter_mm:
            raise ValueError("vibration circle must enclose the ROI circle")


@dataclass
class StimulusFramePair:
    """Two rasters that differ only inside the vibration circle."""

    frame_a: np.ndarray
    frame_b: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.frame_a.shape != self.frame_b.shape:
            raise ValueError("frame shapes differ")


def prepare_image(raster: np.ndarray) -> np.ndarray:
    """Grayscale an image and remap its values from [0, 255] to [60, 196].

    Accepts HxW or HxWx3 uint8 arrays. The compressed range keeps every
    pixel's luminance low enough for in-gamut vibration pairs.
    """
    arr = np.asarray(raster)
    if arr.size == 0:
        raise EmptyImage("image has no pixels")
    if arr.ndim == 3:
        luma = arr[..., 0] * 0.299 + arr[..., 1] * 0.587 + arr[..., 2] * 0.114
        gray = np.floor(luma + 0.5).astype(np.uint8)
    elif arr.ndim == 2:
        gray = arr.astype(np.uint8)
    else:
        raise ValueError(f"expected HxW or HxWx3 raster, got shape {arr.shape}")
    span = GRAY_REMAP_HIGH - GRAY_REMAP_LOW
    remapped = np.floor(GRAY_REMAP_LOW + gray.astype(np.float64) * span / 255 + 0.5)
    return remapped.astype(np.uint8)


def _isoluminant_srgb8(chroma: XyChromaticity, Y: float) -> tuple[int, int, int]:
    """8-bit color of an in-gamut chromaticity at Y, quantized to preserve Y.

    Rounding each channel independently can shift the decoded luminance by
    several quantization steps, which would break the isoluminance of a
    vibrating pair. Among the floor/ceil rounding corners, take the one whose
    decoded Y lands closest to the target (ties broken by distance to the
    unrounded color, then lexicographically, so the choice is deterministic).
    """
    channels = [min(max(v, 0.0), 1.0) for v in linear_rgb_channels(XyYColor(chroma, Y))]
    scaled = [float(gamma_encode(v)) * 255 for v in channels]
    weights = colorimetry.LINEAR_SRGB_TO_XYZ[1]
    options = [
        sorted({int(min(max(f(s), 0), 255)) for f in (math.floor, math.ceil)})
        for s in scaled
    ]
    best_key, best = None, None
    for corner in itertools.product(*options):
        y = float(sum(wt * gamma_decode(c / 255) for wt, c in zip(weights, corner)))
        key = (abs(y - Y), sum((c - s) ** 2 for c, s in zip(corner, scaled)), corner)
        if best_key is None or key < best_key:
            best_key, best = key, corner
    return best


def _disk_mask(height: int, width: int, cx: float, cy: float, radius_px: float) -> np.ndarray:
    yy, xx = np.ogrid[:height, :width]
    return (xx - cx) ** 2 + (yy - cy) ** 2 <= radius_px**2


def _resolve_ellipse(ellipse: MacAdamEllipse | None) -> MacAdamEllipse:
    if ellipse is not None:
        return ellipse
    return base_ellipse(load_default_catalog())


def _threshold_circle_centers(
    profile: DisplayProfile, l_mm: float
) -> list[tuple[float, float]]:
    cx = (profile.width_px - 1) / 2
    cy = (profile.height_px - 1) / 2
    if l_mm == 0:
        return [(cx, cy)]
    l_px = mm_to_px(profile, l_mm)
    # Indices 1..4: up, right, down, left.
    return [(cx, cy - l_px), (cx + l_px, cy), (cx, cy + l_px), (cx - l_px, cy)]


def render_threshold_stimulus(
    profile: DisplayProfile,
    r: float,
    w: float,
    d_mm: float,
    l_mm: float,
    vibrating_index: int = 1,
    ellipse: MacAdamEllipse | None = None,
    Y: float = BASE_LUMINANCE,
) -> StimulusFramePair:
    """Render the circle stimulus of the threshold protocol.

    One circle at the display center for l = 0, otherwise four circles at
    eccentricity l with only `vibrating_index` (1..4) vibrating.

    Raises:
        OutOfGamut: the pair at (r, w, Y) is not displayable.
        GeometryOverflow: a circle extends beyond the panel.
    """
    ellipse = _resolve_ellipse(ellipse)
    pair = weighted_pair(ellipse, r, w, Y)
    solid = xyy_to_srgb8(XyYColor(ellipse.center, Y)).as_tuple()
    color_a = _isoluminant_srgb8(pair.plus, Y)
    color_b = _isoluminant_srgb8(pair.minus, Y)

    centers = _threshold_circle_centers(profile, l_mm)
    if not 1 <= vibrating_index <= len(centers):
        raise ValueError(f"vibrating_index {vibrating_index} invalid for {len(centers)} circles")
    radius_px = mm_to_px(profile, d_mm) / 2
    h, wid = profile.height_px, profile.width_px
    for cx, cy in centers:
        if cx - radius_px < 0 or cx + radius_px > wid - 1 or cy - radius_px < 0 or cy + radius_px > h - 1:
            raise GeometryOverflow(f"circle at ({cx:.0f}, {cy:.0f}) r={radius_px:.0f}px exceeds panel {wid}x{h}")

    frame_a = np.empty((h, wid, 3), dtype=np.uint8)
    frame_a[:] = solid
    frame_b = frame_a.copy()
    for i, (cx, cy) in enumerate(centers, start=1):
        mask = _disk_mask(h, wid, cx, cy, radius_px)
        if i == vibrating_index:
            frame_a[mask] = color_a
            frame_b[mask] = color_b
        else:
            frame_a[mask] = solid
            frame_b[mask] = solid

    metadata = {
        "kind": "threshold",
        "r": r,
        "w": w,
        "Y": Y,
        "d_mm": d_mm,
        "l_mm": l_mm,
        "d_px": 2 * radius_px,
        "vibrating_index": vibrating_index,
        "circle_centers_px": [[cx, cy] for cx, cy in centers],
        "background_rgb": list(solid),
        "pair_rgb": [list(color_a), list(color_b)],
    }
    return StimulusFramePair(frame_a=frame_a, frame_b=frame_b, metadata=metadata)


def render_inverted(frame: np.ndarray, circles: list[tuple[float, float, float]]) -> np.ndarray:
    """Afterimage-reduction frame: listed circles (cx, cy, diameter_px) turn black."""
    out = frame.copy()
    h, w = frame.shape[:2]
    for cx, cy, d_px in circles:
        out[_disk_mask(h, w, cx, cy, d_px / 2)] = 0
    return out


def _chroma_lut(levels: np.ndarray, chroma: XyChromaticity) -> dict[int, tuple[int, int, int]]:
    """Map each gray level to the 8-bit color of `chroma` at that level's luminance."""
    lut = {}
    for v in levels:
        Yp = float(gamma_decode(v / 255.0))
        lut[int(v)] = xyy_to_srgb8(XyYColor(chroma, Yp)).as_tuple()
    return lut


def _apply_lut(gray: np.ndarray, lut: dict[int, tuple[int, int, int]]) -> np.ndarray:
    table = np.zeros((256, 3), dtype=np.uint8)
    for v, rgb in lut.items():
        table[v] = rgb
    return table[gray]


def image_eccentricity_mm(image_shape, roi: RoiSpec, profile: DisplayProfile) -> float:
    """Eccentricity of the ROI center assuming the image is centered on the panel."""
    h, w = image_shape[:2]
    dx = roi.center_px[0] - (w - 1) / 2
    dy = roi.center_px[1] - (h - 1) / 2
    return px_to_mm(profile, math.hypot(dx, dy))


def render_guidance(
    image: np.ndarray,
    roi: RoiSpec,
    condition: GuidanceCondition,
    table: ThresholdTable | None,
    cal: UserCalibration | None,
    profile: DisplayProfile,
    ellipse: MacAdamEllipse | None = None,
    clamp_out_of_gamut: bool = False,
    outline_rgb: tuple[int, int, int] = DEFAULT_OUTLINE_RGB,
) -> StimulusFramePair:
    """Render one guidance-condition frame pair from a prepared grayscale image.

    All pixels are colorized at the neutral base chromaticity with luminance
    taken from their gray level; vibration conditions additionally swing the
    chromaticity of pixels inside the vibration circle between the weighted
    pair endpoints. Amplitude comes from the 75% threshold row for the
    80 mm vibration circle (Awareness for unobtrusive, Discomfort for
    obtrusive), interpolated to the ROI's eccentricity.

    Raises:
        OutsideInterpolationRange: ROI eccentricity not covered by the table.
        PerPixelGamutViolation: a pixel's pair leaves the gamut and clamping
            is disabled.
        GeometryOverflow: vibration circle not fully inside the image.
    """
    gray = np.asarray(image)
    if gray.size == 0:
        raise EmptyImage("image has no pixels")
    if gray.ndim != 2:
        raise ValueError("render_guidance expects a prepared HxW grayscale image")
    ellipse = _resolve_ellipse(ellipse)
    h, w = gray.shape
    cx, cy = roi.center_px
    vib_radius_px = mm_to_px(profile, roi.vibration_diameter_mm) / 2
    if condition in (GuidanceCondition.UNOBTRUSIVE_VIBRATION, GuidanceCondition.OBTRUSIVE_VIBRATION):
        if cx - vib_radius_px < 0 or cx + vib_radius_px > w - 1 or cy - vib_radius_px < 0 or cy + vib_radius_px > h - 1:
            raise GeometryOverflow("vibration circle extends beyond the image")

    levels = np.unique(gray)
    try:
        neutral_lut = _chroma_lut(levels, ellipse.center)
    except OutOfGamut as exc:
        raise PerPixelGamutViolation(f"neutral colorization out of gamut: {exc}") from exc
    neutral = _apply_lut(gray, neutral_lut)

    metadata = {
        "kind": "guidance",
        "condition": condition.value,
        "roi_center_px": list(roi.center_px),
        "roi_diameter_mm": roi.roi_diameter_mm,
        "vibration_diameter_mm": roi.vibration_diameter_mm,
        "roi_diameter_px": mm_to_px(profile, roi.roi_diameter_mm),
        "vibration_diameter_px": 2 * vib_radius_px,
        "eccentricity_mm": image_eccentricity_mm(gray.shape, roi, profile),
        "image_sha256": hashlib.sha256(np.ascontiguousarray(gray).tobytes()).hexdigest(),
        "r": 0.0,
        "w": 0.5,
        "clamped_levels": [],
    }

    if condition is GuidanceCondition.UNMODIFIED:
        return StimulusFramePair(frame_a=neutral, frame_b=neutral.copy(), metadata=metadata)

    if condition is GuidanceCondition.EXPLICIT_CIRCLE:
        frame = neutral.copy()
        roi_radius_px = mm_to_px(profile, roi.roi_diameter_mm) / 2
        outer = _disk_mask(h, w, cx, cy, roi_radius_px + OUTLINE_WIDTH_PX / 2)
        inner = _disk_mask(h, w, cx, cy, roi_radius_px - OUTLINE_WIDTH_PX / 2)
        frame[outer & ~inner] = outline_rgb
        return StimulusFramePair(frame_a=frame, frame_b=frame.copy(), metadata=metadata)

    if table is None or cal is None:
        raise ValueError("vibration conditions need a threshold table and a user calibration")
    fit_condition = (
        Condition.AWARENESS
        if condition is GuidanceCondition.UNOBTRUSIVE_VIBRATION
        else Condition.DISCOMFORT
    )
    l_mm = metadata["eccentricity_mm"]
    r = interpolate_threshold(table, fit_condition, 0.75, GUIDANCE_TABLE_DIAMETER_MM, l_mm)
    w_fit = interpolate_weight(cal, r)
    metadata["r"] = r
    metadata["w"] = w_fit

    mask = _disk_mask(h, w, cx, cy, vib_radius_px)
    roi_levels = np.unique(gray[mask])
    lut_a, lut_b = {}, {}
    clamped = []
    for v in roi_levels:
        Yp = float(gamma_decode(v / 255.0))
        r_eff = r
        try:
            pair = weighted_pair(ellipse, r_eff, w_fit, Yp)
        except OutOfGamut as exc:
            if not clamp_out_of_gamut:
                raise PerPixelGamutViolation(
                    f"gray level {v} (Y={Yp:.4f}): vibration pair at r={r:.2f} out of gamut"
                ) from exc
            r_eff = max(0.0, (exc.max_feasible_ratio or 0.0) - 1e-3)
            pair = weighted_pair(ellipse, r_eff, w_fit, Yp)
            clamped.append([int(v), r_eff])
        lut_a[int(v)] = _isoluminant_srgb8(pair.plus, Yp)
        lut_b[int(v)] = _isoluminant_srgb8(pair.minus, Yp)
    metadata["clamped_levels"] = clamped

    frame_a = neutral.copy()
    frame_b = neutral.copy()
    frame_a[mask] = _apply_lut(gray, lut_a)[mask]
    frame_b[mask] = _apply_lut(gray, lut_b)[mask]
    return StimulusFramePair(frame_a=frame_a, frame_b=frame_b, metadata=metadata)


def pixel_luminance(frame: np.ndarray) -> np.ndarray:
    """Per-pixel relative luminance Y recovered from an 8-bit sRGB frame."""
    linear = gamma_decode(frame.astype(np.float64) / 255.0)
    weights = colorimetry.LINEAR_SRGB_TO_XYZ[1]
    return linear @ weights


def save_frame_pair(pair: StimulusFramePair, path_a, path_b, metadata_path=None) -> None:
    """Write both frames as PNG plus an optional JSON metadata sidecar."""
    Image.fromarray(pair.frame_a).save(path_a, format="PNG")
    Image.fromarray(pair.frame_b).save(path_b, format="PNG")
    if metadata_path is not None:
        with open(metadata_path, "w", encoding="utf-8") as f:
            json.dump(pair.metadata, f, indent=2, sort_keys=True)
            f.write("\n")


def load_frame(path) -> np.ndarray:
    return np.asarray(Image.open(path).convert("RGB"))
