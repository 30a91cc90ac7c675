"""Gaze-recording analytics: fiducial homography, mapping, and metrics.

Gaze samples arrive in eye-tracker camera coordinates; the four corners of
on-screen fiducial markers give an exact 4-point homography into display
coordinates. Metrics follow the guidance study: completion time with a
hard limit, and the explored-area ratio built from central-visual-field
disks around each gaze point.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateConfiguration, PointAtInfinity

_W_EPSILON = 1e-12
_DET_EPSILON = 1e-12

GAZE_FORMAT_HEADER = "# colorvib-gaze v1"


@dataclass(frozen=True)
class GazeSample:
    t: float  # seconds since trial start
    x: float
    y: float
    valid: bool = True


@dataclass(frozen=True)
class MarkerObservation:
    """Four tracker-camera corner points with known display counterparts."""

    source: tuple[tuple[float, float], ...]
    target: tuple[tuple[float, float], ...]
    t: float = 0.0

    def __post_init__(self):
        if len(self.source) != 4 or len(self.target) != 4:
            raise ValueError("marker observation needs exactly 4 correspondences")


@dataclass(frozen=True)
class Homography:
    """3x3 projective matrix, normalized so the bottom-right entry is 1."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.shape != (3, 3):
            raise ValueError("homography must be 3x3")
        if abs(m[2, 2]) < _W_EPSILON:
            raise ValueError("homography bottom-right entry vanishes")
        m = m / m[2, 2]
        if abs(np.linalg.det(m)) < _DET_EPSILON:
            raise ValueError("homography not invertible")
        object.__setattr__(self, "matrix", m)

    def inverse(self) -> "Homography":
        return Homography(np.linalg.inv(self.matrix))

    def apply(self, x: float, y: float) -> tuple[float, float]:
        hx, hy, hw = self.matrix @ (x, y, 1.0)
        if abs(hw) < _W_EPSILON:
            raise PointAtInfinity(f"point ({x}, {y}) maps to infinity")
        return (hx / hw, hy / hw)


def _collinear(p0, p1, p2, tol=1e-9) -> bool:
    area = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1])
    return abs(area) <= tol


def estimate_homography(obs: MarkerObservation) -> Homography:
    """Exact 4-point projective solve (direct linear transform).

    Raises:
        DegenerateConfiguration: any three source points collinear, or the
            linear system is singular.
    """
    for i in range(4):
        pts = [obs.source[j] for j in range(4) if j != i]
        if _collinear(*pts):
            raise DegenerateConfiguration(f"source points {pts} are collinear")

    A = np.zeros((8, 8))
    b = np.zeros(8)
    for i, ((sx, sy), (tx, ty)) in enumerate(zip(obs.source, obs.target)):
        A[2 * i] = [sx, sy, 1, 0, 0, 0, -sx * tx, -sy * tx]
        A[2 * i + 1] = [0, 0, 0, sx, sy, 1, -sx * ty, -sy * ty]
        b[2 * i] = tx
        b[2 * i + 1] = ty
    try:
        h = np.linalg.solve(A, b)
    except np.linalg.LinAlgError as exc:
        raise DegenerateConfiguration(f"correspondences admit no homography: {exc}") from exc
    matrix = np.append(h, 1.0).reshape(3, 3)
    try:
        return Homography(matrix)
    except ValueError as exc:
        raise DegenerateConfiguration(str(exc)) from exc


@dataclass
class MappedGaze:
    """Display-space gaze points plus drop accounting."""

    points: np.ndarray  # shape (N, 2)
    dropped_invalid: int = 0
    dropped_at_infinity: int = 0

    @property
    def dropped(self) -> int:
        return self.dropped_invalid + self.dropped_at_infinity


def map_gaze(h: Homography, samples) -> MappedGaze:
    """Apply the homography to every valid sample; drop and count the rest."""
    points = []
    dropped_invalid = 0
    dropped_at_infinity = 0
    for s in samples:
        if not s.valid:
            dropped_invalid += 1
            continue
        try:
            points.append(h.apply(s.x, s.y))
        except PointAtInfinity:
            dropped_at_infinity += 1
    return MappedGaze(
        points=np.array(points, dtype=float).reshape(-1, 2),
        dropped_invalid=dropped_invalid,
        dropped_at_infinity=dropped_at_infinity,
    )


def map_recording(samples, observations) -> MappedGaze:
    """Map a sample stream using the most recent marker observation (zero-order hold).

    Samples before the first observation are dropped and counted as invalid.
    """
    observations = sorted(observations, key=lambda o: o.t)
    homographies = [(o.t, estimate_homography(o)) for o in observations]
    result = MappedGaze(points=np.empty((0, 2)))
    points = []
    for s in sorted(samples, key=lambda s: s.t):
        current = None
        for t, h in homographies:
            if t <= s.t:
                current = h
            else:
                break
        if current is None:
            result.dropped_invalid += 1
            continue
        mapped = map_gaze(current, [s])
        result.dropped_invalid += mapped.dropped_invalid
        result.dropped_at_infinity += mapped.dropped_at_infinity
        points.extend(mapped.points.tolist())
    result.points = np.array(points, dtype=float).reshape(-1, 2)
    return result


def central_field_radius_px(
    viewing_distance_mm: float, px_per_mm: float, field_diameter_deg: float = 5.0
) -> float:
    """Pixel radius of the central-visual-field disk (diameter semantics)."""
    radius_mm = viewing_distance_mm * math.tan(math.radians(field_diameter_deg / 2))
    return radius_mm * px_per_mm


def explored_ratio(
    points: np.ndarray, region_size: tuple[int, int], disk_radius_px: float
) -> float:
    """Fraction of the region covered by disks around in-region gaze points.

    Args:
        points: (N, 2) display-space gaze points (x, y).
        region_size: (width, height) of the analysis region in pixels;
            points use the region's own coordinate frame.
        disk_radius_px: central-visual-field radius in pixels.
    """
    if disk_radius_px <= 0:
        raise ValueError("disk radius must be positive")
    width, height = region_size
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    if points.size == 0:
        return 0.0
    covered = np.zeros((height, width), dtype=bool)

    radius_int = int(math.ceil(disk_radius_px))
    span = np.arange(-radius_int, radius_int + 1)
    template = (span[None, :] ** 2 + span[:, None] ** 2) <= disk_radius_px**2

    for x, y in points:
        if not (0 <= x < width and 0 <= y < height):
            continue
        cx, cy = int(round(x)), int(round(y))
        x0, x1 = max(0, cx - radius_int), min(width, cx + radius_int + 1)
        y0, y1 = max(0, cy - radius_int), min(height, cy + radius_int + 1)
        tx0, ty0 = x0 - (cx - radius_int), y0 - (cy - radius_int)
        covered[y0:y1, x0:x1] |= template[ty0 : ty0 + (y1 - y0), tx0 : tx0 + (x1 - x0)]
    return float(covered.sum()) / float(width * height)


def completion_time(correct: bool, latency: float | None, limit_s: float = 30.0) -> float:
    """Guidance completion time: correct clicks keep their latency, everything else gets the limit."""
    if correct and latency is not None and latency <= limit_s:
        return float(latency)
    return float(limit_s)


def save_gaze_samples(samples, stream) -> None:
    stream.write(GAZE_FORMAT_HEADER + "\n")
    for s in samples:
        stream.write(f"{s.t!r} {s.x!r} {s.y!r} {int(s.valid)}\n")


def load_gaze_samples(stream) -> list[GazeSample]:
    lines = stream.read().splitlines()
    if not lines or lines[0].strip() != GAZE_FORMAT_HEADER:
        raise ValueError(f"expected header {GAZE_FORMAT_HEADER!r}")
    samples = []
    for ln in lines[1:]:
        if not ln.strip():
            continue
        t, x, y, valid = ln.split()
        samples.append(GazeSample(t=float(t), x=float(x), y=float(y), valid=bool(int(valid))))
    return samples


def save_marker_track(observations, stream) -> None:
    for o in observations:
        stream.write(
            json.dumps({"t": o.t, "source": list(map(list, o.source)), "target": list(map(list, o.target))})
            + "\n"
        )


def load_marker_track(stream) -> list[MarkerObservation]:
    observations = []
    for ln in stream.read().splitlines():
        if not ln.strip():
            continue
        rec = json.loads(ln)
        observations.append(
            MarkerObservation(
                source=tuple(map(tuple, rec["source"])),
                target=tuple(map(tuple, rec["target"])),
                t=float(rec.get("t", 0.0)),
            )
        )
    return observations
