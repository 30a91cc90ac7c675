"""End-to-end acceptance checks, one test per release criterion.

Run with `pytest -v tests/test_acceptance.py` to get one pass/fail line per
criterion. Each test is self-contained and uses independently computed
oracles rather than values echoed from the implementation.
"""

import math
import random

import numpy as np
import pytest

from colorvib.colorimetry import XyChromaticity, XyYColor, in_gamut, xyy_to_srgb8
from colorvib.gazeanalysis import (
    MarkerObservation,
    completion_time,
    estimate_homography,
    explored_ratio,
)
from colorvib.psychometry import (
    Condition,
    PerceptState,
    TrialResponse,
    UserCalibration,
    fit_curve,
    interpolate_threshold,
    threshold_at,
)
from colorvib.session import SessionLog, ThresholdTrialRecord, persist, plan_threshold_study
from colorvib.stimulus import (
    DisplayProfile,
    GuidanceCondition,
    RoiSpec,
    eccentricity_to_angle,
    mm_to_px,
    pixel_luminance,
    prepare_image,
    render_guidance,
    render_threshold_stimulus,
)
from colorvib.vibration import max_gamut_ratio

from conftest import make_reference_table


def test_color_anchor(base):
    """xyY (0.305, 0.323, 0.4) converts to (163, 168, 173) within +/- 1 per channel."""
    rgb = xyy_to_srgb8(XyYColor(XyChromaticity(0.305, 0.323), 0.4)).as_tuple()
    expected = (163, 168, 173)
    assert all(abs(got - want) <= 1 for got, want in zip(rgb, expected)), (
        f"got {rgb}, expected {expected} within +/- 1"
    )


def test_gamut_claim(base):
    """Base-ellipse pairs stay displayable up to at least r = 50 at Y = 0.4."""
    reported = max_gamut_ratio(base, 0.5, 0.4)
    assert reported >= 50.0

    # Independent brute-force scan over the endpoints themselves.
    def feasible(r):
        ux, uy = base.axis_direction
        dx, dy = r * base.major * ux, r * base.major * uy
        try:
            plus = XyChromaticity(0.305 + dx, 0.323 + dy)
            minus = XyChromaticity(0.305 - dx, 0.323 - dy)
        except ValueError:
            return False
        return in_gamut(XyYColor(plus, 0.4)) and in_gamut(XyYColor(minus, 0.4))

    scan = [r / 2 for r in range(0, 121)]  # 0, 0.5, ..., 60
    scan_max = max(r for r in scan if feasible(r))
    assert scan_max >= 50.0
    # The bisection result agrees with the scan to within one scan step.
    assert abs(reported - scan_max) <= 0.5 + 1e-3


def test_visual_angle_anchors():
    """Eccentricities 71/121/171 mm subtend 8.08/13.60/18.88 degrees at 500 mm."""
    profile = DisplayProfile(
        width_mm=941.0, height_mm=529.0, width_px=1882, height_px=1058,
        viewing_distance_mm=500.0, refresh_hz=60.0,
    )
    for l_mm, expected in ((71.0, 8.08), (121.0, 13.60), (171.0, 18.88)):
        got = eccentricity_to_angle(profile, l_mm)
        assert abs(got - expected) <= 0.02, f"l={l_mm}: got {got:.4f}, expected {expected}"


def test_fit_recovery():
    """Logistic fits recover midpoint 20 / slope 0.3 from synthetic data."""
    levels = [float(r) for r in range(0, 55, 5)]
    hits = 0
    for seed in range(20):
        rng = random.Random(1000 + seed)
        responses = []
        for r in levels:
            p = 1.0 / (1.0 + math.exp(-0.3 * (r - 20.0)))
            for _ in range(200):
                state = (
                    PerceptState.DIFFERENT_NOT_FLICKERING
                    if rng.random() < p
                    else PerceptState.SOLID_COLOR
                )
                responses.append(TrialResponse(r=r, d=60.0, l=0.0, state=state))
        curve = fit_curve(responses, Condition.AWARENESS)
        if abs(curve.midpoint - 20.0) <= 0.5:
            hits += 1
        # Closed-form identity for the threshold offset, per fit.
        offset = threshold_at(curve, 0.75) - threshold_at(curve, 0.5)
        assert abs(offset - math.log(3) / curve.slope) <= 1e-9
    assert hits >= 18, f"only {hits}/20 seeds recovered the midpoint within +/- 0.5"


def test_interpolation_fixture():
    """Grid thresholds reproduce bitwise; midpoint queries equal arithmetic means."""
    table = make_reference_table()
    for (cond, p, d, l), r_th in table.entries.items():
        assert interpolate_threshold(table, cond, p, d, l) == r_th
    for cond in Condition:
        for p in (0.5, 0.75):
            for d in (60.0, 80.0, 100.0):
                v71 = table.get(cond, p, d, 71.0)
                v121 = table.get(cond, p, d, 121.0)
                v171 = table.get(cond, p, d, 171.0)
                assert interpolate_threshold(table, cond, p, d, 96.0) == pytest.approx(
                    (v71 + v121) / 2, abs=1e-12
                )
                assert interpolate_threshold(table, cond, p, d, 146.0) == pytest.approx(
                    (v121 + v171) / 2, abs=1e-12
                )


def test_stimulus_invariants():
    """Across 50 randomized cases: differences confined to the vibration
    circle, per-pixel isoluminance inside it, r=0 bitwise equality, and the
    rendered circle diameter within one pixel of its physical size."""
    table = make_reference_table()
    cal = UserCalibration(
        participant="acceptance",
        fits={10.0: 0.5, 20.0: 0.5, 30.0: 0.5, 40.0: 0.5, 50.0: 0.5},
    )
    rng = np.random.default_rng(20240601)
    conditions = list(GuidanceCondition)
    profile = DisplayProfile(
        width_mm=500.0, height_mm=500.0, width_px=1000, height_px=1000,
        viewing_distance_mm=500.0, refresh_hz=60.0,
    )
    px_per_mm = 2.0
    vib_diameter_px = mm_to_px(profile, 80.0)

    for case in range(50):
        size = int(rng.integers(360, 440)) * 2  # even, 720..878 px
        blocks = rng.integers(0, 256, size=(size // 24 + 1, size // 24 + 1))
        raw = np.kron(blocks, np.ones((24, 24)))[:size, :size].astype(np.uint8)
        image = prepare_image(raw)
        center = (size - 1) / 2
        condition = conditions[int(rng.integers(0, 4))]
        if condition in (GuidanceCondition.UNOBTRUSIVE_VIBRATION, GuidanceCondition.OBTRUSIVE_VIBRATION) and rng.random() < 0.5:
            # Peripheral ROI at a tabulated eccentricity, axis-aligned.
            l_mm = float(rng.uniform(71.0, min(171.0, (size / 2 - 90) / px_per_mm)))
            angle = rng.uniform(0, 2 * math.pi)
            roi_center = (center + l_mm * px_per_mm * math.cos(angle),
                          center + l_mm * px_per_mm * math.sin(angle))
        else:
            roi_center = (center, center)
        roi = RoiSpec(center_px=roi_center)
        pair = render_guidance(
            image=image, roi=roi, condition=condition,
            table=table, cal=cal, profile=profile,
        )

        diff = np.any(pair.frame_a != pair.frame_b, axis=-1)
        if condition in (GuidanceCondition.UNMODIFIED, GuidanceCondition.EXPLICIT_CIRCLE):
            # Zero amplitude: frames are bitwise equal.
            assert pair.metadata["r"] == 0.0
            assert np.array_equal(pair.frame_a, pair.frame_b), f"case {case}"
            continue

        # 1. Differences confined to the vibration circle.
        ys, xs = np.nonzero(diff)
        cx, cy = roi_center
        radius = vib_diameter_px / 2
        assert np.all((xs - cx) ** 2 + (ys - cy) ** 2 <= (radius + 1.0) ** 2), f"case {case}"

        # 2. Per-pixel luminance equality inside the circle.
        ya = pixel_luminance(pair.frame_a)
        yb = pixel_luminance(pair.frame_b)
        assert np.max(np.abs(ya - yb)) < 1 / 255, f"case {case}"

        # 3. Rendered circle diameter within +/- 1 px of mm_to_px(80 mm).
        width = xs.max() - xs.min() + 1
        height = ys.max() - ys.min() + 1
        assert abs(width - vib_diameter_px) <= 1.0, f"case {case}: width {width}"
        assert abs(height - vib_diameter_px) <= 1.0, f"case {case}: height {height}"

    # r = 0 bitwise equality on the circle stimulus renderer as well.
    pair = render_threshold_stimulus(profile, r=0.0, w=0.5, d_mm=60.0, l_mm=0.0)
    assert np.array_equal(pair.frame_a, pair.frame_b)


def test_schedule_exhaustiveness():
    """Every seed yields exactly the 132 unique (r, d, l) combinations."""
    expected = {
        (float(r), d, l)
        for r in range(0, 55, 5)
        for d in (60.0, 80.0, 100.0)
        for l in (0.0, 71.0, 121.0, 171.0)
    }
    rng = random.Random(7)
    for _ in range(100):
        plan = plan_threshold_study(rng.randrange(2**31))
        triples = [(t.r, t.d, t.l) for t in plan.trials]
        assert len(triples) == 132
        assert set(triples) == expected


def test_gaze_oracles():
    """Homography corner round trip, disk-area ratio, and completion rule."""
    # 1. Four-corner round trip within 1e-8 for a perspective-distorted quad.
    source = ((0.0, 0.0), (640.0, 4.0), (636.0, 478.0), (2.0, 482.0))
    target = ((100.0, 50.0), (3740.0, 80.0), (3700.0, 2100.0), (130.0, 2110.0))
    h = estimate_homography(MarkerObservation(source=source, target=target))
    for (sx, sy), (tx, ty) in zip(source, target):
        gx, gy = h.apply(sx, sy)
        assert math.hypot(gx - tx, gy - ty) <= 1e-8

    # 2. One central disk covers pi r^2 / A of the region within 2%.
    ratio = explored_ratio(np.array([[400.0, 400.0]]), region_size=(800, 800), disk_radius_px=100.0)
    expected = math.pi * 100.0**2 / 800**2
    assert abs(ratio - expected) / expected <= 0.02

    # 3. Completion-time rule table, exact.
    assert completion_time(correct=True, latency=7.25) == 7.25
    assert completion_time(correct=True, latency=29.999) == 29.999
    assert completion_time(correct=False, latency=7.25) == 30.0
    assert completion_time(correct=False, latency=None) == 30.0
    assert completion_time(correct=True, latency=30.001) == 30.0


def test_persistence(tmp_path):
    """A 132-record log survives a torn final write and re-serializes byte-identically."""
    path = tmp_path / "session.log"
    log = SessionLog(path)
    rng = random.Random(3)
    plan = plan_threshold_study(99)
    for trial in plan.trials:
        persist(log, ThresholdTrialRecord(
            trial_index=trial.index, r=trial.r, d=trial.d, l=trial.l,
            state=rng.choice(list(PerceptState)),
            location_chosen=trial.vibrating_index,
            location_actual=trial.vibrating_index,
            latency=rng.uniform(0.3, 5.0),
        ))
    original = path.read_bytes()

    # Torn final write: recovery drops only the partial line.
    with open(path, "a") as f:
        f.write('{"crc": 1, "kind": "threshold_trial", "data": {"trial')
    recovered = SessionLog(path)
    assert recovered.truncated_tail
    assert len(recovered.records) == 132
    assert recovered.serialize().encode() == original

    # Byte-identical re-serialization through a fresh file.
    path2 = tmp_path / "again.log"
    path2.write_text(recovered.serialize())
    assert SessionLog(path2).serialize().encode() == original
