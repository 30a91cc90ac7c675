import io
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from colorvib.errors import DegenerateConfiguration, PointAtInfinity
from colorvib.gazeanalysis import (
    GazeSample,
    Homography,
    MarkerObservation,
    central_field_radius_px,
    completion_time,
    estimate_homography,
    explored_ratio,
    load_gaze_samples,
    load_marker_track,
    map_gaze,
    map_recording,
    save_gaze_samples,
    save_marker_track,
)

UNIT_SQUARE = ((0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0))


def quad_observation(target, t=0.0):
    return MarkerObservation(source=UNIT_SQUARE, target=tuple(target), t=t)


class TestHomography:
    def test_identity(self):
        h = Homography(np.eye(3))
        assert h.apply(3.0, 4.0) == (3.0, 4.0)

    def test_normalization(self):
        h = Homography(2.0 * np.eye(3))
        assert h.matrix[2, 2] == 1.0
        assert h.apply(1.0, 1.0) == (1.0, 1.0)

    def test_inverse_round_trip(self):
        m = np.array([[2.0, 0.1, 3.0], [0.0, 1.5, -2.0], [0.001, 0.0, 1.0]])
        h = Homography(m)
        x, y = h.apply(5.0, 7.0)
        back = h.inverse().apply(x, y)
        assert back == pytest.approx((5.0, 7.0), abs=1e-10)

    def test_singular_rejected(self):
        with pytest.raises(ValueError):
            Homography(np.zeros((3, 3)))
        with pytest.raises(ValueError):
            Homography(np.array([[1, 0, 0], [2, 0, 0], [0, 0, 1.0]]))

    def test_point_at_infinity(self):
        m = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [-1.0, 0.0, 1.0]])
        h = Homography(m)
        with pytest.raises(PointAtInfinity):
            h.apply(1.0, 0.0)


class TestEstimateHomography:
    def test_exact_corner_reproduction(self):
        target = ((10.0, 20.0), (110.0, 25.0), (105.0, 115.0), (5.0, 120.0))
        h = estimate_homography(quad_observation(target))
        for (sx, sy), (tx, ty) in zip(UNIT_SQUARE, target):
            assert h.apply(sx, sy) == pytest.approx((tx, ty), abs=1e-8)

    def test_affine_case(self):
        # Pure scaling + translation has an exact closed-form answer.
        target = tuple((2 * x + 5, 3 * y - 1) for x, y in UNIT_SQUARE)
        h = estimate_homography(quad_observation(target))
        assert h.matrix == pytest.approx(
            np.array([[2, 0, 5], [0, 3, -1], [0, 0, 1]]), abs=1e-10
        )

    def test_collinear_rejected(self):
        obs = MarkerObservation(
            source=((0, 0), (1, 1), (2, 2), (0, 1)),
            target=UNIT_SQUARE,
        )
        with pytest.raises(DegenerateConfiguration):
            estimate_homography(obs)

    def test_wrong_count_rejected(self):
        with pytest.raises(ValueError):
            MarkerObservation(source=UNIT_SQUARE[:3], target=UNIT_SQUARE[:3])

    @given(
        st.lists(st.floats(-5.0, 5.0), min_size=8, max_size=8),
    )
    @settings(max_examples=60, deadline=None)
    def test_round_trip_random_quads(self, jitter):
        base = [(0.0, 0.0), (10.0, 0.0), (10.0, 10.0), (0.0, 10.0)]
        target = tuple(
            (x + jitter[2 * i], y + jitter[2 * i + 1]) for i, (x, y) in enumerate(base)
        )
        obs = MarkerObservation(source=tuple(base), target=target)
        try:
            h = estimate_homography(obs)
        except DegenerateConfiguration:
            return
        for (sx, sy), (tx, ty) in zip(base, target):
            assert h.apply(sx, sy) == pytest.approx((tx, ty), abs=1e-7)


class TestMapGaze:
    def test_invalid_samples_dropped(self):
        h = Homography(np.eye(3))
        samples = [
            GazeSample(t=0.0, x=1.0, y=2.0),
            GazeSample(t=0.1, x=9.0, y=9.0, valid=False),
        ]
        mapped = map_gaze(h, samples)
        assert mapped.points.shape == (1, 2)
        assert mapped.dropped_invalid == 1
        assert mapped.dropped == 1

    def test_points_at_infinity_dropped(self):
        m = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [-1.0, 0.0, 1.0]])
        mapped = map_gaze(Homography(m), [GazeSample(t=0, x=1.0, y=0.0)])
        assert mapped.points.shape == (0, 2)
        assert mapped.dropped_at_infinity == 1


class TestMapRecording:
    def test_zero_order_hold(self):
        # Two marker observations: identity, then a +10 x-shift at t=1.
        shift = tuple((x + 10, y) for x, y in UNIT_SQUARE)
        observations = [
            quad_observation(UNIT_SQUARE, t=0.0),
            quad_observation(shift, t=1.0),
        ]
        samples = [
            GazeSample(t=0.5, x=0.5, y=0.5),
            GazeSample(t=1.0, x=0.5, y=0.5),
            GazeSample(t=2.0, x=0.5, y=0.5),
        ]
        mapped = map_recording(samples, observations)
        assert mapped.points[0] == pytest.approx([0.5, 0.5], abs=1e-9)
        assert mapped.points[1] == pytest.approx([10.5, 0.5], abs=1e-9)
        assert mapped.points[2] == pytest.approx([10.5, 0.5], abs=1e-9)

    def test_samples_before_first_observation_dropped(self):
        observations = [quad_observation(UNIT_SQUARE, t=1.0)]
        samples = [GazeSample(t=0.0, x=0.1, y=0.1), GazeSample(t=1.5, x=0.1, y=0.1)]
        mapped = map_recording(samples, observations)
        assert mapped.points.shape == (1, 2)
        assert mapped.dropped_invalid == 1


class TestCentralField:
    def test_default_5_degree_diameter(self):
        # radius = 500 * tan(2.5 deg) mm at 2 px/mm
        expected = 500.0 * math.tan(math.radians(2.5)) * 2.0
        assert central_field_radius_px(500.0, 2.0) == pytest.approx(expected, abs=1e-9)


class TestExploredRatio:
    def test_single_central_disk(self):
        ratio = explored_ratio(np.array([[100.0, 100.0]]), region_size=(200, 200), disk_radius_px=30.0)
        assert ratio == pytest.approx(math.pi * 30.0**2 / 200**2, rel=0.02)

    def test_empty_points(self):
        assert explored_ratio(np.empty((0, 2)), region_size=(100, 100), disk_radius_px=10.0) == 0.0

    def test_out_of_region_ignored(self):
        ratio = explored_ratio(np.array([[-50.0, -50.0], [500.0, 500.0]]), (100, 100), 10.0)
        assert ratio == 0.0

    def test_duplicate_points_no_effect(self):
        pts = np.array([[30.0, 40.0], [60.0, 70.0]])
        once = explored_ratio(pts, (120, 120), 15.0)
        doubled = explored_ratio(np.vstack([pts, pts]), (120, 120), 15.0)
        assert once == doubled

    def test_monotone_in_points(self):
        pts = np.array([[20.0, 20.0], [80.0, 80.0], [50.0, 20.0]])
        ratios = [explored_ratio(pts[: i + 1], (100, 100), 12.0) for i in range(len(pts))]
        assert ratios == sorted(ratios)

    def test_full_coverage(self):
        # A disk radius larger than the region diagonal covers everything.
        assert explored_ratio(np.array([[50.0, 50.0]]), (100, 100), 200.0) == 1.0

    def test_bad_radius(self):
        with pytest.raises(ValueError):
            explored_ratio(np.array([[1.0, 1.0]]), (10, 10), 0.0)


class TestCompletionTime:
    def test_rule_table(self):
        assert completion_time(correct=True, latency=12.5) == 12.5
        assert completion_time(correct=False, latency=12.5) == 30.0
        assert completion_time(correct=False, latency=None) == 30.0
        assert completion_time(correct=True, latency=None) == 30.0
        assert completion_time(correct=True, latency=31.0) == 30.0
        assert completion_time(correct=True, latency=5.0, limit_s=10.0) == 5.0
        assert completion_time(correct=False, latency=5.0, limit_s=10.0) == 10.0


class TestPersistence:
    def test_gaze_round_trip(self):
        samples = [
            GazeSample(t=0.0, x=1.25, y=-3.5, valid=True),
            GazeSample(t=0.016, x=2.0, y=4.0, valid=False),
        ]
        buf = io.StringIO()
        save_gaze_samples(samples, buf)
        buf.seek(0)
        assert load_gaze_samples(buf) == samples

    def test_gaze_header_enforced(self):
        with pytest.raises(ValueError, match="header"):
            load_gaze_samples(io.StringIO("0 1 2 1\n"))

    def test_marker_round_trip(self):
        observations = [quad_observation(UNIT_SQUARE, t=0.5)]
        buf = io.StringIO()
        save_marker_track(observations, buf)
        buf.seek(0)
        assert load_marker_track(buf) == observations
