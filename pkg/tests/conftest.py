import numpy as np
import pytest

from colorvib.psychometry import Condition, ThresholdTable, UserCalibration
from colorvib.stimulus import DisplayProfile
from colorvib.vibration import base_ellipse, load_default_catalog

# Reference thresholds: the l=71 mm rows are the published study values;
# the remaining cells are plausible fixture values consistent with the
# observed trends (minimum at l=71, thresholds decreasing with d).
REFERENCE_THRESHOLDS = {
    (Condition.AWARENESS, 0.5): {
        0.0: (30.10, 22.40, 19.80),
        71.0: (25.22, 16.73, 14.29),
        121.0: (27.00, 18.50, 15.60),
        171.0: (33.00, 24.00, 20.50),
    },
    (Condition.AWARENESS, 0.75): {
        0.0: (45.00, 38.00, 31.00),
        71.0: (38.50, 35.65, 25.61),
        121.0: (40.20, 36.50, 27.50),
        171.0: (47.50, 38.00, 34.00),
    },
    (Condition.DISCOMFORT, 0.5): {
        0.0: (19.00, 15.00, 13.20),
        71.0: (15.25, 12.08, 10.68),
        121.0: (16.40, 13.10, 11.50),
        171.0: (21.00, 17.00, 14.80),
    },
    (Condition.DISCOMFORT, 0.75): {
        0.0: (29.50, 21.00, 18.00),
        71.0: (25.22, 16.73, 14.29),
        121.0: (26.80, 18.20, 15.40),
        171.0: (31.00, 23.50, 19.60),
    },
}

D_LEVELS = (60.0, 80.0, 100.0)


def make_reference_table() -> ThresholdTable:
    entries = {}
    for (condition, p), rows in REFERENCE_THRESHOLDS.items():
        for l, values in rows.items():
            for d, r_th in zip(D_LEVELS, values):
                entries[(condition, p, d, l)] = r_th
    return ThresholdTable(entries=entries)


@pytest.fixture(scope="session")
def catalog():
    return load_default_catalog()


@pytest.fixture(scope="session")
def base(catalog):
    return base_ellipse(catalog)


@pytest.fixture()
def reference_table():
    return make_reference_table()


@pytest.fixture()
def flat_calibration():
    return UserCalibration(
        participant="test",
        fits={10.0: 0.5, 20.0: 0.5, 30.0: 0.5, 40.0: 0.5, 50.0: 0.5},
    )


@pytest.fixture()
def sloped_calibration():
    return UserCalibration(
        participant="test",
        fits={10.0: 0.48, 20.0: 0.49, 30.0: 0.50, 40.0: 0.52, 50.0: 0.52},
    )


@pytest.fixture(scope="session")
def small_profile():
    """2 px/mm square test panel, big enough for guidance circles."""
    return DisplayProfile(
        width_mm=300.0,
        height_mm=300.0,
        width_px=600,
        height_px=600,
        viewing_distance_mm=500.0,
        refresh_hz=60.0,
    )


@pytest.fixture(scope="session")
def panel_profile():
    """2 px/mm panel matching the reference display's physical extent."""
    return DisplayProfile(
        width_mm=941.0,
        height_mm=529.0,
        width_px=1882,
        height_px=1058,
        viewing_distance_mm=500.0,
        refresh_hz=60.0,
    )


@pytest.fixture()
def gradient_image():
    """Synthetic prepared-style source image, 420x420 px."""
    ramp = np.linspace(0, 255, 420, dtype=np.float64)
    img = np.floor((ramp[None, :] + ramp[:, None]) / 2 + 0.5).astype(np.uint8)
    return np.stack([img, img, img], axis=-1)
