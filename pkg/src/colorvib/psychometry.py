"""Psychometric curve fitting and threshold interpolation.

Responses are binarized per condition (Awareness: anything other than
"solid color"; Discomfort: clear flicker) and fit with a two-parameter
logistic p(r) = 1 / (1 + exp(-slope * (r - midpoint))) by maximum
likelihood. Thresholds at arbitrary probabilities follow in closed form.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .errors import (
    ConvergenceFailure,
    DegenerateData,
    MissingCell,
    OutsideInterpolationRange,
    ProbabilityOutOfRange,
    UnknownDiameter,
)

RESPONSES_FORMAT_HEADER = "# colorvib-responses v1"
TABLE_CSV_HEADER = "condition,probability,d_mm,l_mm,r_th"

_NEWTON_MAX_ITER = 100
_GRAD_TOL = 1e-10
_LL_TOL = 1e-12

CALIBRATION_R_LEVELS = (50.0, 40.0, 30.0, 20.0, 10.0)


class PerceptState(Enum):
    SOLID_COLOR = "solid_color"
    DIFFERENT_NOT_FLICKERING = "different_not_flickering"
    CLEARLY_FLICKERING = "clearly_flickering"


class Condition(Enum):
    AWARENESS = "awareness"
    DISCOMFORT = "discomfort"


class NonMonotoneThresholdWarning(UserWarning):
    """Threshold did not decrease with circle diameter as expected."""


class CalibrationRangeWarning(UserWarning):
    """Weight queried outside the calibrated amplitude range; endpoint used."""


@dataclass(frozen=True)
class TrialResponse:
    """One participant response in the threshold study."""

    r: float
    d: float  # circle diameter, mm
    l: float  # eccentricity, mm
    state: PerceptState
    location_chosen: int | None = None
    location_actual: int | None = None
    participant: str = ""
    latency: float = 0.0

    def __post_init__(self):
        if self.l > 0 and self.location_actual is None:
            raise ValueError("peripheral response (l > 0) needs location_actual")
        if self.l == 0 and (self.location_chosen is not None or self.location_actual is not None):
            raise ValueError("central response (l = 0) must not carry location fields")

    def to_record(self) -> dict:
        return {
            "r": self.r,
            "d": self.d,
            "l": self.l,
            "state": self.state.value,
            "location_chosen": self.location_chosen,
            "location_actual": self.location_actual,
            "participant": self.participant,
            "latency": self.latency,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "TrialResponse":
        return cls(
            r=float(rec["r"]),
            d=float(rec["d"]),
            l=float(rec["l"]),
            state=PerceptState(rec["state"]),
            location_chosen=rec.get("location_chosen"),
            location_actual=rec.get("location_actual"),
            participant=rec.get("participant", ""),
            latency=float(rec.get("latency", 0.0)),
        )


@dataclass(frozen=True)
class PsychometricCurve:
    midpoint: float
    slope: float
    n_trials: int
    condition: Condition

    def __post_init__(self):
        if self.slope <= 0:
            raise ValueError(f"slope must be positive, got {self.slope}")

    def probability(self, r: float) -> float:
        return 1.0 / (1.0 + math.exp(-self.slope * (r - self.midpoint)))


@dataclass(frozen=True)
class UserCalibration:
    """Per-participant color-fitting weights at the calibration amplitudes."""

    participant: str
    fits: dict[float, float]  # r -> w

    def __post_init__(self):
        for r, w in self.fits.items():
            if not 0 < w < 1:
                raise ValueError(f"calibrated weight w={w} at r={r} outside (0, 1)")


@dataclass
class ThresholdTable:
    """r_th values keyed by (condition, probability, d_mm, l_mm)."""

    entries: dict[tuple[Condition, float, float, float], float] = field(default_factory=dict)

    def __post_init__(self):
        for key, r_th in self.entries.items():
            if r_th <= 0:
                raise ValueError(f"threshold at {key} must be positive, got {r_th}")
        self._warn_non_monotone()

    def _warn_non_monotone(self):
        groups: dict[tuple, list[tuple[float, float]]] = {}
        for (cond, p, d, l), r_th in self.entries.items():
            groups.setdefault((cond, p, l), []).append((d, r_th))
        for key, pairs in groups.items():
            pairs.sort()
            values = [v for _, v in pairs]
            if any(b > a for a, b in zip(values, values[1:])):
                warnings.warn(
                    f"threshold not non-increasing in d for {key}: {pairs}",
                    NonMonotoneThresholdWarning,
                    stacklevel=3,
                )

    def get(self, condition: Condition, probability: float, d: float, l: float) -> float:
        key = (condition, probability, d, l)
        if key not in self.entries:
            raise MissingCell(f"no threshold for {condition.value}/{probability} at d={d}, l={l}")
        return self.entries[key]

    def d_levels(self) -> list[float]:
        return sorted({d for (_, _, d, _) in self.entries})

    def l_levels(self) -> list[float]:
        return sorted({l for (_, _, _, l) in self.entries})

    def to_csv(self) -> str:
        lines = [TABLE_CSV_HEADER]
        for (cond, p, d, l), r_th in sorted(
            self.entries.items(), key=lambda kv: (kv[0][0].value, kv[0][1], kv[0][2], kv[0][3])
        ):
            lines.append(f"{cond.value},{p:g},{d:g},{l:g},{r_th!r}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv(cls, text: str) -> "ThresholdTable":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines or lines[0].strip() != TABLE_CSV_HEADER:
            raise ValueError(f"expected header {TABLE_CSV_HEADER!r}")
        entries = {}
        for ln in lines[1:]:
            cond, p, d, l, r_th = ln.split(",")
            entries[(Condition(cond), float(p), float(d), float(l))] = float(r_th)
        return cls(entries=entries)


def is_positive(state: PerceptState, condition: Condition) -> bool:
    """Binarize a perceptual state for the given condition."""
    if condition is Condition.AWARENESS:
        return state is not PerceptState.SOLID_COLOR
    return state is PerceptState.CLEARLY_FLICKERING


def filter_peripheral_misses(responses) -> list[TrialResponse]:
    """Rewrite peripheral responses with a wrong location pick as "solid color".

    A participant who misidentified which circle vibrated did not actually
    perceive the anomaly. Idempotent; output length equals input length.
    """
    out = []
    for resp in responses:
        if resp.l > 0 and resp.location_chosen != resp.location_actual:
            out.append(replace(resp, state=PerceptState.SOLID_COLOR))
        else:
            out.append(resp)
    return out


def _fit_logistic(levels: np.ndarray, n: np.ndarray, k: np.ndarray) -> tuple[float, float]:
    """ML logistic regression on aggregated (level, trials, positives) data.

    Returns (intercept, slope) of p = sigmoid(b0 + b1 * level). Newton
    iterations with step halving; converges on gradient norm or likelihood
    stagnation.
    """
    beta = np.zeros(2)
    X = np.column_stack([np.ones_like(levels), levels])

    def loglik(b):
        z = X @ b
        # log p = -log(1 + exp(-z)); log (1-p) = -log(1 + exp(z))
        return float(-(k * np.logaddexp(0.0, -z)).sum() - ((n - k) * np.logaddexp(0.0, z)).sum())

    ll = loglik(beta)
    for _ in range(_NEWTON_MAX_ITER):
        z = X @ beta
        p = 1.0 / (1.0 + np.exp(-np.clip(z, -700, 700)))
        grad = X.T @ (k - n * p)
        if np.linalg.norm(grad) < _GRAD_TOL:
            return float(beta[0]), float(beta[1])
        w = n * p * (1 - p)
        hess = X.T @ (X * w[:, None])
        try:
            step = np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            # Hessian vanished: probabilities fully saturated.
            return float(beta[0]), float(beta[1])
        # Step halving until the likelihood improves.
        scale = 1.0
        for _ in range(50):
            candidate = beta + scale * step
            ll_new = loglik(candidate)
            if ll_new >= ll:
                break
            scale *= 0.5
        else:
            return float(beta[0]), float(beta[1])
        if abs(ll_new - ll) < _LL_TOL:
            return float(candidate[0]), float(candidate[1])
        beta, ll = candidate, ll_new
    raise ConvergenceFailure(f"logistic fit did not converge in {_NEWTON_MAX_ITER} iterations")


def fit_curve(responses, condition: Condition) -> PsychometricCurve:
    """Maximum-likelihood logistic fit of binarized responses sharing (d, l).

    Raises:
        DegenerateData: fewer than 2 distinct r levels, no mixed outcomes,
            or a non-increasing response trend (non-positive fitted slope).
        ConvergenceFailure: iteration cap exceeded.
    """
    responses = list(responses)
    if not responses:
        raise DegenerateData("no responses")
    cells = {(resp.d, resp.l) for resp in responses}
    if len(cells) > 1:
        raise ValueError(f"responses span multiple (d, l) cells: {sorted(cells)}")

    counts: dict[float, list[int]] = {}
    for resp in responses:
        n_k = counts.setdefault(resp.r, [0, 0])
        n_k[0] += 1
        n_k[1] += int(is_positive(resp.state, condition))
    if len(counts) < 2:
        raise DegenerateData(f"need >= 2 distinct r levels, got {len(counts)}")
    levels = np.array(sorted(counts))
    n = np.array([counts[r][0] for r in levels], dtype=float)
    k = np.array([counts[r][1] for r in levels], dtype=float)
    if k.sum() == 0 or k.sum() == n.sum():
        raise DegenerateData("all responses negative or all positive; no crossing to fit")

    b0, b1 = _fit_logistic(levels, n, k)
    if b1 <= 0:
        raise DegenerateData(f"fitted slope {b1} not positive; response rate does not increase with r")
    return PsychometricCurve(
        midpoint=-b0 / b1, slope=b1, n_trials=int(n.sum()), condition=condition
    )


def threshold_at(curve: PsychometricCurve, p: float) -> float:
    """Amplitude ratio at which the curve crosses probability p."""
    if not 0 < p < 1:
        raise ProbabilityOutOfRange(f"probability {p} outside (0, 1)")
    return curve.midpoint + math.log(p / (1 - p)) / curve.slope


def build_table(responses, probabilities=(0.5, 0.75)) -> tuple[ThresholdTable, list[str]]:
    """Pooled-across-participants thresholds per (condition, probability, d, l) cell.

    Cells whose fit is degenerate are left absent and reported in the
    returned diagnostics list.
    """
    responses = list(responses)
    cells: dict[tuple[float, float], list[TrialResponse]] = {}
    for resp in responses:
        cells.setdefault((resp.d, resp.l), []).append(resp)

    entries = {}
    diagnostics = []
    for (d, l), cell_responses in sorted(cells.items()):
        for condition in Condition:
            try:
                curve = fit_curve(cell_responses, condition)
            except (DegenerateData, ConvergenceFailure) as exc:
                diagnostics.append(f"{condition.value} d={d:g} l={l:g}: {exc}")
                continue
            for p in probabilities:
                r_th = threshold_at(curve, p)
                if r_th <= 0:
                    diagnostics.append(
                        f"{condition.value} d={d:g} l={l:g} p={p:g}: non-positive threshold {r_th:.3f}"
                    )
                    continue
                entries[(condition, p, d, l)] = r_th
    with warnings.catch_warnings():
        warnings.simplefilter("always")
        table = ThresholdTable(entries=entries)
    return table, diagnostics


def interpolate_threshold(
    table: ThresholdTable, condition: Condition, probability: float, d: float, l: float
) -> float:
    """Threshold at eccentricity l, linear between peripheral grid levels.

    Grid points reproduce the table bitwise; l = 0 uses the central-vision
    entry directly. Eccentricities between the center and the first
    peripheral level, or beyond the last one, were never measured and are
    refused rather than extrapolated.
    """
    if d not in table.d_levels():
        raise UnknownDiameter(f"d={d} mm is not a table grid level {table.d_levels()}")
    l_levels = table.l_levels()
    if l in l_levels:
        return table.get(condition, probability, d, l)
    peripheral = [lv for lv in l_levels if lv > 0]
    if len(peripheral) < 2 or l < peripheral[0] or l > peripheral[-1]:
        raise OutsideInterpolationRange(
            f"l={l} mm outside the validated range (0 or [{peripheral[0] if peripheral else '?'}, "
            f"{peripheral[-1] if peripheral else '?'}] mm)"
        )
    hi_idx = next(i for i, lv in enumerate(peripheral) if lv >= l)
    l0, l1 = peripheral[hi_idx - 1], peripheral[hi_idx]
    v0 = table.get(condition, probability, d, l0)
    v1 = table.get(condition, probability, d, l1)
    t = (l - l0) / (l1 - l0)
    return v0 + t * (v1 - v0)


def interpolate_weight(cal: UserCalibration, r: float) -> float:
    """Participant weight w at amplitude r, linear between calibrated levels.

    Outside the calibrated range the nearest endpoint is returned with a
    :class:`CalibrationRangeWarning` instead of failing, because guidance
    ROIs can demand slightly off-grid amplitudes.
    """
    if not cal.fits:
        raise ValueError("calibration has no fitted weights")
    grid = sorted(cal.fits)
    if r < grid[0] or r > grid[-1]:
        warnings.warn(
            f"r={r} outside calibrated range [{grid[0]}, {grid[-1]}]; using nearest endpoint",
            CalibrationRangeWarning,
            stacklevel=2,
        )
        w = cal.fits[grid[0] if r < grid[0] else grid[-1]]
    elif r in cal.fits:
        w = cal.fits[r]
    else:
        hi_idx = next(i for i, level in enumerate(grid) if level >= r)
        r0, r1 = grid[hi_idx - 1], grid[hi_idx]
        t = (r - r0) / (r1 - r0)
        w = cal.fits[r0] + t * (cal.fits[r1] - cal.fits[r0])
    return min(max(w, 0.01), 0.99)


def save_responses(responses, stream) -> None:
    """Write responses as versioned line-delimited JSON records."""
    stream.write(RESPONSES_FORMAT_HEADER + "\n")
    for resp in responses:
        stream.write(json.dumps(resp.to_record(), sort_keys=True) + "\n")


def load_responses(stream) -> list[TrialResponse]:
    """Read responses written by :func:`save_responses`."""
    lines = stream.read().splitlines()
    if not lines or lines[0].strip() != RESPONSES_FORMAT_HEADER:
        raise ValueError(f"expected header {RESPONSES_FORMAT_HEADER!r}")
    return [TrialResponse.from_record(json.loads(ln)) for ln in lines[1:] if ln.strip()]
