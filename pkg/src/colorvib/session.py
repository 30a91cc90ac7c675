"""Experiment protocol engine: plans, calibration, trial phases, persistence.

Plans are seeded permutations over the full condition grids; the session
log is append-only line-delimited JSON with a per-record checksum, so a
crash can at worst lose the final partially-written line.
"""

from __future__ import annotations

import json
import os
import zlib
from dataclasses import dataclass, replace
from enum import Enum
from random import Random

from .errors import SequenceViolation, StorageFailure
from .psychometry import CALIBRATION_R_LEVELS, PerceptState, UserCalibration

THRESHOLD_R_LEVELS = tuple(float(r) for r in range(0, 55, 5))
THRESHOLD_D_LEVELS = (60.0, 80.0, 100.0)
THRESHOLD_L_LEVELS = (0.0, 71.0, 121.0, 171.0)
THRESHOLD_BREAK_EVERY = 10
GUIDANCE_IMAGE_SETS = 6
GUIDANCE_BREAK_EVERY = 6
SEARCH_LIMIT_S = 30.0
CALIBRATION_W_STEP = 0.02
CALIBRATION_W_MIN = 0.01
CALIBRATION_W_MAX = 0.99
INVERTED_FLASH_S = 0.1
LIKERT_MIN, LIKERT_MAX = 1, 7

LOG_FORMAT_HEADER = "# colorvib-session-log v1"


class StudyKind(Enum):
    THRESHOLD = "threshold"
    GUIDANCE = "guidance"


class TrialPhase(Enum):
    FIXATION = "fixation"
    TARGET = "target"
    SEARCH = "search"
    QUESTIONNAIRE = "questionnaire"
    SEALED = "sealed"


@dataclass(frozen=True)
class ThresholdTrial:
    index: int
    r: float
    d: float
    l: float
    vibrating_index: int | None  # 1..4 for peripheral trials, None for central

    def to_record(self) -> dict:
        return {
            "index": self.index,
            "r": self.r,
            "d": self.d,
            "l": self.l,
            "vibrating_index": self.vibrating_index,
        }


@dataclass(frozen=True)
class GuidanceTrial:
    index: int
    image_set: int
    image_id: str
    condition: str  # GuidanceCondition value
    roi_center_px: tuple[float, float]

    def to_record(self) -> dict:
        return {
            "index": self.index,
            "image_set": self.image_set,
            "image_id": self.image_id,
            "condition": self.condition,
            "roi_center_px": list(self.roi_center_px),
        }


@dataclass(frozen=True)
class ProtocolPlan:
    kind: StudyKind
    trials: tuple
    seed: int
    break_every: int

    def break_after(self, trial_index: int) -> bool:
        """True if a break follows the (1-based) trial position."""
        done = trial_index + 1
        return done % self.break_every == 0 and done < len(self.trials)


def plan_threshold_study(seed: int) -> ProtocolPlan:
    """All 132 (r, d, l) combinations exactly once, in a seeded random order.

    Peripheral trials get a seeded-uniform vibrating-circle index in 1..4.
    """
    rng = Random(seed)
    combos = [(r, d, l) for r in THRESHOLD_R_LEVELS for d in THRESHOLD_D_LEVELS for l in THRESHOLD_L_LEVELS]
    rng.shuffle(combos)
    trials = tuple(
        ThresholdTrial(
            index=i,
            r=r,
            d=d,
            l=l,
            vibrating_index=rng.randint(1, 4) if l > 0 else None,
        )
        for i, (r, d, l) in enumerate(combos)
    )
    return ProtocolPlan(kind=StudyKind.THRESHOLD, trials=trials, seed=seed, break_every=THRESHOLD_BREAK_EVERY)


def plan_guidance_study(seed: int, image_sets: list[list[dict]] | None = None) -> ProtocolPlan:
    """Six image sets, one image per guidance condition, all orders seeded.

    `image_sets` maps each set to four dicts with `image_id`, `condition`,
    and `roi_center_px`; synthetic placeholders are generated when omitted.
    """
    from .stimulus import GuidanceCondition

    rng = Random(seed)
    if image_sets is None:
        image_sets = [
            [
                {
                    "image_id": f"set{s + 1}_img{c + 1}",
                    "condition": condition.value,
                    "roi_center_px": (599.5, 599.5),
                }
                for c, condition in enumerate(GuidanceCondition)
            ]
            for s in range(GUIDANCE_IMAGE_SETS)
        ]
    if len(image_sets) != GUIDANCE_IMAGE_SETS:
        raise ValueError(f"expected {GUIDANCE_IMAGE_SETS} image sets, got {len(image_sets)}")

    set_order = list(range(len(image_sets)))
    rng.shuffle(set_order)
    trials = []
    for s in set_order:
        images = list(image_sets[s])
        rng.shuffle(images)
        for img in images:
            trials.append(
                GuidanceTrial(
                    index=len(trials),
                    image_set=s,
                    image_id=img["image_id"],
                    condition=img["condition"],
                    roi_center_px=tuple(img["roi_center_px"]),
                )
            )
    return ProtocolPlan(
        kind=StudyKind.GUIDANCE, trials=tuple(trials), seed=seed, break_every=GUIDANCE_BREAK_EVERY
    )


class CalibrationInput(Enum):
    INCREASE = "increase"
    DECREASE = "decrease"
    ACCEPT = "accept"


@dataclass(frozen=True)
class CalibrationState:
    """Progress through the descending-amplitude weight-fitting sequence."""

    r_levels: tuple[float, ...] = CALIBRATION_R_LEVELS
    level_index: int = 0
    w: float = 0.5
    step: float = CALIBRATION_W_STEP
    accepted: tuple[tuple[float, float], ...] = ()
    clamped: bool = False
    flash_pending: bool = False

    @property
    def current_r(self) -> float | None:
        if self.level_index >= len(self.r_levels):
            return None
        return self.r_levels[self.level_index]

    @property
    def complete(self) -> bool:
        return self.level_index >= len(self.r_levels)

    def to_calibration(self, participant: str = "") -> UserCalibration:
        if not self.complete:
            raise SequenceViolation("calibration not complete")
        return UserCalibration(participant=participant, fits=dict(self.accepted))


def step_calibration(state: CalibrationState, input: CalibrationInput) -> CalibrationState:
    """Advance the calibration state machine by one gamepad input.

    Increase/Decrease move w by the step, clamped inside (0.01, 0.99) with a
    flag; Accept records (r, w) and advances to the next amplitude, leaving
    a 100 ms inverted flash pending for the presenter.
    """
    if state.complete:
        raise SequenceViolation("calibration already complete")
    if input is CalibrationInput.ACCEPT:
        return replace(
            state,
            accepted=state.accepted + ((state.current_r, state.w),),
            level_index=state.level_index + 1,
            w=state.w,
            clamped=False,
            flash_pending=True,
        )
    delta = state.step if input is CalibrationInput.INCREASE else -state.step
    w_new = round(state.w + delta, 10)
    if not CALIBRATION_W_MIN < w_new < CALIBRATION_W_MAX:
        return replace(state, clamped=True, flash_pending=False)
    return replace(state, w=w_new, clamped=False, flash_pending=False)


@dataclass
class GuidanceTrialRecord:
    """Sealed outcome of one guidance trial."""

    trial_index: int
    condition: str
    image_id: str
    phase_timestamps: dict
    click_px: tuple[float, float] | None
    correct: bool
    timed_out: bool
    completion_s: float
    naturalness: int | None = None
    obtrusiveness: int | None = None

    def to_record(self) -> dict:
        return {
            "trial_index": self.trial_index,
            "condition": self.condition,
            "image_id": self.image_id,
            "phase_timestamps": self.phase_timestamps,
            "click_px": list(self.click_px) if self.click_px else None,
            "correct": self.correct,
            "timed_out": self.timed_out,
            "completion_s": self.completion_s,
            "naturalness": self.naturalness,
            "obtrusiveness": self.obtrusiveness,
        }


class GuidanceTrialMachine:
    """Four-phase state machine for one guidance trial.

    Phases advance fixation -> target -> search -> questionnaire -> sealed;
    no phase may be skipped, and out-of-phase events raise
    :class:`SequenceViolation`. Timestamps come from the caller's monotonic
    clock.
    """

    def __init__(self, trial: GuidanceTrial, roi_radius_px: float, limit_s: float = SEARCH_LIMIT_S):
        self.trial = trial
        self.roi_radius_px = roi_radius_px
        self.limit_s = limit_s
        self.phase = TrialPhase.FIXATION
        self.timestamps: dict[str, float] = {}
        self.click_px: tuple[float, float] | None = None
        self.correct = False
        self.timed_out = False
        self.completion_s: float | None = None
        self.naturalness: int | None = None
        self.obtrusiveness: int | None = None

    def enter(self, phase: TrialPhase, t: float) -> None:
        order = [TrialPhase.FIXATION, TrialPhase.TARGET, TrialPhase.SEARCH, TrialPhase.QUESTIONNAIRE]
        if self.phase not in order or phase not in order:
            raise SequenceViolation(f"cannot enter {phase} from {self.phase}")
        if order.index(phase) != order.index(self.phase) + (phase != self.phase):
            raise SequenceViolation(f"cannot enter {phase} from {self.phase}")
        if self.timestamps and t < max(self.timestamps.values()):
            raise SequenceViolation("timestamps must be strictly ordered")
        self.phase = phase
        self.timestamps[phase.value] = t

    def start(self, t: float) -> None:
        self.timestamps[TrialPhase.FIXATION.value] = t

    def post_click(self, x: float, y: float, t: float) -> None:
        if self.phase is not TrialPhase.SEARCH:
            raise SequenceViolation(f"click posted during {self.phase.value}")
        elapsed = t - self.timestamps[TrialPhase.SEARCH.value]
        self.click_px = (x, y)
        if elapsed > self.limit_s:
            self.timed_out = True
            self.correct = False
        else:
            rx, ry = self.trial.roi_center_px
            self.correct = (x - rx) ** 2 + (y - ry) ** 2 <= self.roi_radius_px**2
        self.completion_s = elapsed if (self.correct and not self.timed_out) else self.limit_s
        self.phase = TrialPhase.QUESTIONNAIRE
        self.timestamps[TrialPhase.QUESTIONNAIRE.value] = t

    def post_timeout(self, t: float) -> None:
        if self.phase is not TrialPhase.SEARCH:
            raise SequenceViolation(f"timeout posted during {self.phase.value}")
        self.timed_out = True
        self.correct = False
        self.completion_s = self.limit_s
        self.phase = TrialPhase.QUESTIONNAIRE
        self.timestamps[TrialPhase.QUESTIONNAIRE.value] = t

    def post_likert(self, naturalness: int, obtrusiveness: int) -> None:
        if self.phase is not TrialPhase.QUESTIONNAIRE:
            raise SequenceViolation(f"questionnaire posted during {self.phase.value}")
        for name, v in (("naturalness", naturalness), ("obtrusiveness", obtrusiveness)):
            if not (isinstance(v, int) and LIKERT_MIN <= v <= LIKERT_MAX):
                raise ValueError(f"{name}={v} outside Likert range [{LIKERT_MIN}, {LIKERT_MAX}]")
        self.naturalness = naturalness
        self.obtrusiveness = obtrusiveness
        self.phase = TrialPhase.SEALED

    def seal(self) -> GuidanceTrialRecord:
        if self.phase is not TrialPhase.SEALED:
            raise SequenceViolation("trial not finished")
        return GuidanceTrialRecord(
            trial_index=self.trial.index,
            condition=self.trial.condition,
            image_id=self.trial.image_id,
            phase_timestamps=dict(self.timestamps),
            click_px=self.click_px,
            correct=self.correct,
            timed_out=self.timed_out,
            completion_s=self.completion_s,
            naturalness=self.naturalness,
            obtrusiveness=self.obtrusiveness,
        )


def run_guidance_trial(trial: GuidanceTrial, roi_radius_px: float, events: list[tuple]) -> GuidanceTrialRecord:
    """Drive one guidance trial through a scripted event sequence.

    Events are tuples: ("enter", phase, t), ("click", x, y, t),
    ("timeout", t), ("likert", naturalness, obtrusiveness).
    """
    machine = GuidanceTrialMachine(trial, roi_radius_px)
    for event in events:
        kind = event[0]
        if kind == "enter":
            machine.enter(event[1], event[2])
        elif kind == "click":
            machine.post_click(event[1], event[2], event[3])
        elif kind == "timeout":
            machine.post_timeout(event[1])
        elif kind == "likert":
            machine.post_likert(event[1], event[2])
        else:
            raise ValueError(f"unknown event {kind!r}")
    return machine.seal()


@dataclass(frozen=True)
class ThresholdTrialRecord:
    """Sealed outcome of one threshold trial."""

    trial_index: int
    r: float
    d: float
    l: float
    state: PerceptState
    location_chosen: int | None
    location_actual: int | None
    latency: float

    def to_record(self) -> dict:
        return {
            "trial_index": self.trial_index,
            "r": self.r,
            "d": self.d,
            "l": self.l,
            "state": self.state.value,
            "location_chosen": self.location_chosen,
            "location_actual": self.location_actual,
            "latency": self.latency,
        }


def _canonical(payload: dict) -> str:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))


class SessionLog:
    """Append-only, checksummed, line-delimited session log.

    Each line is `{"seq": n, "kind": ..., "data": {...}, "crc": ...}` where
    the CRC covers the canonical serialization of seq, kind, and data. A
    truncated or corrupt final line is dropped on load with a warning; a
    corrupt line earlier in the file is a hard error.
    """

    def __init__(self, path):
        self.path = os.fspath(path)
        self.records: list[dict] = []
        self._seen_keys: set = set()
        if os.path.exists(self.path):
            self._load()
        else:
            with open(self.path, "w", encoding="utf-8") as f:
                f.write(LOG_FORMAT_HEADER + "\n")
                f.flush()
                os.fsync(f.fileno())

    @staticmethod
    def _crc(seq: int, kind: str, data: dict) -> int:
        return zlib.crc32(_canonical({"seq": seq, "kind": kind, "data": data}).encode("utf-8"))

    @staticmethod
    def _encode(seq: int, kind: str, data: dict) -> str:
        crc = SessionLog._crc(seq, kind, data)
        return _canonical({"crc": crc, "data": data, "kind": kind, "seq": seq})

    def _record_key(self, kind: str, data: dict):
        if "trial_index" in data:
            return (kind, data["trial_index"])
        return None

    def _load(self):
        self.truncated_tail = False
        try:
            with open(self.path, "r", encoding="utf-8") as f:
                lines = f.read().splitlines()
        except OSError as exc:
            raise StorageFailure(f"cannot read session log: {exc}") from exc
        if not lines or lines[0] != LOG_FORMAT_HEADER:
            raise StorageFailure(f"session log missing header {LOG_FORMAT_HEADER!r}")
        for i, line in enumerate(lines[1:], start=2):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                if rec["crc"] != self._crc(rec["seq"], rec["kind"], rec["data"]):
                    raise ValueError("checksum mismatch")
            except (ValueError, KeyError, TypeError) as exc:
                if i == len(lines):
                    # Partial final write from a crash: drop it, stay resumable.
                    self.truncated_tail = True
                    break
                raise StorageFailure(f"corrupt session log line {i}: {exc}") from exc
            self.records.append(rec)
            key = self._record_key(rec["kind"], rec["data"])
            if key is not None:
                self._seen_keys.add(key)

    def append(self, kind: str, data: dict) -> dict:
        """Atomically append one sealed record; duplicate trial indices are rejected."""
        key = self._record_key(kind, data)
        if key is not None and key in self._seen_keys:
            raise StorageFailure(f"duplicate record for {key}")
        seq = len(self.records)
        line = self._encode(seq, kind, data)
        try:
            with open(self.path, "a", encoding="utf-8") as f:
                f.write(line + "\n")
                f.flush()
                os.fsync(f.fileno())
        except OSError as exc:
            raise StorageFailure(f"cannot append to session log: {exc}") from exc
        rec = json.loads(line)
        self.records.append(rec)
        if key is not None:
            self._seen_keys.add(key)
        return rec

    def serialize(self) -> str:
        """Canonical byte-stable serialization of the whole log."""
        lines = [LOG_FORMAT_HEADER]
        lines += [self._encode(r["seq"], r["kind"], r["data"]) for r in self.records]
        return "\n".join(lines) + "\n"


def persist(log: SessionLog, record) -> dict:
    """Append a sealed trial/calibration record to the session log."""
    if isinstance(record, GuidanceTrialRecord):
        return log.append("guidance_trial", record.to_record())
    if isinstance(record, ThresholdTrialRecord):
        return log.append("threshold_trial", record.to_record())
    if isinstance(record, UserCalibration):
        return log.append("calibration", {"participant": record.participant, "fits": {str(k): v for k, v in record.fits.items()}})
    if isinstance(record, dict):
        return log.append(record.get("kind", "event"), record.get("data", record))
    raise TypeError(f"cannot persist {type(record)!r}")
