"""Local HTTP/JSON service driving one experiment session.

A single session runs at a time; mutating requests are serialized through
one lock, and all latency-bearing timestamps come from the service's
monotonic clock, never from the UI. Stimulus frames are rendered on demand
and cached per trial.
"""

from __future__ import annotations

import io
import json
import threading
import time
import warnings
from dataclasses import dataclass, field

import numpy as np
from fastapi import FastAPI, HTTPException, Response
from PIL import Image

from . import session as proto
from .errors import ColorVibError, SequenceViolation
from .psychometry import PerceptState, ThresholdTable, UserCalibration, interpolate_weight
from .stimulus import (
    DisplayProfile,
    GuidanceCondition,
    RoiSpec,
    StimulusFramePair,
    mm_to_px,
    reference_display_profile,
    render_guidance,
    render_threshold_stimulus,
)
from .vibration import base_ellipse, load_default_catalog

PROTOCOL_VERSION = 1
DEFAULT_FIXATION_S = 1.0


@dataclass
class SessionConfig:
    participant: str = "anonymous"
    study: proto.StudyKind = proto.StudyKind.THRESHOLD
    seed: int = 0
    log_path: str = "session.log"
    display_profile: DisplayProfile = field(default_factory=reference_display_profile)
    threshold_table_path: str | None = None
    images: dict[str, str] = field(default_factory=dict)
    image_px: int = 1200
    fixation_s: float = DEFAULT_FIXATION_S
    skip_calibration: bool = False

    @classmethod
    def from_file(cls, path) -> "SessionConfig":
        with open(path, "r", encoding="utf-8") as f:
            raw = json.load(f)
        profile = raw.get("display_profile")
        if isinstance(profile, str):
            with open(profile, "r", encoding="utf-8") as f:
                profile = json.load(f)
        return cls(
            participant=raw.get("participant", "anonymous"),
            study=proto.StudyKind(raw.get("study", "threshold")),
            seed=int(raw.get("seed", 0)),
            log_path=raw.get("log_path", "session.log"),
            display_profile=(
                DisplayProfile.from_dict(profile) if profile else reference_display_profile()
            ),
            threshold_table_path=raw.get("threshold_table_path"),
            images=raw.get("images", {}),
            image_px=int(raw.get("image_px", 1200)),
            fixation_s=float(raw.get("fixation_s", DEFAULT_FIXATION_S)),
            skip_calibration=bool(raw.get("skip_calibration", False)),
        )


def _synthetic_prepared_image(image_id: str, size_px: int) -> np.ndarray:
    """Deterministic prepared-grayscale stand-in when no scan is configured."""
    rng = np.random.default_rng(abs(hash(image_id)) % (2**32))
    base = rng.integers(0, 256, size=(size_px // 40 + 1, size_px // 40 + 1))
    up = np.kron(base, np.ones((40, 40)))[:size_px, :size_px].astype(np.uint8)
    from .stimulus import prepare_image

    return prepare_image(up)


class ExperimentSession:
    """One participant session: calibration, then the planned trial sequence."""

    def __init__(self, config: SessionConfig, clock=time.monotonic):
        self.config = config
        self.clock = clock
        self.catalog = load_default_catalog()
        self.ellipse = base_ellipse(self.catalog)
        self.profile = config.display_profile
        self.log = proto.SessionLog(config.log_path)
        self.table: ThresholdTable | None = None
        if config.threshold_table_path:
            with open(config.threshold_table_path, "r", encoding="utf-8") as f:
                self.table = ThresholdTable.from_csv(f.read())

        if config.study is proto.StudyKind.THRESHOLD:
            self.plan = proto.plan_threshold_study(config.seed)
        else:
            self.plan = proto.plan_guidance_study(config.seed)

        self.state = "idle"
        self.calibration_state = proto.CalibrationState()
        self.calibration: UserCalibration | None = None
        self.trial_ptr = 0
        self.machine: proto.GuidanceTrialMachine | None = None
        self.presented_at: float | None = None
        self._frame_cache: dict[tuple, bytes] = {}
        self._replay()

    # --- log replay -----------------------------------------------------

    def _replay(self):
        for rec in self.log.records:
            kind, data = rec["kind"], rec["data"]
            if kind == "session_start":
                self.state = "running" if self.config.skip_calibration else "calibrating"
            elif kind == "calibration":
                self.calibration = UserCalibration(
                    participant=data["participant"],
                    fits={float(k): v for k, v in data["fits"].items()},
                )
                self.state = "running"
            elif kind in ("threshold_trial", "guidance_trial"):
                self.trial_ptr = max(self.trial_ptr, data["trial_index"] + 1)
        if self.state == "running" and self.trial_ptr >= len(self.plan.trials):
            self.state = "done"

    # --- state ----------------------------------------------------------

    def snapshot(self) -> dict:
        snap = {
            "version": PROTOCOL_VERSION,
            "state": self.state,
            "participant": self.config.participant,
            "study": self.config.study.value,
            "seed": self.config.seed,
            "trial_index": self.trial_ptr,
            "n_trials": len(self.plan.trials),
            "calibration_complete": self.calibration is not None,
        }
        if self.state == "calibrating":
            snap["calibration"] = {
                "r": self.calibration_state.current_r,
                "w": self.calibration_state.w,
                "accepted": len(self.calibration_state.accepted),
                "clamped": self.calibration_state.clamped,
                "flash_pending": self.calibration_state.flash_pending,
            }
        if self.machine is not None:
            snap["phase"] = self.machine.phase.value
        return snap

    def start(self, participant: str | None = None):
        if self.state != "idle":
            raise SequenceViolation(f"session already started (state={self.state})")
        if participant:
            self.config.participant = participant
        self.log.append("session_start", {
            "participant": self.config.participant,
            "study": self.config.study.value,
            "seed": self.config.seed,
        })
        self.state = "running" if self.config.skip_calibration else "calibrating"

    def calibration_step(self, input_name: str) -> dict:
        if self.state != "calibrating":
            raise SequenceViolation(f"calibration step in state {self.state}")
        self.calibration_state = proto.step_calibration(
            self.calibration_state, proto.CalibrationInput(input_name)
        )
        if self.calibration_state.complete:
            self.calibration = self.calibration_state.to_calibration(self.config.participant)
            proto.persist(self.log, self.calibration)
            self.state = "running"
        return self.snapshot()

    # --- trials ---------------------------------------------------------

    def current_trial(self) -> dict:
        if self.state != "running":
            raise SequenceViolation(f"no active trial in state {self.state}")
        if self.trial_ptr >= len(self.plan.trials):
            raise SequenceViolation("all trials complete")
        trial = self.plan.trials[self.trial_ptr]
        now = self.clock()
        if self.presented_at is None:
            self.presented_at = now
            if self.config.study is proto.StudyKind.GUIDANCE:
                roi_radius_px = mm_to_px(self.profile, RoiSpec(trial.roi_center_px).roi_diameter_mm) / 2
                self.machine = proto.GuidanceTrialMachine(trial, roi_radius_px)
                self.machine.enter(proto.TrialPhase.FIXATION, now)
        info = trial.to_record()
        info.update(
            {
                "version": PROTOCOL_VERSION,
                "stimulus": {
                    "a": f"/stimulus/{trial.index}/a",
                    "b": f"/stimulus/{trial.index}/b",
                },
                "break_after": self.plan.break_after(self.trial_ptr),
                "fixation_s": self.config.fixation_s,
            }
        )
        if self.machine is not None:
            info["phase"] = self.machine.phase.value
        return info

    def _weight_for(self, r: float) -> float:
        if self.calibration is None or r == 0:
            return 0.5
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            return interpolate_weight(self.calibration, r)

    def render_trial_frames(self, trial_index: int) -> StimulusFramePair:
        trial = self.plan.trials[trial_index]
        if isinstance(trial, proto.ThresholdTrial):
            return render_threshold_stimulus(
                self.profile,
                r=trial.r,
                w=self._weight_for(trial.r),
                d_mm=trial.d,
                l_mm=trial.l,
                vibrating_index=trial.vibrating_index or 1,
                ellipse=self.ellipse,
            )
        if self.table is None:
            raise SequenceViolation("guidance study needs a threshold table")
        if self.calibration is None:
            raise SequenceViolation("guidance study needs a completed calibration")
        image_path = self.config.images.get(trial.image_id)
        if image_path:
            from .stimulus import load_frame, prepare_image

            image = prepare_image(load_frame(image_path))
        else:
            image = _synthetic_prepared_image(trial.image_id, self.config.image_px)
        return render_guidance(
            image=image,
            roi=RoiSpec(center_px=trial.roi_center_px),
            condition=GuidanceCondition(trial.condition),
            table=self.table,
            cal=self.calibration,
            profile=self.profile,
            ellipse=self.ellipse,
        )

    def stimulus_png(self, trial_index: int, which: str) -> bytes:
        if which not in ("a", "b"):
            raise ValueError("frame selector must be 'a' or 'b'")
        key = (trial_index, which)
        if key not in self._frame_cache:
            if len(self._frame_cache) > 8:
                self._frame_cache.clear()
            pair = self.render_trial_frames(trial_index)
            for name, frame in (("a", pair.frame_a), ("b", pair.frame_b)):
                buf = io.BytesIO()
                Image.fromarray(frame).save(buf, format="PNG")
                self._frame_cache[(trial_index, name)] = buf.getvalue()
        return self._frame_cache[key]

    def enter_phase(self, phase_name: str) -> dict:
        if self.machine is None:
            raise SequenceViolation("no guidance trial in progress")
        self.machine.enter(proto.TrialPhase(phase_name), self.clock())
        return self.snapshot()

    def post_response(self, payload: dict) -> dict:
        if self.state != "running":
            raise SequenceViolation(f"response posted in state {self.state}")
        if self.trial_ptr >= len(self.plan.trials):
            raise SequenceViolation("all trials complete")
        trial = self.plan.trials[self.trial_ptr]
        now = self.clock()
        if self.config.study is proto.StudyKind.THRESHOLD:
            if self.presented_at is None:
                raise SequenceViolation("trial was never presented")
            state = PerceptState(payload["state"])
            chosen = payload.get("location_chosen")
            if trial.l == 0:
                chosen = None
            record = proto.ThresholdTrialRecord(
                trial_index=trial.index,
                r=trial.r,
                d=trial.d,
                l=trial.l,
                state=state,
                location_chosen=chosen,
                location_actual=trial.vibrating_index,
                latency=now - self.presented_at,
            )
            proto.persist(self.log, record)
            self._advance()
            return self.snapshot()
        # Guidance study: click or timeout during the search phase.
        if self.machine is None:
            raise SequenceViolation("trial was never presented")
        if payload.get("timeout"):
            self.machine.post_timeout(now)
        else:
            x, y = payload["click"]
            self.machine.post_click(float(x), float(y), now)
        return self.snapshot()

    def post_questionnaire(self, naturalness: int, obtrusiveness: int) -> dict:
        if self.machine is None:
            raise SequenceViolation("no guidance trial in progress")
        self.machine.post_likert(naturalness, obtrusiveness)
        record = self.machine.seal()
        proto.persist(self.log, record)
        self._advance()
        return self.snapshot()

    def _advance(self):
        self.trial_ptr += 1
        self.presented_at = None
        self.machine = None
        if self.trial_ptr >= len(self.plan.trials):
            self.state = "done"


def create_app(config: SessionConfig, clock=time.monotonic) -> FastAPI:
    """FastAPI app exposing the session endpoints; one session per app."""
    app = FastAPI(title="colorvib session service")
    session = ExperimentSession(config, clock=clock)
    lock = threading.Lock()
    app.state.session = session

    def guarded(fn):
        with lock:
            try:
                return fn()
            except SequenceViolation as exc:
                raise HTTPException(status_code=409, detail=str(exc))
            except (ColorVibError, ValueError, KeyError) as exc:
                raise HTTPException(status_code=400, detail=str(exc))

    @app.get("/session/state")
    def session_state():
        return guarded(session.snapshot)

    @app.post("/session/start")
    def session_start(payload: dict | None = None):
        payload = payload or {}
        def run():
            session.start(payload.get("participant"))
            return session.snapshot()
        return guarded(run)

    @app.get("/trial/current")
    def trial_current():
        return guarded(session.current_trial)

    @app.get("/stimulus/{trial_index}/{which}")
    def stimulus(trial_index: int, which: str):
        png = guarded(lambda: session.stimulus_png(trial_index, which))
        return Response(content=png, media_type="image/png")

    @app.post("/trial/phase")
    def trial_phase(payload: dict):
        return guarded(lambda: session.enter_phase(payload["phase"]))

    @app.post("/trial/response")
    def trial_response(payload: dict):
        return guarded(lambda: session.post_response(payload))

    @app.post("/calibration/step")
    def calibration_step(payload: dict):
        return guarded(lambda: session.calibration_step(payload["input"]))

    @app.post("/questionnaire")
    def questionnaire(payload: dict):
        return guarded(
            lambda: session.post_questionnaire(int(payload["naturalness"]), int(payload["obtrusiveness"]))
        )

    return app
