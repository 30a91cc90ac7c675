export {
  FrameScheduler,
  RefreshTooLow,
  browserFrameClock,
  MIN_REFRESH_HZ,
  WARMUP_TICKS,
  type FrameClock,
  type FrameId,
  type PresentationReport,
  type RefreshEstimate,
} from './scheduler';
export {
  UiPhase,
  PhaseMachine,
  PhaseViolation,
  invertedFlashFrames,
  INVERTED_FLASH_MS,
} from './phases';
export {
  ServiceClient,
  ServiceError,
  sessionSnapshotSchema,
  trialInfoSchema,
  type CalibrationInput,
  type GuidanceResponse,
  type PerceptStateName,
  type SessionSnapshot,
  type ThresholdResponse,
  type TrialInfo,
} from './api';
export {
  CalibrationController,
  inputForKey,
  inputForGamepadButton,
  isGridAligned,
  W_STEP,
  W_START,
  type CalibrationStepResult,
} from './calibration';
export {
  runCalibration,
  runGuidanceTrial,
  type CalibrationScriptStep,
  type GuidanceTrialOutcome,
} from './session';
