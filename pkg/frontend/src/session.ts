/**
 * Session driver tying the screens together: runs the calibration descent
 * and individual guidance trials against the service. The same code paths
 * back the interactive UI and the scripted conformance participant.
 */

import type { ServiceClient, SessionSnapshot, TrialInfo } from './api';
import { CalibrationController, type CalibrationStepResult } from './calibration';
import { PhaseMachine, UiPhase } from './phases';

export interface CalibrationScriptStep {
  /** Weight adjustments before accepting at this amplitude level. */
  adjustments: ('increase' | 'decrease')[];
}

/**
 * Complete the five-level calibration descent. Each level applies the
 * scripted adjustments (each a ±0.02 step) and then accepts, which leaves
 * an inverted flash pending for the presenter.
 */
export async function runCalibration(
  client: ServiceClient,
  script: CalibrationScriptStep[] = Array.from({ length: 5 }, () => ({ adjustments: [] })),
): Promise<SessionSnapshot> {
  const controller = new CalibrationController(client);
  let last: CalibrationStepResult | null = null;
  for (const level of script) {
    for (const adjustment of level.adjustments) {
      last = await controller.step(adjustment);
      if (last.flashPending) {
        throw new Error('flash pending after a non-accept input');
      }
    }
    last = await controller.step('accept');
  }
  if (!last || !last.complete) {
    throw new Error('calibration script ended before completion');
  }
  return last.snapshot;
}

export interface GuidanceTrialOutcome {
  trial: TrialInfo;
  snapshot: SessionSnapshot;
}

/**
 * Run one guidance trial: fixation → target → search → click → Likert.
 * `clickAt` defaults to the ROI center (a correct search).
 */
export async function runGuidanceTrial(
  client: ServiceClient,
  options: {
    clickAt?: [number, number];
    naturalness?: number;
    obtrusiveness?: number;
    fetchFrames?: boolean;
  } = {},
): Promise<GuidanceTrialOutcome> {
  const trial = await client.currentTrial();
  const phases = new PhaseMachine(UiPhase.FixationCross);

  if (options.fetchFrames) {
    await client.fetchStimulus(trial.index, 'a');
    await client.fetchStimulus(trial.index, 'b');
  }

  phases.enter(UiPhase.TargetPreview);
  await client.enterPhase('target');
  phases.enter(UiPhase.Search);
  await client.enterPhase('search');

  const click = options.clickAt ?? trial.roi_center_px;
  if (!click) {
    throw new Error('guidance trial carries no ROI center and no click was scripted');
  }
  phases.enter(UiPhase.Questionnaire);
  await client.postResponse({ click });

  const snapshot = await client.postQuestionnaire(
    options.naturalness ?? 4,
    options.obtrusiveness ?? 3,
  );
  return { trial, snapshot };
}
