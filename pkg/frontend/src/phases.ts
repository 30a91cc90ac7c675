/**
 * UI phase gate. The service is the arbiter of protocol order; the UI
 * enforces the same gate locally so no participant input is ever
 * interpretable outside its phase.
 */

export enum UiPhase {
  Calibration = 'calibration',
  FixationCross = 'fixation',
  TargetPreview = 'target',
  Search = 'search',
  Questionnaire = 'questionnaire',
  Break = 'break',
  InvertedFlash = 'inverted_flash',
}

/** The inverted flash shown after each calibration accept lasts 100 ms. */
export const INVERTED_FLASH_MS = 100;

const ALLOWED: Record<UiPhase, readonly UiPhase[]> = {
  [UiPhase.Calibration]: [UiPhase.Calibration, UiPhase.InvertedFlash, UiPhase.FixationCross],
  [UiPhase.InvertedFlash]: [UiPhase.Calibration, UiPhase.FixationCross],
  [UiPhase.FixationCross]: [UiPhase.TargetPreview],
  [UiPhase.TargetPreview]: [UiPhase.Search],
  [UiPhase.Search]: [UiPhase.Questionnaire],
  [UiPhase.Questionnaire]: [UiPhase.Break, UiPhase.FixationCross],
  [UiPhase.Break]: [UiPhase.FixationCross],
};

export class PhaseViolation extends Error {
  constructor(from: UiPhase, to: UiPhase) {
    super(`illegal phase transition ${from} -> ${to}`);
    this.name = 'PhaseViolation';
  }
}

export class PhaseMachine {
  private current: UiPhase;

  constructor(initial: UiPhase = UiPhase.Calibration) {
    this.current = initial;
  }

  get phase(): UiPhase {
    return this.current;
  }

  /** Advance as directed by the service; anything that skips a phase throws. */
  enter(next: UiPhase): UiPhase {
    if (!ALLOWED[this.current].includes(next)) {
      throw new PhaseViolation(this.current, next);
    }
    this.current = next;
    return next;
  }

  canEnter(next: UiPhase): boolean {
    return ALLOWED[this.current].includes(next);
  }
}

/**
 * Number of display frames that realizes the 100 ms inverted flash.
 * The realized duration is within one frame period of 100 ms by
 * construction (rounding to the nearest whole frame).
 */
export function invertedFlashFrames(refreshHz: number): number {
  return Math.max(1, Math.round((INVERTED_FLASH_MS / 1000) * refreshHz));
}
