/**
 * Calibration screen controller: maps gamepad/keyboard input to ±0.02
 * weight steps posted to the service and tracks the grid-aligned expected
 * weight locally so a drifting service is caught immediately.
 */

import type { CalibrationInput, ServiceClient, SessionSnapshot } from './api';

export const W_STEP = 0.02;
export const W_START = 0.5;

/** Keyboard bindings mirror the gamepad so the protocol runs without one. */
const KEY_BINDINGS: Record<string, CalibrationInput> = {
  ArrowRight: 'increase',
  ArrowLeft: 'decrease',
  Enter: 'accept',
};

const GAMEPAD_BINDINGS: Record<string, CalibrationInput> = {
  right: 'increase',
  left: 'decrease',
  a: 'accept',
};

export function inputForKey(key: string): CalibrationInput | null {
  return KEY_BINDINGS[key] ?? null;
}

export function inputForGamepadButton(button: string): CalibrationInput | null {
  return GAMEPAD_BINDINGS[button] ?? null;
}

/** w must always be reachable from 0.5 in whole 0.02 steps. */
export function isGridAligned(w: number, tol = 1e-9): boolean {
  const steps = (w - W_START) / W_STEP;
  return Math.abs(steps - Math.round(steps)) <= tol / W_STEP;
}

export interface CalibrationStepResult {
  snapshot: SessionSnapshot;
  /** True right after an accept: show the 100 ms inverted flash. */
  flashPending: boolean;
  complete: boolean;
}

export class CalibrationController {
  private expectedW = W_START;

  constructor(private readonly client: ServiceClient) {}

  get expected(): number {
    return this.expectedW;
  }

  async step(input: CalibrationInput): Promise<CalibrationStepResult> {
    const snapshot = await this.client.calibrationStep(input);
    const cal = snapshot.calibration;
    if (cal !== undefined) {
      if (input === 'increase' && !cal.clamped) this.expectedW += W_STEP;
      if (input === 'decrease' && !cal.clamped) this.expectedW -= W_STEP;
      if (input === 'accept') this.expectedW = cal.w;
      if (Math.abs(cal.w - this.expectedW) > 1e-9) {
        throw new Error(
          `service weight ${cal.w} diverged from expected ${this.expectedW}`,
        );
      }
      if (!isGridAligned(cal.w)) {
        throw new Error(`service weight ${cal.w} is off the 0.02 grid`);
      }
    }
    return {
      snapshot,
      flashPending: cal?.flash_pending ?? false,
      complete: snapshot.calibration_complete,
    };
  }
}
