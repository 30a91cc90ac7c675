import { describe, expect, it } from 'vitest';

import {
  INVERTED_FLASH_MS,
  PhaseMachine,
  PhaseViolation,
  UiPhase,
  invertedFlashFrames,
} from '../src/phases';
import { inputForGamepadButton, inputForKey, isGridAligned } from '../src/calibration';

describe('PhaseMachine', () => {
  it('admits the canonical trial order', () => {
    const machine = new PhaseMachine(UiPhase.FixationCross);
    machine.enter(UiPhase.TargetPreview);
    machine.enter(UiPhase.Search);
    machine.enter(UiPhase.Questionnaire);
    machine.enter(UiPhase.Break);
    expect(machine.phase).toBe(UiPhase.Break);
    machine.enter(UiPhase.FixationCross);
  });

  it('rejects transitions that skip fixation or target', () => {
    const machine = new PhaseMachine(UiPhase.FixationCross);
    expect(() => machine.enter(UiPhase.Search)).toThrow(PhaseViolation);
    expect(machine.canEnter(UiPhase.Questionnaire)).toBe(false);
  });

  it('flashes after calibration accepts, then returns to calibration', () => {
    const machine = new PhaseMachine(UiPhase.Calibration);
    machine.enter(UiPhase.InvertedFlash);
    machine.enter(UiPhase.Calibration);
    expect(machine.phase).toBe(UiPhase.Calibration);
  });
});

describe('invertedFlashFrames', () => {
  it.each([60, 75, 120, 144])('realizes 100 ms within one frame period at %d Hz', (hz) => {
    const frames = invertedFlashFrames(hz);
    const periodMs = 1000 / hz;
    expect(Math.abs(frames * periodMs - INVERTED_FLASH_MS)).toBeLessThanOrEqual(periodMs);
  });
});

describe('calibration input bindings', () => {
  it('keyboard mirrors the gamepad', () => {
    expect(inputForKey('ArrowRight')).toBe('increase');
    expect(inputForKey('ArrowLeft')).toBe('decrease');
    expect(inputForKey('Enter')).toBe('accept');
    expect(inputForGamepadButton('right')).toBe('increase');
    expect(inputForKey('x')).toBeNull();
  });

  it('weight grid alignment', () => {
    expect(isGridAligned(0.5)).toBe(true);
    expect(isGridAligned(0.52)).toBe(true);
    expect(isGridAligned(0.38)).toBe(true);
    expect(isGridAligned(0.51)).toBe(false);
  });
});
