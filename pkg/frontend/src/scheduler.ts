/**
 * Frame-pair presentation driven by the display's animation callback.
 *
 * The two frames of a color-vibration stimulus must swap every display
 * frame, so the effective alternation frequency is refresh/2. Alternation
 * below 25 Hz becomes visible flicker, so presentation is refused outright
 * when the measured refresh falls under 50 Hz.
 */

export const MIN_REFRESH_HZ = 50;
export const WARMUP_TICKS = 120;

/** A frame drop is declared when a tick arrives this late (in frame periods). */
const DROP_FACTOR = 1.5;

export class RefreshTooLow extends Error {
  constructor(public readonly measuredHz: number) {
    super(
      `measured refresh ${measuredHz.toFixed(1)} Hz is below ${MIN_REFRESH_HZ} Hz; ` +
        'alternation would be visible flicker',
    );
    this.name = 'RefreshTooLow';
  }
}

/** Animation-tick source: the browser's requestAnimationFrame or a test fake. */
export interface FrameClock {
  requestFrame(callback: (timestampMs: number) => void): void;
}

export function browserFrameClock(): FrameClock {
  return {
    requestFrame: (cb) => requestAnimationFrame(cb),
  };
}

export interface RefreshEstimate {
  hz: number;
  /** Sample variance of the tick intervals, ms^2; logged with every trial. */
  intervalVarianceMs2: number;
}

export interface PresentationReport {
  framesA: number;
  framesB: number;
  swaps: number;
  refreshHz: number;
  alternationHz: number;
  droppedFrames: number;
  dropTimestampsMs: number[];
  durationMs: number;
}

export type FrameId = 'a' | 'b';

export class FrameScheduler {
  constructor(private readonly clock: FrameClock) {}

  /** Warm-up estimate of the display refresh from animation-tick spacing. */
  measureRefresh(ticks: number = WARMUP_TICKS): Promise<RefreshEstimate> {
    return new Promise((resolve) => {
      const stamps: number[] = [];
      const tick = (t: number) => {
        stamps.push(t);
        if (stamps.length <= ticks) {
          this.clock.requestFrame(tick);
          return;
        }
        const intervals = stamps.slice(1).map((s, i) => s - stamps[i]!);
        const mean = intervals.reduce((a, b) => a + b, 0) / intervals.length;
        const variance =
          intervals.reduce((a, b) => a + (b - mean) ** 2, 0) / intervals.length;
        resolve({ hz: 1000 / mean, intervalVarianceMs2: variance });
      };
      this.clock.requestFrame(tick);
    });
  }

  /**
   * Show the pair for `frames` display frames, swapping every tick.
   *
   * `draw` performs the integer-exact blit of the named frame; the scheduler
   * never touches pixel data. Rejects with RefreshTooLow before drawing
   * anything if the measured refresh is insufficient.
   */
  async present(
    draw: (which: FrameId) => void,
    frames: number,
    refresh?: RefreshEstimate,
  ): Promise<PresentationReport> {
    const estimate = refresh ?? (await this.measureRefresh());
    if (estimate.hz < MIN_REFRESH_HZ) {
      throw new RefreshTooLow(estimate.hz);
    }
    const nominalMs = 1000 / estimate.hz;

    return new Promise((resolve) => {
      let shown = 0;
      let framesA = 0;
      let framesB = 0;
      let swaps = 0;
      let lastT: number | null = null;
      let firstT: number | null = null;
      const drops: number[] = [];

      const tick = (t: number) => {
        if (firstT === null) firstT = t;
        if (lastT !== null && t - lastT > DROP_FACTOR * nominalMs) {
          drops.push(t);
        }
        lastT = t;

        const which: FrameId = shown % 2 === 0 ? 'a' : 'b';
        draw(which);
        if (which === 'a') framesA += 1;
        else framesB += 1;
        if (shown > 0) swaps += 1;
        shown += 1;

        if (shown < frames) {
          this.clock.requestFrame(tick);
          return;
        }
        resolve({
          framesA,
          framesB,
          swaps,
          refreshHz: estimate.hz,
          alternationHz: estimate.hz / 2,
          droppedFrames: drops.length,
          dropTimestampsMs: drops,
          durationMs: lastT! - firstT!,
        });
      };
      this.clock.requestFrame(tick);
    });
  }
}
