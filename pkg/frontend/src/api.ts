/**
 * Typed client for the local experiment session service.
 *
 * The UI talks only to these HTTP/JSON endpoints and serves no data of its
 * own. Exactly one mutating request is in flight at a time (the service
 * serializes them as well); all latency measurements are taken service-side.
 */

import { z } from 'zod';

export const calibrationSnapshotSchema = z.object({
  r: z.number(),
  w: z.number(),
  accepted: z.number().int(),
  clamped: z.boolean(),
  flash_pending: z.boolean(),
});

export const sessionSnapshotSchema = z
  .object({
    version: z.number().int(),
    state: z.enum(['idle', 'calibrating', 'running', 'done']),
    participant: z.string(),
    study: z.enum(['threshold', 'guidance']),
    seed: z.number().int(),
    trial_index: z.number().int(),
    n_trials: z.number().int(),
    calibration_complete: z.boolean(),
    calibration: calibrationSnapshotSchema.optional(),
    phase: z.string().optional(),
  })
  .passthrough();

export const trialInfoSchema = z
  .object({
    version: z.number().int(),
    index: z.number().int(),
    stimulus: z.object({ a: z.string(), b: z.string() }),
    break_after: z.boolean(),
    fixation_s: z.number(),
    // Threshold trials
    r: z.number().optional(),
    d: z.number().optional(),
    l: z.number().optional(),
    vibrating_index: z.number().int().nullable().optional(),
    // Guidance trials
    image_set: z.number().int().optional(),
    image_id: z.string().optional(),
    condition: z.string().optional(),
    roi_center_px: z.tuple([z.number(), z.number()]).optional(),
    phase: z.string().optional(),
  })
  .passthrough();

export type SessionSnapshot = z.infer<typeof sessionSnapshotSchema>;
export type TrialInfo = z.infer<typeof trialInfoSchema>;

export type CalibrationInput = 'increase' | 'decrease' | 'accept';
export type PerceptStateName = 'solid_color' | 'different_not_flickering' | 'clearly_flickering';

export type ThresholdResponse = {
  state: PerceptStateName;
  location_chosen?: number | null;
};
export type GuidanceResponse = { click: [number, number] } | { timeout: true };

export class ServiceError extends Error {
  constructor(
    public readonly status: number,
    public readonly detail: string,
  ) {
    super(`service returned ${status}: ${detail}`);
    this.name = 'ServiceError';
  }

  /** 409: the request arrived out of protocol order. */
  get isSequenceViolation(): boolean {
    return this.status === 409;
  }
}

export class ServiceClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchImpl: typeof fetch = fetch,
  ) {}

  private async request(path: string, init?: RequestInit): Promise<unknown> {
    const resp = await this.fetchImpl(`${this.baseUrl}${path}`, init);
    if (!resp.ok) {
      let detail = resp.statusText;
      try {
        const body = (await resp.json()) as { detail?: string };
        if (body.detail) detail = body.detail;
      } catch {
        // non-JSON error body; keep the status text
      }
      throw new ServiceError(resp.status, detail);
    }
    return resp.json();
  }

  private post(path: string, payload: unknown): Promise<unknown> {
    return this.request(path, {
      method: 'POST',
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify(payload),
    });
  }

  async state(): Promise<SessionSnapshot> {
    return sessionSnapshotSchema.parse(await this.request('/session/state'));
  }

  async start(participant?: string): Promise<SessionSnapshot> {
    return sessionSnapshotSchema.parse(
      await this.post('/session/start', participant ? { participant } : {}),
    );
  }

  async currentTrial(): Promise<TrialInfo> {
    return trialInfoSchema.parse(await this.request('/trial/current'));
  }

  /** Lossless raster frame, drawn without any client-side transformation. */
  async fetchStimulus(trialIndex: number, which: 'a' | 'b'): Promise<Uint8Array> {
    const resp = await this.fetchImpl(`${this.baseUrl}/stimulus/${trialIndex}/${which}`);
    if (!resp.ok) {
      throw new ServiceError(resp.status, resp.statusText);
    }
    return new Uint8Array(await resp.arrayBuffer());
  }

  async enterPhase(phase: string): Promise<SessionSnapshot> {
    return sessionSnapshotSchema.parse(await this.post('/trial/phase', { phase }));
  }

  async postResponse(payload: ThresholdResponse | GuidanceResponse): Promise<SessionSnapshot> {
    return sessionSnapshotSchema.parse(await this.post('/trial/response', payload));
  }

  async calibrationStep(input: CalibrationInput): Promise<SessionSnapshot> {
    return sessionSnapshotSchema.parse(await this.post('/calibration/step', { input }));
  }

  async postQuestionnaire(naturalness: number, obtrusiveness: number): Promise<SessionSnapshot> {
    return sessionSnapshotSchema.parse(
      await this.post('/questionnaire', { naturalness, obtrusiveness }),
    );
  }
}
