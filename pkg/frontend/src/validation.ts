/**
 * Client-side score validation.
 *
 * Mirrors the study service rule exactly: a score is a finite number in
 * [1, 5] that sits on the 0.1 grid (within 1e-6 of a tenth). The service
 * rejects anything else with a 422, so the UI must never let such a value
 * reach the wire.
 */

export const SCORE_MIN = 1.0;
export const SCORE_MAX = 5.0;
export const SCORE_STEP = 0.1;

export const DIMENSIONS = ["audio_quality", "consistency", "overall"] as const;
export type Dimension = (typeof DIMENSIONS)[number];

export const DIMENSION_LABELS: Record<Dimension, string> = {
  audio_quality: "Audio quality",
  consistency: "Audio-visual consistency",
  overall: "Overall quality",
};

/** True when value is a number the service would accept for one dimension. */
export function scoreOnGrid(value: unknown): value is number {
  if (typeof value !== "number" || !Number.isFinite(value)) return false;
  if (value < SCORE_MIN || value > SCORE_MAX) return false;
  // Grid distance is either < 2e-15 or >= ~1e-3 for sane inputs, so the
  // tie-breaking style of Math.round vs banker's rounding cannot matter.
  return Math.abs(value * 10 - Math.round(value * 10)) < 1e-6;
}

export function scoreError(value: unknown, name = "score"): string | null {
  if (scoreOnGrid(value)) return null;
  return `${name} must be in [1, 5] with 0.1 steps`;
}

/**
 * Validate a full score triple the way the service does: a plain object,
 * no extra keys, all three dimensions present and on the grid.
 * Returns null when the payload would be accepted.
 */
export function validateScores(scores: unknown): string | null {
  if (typeof scores !== "object" || scores === null || Array.isArray(scores)) {
    return "scores must be a mapping of the three dimensions";
  }
  const record = scores as Record<string, unknown>;
  const known: readonly string[] = DIMENSIONS;
  const extra = Object.keys(record).filter((key) => !known.includes(key));
  if (extra.length > 0) {
    return `unexpected score keys: ${extra.sort().join(", ")}`;
  }
  for (const dim of DIMENSIONS) {
    if (!(dim in record)) return `missing score for ${dim}`;
    const err = scoreError(record[dim], dim);
    if (err) return err;
  }
  return null;
}

/** Clamp into [1, 5] and snap onto the 0.1 grid. */
export function snapToGrid(value: number): number {
  if (!Number.isFinite(value)) return 3.0;
  const clamped = Math.min(SCORE_MAX, Math.max(SCORE_MIN, value));
  return Math.round(clamped * 10) / 10;
}

/** One-decimal display form, e.g. 4 -> "4.0". */
export function formatScore(value: number): string {
  return value.toFixed(1);
}
