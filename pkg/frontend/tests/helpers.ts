/** Seeded randomness and the fuzz-value generator shared by the suites. */

export type Rng = () => number;

/** mulberry32: tiny deterministic PRNG, uniform in [0, 1). */
export function mulberry32(seed: number): Rng {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = a;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

export function randInt(rng: Rng, lo: number, hi: number): number {
  return lo + Math.floor(rng() * (hi - lo + 1));
}

export function pick<T>(rng: Rng, items: readonly T[]): T {
  return items[Math.floor(rng() * items.length)]!;
}

/** An exact on-grid value: n/10 for n in 10..50. */
export function gridValue(rng: Rng): number {
  return randInt(rng, 10, 50) / 10;
}

const JUNK_STRINGS = ["abc", "", " ", "3,5", "four", "--2", "1.2.3", "0x10"];
const NUMERIC_STRINGS = ["3.5", " 4.2 ", "5", "1", "0.9", "5.1", "1e1", "2.5e0"];
const SPECIAL_NAME_STRINGS = ["inf", "-inf", "Infinity", "nan", "NaN"];

/**
 * One fuzz case. Mixes clean grid values, near-grid perturbations on both
 * sides of the tolerance, off-grid and out-of-range numbers, non-finite
 * numbers, and non-number JSON values. Near-grid epsilons skip the band
 * around the 1e-7 acceptance edge so verdicts never ride on one ulp.
 */
export function fuzzValue(rng: Rng): unknown {
  const roll = rng();
  if (roll < 0.28) {
    // uniform floats, mostly off grid, spanning in and out of range
    return -2 + rng() * 10;
  }
  if (roll < 0.45) {
    return gridValue(rng);
  }
  if (roll < 0.6) {
    // near-grid: inside the tolerance (< 1e-8) or clearly outside (> 5e-7)
    const base = gridValue(rng);
    const sign = rng() < 0.5 ? -1 : 1;
    const eps = rng() < 0.5 ? rng() * 1e-8 : 5e-7 + rng() * 1e-3;
    const v = base + sign * eps;
    // keep range violations out of this bucket so it probes only the grid rule
    return Math.min(5, Math.max(1, v));
  }
  if (roll < 0.7) {
    // out-of-range grid points
    return pick(rng, [0.9, 0.5, 0.0, -1.0, 5.1, 6.0, 9.9, 100.0, -0]);
  }
  if (roll < 0.78) {
    return pick(rng, [Number.NaN, Infinity, -Infinity, 1e300, 1e-300, 1 - 1e-16, 5 + 1e-15]);
  }
  if (roll < 0.84) {
    return randInt(rng, -3, 8); // integers, some in range
  }
  if (roll < 0.9) {
    return pick(rng, NUMERIC_STRINGS);
  }
  if (roll < 0.95) {
    return pick(rng, [...JUNK_STRINGS, ...SPECIAL_NAME_STRINGS]);
  }
  return pick(rng, [null, true, false, [], [3.5], { v: 1 }, {}, undefined] as const);
}
