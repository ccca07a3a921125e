// mulberry32, in a functional shape so the game state can carry the RNG
// state as a plain number and stay replayable.

export type RngState = number;

/** One draw: returns the value in [0, 1) and the advanced state. */
export function nextRandom(state: RngState): [number, RngState] {
  const a = (state + 0x6d2b79f5) >>> 0;
  let t = a;
  t = Math.imul(t ^ (t >>> 15), t | 1);
  t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
  const value = ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  return [value, a];
}
