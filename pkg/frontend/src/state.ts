// Pure game core. The state is a value, events carry their own timestamps,
// and all randomness flows through an explicit RNG state — so folding the
// same event log over the same options reproduces the identical game,
// which is what the replay tests pin down.

import { ServerMsg, FrameMsg, isFrame } from "./protocol.js";
import { RngState, nextRandom } from "./rng.js";

export const MONSTER_RADIUS = 60; // px
export const HIT_DWELL_S = 0.3;
export const SPAWN_MIN_S = 1.0;
export const SPAWN_MAX_S = 2.0;
export const MONSTER_LIFETIME_S = 4.0;
export const SIGNAL_LOST_S = 1.0;
export const CROSS_MARGIN = 0.05;
export const DISPLAY_AVG_FRAMES = 3;

export type Phase = "AwaitingCalibration" | "CrossA" | "CrossB" | "Playing" | "GameOver";

export interface Point {
  x: number;
  y: number;
}

export interface Monster {
  id: number;
  x: number;
  y: number;
  spawnedAt: number;
  lifetime: number;
  dwellStart: number | null;
}

export interface GameOptions {
  seed: number;
  roundDuration: number; // seconds of play
}

export interface GameState {
  phase: Phase;
  screen: { w: number; h: number };
  dwellFrames: number;
  framesInPhase: number;
  awaitingAck: boolean;
  score: number;
  monsters: Monster[];
  cursor: Point | null; // latest Ok gaze point; drives hits
  recent: Point[]; // last few raw points, display smoothing only
  rng: RngState;
  nextMonsterId: number;
  nextSpawnAt: number | null;
  playStart: number | null;
  roundDuration: number;
  lastFrameAt: number | null;
  signalLost: boolean;
  notice: string | null;
  streamEnded: boolean;
}

export type GameEvent =
  | { kind: "connected"; t: number }
  | { kind: "disconnected"; t: number }
  | { kind: "msg"; msg: ServerMsg; t: number }
  | { kind: "tick"; t: number };

export interface Effect {
  send: Record<string, unknown>;
}

export function initialState(opts: GameOptions): GameState {
  return {
    phase: "AwaitingCalibration",
    screen: { w: 1920, h: 1080 },
    dwellFrames: 30,
    framesInPhase: 0,
    awaitingAck: false,
    score: 0,
    monsters: [],
    cursor: null,
    recent: [],
    rng: opts.seed >>> 0,
    nextMonsterId: 0,
    nextSpawnAt: null,
    playStart: null,
    roundDuration: opts.roundDuration,
    lastFrameAt: null,
    signalLost: false,
    notice: null,
    streamEnded: false,
  };
}

export function crossA(screen: { w: number; h: number }): Point {
  return { x: CROSS_MARGIN * screen.w, y: (1 - CROSS_MARGIN) * screen.h };
}

export function crossB(screen: { w: number; h: number }): Point {
  return { x: (1 - CROSS_MARGIN) * screen.w, y: CROSS_MARGIN * screen.h };
}

/** Smoothed cursor for drawing; game logic never reads this. */
export function displayCursor(s: GameState): Point | null {
  if (s.recent.length === 0) return null;
  const n = s.recent.length;
  let x = 0;
  let y = 0;
  for (const p of s.recent) {
    x += p.x;
    y += p.y;
  }
  return { x: x / n, y: y / n };
}

export function spawnMonster(s: GameState, t: number): GameState {
  let [vx, rng] = nextRandom(s.rng);
  let vy: number;
  [vy, rng] = nextRandom(rng);
  let delay: number;
  [delay, rng] = nextRandom(rng);
  const r = MONSTER_RADIUS;
  const monster: Monster = {
    id: s.nextMonsterId,
    x: r + vx * (s.screen.w - 2 * r),
    y: r + vy * (s.screen.h - 2 * r),
    spawnedAt: t,
    lifetime: MONSTER_LIFETIME_S,
    dwellStart: null,
  };
  return {
    ...s,
    rng,
    monsters: [...s.monsters, monster],
    nextMonsterId: s.nextMonsterId + 1,
    nextSpawnAt: t + SPAWN_MIN_S + delay * (SPAWN_MAX_S - SPAWN_MIN_S),
  };
}

function enterPlaying(s: GameState, t: number): GameState {
  const [delay, rng] = nextRandom(s.rng);
  return {
    ...s,
    phase: "Playing",
    awaitingAck: false,
    notice: null,
    playStart: t,
    lastFrameAt: t,
    rng,
    nextSpawnAt: t + SPAWN_MIN_S + delay * (SPAWN_MAX_S - SPAWN_MIN_S),
  };
}

/** Advance play time: expiry, spawns, dwell hits, round end. */
function advance(s: GameState, t: number): GameState {
  if (s.phase !== "Playing") return s;
  if (s.playStart !== null && t - s.playStart >= s.roundDuration) {
    return { ...s, phase: "GameOver", monsters: [] };
  }
  let monsters = s.monsters.filter((m) => t - m.spawnedAt < m.lifetime);
  let out: GameState = monsters.length === s.monsters.length ? s : { ...s, monsters };
  while (out.nextSpawnAt !== null && t >= out.nextSpawnAt) {
    out = spawnMonster(out, out.nextSpawnAt);
  }
  const c = out.cursor;
  let score = out.score;
  const survivors: Monster[] = [];
  for (const m of out.monsters) {
    if (c === null || Math.hypot(c.x - m.x, c.y - m.y) > MONSTER_RADIUS) {
      survivors.push(m.dwellStart === null ? m : { ...m, dwellStart: null });
      continue;
    }
    const start = m.dwellStart ?? t;
    if (t - start >= HIT_DWELL_S) {
      score += 1; // popped
    } else {
      survivors.push(m.dwellStart === null ? { ...m, dwellStart: start } : m);
    }
  }
  out = { ...out, score, monsters: survivors };
  const lost =
    out.lastFrameAt !== null && t - out.lastFrameAt > SIGNAL_LOST_S;
  if (lost !== out.signalLost) out = { ...out, signalLost: lost };
  return out;
}

function onFrame(s: GameState, msg: FrameMsg, t: number): { state: GameState; effects: Effect[] } {
  let out: GameState = { ...s, lastFrameAt: t, signalLost: false };
  if (msg.status === "Ok" && msg.screen !== null) {
    const p = { x: msg.screen.x, y: msg.screen.y };
    out = {
      ...out,
      cursor: p,
      recent: [...out.recent, p].slice(-DISPLAY_AVG_FRAMES),
    };
  }
  const effects: Effect[] = [];
  if ((out.phase === "CrossA" || out.phase === "CrossB") && !out.awaitingAck) {
    const n = out.framesInPhase + 1;
    if (n < out.dwellFrames) {
      out = { ...out, framesInPhase: n };
    } else if (out.phase === "CrossA") {
      out = { ...out, phase: "CrossB", framesInPhase: 0 };
    } else {
      out = { ...out, framesInPhase: n, awaitingAck: true };
      const a = crossA(out.screen);
      const b = crossB(out.screen);
      effects.push({
        send: {
          cmd: "calibrate",
          crosses: [
            { x: a.x, y: a.y },
            { x: b.x, y: b.y },
          ],
        },
      });
    }
  }
  return { state: advance(out, t), effects };
}

export function step(s: GameState, ev: GameEvent): { state: GameState; effects: Effect[] } {
  switch (ev.kind) {
    case "connected":
      return { state: { ...s, notice: null }, effects: [] };
    case "disconnected":
      if (s.phase === "GameOver") return { state: s, effects: [] };
      return {
        state: {
          ...s,
          phase: "AwaitingCalibration",
          framesInPhase: 0,
          awaitingAck: false,
          monsters: [],
          notice: "connection lost — reconnecting",
        },
        effects: [],
      };
    case "tick":
      return { state: advance(s, ev.t), effects: [] };
    case "msg":
      break;
  }
  const msg = ev.msg;
  if (isFrame(msg)) return onFrame(s, msg, ev.t);
  switch (msg.type) {
    case "hello": {
      let out: GameState = {
        ...s,
        screen: msg.screen,
        dwellFrames: msg.dwell_frames,
        framesInPhase: 0,
        awaitingAck: false,
      };
      out = msg.calibrated ? enterPlaying(out, ev.t) : { ...out, phase: "CrossA" };
      return { state: out, effects: [] };
    }
    case "calibrated":
      if (msg.ok) return { state: enterPlaying(s, ev.t), effects: [] };
      return {
        state: {
          ...s,
          phase: "CrossA",
          framesInPhase: 0,
          awaitingAck: false,
          notice: `calibration failed — try again (${msg.error ?? "unknown"})`,
        },
        effects: [],
      };
    case "recalibrated":
      return {
        state: { ...s, phase: "CrossA", framesInPhase: 0, awaitingAck: false },
        effects: [],
      };
    case "end":
      return { state: { ...s, streamEnded: true }, effects: [] };
  }
}

/** Fold an event log into a final state; the replay-determinism contract. */
export function replay(opts: GameOptions, events: GameEvent[]): GameState {
  let s = initialState(opts);
  for (const ev of events) {
    s = step(s, ev).state;
  }
  return s;
}
