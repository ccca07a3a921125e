// Canvas drawing. Reads the state, never changes it.

import {
  GameState,
  HIT_DWELL_S,
  MONSTER_RADIUS,
  Point,
  crossA,
  crossB,
  displayCursor,
} from "./state.js";

export function draw(
  ctx: CanvasRenderingContext2D,
  s: GameState,
  now: number,
): void {
  const cw = ctx.canvas.width;
  const ch = ctx.canvas.height;
  const sx = cw / s.screen.w;
  const sy = ch / s.screen.h;
  ctx.clearRect(0, 0, cw, ch);
  ctx.fillStyle = "#10141c";
  ctx.fillRect(0, 0, cw, ch);

  const toCanvas = (p: Point): Point => ({ x: p.x * sx, y: p.y * sy });

  if (s.phase === "CrossA" || s.phase === "CrossB") {
    const p = toCanvas(s.phase === "CrossA" ? crossA(s.screen) : crossB(s.screen));
    drawCross(ctx, p);
    banner(ctx, cw, `look at the cross (${s.phase === "CrossA" ? "1" : "2"}/2)`);
  } else if (s.phase === "AwaitingCalibration") {
    banner(ctx, cw, "connecting to gaze stream…");
  }

  if (s.phase === "Playing") {
    for (const m of s.monsters) {
      const p = toCanvas(m);
      const r = MONSTER_RADIUS * sx;
      ctx.fillStyle = "#7a4ff0";
      ctx.beginPath();
      ctx.arc(p.x, p.y, r, 0, 2 * Math.PI);
      ctx.fill();
      // hammerhead lobes
      ctx.beginPath();
      ctx.arc(p.x - r * 0.9, p.y - r * 0.5, r * 0.35, 0, 2 * Math.PI);
      ctx.arc(p.x + r * 0.9, p.y - r * 0.5, r * 0.35, 0, 2 * Math.PI);
      ctx.fill();
      ctx.fillStyle = "#fff";
      ctx.beginPath();
      ctx.arc(p.x - r * 0.35, p.y - r * 0.2, r * 0.16, 0, 2 * Math.PI);
      ctx.arc(p.x + r * 0.35, p.y - r * 0.2, r * 0.16, 0, 2 * Math.PI);
      ctx.fill();
      if (m.dwellStart !== null) {
        const frac = Math.min(1, (now - m.dwellStart) / HIT_DWELL_S);
        ctx.strokeStyle = "#ffd34d";
        ctx.lineWidth = 5;
        ctx.beginPath();
        ctx.arc(p.x, p.y, r + 6, -Math.PI / 2, -Math.PI / 2 + frac * 2 * Math.PI);
        ctx.stroke();
      }
    }
  }

  const dc = displayCursor(s);
  if (dc !== null && (s.phase === "Playing" || s.phase === "GameOver")) {
    const p = toCanvas(dc);
    ctx.strokeStyle = "#4de3a2";
    ctx.lineWidth = 2;
    ctx.beginPath();
    ctx.arc(p.x, p.y, 10, 0, 2 * Math.PI);
    ctx.moveTo(p.x - 16, p.y);
    ctx.lineTo(p.x + 16, p.y);
    ctx.moveTo(p.x, p.y - 16);
    ctx.lineTo(p.x, p.y + 16);
    ctx.stroke();
  }

  ctx.fillStyle = "#e8e8f0";
  ctx.font = "20px system-ui, sans-serif";
  ctx.textAlign = "left";
  ctx.fillText(`score ${s.score}`, 16, 30);
  if (s.phase === "Playing" && s.playStart !== null) {
    const left = Math.max(0, s.roundDuration - (now - s.playStart));
    ctx.fillText(`${left.toFixed(0)}s`, 16, 56);
  }
  if (s.signalLost) {
    ctx.fillStyle = "#ff6161";
    ctx.textAlign = "center";
    ctx.fillText("signal lost", cw / 2, 30);
  }
  if (s.notice !== null) {
    ctx.fillStyle = "#ffd34d";
    ctx.textAlign = "center";
    ctx.fillText(s.notice, cw / 2, ch - 24);
  }
  if (s.phase === "GameOver") {
    ctx.fillStyle = "#e8e8f0";
    ctx.textAlign = "center";
    ctx.font = "48px system-ui, sans-serif";
    ctx.fillText(`final score: ${s.score}`, cw / 2, ch / 2);
  }
  if (s.streamEnded && s.phase !== "GameOver") {
    ctx.fillStyle = "#ffd34d";
    ctx.textAlign = "center";
    ctx.fillText("stream ended", cw / 2, 60);
  }
}

function drawCross(ctx: CanvasRenderingContext2D, p: Point): void {
  ctx.strokeStyle = "#ffd34d";
  ctx.lineWidth = 4;
  ctx.beginPath();
  ctx.moveTo(p.x - 20, p.y);
  ctx.lineTo(p.x + 20, p.y);
  ctx.moveTo(p.x, p.y - 20);
  ctx.lineTo(p.x, p.y + 20);
  ctx.stroke();
}

function banner(ctx: CanvasRenderingContext2D, cw: number, text: string): void {
  ctx.fillStyle = "#9aa3b5";
  ctx.font = "24px system-ui, sans-serif";
  ctx.textAlign = "center";
  ctx.fillText(text, cw / 2, 90);
}
