import { GameClient } from "./client.js";
import { draw } from "./render.js";

const params = new URLSearchParams(window.location.search);
const url = params.get("server") ?? "ws://127.0.0.1:8008";
const roundDuration = Number(params.get("duration") ?? "60");
const seed = Number(params.get("seed") ?? "1");

const canvas = document.getElementById("game") as HTMLCanvasElement;
const ctx = canvas.getContext("2d")!;

function fit(): void {
  canvas.width = window.innerWidth;
  canvas.height = window.innerHeight;
}
window.addEventListener("resize", fit);
fit();

const client = new GameClient({
  url,
  seed,
  roundDuration,
  makeSocket: (u) => new WebSocket(u),
});
client.connect();

function frame(): void {
  client.tick();
  draw(ctx, client.state, performance.now() / 1000);
  requestAnimationFrame(frame);
}
requestAnimationFrame(frame);
