// Socket wiring around the pure core. Everything impure is injectable —
// the socket factory and the clock — so tests can drive a client with a
// fake socket or against a live server without touching a browser.

import { parseMessage } from "./protocol.js";
import { GameEvent, GameOptions, GameState, initialState, step } from "./state.js";

export interface SocketLike {
  send(data: string): void;
  close(): void;
  addEventListener(type: string, listener: (ev: { data?: unknown }) => void): void;
}

export type SocketFactory = (url: string) => SocketLike;

export interface ClientOptions extends GameOptions {
  url: string;
  makeSocket: SocketFactory;
  now?: () => number; // seconds
  reconnectDelayMs?: number;
}

export class GameClient {
  state: GameState;
  /** Every dispatched event, for replay. */
  readonly log: GameEvent[] = [];
  private ws: SocketLike | null = null;
  private listeners: Array<(s: GameState) => void> = [];
  private stopped = false;
  private reconnectTimer: ReturnType<typeof setTimeout> | null = null;
  private readonly now: () => number;

  constructor(private opts: ClientOptions) {
    this.state = initialState(opts);
    this.now = opts.now ?? (() => performance.now() / 1000);
  }

  onChange(cb: (s: GameState) => void): void {
    this.listeners.push(cb);
  }

  connect(): void {
    this.stopped = false;
    const ws = this.opts.makeSocket(this.opts.url);
    this.ws = ws;
    ws.addEventListener("open", () => this.dispatch({ kind: "connected", t: this.now() }));
    ws.addEventListener("message", (ev) => {
      const raw = typeof ev.data === "string" ? ev.data : String(ev.data);
      const msg = parseMessage(raw);
      if (msg !== null) this.dispatch({ kind: "msg", msg, t: this.now() });
    });
    ws.addEventListener("close", () => {
      this.ws = null;
      this.dispatch({ kind: "disconnected", t: this.now() });
      if (!this.stopped) {
        this.reconnectTimer = setTimeout(
          () => this.connect(),
          this.opts.reconnectDelayMs ?? 1500,
        );
      }
    });
    ws.addEventListener("error", () => {
      /* close follows */
    });
  }

  tick(): void {
    this.dispatch({ kind: "tick", t: this.now() });
  }

  dispatch(ev: GameEvent): void {
    this.log.push(ev);
    const { state, effects } = step(this.state, ev);
    this.state = state;
    for (const e of effects) {
      this.ws?.send(JSON.stringify(e.send));
    }
    for (const cb of this.listeners) cb(this.state);
  }

  close(): void {
    this.stopped = true;
    if (this.reconnectTimer !== null) clearTimeout(this.reconnectTimer);
    this.ws?.close();
    this.ws = null;
  }
}
