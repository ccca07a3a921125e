// Wire types for the gazetrack stream. Control messages carry a "type"
// field; per-frame results are bare objects keyed by frame_id/status.

export interface Hello {
  type: "hello";
  screen: { w: number; h: number };
  calibrated: boolean;
  dwell_frames: number;
  fps: number;
}

export interface CalibratedAck {
  type: "calibrated";
  ok: boolean;
  error?: string;
}

export interface RecalibratedAck {
  type: "recalibrated";
  ok: boolean;
}

export interface EndOfStream {
  type: "end";
}

export interface FrameMsg {
  frame_id: number;
  t_ms: number;
  status: string;
  iris: { cx: number; cy: number; r: number } | null;
  corner: { x: number; y: number } | null;
  delta: { dx: number; dy: number } | null;
  screen: { x: number; y: number } | null;
  inliers: number;
  proc_us: number;
}

export type ServerMsg = Hello | CalibratedAck | RecalibratedAck | EndOfStream | FrameMsg;

export function isFrame(msg: ServerMsg): msg is FrameMsg {
  return !("type" in msg);
}

/** Parse one text message; null for anything that isn't part of the protocol. */
export function parseMessage(raw: string): ServerMsg | null {
  let doc: unknown;
  try {
    doc = JSON.parse(raw);
  } catch {
    return null;
  }
  if (typeof doc !== "object" || doc === null) return null;
  const obj = doc as Record<string, unknown>;
  if (typeof obj.type === "string") {
    switch (obj.type) {
      case "hello":
      case "calibrated":
      case "recalibrated":
      case "end":
        return obj as unknown as ServerMsg;
      default:
        return null;
    }
  }
  if (typeof obj.frame_id === "number" && typeof obj.status === "string") {
    return obj as unknown as FrameMsg;
  }
  return null;
}
