// Wire protocol of the teleop websocket bridge. One JSON text frame per
// message; the server answers every action or reset with exactly one frame.

export interface HelloMsg {
  type: "hello";
  scene_id: string;
  intrinsics: { width: number; height: number; fx: number; fy: number; cx: number; cy: number };
  max_steps: number;
  clip: { translation: number; rotation: number };
}

export interface FrameMsg {
  type: "frame";
  step: number;
  rgb_png_base64: string;
  visibility: number;
  in_frame: boolean;
  success: boolean;
  pose: number[];
}

export interface SavedMsg {
  type: "saved";
  path: string;
}

export interface RejectedMsg {
  type: "rejected";
  reason: string;
}

export interface DiscardedMsg {
  type: "discarded";
}

export type ServerMsg = HelloMsg | FrameMsg | SavedMsg | RejectedMsg | DiscardedMsg;

// tx, ty, tz in meters, then roll, pitch, yaw in radians (camera frame)
export type Delta = [number, number, number, number, number, number];

export function parseServerMsg(data: string): ServerMsg {
  let raw: unknown;
  try {
    raw = JSON.parse(data);
  } catch {
    throw new Error("server sent invalid JSON");
  }
  if (typeof raw !== "object" || raw === null || typeof (raw as any).type !== "string") {
    throw new Error("server message has no type");
  }
  const msg = raw as ServerMsg;
  switch (msg.type) {
    case "hello":
      if (typeof msg.scene_id !== "string" || typeof msg.max_steps !== "number") {
        throw new Error("malformed hello");
      }
      return msg;
    case "frame":
      if (
        typeof msg.step !== "number" ||
        typeof msg.rgb_png_base64 !== "string" ||
        typeof msg.success !== "boolean"
      ) {
        throw new Error("malformed frame");
      }
      return msg;
    case "saved":
      if (typeof msg.path !== "string") throw new Error("malformed saved");
      return msg;
    case "rejected":
      if (typeof msg.reason !== "string") throw new Error("malformed rejected");
      return msg;
    case "discarded":
      return msg;
    default:
      throw new Error(`unknown server message type ${(msg as any).type}`);
  }
}

export function actionMsg(delta: Delta): string {
  return JSON.stringify({ type: "action", delta });
}

export const resetMsg = JSON.stringify({ type: "reset" });
export const saveMsg = JSON.stringify({ type: "save" });
export const discardMsg = JSON.stringify({ type: "discard" });
