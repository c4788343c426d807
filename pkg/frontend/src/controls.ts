// 6-DoF increment bindings: each press moves exactly one signed axis by the
// current step size, so one keypress maps to one recorded dataset step.

import type { Delta } from "./protocol.js";

// camera frame: +x right, +y down (image), +z forward (optical axis)
export type Axis = "x" | "y" | "z" | "roll" | "pitch" | "yaw";

export interface AxisCommand {
  axis: Axis;
  sign: 1 | -1;
}

export interface StepSizes {
  translation: number; // meters per press
  rotation: number; // radians per press
}

export const DEFAULT_STEPS: StepSizes = { translation: 0.01, rotation: 0.05 };

// WASD/QE translate, arrows tilt/pan, comma/period twist
export const DEFAULT_KEYMAP: Record<string, AxisCommand> = {
  KeyW: { axis: "z", sign: 1 },
  KeyS: { axis: "z", sign: -1 },
  KeyA: { axis: "x", sign: -1 },
  KeyD: { axis: "x", sign: 1 },
  KeyQ: { axis: "y", sign: -1 }, // up in the image
  KeyE: { axis: "y", sign: 1 },
  ArrowUp: { axis: "roll", sign: -1 }, // rotation about +x lowers the view
  ArrowDown: { axis: "roll", sign: 1 },
  ArrowLeft: { axis: "pitch", sign: -1 },
  ArrowRight: { axis: "pitch", sign: 1 }, // rotation about +y pans right
  Comma: { axis: "yaw", sign: -1 },
  Period: { axis: "yaw", sign: 1 },
};

const AXIS_INDEX: Record<Axis, number> = { x: 0, y: 1, z: 2, roll: 3, pitch: 4, yaw: 5 };

export function buildDelta(cmd: AxisCommand, steps: StepSizes): Delta {
  const delta: Delta = [0, 0, 0, 0, 0, 0];
  const idx = AXIS_INDEX[cmd.axis];
  const size = idx < 3 ? steps.translation : steps.rotation;
  delta[idx] = cmd.sign * size;
  return delta;
}

export function clampSteps(steps: StepSizes, clip: { translation: number; rotation: number }): StepSizes {
  return {
    translation: Math.min(Math.max(steps.translation, 0), clip.translation),
    rotation: Math.min(Math.max(steps.rotation, 0), clip.rotation),
  };
}

export function commandForKey(code: string): AxisCommand | null {
  return DEFAULT_KEYMAP[code] ?? null;
}
