// DOM wiring for the teleop control panel: live frame, visibility readouts,
// 6-DoF increment buttons and keys, step sliders, save/discard/reset.

import { buildDelta, clampSteps, commandForKey, DEFAULT_STEPS, type AxisCommand, type StepSizes } from "./controls.js";
import type { FrameMsg, HelloMsg } from "./protocol.js";
import { TeleopClient } from "./session.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

const frameImg = el<HTMLImageElement>("frame");
const sceneLabel = el<HTMLElement>("scene-label");
const stepLabel = el<HTMLElement>("step-label");
const visLabel = el<HTMLElement>("vis-label");
const inFrameBadge = el<HTMLElement>("inframe-badge");
const successBadge = el<HTMLElement>("success-badge");
const connBadge = el<HTMLElement>("conn-badge");
const recBadge = el<HTMLElement>("rec-badge");
const statusLine = el<HTMLElement>("status-line");
const saveBtn = el<HTMLButtonElement>("save-btn");
const discardBtn = el<HTMLButtonElement>("discard-btn");
const resetBtn = el<HTMLButtonElement>("reset-btn");
const reconnectBtn = el<HTMLButtonElement>("reconnect-btn");
const staleBanner = el<HTMLElement>("stale-banner");
const transSlider = el<HTMLInputElement>("trans-step");
const rotSlider = el<HTMLInputElement>("rot-step");
const transLabel = el<HTMLElement>("trans-step-label");
const rotLabel = el<HTMLElement>("rot-step-label");

let steps: StepSizes = { ...DEFAULT_STEPS };

const wsUrl = `${location.protocol === "https:" ? "wss" : "ws"}://${location.host}/ws`;

const client = new TeleopClient(wsUrl, {
  onHello: (hello: HelloMsg) => {
    sceneLabel.textContent = hello.scene_id;
    steps = clampSteps(steps, hello.clip);
    transSlider.max = String(hello.clip.translation);
    rotSlider.max = String(hello.clip.rotation);
    syncSliders();
    statusLine.textContent = `connected to ${hello.scene_id}`;
  },
  onFrame: (frame: FrameMsg) => {
    frameImg.src = `data:image/png;base64,${frame.rgb_png_base64}`;
    staleBanner.hidden = true;
    render();
  },
  onSaved: (path: string) => {
    statusLine.textContent = `saved to ${path}`;
    render();
  },
  onRejected: (reason: string) => {
    statusLine.textContent = `rejected: ${reason}`;
    render();
  },
  onState: () => render(),
});

function render(): void {
  connBadge.textContent = client.state;
  connBadge.className = `badge ${client.state === "live" ? "ok" : client.state === "error" ? "bad" : ""}`;
  recBadge.textContent = client.state === "live" ? "recording" : client.state;
  stepLabel.textContent = `${client.stepCount}/${client.maxSteps}`;
  const frame = client.lastFrame;
  if (frame) {
    visLabel.textContent = `${(frame.visibility * 100).toFixed(1)}%`;
    inFrameBadge.textContent = frame.in_frame ? "in frame" : "off frame";
    inFrameBadge.className = `badge ${frame.in_frame ? "ok" : "bad"}`;
    successBadge.textContent = frame.success ? "success" : "occluded";
    successBadge.className = `badge ${frame.success ? "ok" : "bad"}`;
  }
  saveBtn.disabled = !client.canSave;
  if (client.state === "disconnected" || client.state === "error") {
    staleBanner.hidden = client.lastFrame === null;
    reconnectBtn.hidden = false;
  } else {
    reconnectBtn.hidden = true;
  }
}

function syncSliders(): void {
  transSlider.value = String(steps.translation);
  rotSlider.value = String(steps.rotation);
  transLabel.textContent = `${(steps.translation * 1000).toFixed(0)} mm`;
  rotLabel.textContent = `${((steps.rotation * 180) / Math.PI).toFixed(1)} deg`;
}

function issue(cmd: AxisCommand): void {
  client.sendAction(buildDelta(cmd, steps));
  render();
}

document.addEventListener("keydown", (ev) => {
  if (ev.target instanceof HTMLInputElement) return;
  const cmd = commandForKey(ev.code);
  if (cmd) {
    ev.preventDefault();
    issue(cmd);
  }
});

for (const btn of document.querySelectorAll<HTMLButtonElement>("[data-axis]")) {
  btn.addEventListener("click", () => {
    const axis = btn.dataset.axis as AxisCommand["axis"];
    const sign = Number(btn.dataset.sign) as 1 | -1;
    issue({ axis, sign });
  });
}

transSlider.addEventListener("input", () => {
  steps = clampSteps({ ...steps, translation: Number(transSlider.value) }, {
    translation: Number(transSlider.max),
    rotation: Number(rotSlider.max),
  });
  syncSliders();
});
rotSlider.addEventListener("input", () => {
  steps = clampSteps({ ...steps, rotation: Number(rotSlider.value) }, {
    translation: Number(transSlider.max),
    rotation: Number(rotSlider.max),
  });
  syncSliders();
});

saveBtn.addEventListener("click", () => client.save());
discardBtn.addEventListener("click", () => client.discard());
resetBtn.addEventListener("click", () => client.reset());
reconnectBtn.addEventListener("click", () => client.connect());

syncSliders();
render();
client.connect();
