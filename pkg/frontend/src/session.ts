// Teleop client session: a step-locked state machine over one websocket.
// At most one action is ever in flight; while waiting for the answering
// frame, at most one further command is queued and extra input is dropped.
// This keeps the client's step counter aligned with the server recording.

import {
  actionMsg,
  discardMsg,
  parseServerMsg,
  resetMsg,
  saveMsg,
  type Delta,
  type FrameMsg,
  type HelloMsg,
  type ServerMsg,
} from "./protocol.js";

export interface SocketLike {
  send(data: string): void;
  close(): void;
  onopen: (() => void) | null;
  onmessage: ((ev: { data: string }) => void) | null;
  onclose: (() => void) | null;
  onerror: ((ev: unknown) => void) | null;
}

export type SocketFactory = (url: string) => SocketLike;

export type SessionState =
  | "disconnected"
  | "connecting"
  | "live"
  | "saved"
  | "discarded"
  | "error";

export interface SessionEvents {
  onHello?: (hello: HelloMsg) => void;
  onFrame?: (frame: FrameMsg) => void;
  onSaved?: (path: string) => void;
  onRejected?: (reason: string) => void;
  onState?: (state: SessionState) => void;
}

export class TeleopClient {
  state: SessionState = "disconnected";
  hello: HelloMsg | null = null;
  lastFrame: FrameMsg | null = null;
  droppedInputs = 0;

  private socket: SocketLike | null = null;
  private awaitingFrame = false;
  private queued: Delta | null = null;
  private wasConnected = false;

  constructor(
    private url: string,
    private events: SessionEvents = {},
    private factory: SocketFactory = (u) => new WebSocket(u) as unknown as SocketLike,
  ) {}

  /** Step counter shown to the operator: observations so far (1-based). */
  get stepCount(): number {
    return this.lastFrame === null ? 0 : this.lastFrame.step + 1;
  }

  get maxSteps(): number {
    return this.hello?.max_steps ?? 50;
  }

  get canSave(): boolean {
    return this.state === "live" && this.lastFrame !== null && this.lastFrame.success;
  }

  get inFlight(): boolean {
    return this.awaitingFrame;
  }

  connect(): void {
    this.setState("connecting");
    this.awaitingFrame = false;
    this.queued = null;
    const sock = this.factory(this.url);
    this.socket = sock;
    sock.onopen = () => {
      // a reconnect after a drop restarts the episode so the recording on
      // the server and the operator's mental state agree
      if (this.wasConnected) {
        sock.send(resetMsg);
        this.awaitingFrame = true;
      }
      this.wasConnected = true;
    };
    sock.onmessage = (ev) => this.handleMessage(ev.data);
    sock.onclose = () => {
      if (this.state !== "error") this.setState("disconnected");
    };
    sock.onerror = () => this.setState("error");
  }

  disconnect(): void {
    this.socket?.close();
    this.socket = null;
    this.setState("disconnected");
  }

  /** Send one axis increment; queued (depth 1) while a step is in flight. */
  sendAction(delta: Delta): boolean {
    if (this.state !== "live" || this.socket === null) return false;
    if (this.stepCount >= this.maxSteps) return false;
    if (this.awaitingFrame) {
      if (this.queued === null) {
        this.queued = delta;
      } else {
        this.droppedInputs += 1;
      }
      return false;
    }
    this.awaitingFrame = true;
    this.socket.send(actionMsg(delta));
    return true;
  }

  reset(): void {
    if (this.socket === null) return;
    this.queued = null;
    this.awaitingFrame = true;
    this.socket.send(resetMsg);
    if (this.state !== "connecting") this.setState("live");
  }

  save(): boolean {
    if (!this.canSave || this.socket === null || this.awaitingFrame) return false;
    this.socket.send(saveMsg);
    return true;
  }

  discard(): void {
    if (this.socket === null) return;
    this.queued = null;
    this.socket.send(discardMsg);
  }

  private handleMessage(data: string): void {
    let msg: ServerMsg;
    try {
      msg = parseServerMsg(data);
    } catch (e) {
      this.setState("error");
      return;
    }
    switch (msg.type) {
      case "hello":
        this.hello = msg;
        this.setState("live");
        this.events.onHello?.(msg);
        break;
      case "frame":
        this.lastFrame = msg;
        this.awaitingFrame = false;
        this.events.onFrame?.(msg);
        if (this.queued !== null) {
          const next = this.queued;
          this.queued = null;
          this.sendAction(next);
        }
        break;
      case "saved":
        this.setState("saved");
        this.events.onSaved?.(msg.path);
        break;
      case "rejected":
        if (msg.reason === "session_busy") {
          this.setState("error");
        }
        this.awaitingFrame = false;
        this.events.onRejected?.(msg.reason);
        break;
      case "discarded":
        this.setState("discarded");
        break;
    }
  }

  private setState(state: SessionState): void {
    this.state = state;
    this.events.onState?.(state);
  }
}
