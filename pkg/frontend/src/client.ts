/**
 * Server-authoritative viewer session.
 *
 * The client never integrates geometry; it forwards inputs, displays the
 * poses the server reports, and keeps at most one frame request in flight
 * (inputs arriving while a frame is pending are coalesced and flushed when
 * the frame lands). Frames whose dimensions disagree with the negotiated
 * size are dropped and the resize is renegotiated.
 */

import {
  ClientMessage,
  PoseData,
  ServerMessage,
  decodePixels,
  encodeClientMessage,
  parseServerMessage,
} from "./protocol.js";
import { Rotation } from "./input.js";

export interface Transport {
  send(data: string): void;
}

export interface ViewerCallbacks {
  onHello?(geometry: string, pose: PoseData): void;
  onPose?(pose: PoseData): void;
  onFrame?(w: number, h: number, rgb: Uint8Array): void;
  onFrameInterval?(ms: number): void;
}

export class ViewerSession {
  geometry: string | null = null;
  pose: PoseData | null = null;
  width: number;
  height: number;
  inFlight = false;
  private pendingMove: [number, number, number] | null = null;
  private pendingRotation: Rotation | null = null;
  private lastFrameTime: number | null = null;
  private readonly now: () => number;

  constructor(private transport: Transport,
              private callbacks: ViewerCallbacks = {},
              width = 320, height = 180,
              now: () => number = () => Date.now()) {
    this.width = width;
    this.height = height;
    this.now = now;
  }

  // --- input side ----------------------------------------------------------

  move(dv: [number, number, number]): void {
    if (this.inFlight) {
      const p = this.pendingMove ?? [0, 0, 0];
      this.pendingMove = [p[0] + dv[0], p[1] + dv[1], p[2] + dv[2]];
      return;
    }
    this.sendNow({ type: "move", dv });
  }

  rotate(rot: Rotation): void {
    if (this.inFlight) {
      const p = this.pendingRotation ?? { yaw: 0, pitch: 0, roll: 0 };
      this.pendingRotation = {
        yaw: p.yaw + rot.yaw,
        pitch: p.pitch + rot.pitch,
        roll: p.roll + rot.roll,
      };
      return;
    }
    this.sendNow({ type: "rotate", ...rot });
  }

  resize(w: number, h: number): void {
    this.width = w;
    this.height = h;
    this.transport.send(encodeClientMessage({ type: "resize", w, h }));
    this.inFlight = true;
  }

  configure(patch: Record<string, unknown>): void {
    this.transport.send(encodeClientMessage({ type: "config", patch }));
    this.inFlight = true;
  }

  private sendNow(msg: ClientMessage): void {
    this.transport.send(encodeClientMessage(msg));
    this.inFlight = true;
  }

  private flushPending(): void {
    if (this.pendingMove) {
      const dv = this.pendingMove;
      this.pendingMove = null;
      this.sendNow({ type: "move", dv });
      return;
    }
    if (this.pendingRotation) {
      const rot = this.pendingRotation;
      this.pendingRotation = null;
      this.sendNow({ type: "rotate", ...rot });
    }
  }

  // --- server side -----------------------------------------------------------

  handleMessage(raw: string): ServerMessage {
    const msg = parseServerMessage(raw);
    switch (msg.type) {
      case "hello":
        this.geometry = msg.geometry;
        this.pose = msg.pose;
        this.callbacks.onHello?.(msg.geometry, msg.pose);
        break;
      case "pose":
        this.pose = { g: msg.g, m: msg.m, fiber: msg.fiber };
        this.callbacks.onPose?.(this.pose);
        break;
      case "frame": {
        this.inFlight = false;
        if (msg.w !== this.width || msg.h !== this.height) {
          // stale dimensions: drop the frame and renegotiate
          this.resize(this.width, this.height);
          break;
        }
        const t = this.now();
        if (this.lastFrameTime !== null) {
          this.callbacks.onFrameInterval?.(t - this.lastFrameTime);
        }
        this.lastFrameTime = t;
        this.callbacks.onFrame?.(msg.w, msg.h, decodePixels(msg.pixels));
        this.flushPending();
        break;
      }
    }
    return msg;
  }
}
