/**
 * Wire protocol between the viewer and the render server.
 *
 * Client messages carry local-frame displacements (meters, with f1 right,
 * f2 up, f3 backward), view rotations in radians, resize requests, and
 * lighting-config patches. Server messages carry the authoritative pose,
 * raw RGB8 frames (base64), and the initial hello.
 */

export type ClientMessage =
  | { type: "move"; dv: [number, number, number] }
  | { type: "rotate"; yaw: number; pitch: number; roll: number }
  | { type: "resize"; w: number; h: number }
  | { type: "config"; patch: Record<string, unknown> };

export interface PoseData {
  g: number[];          // 16 numbers, row-major 4x4
  m: number[];          // 9 numbers, row-major 3x3
  fiber?: number;       // present for the universal cover of SL(2,R)
}

export type ServerMessage =
  | { type: "hello"; geometry: string; pose: PoseData }
  | { type: "frame"; w: number; h: number; pixels: string }
  | ({ type: "pose" } & PoseData);

export class ProtocolError extends Error {}

function isFiniteArray(x: unknown, n: number): x is number[] {
  return Array.isArray(x) && x.length === n &&
    x.every((v) => typeof v === "number" && Number.isFinite(v));
}

export function encodeClientMessage(msg: ClientMessage): string {
  if (msg.type === "move" && !isFiniteArray(msg.dv, 3)) {
    throw new ProtocolError("move requires a finite 3-vector");
  }
  return JSON.stringify(msg);
}

function checkPose(pose: unknown): PoseData {
  const p = pose as PoseData;
  if (!p || !isFiniteArray(p.g, 16) || !isFiniteArray(p.m, 9)) {
    throw new ProtocolError("malformed pose payload");
  }
  return p;
}

export function parseServerMessage(raw: string): ServerMessage {
  let data: unknown;
  try {
    data = JSON.parse(raw);
  } catch {
    throw new ProtocolError("server message is not JSON");
  }
  const msg = data as Record<string, unknown>;
  switch (msg.type) {
    case "hello": {
      if (typeof msg.geometry !== "string") {
        throw new ProtocolError("hello without geometry id");
      }
      return { type: "hello", geometry: msg.geometry,
               pose: checkPose(msg.pose) };
    }
    case "frame": {
      if (typeof msg.w !== "number" || typeof msg.h !== "number" ||
          typeof msg.pixels !== "string") {
        throw new ProtocolError("malformed frame message");
      }
      return { type: "frame", w: msg.w, h: msg.h, pixels: msg.pixels };
    }
    case "pose":
      return { type: "pose", ...checkPose(msg) };
    default:
      throw new ProtocolError(`unknown server message ${String(msg.type)}`);
  }
}

interface NodeBufferLike {
  from(data: string, encoding: string): { toString(encoding: string): string };
}

/** Decode the base64 RGB8 payload of a frame message. */
export function decodePixels(b64: string): Uint8Array {
  const nodeBuffer = (globalThis as { Buffer?: NodeBufferLike }).Buffer;
  const bin = typeof atob === "function"
    ? atob(b64)
    : nodeBuffer!.from(b64, "base64").toString("binary");
  const out = new Uint8Array(bin.length);
  for (let i = 0; i < bin.length; i++) out[i] = bin.charCodeAt(i);
  return out;
}

/** Expand tightly packed RGB8 into RGBA for canvas ImageData. */
export function rgbToRgba(rgb: Uint8Array): Uint8ClampedArray<ArrayBuffer> {
  const n = rgb.length / 3;
  const out = new Uint8ClampedArray(new ArrayBuffer(n * 4));
  for (let i = 0; i < n; i++) {
    out[4 * i] = rgb[3 * i];
    out[4 * i + 1] = rgb[3 * i + 1];
    out[4 * i + 2] = rgb[3 * i + 2];
    out[4 * i + 3] = 255;
  }
  return out;
}
