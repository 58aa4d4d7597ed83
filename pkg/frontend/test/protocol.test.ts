import { describe, expect, it } from "vitest";

import {
  ProtocolError,
  decodePixels,
  encodeClientMessage,
  parseServerMessage,
  rgbToRgba,
} from "../src/protocol.js";

describe("client message encoding", () => {
  it("round-trips a move", () => {
    const raw = encodeClientMessage({ type: "move", dv: [0, 0, -0.05] });
    expect(JSON.parse(raw)).toEqual({ type: "move", dv: [0, 0, -0.05] });
  });

  it("rejects non-finite displacements", () => {
    expect(() => encodeClientMessage(
      { type: "move", dv: [NaN, 0, 0] })).toThrow(ProtocolError);
  });

  it("encodes rotations and resizes", () => {
    expect(JSON.parse(encodeClientMessage(
      { type: "rotate", yaw: 0.1, pitch: 0, roll: 0 }))).toMatchObject(
      { type: "rotate", yaw: 0.1 });
    expect(JSON.parse(encodeClientMessage(
      { type: "resize", w: 320, h: 180 }))).toEqual(
      { type: "resize", w: 320, h: 180 });
  });
});

describe("server message parsing", () => {
  const pose = { g: Array(16).fill(0), m: Array(9).fill(0) };

  it("parses hello, pose, and frame", () => {
    const hello = parseServerMessage(JSON.stringify(
      { type: "hello", geometry: "nil", pose }));
    expect(hello).toMatchObject({ type: "hello", geometry: "nil" });
    const p = parseServerMessage(JSON.stringify(
      { type: "pose", ...pose, fiber: 1.5 }));
    expect(p).toMatchObject({ type: "pose", fiber: 1.5 });
    const frame = parseServerMessage(JSON.stringify(
      { type: "frame", w: 2, h: 1, pixels: "AAAA" }));
    expect(frame).toMatchObject({ type: "frame", w: 2, h: 1 });
  });

  it("rejects malformed payloads", () => {
    expect(() => parseServerMessage("{nope")).toThrow(ProtocolError);
    expect(() => parseServerMessage(JSON.stringify(
      { type: "warp" }))).toThrow(ProtocolError);
    expect(() => parseServerMessage(JSON.stringify(
      { type: "pose", g: [1, 2], m: [] }))).toThrow(ProtocolError);
    expect(() => parseServerMessage(JSON.stringify(
      { type: "hello", pose }))).toThrow(ProtocolError);
  });
});

describe("pixel decoding", () => {
  it("decodes base64 RGB and expands to RGBA", () => {
    const rgb = Buffer.from([10, 20, 30, 40, 50, 60]);
    const decoded = decodePixels(rgb.toString("base64"));
    expect(Array.from(decoded)).toEqual([10, 20, 30, 40, 50, 60]);
    const rgba = rgbToRgba(decoded);
    expect(Array.from(rgba)).toEqual([10, 20, 30, 255, 40, 50, 60, 255]);
  });
});
