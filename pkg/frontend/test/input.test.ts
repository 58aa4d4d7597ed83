import { describe, expect, it } from "vitest";

import { InputTracker, dragToRotation } from "../src/input.js";

describe("keyboard movement", () => {
  it("is silent with no keys held", () => {
    const tracker = new InputTracker(1.0);
    expect(tracker.moveVector(0.05)).toBeNull();
  });

  it("maps W to a backward-axis displacement of speed * dt", () => {
    const tracker = new InputTracker(1.0);
    tracker.keyDown("KeyW");
    expect(tracker.moveVector(0.05)).toEqual([0, 0, -0.05]);
  });

  it("maps strafes and verticals to the frame axes", () => {
    const tracker = new InputTracker(2.0);
    tracker.keyDown("KeyD");
    expect(tracker.moveVector(0.5)).toEqual([1, 0, 0]);
    tracker.keyUp("KeyD");
    tracker.keyDown("KeyE");
    expect(tracker.moveVector(0.5)).toEqual([0, 1, 0]);
    tracker.keyUp("KeyE");
    tracker.keyDown("KeyQ");
    expect(tracker.moveVector(0.5)).toEqual([0, -1, 0]);
  });

  it("cancels opposing keys and combines axes", () => {
    const tracker = new InputTracker(1.0);
    tracker.keyDown("KeyW");
    tracker.keyDown("KeyS");
    expect(tracker.moveVector(0.1)).toBeNull();
    tracker.keyUp("KeyS");
    tracker.keyDown("KeyD");
    expect(tracker.moveVector(0.1)).toEqual([0.1, 0, -0.1]);
  });

  it("treats arrows as WASD aliases and ignores other keys", () => {
    const tracker = new InputTracker(1.0);
    tracker.keyDown("ArrowUp");
    tracker.keyDown("KeyZ");
    expect(tracker.moveVector(0.05)).toEqual([0, 0, -0.05]);
  });
});

describe("pointer rotation", () => {
  it("drag right gives positive yaw", () => {
    const rot = dragToRotation(10, 0);
    expect(rot.yaw).toBeGreaterThan(0);
    expect(rot.pitch).toBe(0);
  });

  it("drag up gives positive pitch", () => {
    const rot = dragToRotation(0, -10);
    expect(rot.pitch).toBeGreaterThan(0);
  });
});
