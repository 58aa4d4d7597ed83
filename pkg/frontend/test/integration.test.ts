/**
 * End-to-end check against a live render server: the scripted session drives
 * the real protocol and verifies frames and server-authoritative poses flow
 * through the ViewerSession exactly as the unit-level contract says.
 *
 * Skipped when the python backend is not available.
 */
import { spawn, spawnSync } from "node:child_process";
import * as path from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ViewerSession } from "../src/client.js";
import { MiniWs } from "./wsmini.js";

const ROOT = path.resolve(__dirname, "..", "..");
const SCENE = path.join(ROOT, "scenes", "e3_torus.json");

function pythonAvailable(): boolean {
  const probe = spawnSync("python3", ["-c", "import thurston"],
                          { cwd: ROOT });
  return probe.status === 0;
}

const HAVE_BACKEND = pythonAvailable();

describe.skipIf(!HAVE_BACKEND)("live server session", () => {
  let proc: ReturnType<typeof spawn>;
  let port = 0;

  beforeAll(async () => {
    proc = spawn("python3",
                 ["-m", "thurston.cli", "serve", "--scene", SCENE,
                  "--port", "0", "--width", "24", "--height", "16",
                  "--max-dist", "6", "--max-sessions", "1"],
                 { cwd: ROOT });
    port = await new Promise<number>((resolve, reject) => {
      const timer = setTimeout(() => reject(new Error("no banner")), 30000);
      proc.stderr!.on("data", (chunk: Buffer) => {
        const match = /ws:\/\/[\d.]+:(\d+)/.exec(chunk.toString());
        if (match) {
          clearTimeout(timer);
          resolve(parseInt(match[1], 10));
        }
      });
    });
  }, 40000);

  afterAll(() => {
    proc?.kill();
  });

  it("streams hello, poses, and frames through the session", async () => {
    const ws = await MiniWs.connect("127.0.0.1", port);
    const frames: Array<[number, number, Uint8Array]> = [];
    const session = new ViewerSession(
      { send: (d) => ws.send(d) },
      { onFrame: (w, h, rgb) => frames.push([w, h, rgb]) },
      24, 16);

    const hello = session.handleMessage((await ws.recv())!);
    expect(hello.type).toBe("hello");
    expect(session.geometry).toBe("e3");
    session.handleMessage((await ws.recv())!);
    expect(frames).toHaveLength(1);
    expect(frames[0][2].length).toBe(24 * 16 * 3);

    const before = session.pose!.g.slice();
    session.move([0, 0, -0.1]);
    const pose = session.handleMessage((await ws.recv())!);
    expect(pose.type).toBe("pose");
    session.handleMessage((await ws.recv())!);
    expect(frames).toHaveLength(2);
    // the camera moved backward along the view axis: the pose changed
    expect(session.pose!.g).not.toEqual(before);
    expect(session.inFlight).toBe(false);
    ws.close();
  }, 120000);
});
