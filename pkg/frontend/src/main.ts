/**
 * Browser entry point: connects to the render server, blits frames onto a
 * canvas, and turns keyboard/pointer input into protocol messages on a
 * fixed tick.
 */

import { ViewerSession } from "./client.js";
import { InputTracker, dragToRotation } from "./input.js";
import { formatHud } from "./hud.js";
import { rgbToRgba } from "./protocol.js";

const TICK_SECONDS = 0.05;

export function startViewer(canvas: HTMLCanvasElement, hud: HTMLElement,
                            url: string): ViewerSession {
  const ctx = canvas.getContext("2d");
  if (!ctx) throw new Error("canvas 2d context unavailable");
  const ws = new WebSocket(url);
  let frameMs: number | null = null;
  const session = new ViewerSession(
    { send: (data) => ws.send(data) },
    {
      onFrame: (w, h, rgb) => {
        if (canvas.width !== w || canvas.height !== h) {
          canvas.width = w;
          canvas.height = h;
        }
        ctx.putImageData(new ImageData(rgbToRgba(rgb), w, h), 0, 0);
        hud.textContent = formatHud(session.geometry, session.pose, frameMs);
      },
      onPose: () => {
        hud.textContent = formatHud(session.geometry, session.pose, frameMs);
      },
      onFrameInterval: (ms) => {
        frameMs = ms;
      },
    },
    canvas.width, canvas.height);
  ws.onmessage = (ev) => session.handleMessage(String(ev.data));
  ws.onopen = () => session.resize(canvas.width, canvas.height);

  const tracker = new InputTracker(1.0);
  window.addEventListener("keydown", (ev) => tracker.keyDown(ev.code));
  window.addEventListener("keyup", (ev) => tracker.keyUp(ev.code));
  window.addEventListener("blur", () => tracker.clear());

  let dragging = false;
  let lastX = 0;
  let lastY = 0;
  canvas.addEventListener("pointerdown", (ev) => {
    dragging = true;
    lastX = ev.clientX;
    lastY = ev.clientY;
    canvas.setPointerCapture(ev.pointerId);
  });
  canvas.addEventListener("pointerup", () => {
    dragging = false;
  });
  canvas.addEventListener("pointermove", (ev) => {
    if (!dragging) return;
    const rot = dragToRotation(ev.clientX - lastX, ev.clientY - lastY);
    lastX = ev.clientX;
    lastY = ev.clientY;
    if (rot.yaw !== 0 || rot.pitch !== 0) session.rotate(rot);
  });

  window.setInterval(() => {
    const dv = tracker.moveVector(TICK_SECONDS);
    if (dv) session.move(dv);
  }, TICK_SECONDS * 1000);
  return session;
}
