/**
 * Keyboard and pointer handling.
 *
 * Per-tick displacements follow the local frame conventions: W/S move along
 * the view axis (-f3/+f3), A/D strafe (-f1/+f1), Q/E move down/up (-f2/+f2),
 * arrows mirror WASD. Dragging the pointer right yaws the view right
 * (positive yaw), dragging up pitches up.
 */

export type MoveVector = [number, number, number];

const KEY_AXES: Record<string, MoveVector> = {
  KeyW: [0, 0, -1],
  ArrowUp: [0, 0, -1],
  KeyS: [0, 0, 1],
  ArrowDown: [0, 0, 1],
  KeyD: [1, 0, 0],
  ArrowRight: [1, 0, 0],
  KeyA: [-1, 0, 0],
  ArrowLeft: [-1, 0, 0],
  KeyE: [0, 1, 0],
  KeyQ: [0, -1, 0],
};

export class InputTracker {
  private down = new Set<string>();
  speed: number;

  constructor(speed = 1.0) {
    this.speed = speed;
  }

  keyDown(code: string): void {
    if (code in KEY_AXES) this.down.add(code);
  }

  keyUp(code: string): void {
    this.down.delete(code);
  }

  clear(): void {
    this.down.clear();
  }

  /** Displacement for a tick of dt seconds; null when no key is held. */
  moveVector(dt: number): MoveVector | null {
    if (this.down.size === 0) return null;
    const dv: MoveVector = [0, 0, 0];
    for (const code of this.down) {
      const axis = KEY_AXES[code];
      dv[0] += axis[0];
      dv[1] += axis[1];
      dv[2] += axis[2];
    }
    if (dv[0] === 0 && dv[1] === 0 && dv[2] === 0) return null;
    const scale = this.speed * dt;
    return [dv[0] * scale, dv[1] * scale, dv[2] * scale];
  }
}

export interface Rotation {
  yaw: number;
  pitch: number;
  roll: number;
}

/** Pointer drag in pixels to a rotation; drag right gives positive yaw. */
export function dragToRotation(dxPixels: number, dyPixels: number,
                               radiansPerPixel = 0.004): Rotation {
  return {
    yaw: dxPixels * radiansPerPixel,
    pitch: (0 - dyPixels) * radiansPerPixel,
    roll: 0,
  };
}
