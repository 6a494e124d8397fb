/**
 * Cursor recording: wall-clock drag samples mapped onto the level's time
 * axis. Pure logic, shared by the play view and the scripted tests.
 */
import type { TraceMessage, TraceSample } from "./types";

export function clamp01(v: number): number {
  return v < 0 ? 0 : v > 1 ? 1 : v;
}

export class TraceRecorder {
  private samples: TraceSample[] = [];

  /**
   * @param level level id
   * @param T_ms level duration in level time
   * @param playSeconds wall seconds a full play lasts (time stretching)
   */
  constructor(
    private level: string,
    private T_ms: number,
    private playSeconds: number,
  ) {}

  /** Record one cursor position; coordinates are clamped to the box. */
  record(wallSeconds: number, x: number, y: number): void {
    const ts = clamp01(wallSeconds / this.playSeconds) * this.T_ms;
    const last = this.samples[this.samples.length - 1];
    if (last && ts <= last.ts) return; // keep timestamps strictly increasing
    this.samples.push({ ts, x: clamp01(x), y: clamp01(y) });
  }

  get done(): boolean {
    const last = this.samples[this.samples.length - 1];
    return !!last && last.ts >= this.T_ms;
  }

  get count(): number {
    return this.samples.length;
  }

  /** Final trace; pads the endpoints so the trace covers [0, T]. */
  message(): TraceMessage {
    if (this.samples.length === 0) throw new Error("nothing recorded");
    const samples = [...this.samples];
    const eps = this.T_ms * 1e-9;
    if (samples[0].ts > 0) {
      samples.unshift({ ts: 0, x: samples[0].x, y: samples[0].y });
    }
    const last = samples[samples.length - 1];
    if (last.ts < this.T_ms) {
      samples.push({ ts: Math.max(this.T_ms, last.ts + eps), x: last.x, y: last.y });
    }
    return { level: this.level, T: this.T_ms, samples };
  }
}
