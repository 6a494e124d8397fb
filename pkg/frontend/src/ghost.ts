/**
 * Ghost playback: a stored solution's cursor path replayed, render-only,
 * alongside live play. Has no effect on physics or recording.
 */
import { controlToScreen } from "./playview";
import type { ChannelInfo, SolutionMessage } from "./types";

export interface GhostFrame {
  x: number;
  y: number;
}

/** Cursor path of a stored control, one point per control step. */
export function ghostPath(
  solution: SolutionMessage,
  channels: ChannelInfo[],
): GhostFrame[] {
  const byAxis: { x?: number[]; y?: number[] } = {};
  for (const ch of channels) {
    const values = solution.control[ch.name];
    if (!values) continue;
    byAxis[ch.cursor_axis] = values.map((v) => controlToScreen(ch, v));
  }
  const n = byAxis.x?.length ?? byAxis.y?.length ?? 0;
  const frames: GhostFrame[] = [];
  for (let i = 0; i < n; i++) {
    frames.push({ x: byAxis.x?.[i] ?? 0.5, y: byAxis.y?.[i] ?? 0.5 });
  }
  return frames;
}

export class GhostPlayer {
  private frames: GhostFrame[] = [];

  set(solution: SolutionMessage, channels: ChannelInfo[]): void {
    this.frames = ghostPath(solution, channels);
  }

  clear(): void {
    this.frames = [];
  }

  /** Ghost cursor at a play-progress fraction in [0, 1]. */
  at(progress: number): GhostFrame | null {
    if (!this.frames.length) return null;
    const idx = Math.min(
      this.frames.length - 1,
      Math.round(progress * (this.frames.length - 1)),
    );
    return this.frames[idx];
  }
}
