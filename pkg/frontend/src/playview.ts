/**
 * Dynamic play view: live density offset by the potential, the target
 * outline, the control bounding box, and the draggable cursor. Renders
 * 256-point curves on a 2D canvas and interpolates between decimated
 * frames for smooth animation.
 */
import { clamp01 } from "./trace";
import type { ChannelInfo, FrameMessage, SessionInfo } from "./types";

export interface CursorState {
  x: number; // screen-normalized [0, 1] within the bounding box
  y: number;
  dragging: boolean;
}

/** Map a control value back onto its screen axis (for ghosts and replays). */
export function controlToScreen(ch: ChannelInfo, value: number): number {
  return clamp01((value - ch.lo) / (ch.hi - ch.lo));
}

export class PlayView {
  cursor: CursorState = { x: 0.5, y: 0.5, dragging: false };
  ghostPath: { x: number; y: number }[] | null = null;
  private frames: FrameMessage[] = [];
  private session: SessionInfo | null = null;

  // vertical scaling:密度 curves sit on top of the potential
  private potScale = 1;
  private densScale = 1;

  constructor(private canvas: HTMLCanvasElement | null = null) {
    if (canvas) {
      canvas.addEventListener("pointerdown", (e) => this.pointer(e, true));
      canvas.addEventListener("pointermove", (e) => this.pointer(e, null));
      canvas.addEventListener("pointerup", (e) => this.pointer(e, false));
    }
  }

  setSession(session: SessionInfo): void {
    this.session = session;
    this.frames = [];
    const pot = session.initial_potential;
    const span = Math.max(...pot) - Math.min(...pot) || 1;
    this.potScale = 0.45 / span;
    this.densScale = 0.4 / Math.max(...session.initial_density);
    const start = session.channels[0];
    this.cursor.x = controlToScreen(start, start.start);
    if (session.channels.length > 1) {
      this.cursor.y = controlToScreen(session.channels[1], session.channels[1].start);
    }
    this.render();
  }

  pushFrame(frame: FrameMessage): void {
    this.frames.push(frame);
  }

  /** Animate buffered frames; linear interpolation between decimated frames. */
  animate(durationMs: number, onDone?: () => void): void {
    if (!this.frames.length) return;
    const frames = this.frames;
    const t0 = performance.now();
    const tick = () => {
      const progress = Math.min(1, (performance.now() - t0) / durationMs);
      const pos = progress * (frames.length - 1);
      const i = Math.floor(pos);
      const frac = pos - i;
      this.render(this.blend(frames[i], frames[Math.min(i + 1, frames.length - 1)], frac));
      if (progress < 1) requestAnimationFrame(tick);
      else onDone?.();
    };
    requestAnimationFrame(tick);
  }

  private blend(a: FrameMessage, b: FrameMessage, frac: number): FrameMessage {
    if (frac <= 0) return a;
    return {
      ...a,
      density: a.density.map((v, i) => v + (b.density[i] - v) * frac),
      potential: a.potential.map((v, i) => v + (b.potential[i] - v) * frac),
    };
  }

  private pointer(e: PointerEvent, down: boolean | null): void {
    if (!this.canvas) return;
    if (down === true) this.cursor.dragging = true;
    if (down === false) this.cursor.dragging = false;
    if (!this.cursor.dragging) return;
    const rect = this.canvas.getBoundingClientRect();
    // clamped to remain within the control bounding box
    this.cursor.x = clamp01((e.clientX - rect.left) / rect.width);
    this.cursor.y = clamp01(1 - (e.clientY - rect.top) / rect.height);
    this.render();
  }

  render(frame?: FrameMessage): void {
    const canvas = this.canvas;
    const session = this.session;
    if (!canvas || !session) return;
    const ctx = canvas.getContext("2d");
    if (!ctx) return;
    const { width: w, height: h } = canvas;
    ctx.clearRect(0, 0, w, h);
    ctx.fillStyle = "#0b0e14";
    ctx.fillRect(0, 0, w, h);

    const n = session.x.length;
    const xpix = (i: number) => (i / (n - 1)) * w;
    const ypix = (v: number) => h * (0.9 - v);

    const potential = frame ? frame.potential : session.initial_potential;
    const density = frame ? frame.density : session.initial_density;
    const offset = (i: number) => potential[i] * this.potScale + 0.5;

    const curve = (values: (i: number) => number, style: string, fill = false) => {
      ctx.strokeStyle = style;
      ctx.beginPath();
      for (let i = 0; i < n; i++) {
        const y = ypix(values(i));
        if (i === 0) ctx.moveTo(xpix(i), y);
        else ctx.lineTo(xpix(i), y);
      }
      ctx.stroke();
      if (fill) {
        ctx.lineTo(w, h);
        ctx.lineTo(0, h);
        ctx.closePath();
        ctx.fillStyle = style.replace(")", ", 0.25)").replace("rgb", "rgba");
        ctx.fill();
      }
    };

    curve((i) => offset(i), "rgb(80, 200, 120)");
    // densities are offset by the potential for display
    curve((i) => density[i] * this.densScale + offset(i), "rgb(235, 90, 90)", true);
    curve(
      (i) => session.target_density[i] * this.densScale + offset(i),
      "rgb(240, 210, 80)",
    );

    // control bounding box and cursor
    ctx.strokeStyle = "rgba(80, 220, 220, 0.8)";
    ctx.setLineDash([6, 4]);
    ctx.strokeRect(w * 0.05, h * 0.05, w * 0.9, h * 0.55);
    ctx.setLineDash([]);
    const cx = w * (0.05 + 0.9 * this.cursor.x);
    const cy = h * (0.6 - 0.55 * this.cursor.y);
    if (this.ghostPath) {
      ctx.fillStyle = "rgba(200, 200, 255, 0.35)";
      for (const p of this.ghostPath) {
        ctx.beginPath();
        ctx.arc(w * (0.05 + 0.9 * p.x), h * (0.6 - 0.55 * p.y), 4, 0, 2 * Math.PI);
        ctx.fill();
      }
    }
    ctx.fillStyle = "rgb(90, 230, 230)";
    ctx.beginPath();
    ctx.arc(cx, cy, 9, 0, 2 * Math.PI);
    ctx.fill();
  }
}
