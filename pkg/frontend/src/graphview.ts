/**
 * Graph view: solutions as dots on a log10(1 - F) fidelity axis against
 * T / T_ref, 12 equal duration blocks, the challenge curve, and the two
 * motivational scoring lines below it.
 */
import type { GraphData } from "./types";

export const Y_FLOOR = 1e-6; // infidelities of perfect solutions
export const Y_MIN = -6;
export const Y_MAX = 0;

export function fidelityToY(f: number): number {
  return Math.log10(Math.max(1 - f, Y_FLOOR));
}

/** Fraction of the [Y_MIN, Y_MAX] axis (0 = bottom, 1 = top) for a fidelity. */
export function axisFraction(f: number): number {
  return (fidelityToY(f) - Y_MAX) / (Y_MIN - Y_MAX);
}

export function blockEdges(tRelMin: number, tRelMax: number, blocks = 12): number[] {
  const edges: number[] = [];
  for (let i = 0; i <= blocks; i++) {
    edges.push(tRelMin + ((tRelMax - tRelMin) * i) / blocks);
  }
  return edges;
}

/**
 * Motivational scoring lines: fixed fractions of the challenge curve in
 * log-infidelity, i.e. strictly easier targets below it.
 */
export function scoringLines(challengeF: number): [number, number] {
  const y = fidelityToY(challengeF);
  return [1 - Math.pow(10, y * 0.66), 1 - Math.pow(10, y * 0.33)];
}

export interface GraphDot {
  id: string;
  T_rel: number;
  F: number;
  selected: boolean;
}

export class GraphView {
  dots: GraphDot[] = [];
  selectedId: string | null = null;
  tRelMin = 0.5;
  tRelMax = 1.5;

  constructor(private canvas: HTMLCanvasElement | null = null) {}

  setData(graph: GraphData): void {
    this.dots = graph.solutions.map((s) => ({
      id: s.id,
      T_rel: s.T_rel,
      F: s.F,
      selected: s.id === this.selectedId,
    }));
    if (this.dots.length) {
      const ts = this.dots.map((d) => d.T_rel);
      this.tRelMin = Math.min(0.5, ...ts);
      this.tRelMax = Math.max(1.5, ...ts);
    }
  }

  /** Move or add the live dot during optimization progress events. */
  updateDot(id: string, F: number, T_rel: number): void {
    const dot = this.dots.find((d) => d.id === id);
    if (dot) {
      dot.F = F;
    } else {
      this.dots.push({ id, T_rel, F, selected: false });
    }
    this.render();
  }

  select(id: string | null): void {
    this.selectedId = id;
    for (const d of this.dots) d.selected = d.id === id;
    this.render();
  }

  render(graph?: GraphData): void {
    if (graph) this.setData(graph);
    const canvas = this.canvas;
    if (!canvas) return;
    const ctx = canvas.getContext("2d");
    if (!ctx) return;
    const { width: w, height: h } = canvas;
    ctx.clearRect(0, 0, w, h);
    ctx.fillStyle = "#10141c";
    ctx.fillRect(0, 0, w, h);

    const tx = (tRel: number) =>
      ((tRel - this.tRelMin) / (this.tRelMax - this.tRelMin)) * w;
    const ty = (f: number) => axisFraction(f) * (h - 20) + 10;

    ctx.strokeStyle = "#2a3344";
    for (const edge of blockEdges(this.tRelMin, this.tRelMax)) {
      ctx.beginPath();
      ctx.moveTo(tx(edge), 0);
      ctx.lineTo(tx(edge), h);
      ctx.stroke();
    }

    if (graph?.challenge?.length) {
      const lines: [number, (c: { T_rel: number; F: number }) => number][] = [
        [1, (c) => c.F],
        [0.66, (c) => scoringLines(c.F)[0]],
        [0.33, (c) => scoringLines(c.F)[1]],
      ];
      for (const [alpha, pick] of lines) {
        ctx.strokeStyle = `rgba(90, 220, 130, ${alpha})`;
        ctx.beginPath();
        graph.challenge.forEach((c, i) => {
          const x = tx(c.T_rel);
          const y = ty(pick(c));
          if (i === 0) ctx.moveTo(x, y);
          else ctx.lineTo(x, y);
        });
        ctx.stroke();
      }
    }

    for (const dot of this.dots) {
      ctx.fillStyle = dot.selected ? "#ffd34d" : "#58a6ff";
      ctx.beginPath();
      ctx.arc(tx(dot.T_rel), ty(dot.F), dot.selected ? 6 : 4, 0, 2 * Math.PI);
      ctx.fill();
    }
  }

  /** Dot nearest to a canvas click, if within reach. */
  hit(px: number, py: number): GraphDot | null {
    const canvas = this.canvas;
    if (!canvas) return null;
    const w = canvas.width;
    const h = canvas.height;
    let best: GraphDot | null = null;
    let bestD = 12;
    for (const dot of this.dots) {
      const x = ((dot.T_rel - this.tRelMin) / (this.tRelMax - this.tRelMin)) * w;
      const y = axisFraction(dot.F) * (h - 20) + 10;
      const d = Math.hypot(px - x, py - y);
      if (d < bestD) {
        bestD = d;
        best = dot;
      }
    }
    return best;
  }
}
