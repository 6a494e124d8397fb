/** Wire types exchanged with the play service. All numbers are float64. */

export interface ChannelInfo {
  name: string; // "u1" | "u2"
  lo: number;
  hi: number;
  start: number;
  end: number;
  cursor_axis: "x" | "y";
}

export interface LevelInfo {
  T_ref_ms: number;
  dt_ms: number;
  x: number[];
  channels: ChannelInfo[];
}

export interface SessionInfo {
  id: string;
  level: string;
  T_ms: number;
  n_t: number;
  x: number[];
  initial_density: number[];
  target_density: number[];
  initial_potential: number[];
  channels: ChannelInfo[];
}

export interface TraceSample {
  ts: number; // milliseconds in level time, strictly increasing
  x: number; // screen-normalized [0, 1]
  y: number;
}

export interface TraceMessage {
  level: string;
  T: number;
  samples: TraceSample[];
}

export interface FrameMessage {
  type: "frame";
  t: number;
  density: number[];
  potential: number[];
  cursor: Record<string, number>;
}

export interface ProgressMessage {
  type: "progress";
  iter: number;
  F: number;
  step_size: number;
  wall_s: number;
}

export interface DoneMessage {
  type: "done";
  record_id: string;
  F: number;
  termination: string;
}

export type StreamMessage = FrameMessage | ProgressMessage | DoneMessage;

export interface SolutionMessage {
  id: string;
  T: number;
  T_rel: number;
  F: number;
  provenance: { kind: string; [key: string]: unknown };
  control: Record<string, number[]>;
}

export interface GraphData {
  level: string;
  T_ref_ms: number;
  blocks: number;
  solutions: { id: string; T_rel: number; F: number }[];
  challenge: { T_rel: number; F: number }[];
}
