/**
 * App wiring: level picker, dynamic play view with drag-to-seed, graph view
 * with the optimize toggle, replay, and ghost playback.
 */
import { SessionClient } from "./client";
import { GhostPlayer } from "./ghost";
import { GraphView } from "./graphview";
import { PlayView } from "./playview";
import { TraceRecorder } from "./trace";
import type { FrameMessage, StreamMessage } from "./types";

const PLAY_SECONDS = 8; // wall time of one full drag through the level

const app = document.querySelector<HTMLDivElement>("#app");
if (app) {
  app.innerHTML = `
    <div class="bar">
      <select id="level">
        <option value="bhw">Bring Home Water</option>
        <option value="splitting">Splitting</option>
        <option value="shakeup">Shake Up</option>
      </select>
      <label>T/T_ref <input id="trel" type="number" value="1.1" step="0.05" min="0.5" max="2"></label>
      <button id="new">New session</button>
      <button id="play" disabled>Play</button>
      <button id="optimize" disabled>Optimize</button>
      <button id="replay" disabled>Replay</button>
      <button id="ghost" disabled>Ghost</button>
      <span id="score"></span>
    </div>
    <canvas id="playview" width="900" height="420"></canvas>
    <canvas id="graphview" width="900" height="260"></canvas>
  `;
}

const $ = <T extends HTMLElement>(sel: string) =>
  document.querySelector<T>(sel) as T;

const client = new SessionClient(location.origin.replace(/:\d+$/, ":8777"));
const playView = new PlayView($("#playview") as HTMLCanvasElement);
const graphView = new GraphView($("#graphview") as HTMLCanvasElement);
const ghost = new GhostPlayer();

let stream: { close(): void } | null = null;
let optimizing = false;
let liveDotId: string | null = null;

async function refreshGraph(): Promise<void> {
  const graph = await client.graph(($("#level") as HTMLSelectElement).value);
  graphView.render(graph);
}

async function newSession(): Promise<void> {
  const level = ($("#level") as HTMLSelectElement).value;
  const tRel = Number(($("#trel") as HTMLInputElement).value);
  const levels = await client.levels();
  const session = await client.createSession(level, tRel * levels[level].T_ref_ms);
  playView.setSession(session);
  stream?.close();
  stream = client.connectStream(onMessage);
  ($("#play") as HTMLButtonElement).disabled = false;
  await refreshGraph();
}

function onMessage(msg: StreamMessage): void {
  if (msg.type === "frame") {
    playView.pushFrame(msg as FrameMessage);
  } else if (msg.type === "progress" && liveDotId) {
    graphView.updateDot(liveDotId, msg.F, Number(($("#trel") as HTMLInputElement).value));
    $("#score").textContent = `optimizing… F = ${msg.F.toFixed(5)}`;
  } else if (msg.type === "done") {
    optimizing = false;
    ($("#optimize") as HTMLButtonElement).textContent = "Optimize";
    $("#score").textContent = `done (F = ${msg.F.toFixed(5)})`;
    void refreshGraph();
  }
}

async function play(): Promise<void> {
  const session = client.current;
  const recorder = new TraceRecorder(session.level, session.T_ms, PLAY_SECONDS);
  const t0 = performance.now();
  playView.cursor.dragging = true;
  await new Promise<void>((resolve) => {
    const sample = () => {
      const wall = (performance.now() - t0) / 1000;
      recorder.record(wall, playView.cursor.x, playView.cursor.y);
      const g = ghost.at(wall / PLAY_SECONDS);
      playView.ghostPath = g ? [g] : null;
      playView.render();
      if (wall < PLAY_SECONDS) requestAnimationFrame(sample);
      else resolve();
    };
    requestAnimationFrame(sample);
  });
  playView.cursor.dragging = false;
  const result = await client.submitTrace(recorder.message());
  liveDotId = result.record_id;
  $("#score").textContent = `F = ${result.fidelity.toFixed(5)}`;
  playView.animate(2000);
  ($("#optimize") as HTMLButtonElement).disabled = false;
  ($("#replay") as HTMLButtonElement).disabled = false;
  ($("#ghost") as HTMLButtonElement).disabled = false;
  await refreshGraph();
  graphView.select(result.record_id);
}

async function toggleOptimize(): Promise<void> {
  if (optimizing) {
    await client.optimize("stop");
    optimizing = false;
    ($("#optimize") as HTMLButtonElement).textContent = "Optimize";
    return;
  }
  await client.optimize("start");
  optimizing = true;
  ($("#optimize") as HTMLButtonElement).textContent = "Stop";
}

async function replaySelected(): Promise<void> {
  const sols = await client.solutions();
  const target = sols.find((s) => s.id === graphView.selectedId) ?? sols.at(-1);
  if (!target) return;
  await client.replay(target.id);
  playView.animate(2000);
}

async function setGhost(): Promise<void> {
  const sols = await client.solutions();
  const target = sols.find((s) => s.id === graphView.selectedId) ?? sols.at(-1);
  if (!target) return;
  ghost.set(target, client.current.channels);
}

$("#new").addEventListener("click", () => void newSession());
$("#play").addEventListener("click", () => void play());
$("#optimize").addEventListener("click", () => void toggleOptimize());
$("#replay").addEventListener("click", () => void replaySelected());
$("#ghost").addEventListener("click", () => void setGhost());
($("#graphview") as HTMLCanvasElement).addEventListener("click", (e) => {
  const rect = ($("#graphview") as HTMLCanvasElement).getBoundingClientRect();
  const dot = graphView.hit(e.clientX - rect.left, e.clientY - rect.top);
  graphView.select(dot ? dot.id : null);
});
