/**
 * End-to-end checks against a live service process: the scripted play
 * round-trip (stored player-seed control must equal the server-side trace
 * mapping bit-exactly, and optimization must beat the raw seed), and
 * stop/resume semantics.
 */
import { execFileSync, spawn, type ChildProcess } from "node:child_process";
import WebSocket from "ws";
import { afterAll, beforeAll, describe, expect, it } from "vitest";
import { SessionClient } from "../src/client";
import { TraceRecorder } from "../src/trace";
import type { StreamMessage, TraceMessage } from "../src/types";

const PORT = 8917;
const BASE = `http://127.0.0.1:${PORT}`;
let server: ChildProcess;

beforeAll(async () => {
  server = spawn("qmoves", ["serve", "--port", String(PORT)], {
    stdio: "ignore",
  });
  const deadline = Date.now() + 60_000;
  for (;;) {
    try {
      const resp = await fetch(`${BASE}/levels`);
      if (resp.ok) return;
    } catch {
      /* not up yet */
    }
    if (Date.now() > deadline) throw new Error("service did not come up");
    await new Promise((r) => setTimeout(r, 250));
  }
}, 70_000);

afterAll(() => {
  server?.kill("SIGKILL");
});

function backswingTrace(level: string, T_ms: number): TraceMessage {
  // start behind the atom (u1 near +1.8), sweep down to the target well
  const rec = new TraceRecorder(level, T_ms, 8);
  const n = 300;
  for (let i = 0; i < n; i++) {
    const wall = (8 * i) / (n - 1);
    const u = i / (n - 1);
    rec.record(wall, 0.95 - 0.7 * u, 0.05);
  }
  return rec.message();
}

function scriptedTrace(level: string, T_ms: number): TraceMessage {
  // a deliberate sweep: hold, move across, settle
  const rec = new TraceRecorder(level, T_ms, 8);
  const n = 200;
  for (let i = 0; i < n; i++) {
    const wall = (8 * i) / (n - 1);
    const u = i / (n - 1);
    const x = 0.75 - 0.5 * Math.min(1, u * 1.25);
    const y = 0.1 + 0.05 * Math.sin(2 * Math.PI * u);
    rec.record(wall, x, y);
  }
  return rec.message();
}

/** The library-side mapping, computed out of process for comparison. */
function referenceControl(trace: TraceMessage): Record<string, number[]> {
  const script = `
import json, sys
import numpy as np
from qmoves.problems import make_problem_ms
from qmoves.seeding import CursorTrace, trace_to_control

msg = json.load(sys.stdin)
problem = make_problem_ms(msg["level"], msg["T"])
trace = CursorTrace(level=msg["level"], T_ms=msg["T"],
                    ts=np.array([s["ts"] for s in msg["samples"]]),
                    x=np.array([s["x"] for s in msg["samples"]]),
                    y=np.array([s["y"] for s in msg["samples"]]))
ctrl = trace_to_control(trace, problem)
print(json.dumps({c.name: ctrl.values[:, p].tolist()
                  for p, c in enumerate(problem.channels)}))
`;
  const out = execFileSync("python3", ["-c", script], {
    input: JSON.stringify(trace),
    encoding: "utf8",
  });
  return JSON.parse(out);
}

describe("scripted play round-trip", () => {
  it("stores a PS record whose control matches the trace mapping bit-exactly, and optimizing beats it", async () => {
    const client = new SessionClient(BASE, WebSocket as never);
    const levels = await client.levels();
    const T_ms = 0.55 * levels.bhw.T_ref_ms;
    const session = await client.createSession("bhw", T_ms);

    const trace = scriptedTrace("bhw", session.T_ms);
    const submitted = await client.submitTrace(trace);
    expect(submitted.fidelity).toBeGreaterThanOrEqual(0);

    const solutions = await client.solutions();
    const ps = solutions.find((s) => s.provenance.kind === "ps");
    expect(ps).toBeDefined();
    const expected = referenceControl(trace);
    for (const name of Object.keys(expected)) {
      const got = ps!.control[name];
      expect(got).toHaveLength(expected[name].length);
      for (let i = 0; i < got.length; i++) {
        expect(got[i]).toBe(expected[name][i]); // bit-exact float64
      }
    }

    // toggling the optimizer yields a PO record strictly above the PS one
    const done = new Promise<StreamMessage>((resolve) => {
      const stream = client.connectStream((msg) => {
        if (msg.type === "done") {
          stream.close();
          resolve(msg);
        }
      });
    });
    await client.optimize("start", { budget_s: 20 });
    await done;
    const after = await client.solutions();
    const po = after.find((s) => s.provenance.kind === "po");
    expect(po).toBeDefined();
    expect(po!.F).toBeGreaterThan(ps!.F);
  }, 120_000);

  it("streams frames for a submitted trace in time order", async () => {
    const client = new SessionClient(BASE, WebSocket as never);
    const levels = await client.levels();
    const session = await client.createSession("shakeup", 0.3 * levels.shakeup.T_ref_ms);
    const frames: number[] = [];
    const stream = client.connectStream((msg) => {
      if (msg.type === "frame") frames.push(msg.t);
    });
    await client.submitTrace(scriptedTrace("shakeup", session.T_ms));
    await new Promise((r) => setTimeout(r, 1500));
    stream.close();
    expect(frames.length).toBeGreaterThan(3);
    const sorted = [...frames].sort((a, b) => a - b);
    expect(frames).toEqual(sorted);
  }, 60_000);
});

describe("stop and resume", () => {
  it("resuming from the stored control reaches the uninterrupted fidelity", async () => {
    // a back-swing sweep above the speed limit: the basin optimum sits
    // above the 0.999 stop threshold, so the interrupted and uninterrupted
    // runs both terminate exactly at the threshold crossing
    const levels = await new SessionClient(BASE, WebSocket as never).levels();
    const T_ms = 1.15 * levels.bhw.T_ref_ms;
    const trace = backswingTrace("bhw", T_ms);

    const waitDone = (client: SessionClient, ignore: Set<string> = new Set()) =>
      new Promise<number>((resolve) => {
        const stream = client.connectStream((msg) => {
          if (msg.type === "done" && !ignore.has(msg.record_id)) {
            stream.close();
            resolve(msg.F);
          }
        });
      });

    // uninterrupted reference
    const ref = new SessionClient(BASE, WebSocket as never);
    await ref.createSession("bhw", T_ms);
    const refTrace = { ...trace, T: ref.current.T_ms };
    await ref.submitTrace(refTrace);
    const refDone = waitDone(ref);
    await ref.optimize("start", { budget_s: 360 });
    const fRef = await refDone;
    expect(fRef).toBeGreaterThanOrEqual(0.999); // converged, not budget-cut

    // stopped mid-flight, then restarted from the stored control
    const client = new SessionClient(BASE, WebSocket as never);
    await client.createSession("bhw", T_ms);
    await client.submitTrace({ ...trace, T: client.current.T_ms });
    await client.optimize("start", { budget_s: 360 });
    await new Promise((r) => setTimeout(r, 700));
    await client.optimize("stop");
    const sols = await client.solutions();
    expect(sols.some((s) => s.provenance.kind === "po")).toBe(true);

    // ignore the stopped run's queued completion event
    const resumedDone = waitDone(client, new Set(sols.map((s) => s.id)));
    await client.optimize("start", { budget_s: 360 });
    const fResumed = await resumedDone;

    expect(Math.abs(fResumed - fRef)).toBeLessThanOrEqual(1e-4);
  }, 900_000);
});
