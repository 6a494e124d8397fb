"""Local play service: sessions, trace scoring, live optimization streams.

HTTP+JSON for requests; a WebSocket per session carries `frame` and
`progress` messages.  All message numbers are 64-bit floats; frames are
decimated to every 5th simulation step by default.
"""

import os
import threading
import time
import uuid
from collections import deque
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from fastapi import FastAPI, HTTPException, WebSocket, WebSocketDisconnect

from .analysis import SolutionRecord, log_infidelity, monotone_best
from .grape import GrapeConfig, Termination, optimize as grape_optimize
from .problems import (LEVELS, T_QSL99_MS, ControlVector, ProblemSpec,
                       make_problem_ms)
from .seeding import CursorTrace, SeedProvenance, trace_to_control
from .store import Archive
from .wave import fidelity as state_fidelity, kinetic_half_phase, run_steps

FRAME_DECIMATION = 5
QUEUE_LIMIT = 1024

_DATA_DIR = os.path.join(os.path.dirname(__file__), "data")


@dataclass
class Session:
    id: str
    level: str
    T_ms: float
    problem: ProblemSpec
    state: str = "idle"   # idle -> playing -> scored -> optimizing -> scored
    control: Optional[ControlVector] = None
    records: list = field(default_factory=list)
    stop_signal: threading.Event = field(default_factory=threading.Event)
    worker: Optional[threading.Thread] = None
    queue: deque = field(default_factory=lambda: deque(maxlen=QUEUE_LIMIT))
    queue_cv: threading.Condition = field(default_factory=threading.Condition)

    def push(self, message: dict):
        with self.queue_cv:
            self.queue.append(message)  # deque drops oldest on overflow
            self.queue_cv.notify_all()


def _control_payload(problem: ProblemSpec, control: ControlVector) -> dict:
    return {c.name: control.values[:, p].tolist()
            for p, c in enumerate(problem.channels)}


def _record_payload(problem: ProblemSpec, rec: SolutionRecord) -> dict:
    t_ref = T_QSL99_MS[rec.level]
    return {"id": rec.record_id, "T": rec.T_ms, "T_rel": rec.T_ms / t_ref,
            "F": rec.fidelity, "provenance": rec.provenance.to_dict(),
            "control": {k: v.tolist() for k, v in rec.controls.items()}}


def _stream_frames(session: Session, control: ControlVector,
                   decimation: int = FRAME_DECIMATION) -> float:
    """Propagate under `control`, pushing decimated density frames."""
    problem = session.problem
    pot_rows = problem.potential_rows(control.values[:-1])
    khalf = kinetic_half_phase(problem.grid, problem.kappa, problem.dt)
    dt_ms = problem.dt * problem.units.mu_time * 1e3

    def hook(j: int, psi: np.ndarray):
        if j % decimation and j != problem.n_t - 2:
            return
        cursor = {c.name: float(control.values[j, p])
                  for p, c in enumerate(problem.channels)}
        session.push({"type": "frame", "t": (j + 1) * dt_ms,
                      "density": (np.abs(psi) ** 2).tolist(),
                      "potential": pot_rows[j].tolist(), "cursor": cursor})

    out = run_steps(problem.psi0.amplitudes.copy(), pot_rows, problem.g,
                    problem.dt, khalf, frame_hook=hook)
    from .wave import Wavefunction

    return state_fidelity(Wavefunction(problem.grid, out), problem.psi_tgt)


def _challenge_curve(level: str):
    path = os.path.join(_DATA_DIR, f"challenge_{level}.qmarchive")
    if not os.path.exists(path):
        return []
    arch = Archive.read(path)
    t, infid = monotone_best(arch.records)
    t_ref = T_QSL99_MS[level]
    return [{"T_rel": float(ti) / t_ref, "F": float(1.0 - yi)}
            for ti, yi in zip(t, infid)]


def create_app() -> FastAPI:
    app = FastAPI(title="qmoves play service")
    sessions: dict = {}

    def get_session(session_id: str) -> Session:
        if session_id not in sessions:
            raise HTTPException(404, "unknown session")
        return sessions[session_id]

    @app.get("/levels")
    def levels():
        out = {}
        for level in LEVELS:
            problem = make_problem_ms(level, T_QSL99_MS[level])
            out[level] = {
                "T_ref_ms": T_QSL99_MS[level],
                "dt_ms": problem.dt * problem.units.mu_time * 1e3,
                "x": problem.grid.x.tolist(),
                "channels": [{"name": c.name, "lo": c.lo, "hi": c.hi,
                              "start": c.start, "end": c.end,
                              "cursor_axis": c.cursor_axis}
                             for c in problem.channels],
            }
        return out

    @app.post("/sessions")
    def create_session(body: dict):
        level = body.get("level")
        if level not in LEVELS:
            raise HTTPException(422, f"unknown level {level!r}")
        t_ms = float(body.get("T", 0))
        if t_ms <= 0:
            raise HTTPException(422, "T must be a positive duration in ms")
        problem = make_problem_ms(level, t_ms)
        session = Session(id=uuid.uuid4().hex, level=level, T_ms=problem.T_ms,
                          problem=problem)
        sessions[session.id] = session
        endpoint = problem.endpoint_control()
        return {"id": session.id, "level": level, "T_ms": problem.T_ms,
                "n_t": problem.n_t,
                "x": problem.grid.x.tolist(),
                "initial_density": problem.psi0.density().tolist(),
                "target_density": problem.psi_tgt.density().tolist(),
                "initial_potential": problem.potential(endpoint.values[0]).tolist(),
                "channels": [{"name": c.name, "lo": c.lo, "hi": c.hi,
                              "start": c.start, "end": c.end,
                              "cursor_axis": c.cursor_axis}
                             for c in problem.channels]}

    @app.post("/sessions/{session_id}/trace")
    def submit_trace(session_id: str, body: dict):
        session = get_session(session_id)
        if session.state == "optimizing":
            raise HTTPException(409, "session is optimizing")
        try:
            samples = body["samples"]
            trace = CursorTrace(level=body["level"], T_ms=float(body["T"]),
                                ts=np.array([s["ts"] for s in samples]),
                                x=np.array([s["x"] for s in samples]),
                                y=np.array([s["y"] for s in samples]))
            control = trace_to_control(trace, session.problem)
        except (KeyError, ValueError) as exc:
            raise HTTPException(422, f"invalid trace: {exc}")
        session.state = "playing"
        f = _stream_frames(session, control)
        session.control = control
        dt_ms = session.problem.dt * session.problem.units.mu_time * 1e3
        rec = SolutionRecord(
            level=session.level, T_ms=session.T_ms, dt_ms=dt_ms, fidelity=f,
            method="player", provenance=SeedProvenance(kind="ps", source=session.id),
            controls={c.name: control.values[:, p]
                      for p, c in enumerate(session.problem.channels)})
        session.records.append(rec)
        session.state = "scored"
        return {"record_id": rec.record_id, "fidelity": f,
                "T_rel": session.T_ms / T_QSL99_MS[session.level]}

    @app.post("/sessions/{session_id}/optimize")
    def optimize_session(session_id: str, body: dict):
        session = get_session(session_id)
        action = body.get("action")
        if action == "stop":
            if session.state != "optimizing":
                raise HTTPException(409, "no optimization to stop")
            session.stop_signal.set()
            session.worker.join()
            return {"state": session.state}
        if action != "start":
            raise HTTPException(422, "action must be 'start' or 'stop'")
        if session.state == "optimizing":
            raise HTTPException(409, "optimization already running")
        if session.control is None:
            raise HTTPException(409, "no control to optimize; submit a trace first")
        session.stop_signal = threading.Event()
        seed = session.control
        config = GrapeConfig(wall_budget=float(body.get("budget_s", 3600.0)),
                             f_stop=float(body.get("f_stop", 0.999)),
                             step_stop=float(body.get("step_stop", 1e-7)))

        def work():
            def progress(iteration, wall_s, f, cost, step):
                session.push({"type": "progress", "iter": int(iteration),
                              "F": float(f), "step_size": float(step),
                              "wall_s": float(wall_s)})

            result = grape_optimize(session.problem, seed, config,
                                    stop_signal=session.stop_signal,
                                    on_iteration=progress)
            session.control = result.control
            dt_ms = session.problem.dt * session.problem.units.mu_time * 1e3
            rec = SolutionRecord(
                level=session.level, T_ms=session.T_ms, dt_ms=dt_ms,
                fidelity=result.fidelity, method="pgrape",
                provenance=SeedProvenance(kind="po", source=session.id),
                controls={c.name: result.control.values[:, p]
                          for p, c in enumerate(session.problem.channels)},
                iterations=result.iterations, wall_s=result.wall_s,
                termination=result.termination.value)
            session.records.append(rec)
            session.state = "scored"
            session.push({"type": "done", "record_id": rec.record_id,
                          "F": result.fidelity,
                          "termination": result.termination.value})

        session.state = "optimizing"
        session.worker = threading.Thread(target=work, daemon=True)
        session.worker.start()
        return {"state": "optimizing"}

    @app.get("/sessions/{session_id}/solutions")
    def list_solutions(session_id: str):
        session = get_session(session_id)
        return [_record_payload(session.problem, r) for r in session.records]

    @app.post("/sessions/{session_id}/replay/{record_id}")
    def replay(session_id: str, record_id: str):
        session = get_session(session_id)
        if session.state == "optimizing":
            raise HTTPException(409, "session is optimizing")
        for rec in session.records:
            if rec.record_id == record_id:
                control = rec.to_control(session.problem)
                f = _stream_frames(session, control)
                return {"fidelity": f}
        raise HTTPException(404, "unknown record")

    @app.get("/levels/{level}/graph")
    def graph_data(level: str):
        if level not in LEVELS:
            raise HTTPException(404, "unknown level")
        solutions = []
        for session in sessions.values():
            if session.level != level:
                continue
            solutions.extend(_record_payload(session.problem, r)
                             for r in session.records)
        return {"level": level, "T_ref_ms": T_QSL99_MS[level], "blocks": 12,
                "solutions": [{"id": s["id"], "T_rel": s["T_rel"], "F": s["F"]}
                              for s in solutions],
                "challenge": _challenge_curve(level)}

    @app.websocket("/sessions/{session_id}/stream")
    async def stream(websocket: WebSocket, session_id: str):
        await websocket.accept()
        session = sessions.get(session_id)
        if session is None:
            await websocket.close(code=4004)
            return
        try:
            while True:
                msg = None
                with session.queue_cv:
                    if session.queue:
                        msg = session.queue.popleft()
                if msg is None:
                    import asyncio

                    await asyncio.sleep(0.02)
                    continue
                await websocket.send_json(msg)
        except WebSocketDisconnect:
            pass

    return app


def serve(host: str = "127.0.0.1", port: int = 8777):
    import uvicorn

    uvicorn.run(create_app(), host=host, port=port, log_level="warning")
