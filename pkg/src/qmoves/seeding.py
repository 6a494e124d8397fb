"""Seed generation: uniform random, binned random, preselection, cursor traces."""

import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .problems import ControlVector, ProblemSpec, evaluate_fidelity


@dataclass(frozen=True)
class SeedProvenance:
    """How a seed came to be; copied immutably into every descendant record."""

    kind: str                      # "rs" | "rs_binned" | "ps" | "po"
    n_b: Optional[int] = None      # bin count for rs_binned
    source: str = ""               # rng seed, session id, ...
    created: float = field(default_factory=time.time)
    preselected: bool = False

    def to_dict(self) -> dict:
        return {"kind": self.kind, "n_b": self.n_b, "source": self.source,
                "created": self.created, "preselected": self.preselected}

    @classmethod
    def from_dict(cls, d: dict) -> "SeedProvenance":
        return cls(kind=d["kind"], n_b=d.get("n_b"), source=d.get("source", ""),
                   created=d.get("created", 0.0), preselected=d.get("preselected", False))


@dataclass(frozen=True)
class CursorTrace:
    """Timestamped cursor samples in screen-normalized [0, 1] coordinates.

    Timestamps share the level's duration unit (milliseconds).
    """

    level: str
    T_ms: float
    ts: np.ndarray
    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        ts = np.asarray(self.ts, dtype=np.float64)
        x = np.asarray(self.x, dtype=np.float64)
        y = np.asarray(self.y, dtype=np.float64)
        if ts.size == 0:
            raise ValueError("empty cursor trace")
        if not (ts.shape == x.shape == y.shape):
            raise ValueError("trace arrays must share a shape")
        if np.any(np.diff(ts) <= 0):
            raise ValueError("trace timestamps must be strictly increasing")
        if x.min() < 0 or x.max() > 1 or y.min() < 0 or y.max() > 1:
            raise ValueError("cursor samples must stay within the bounding box")
        for name, arr in (("ts", ts), ("x", x), ("y", y)):
            arr = arr.copy()
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)


def _pin_endpoints(problem: ProblemSpec, values: np.ndarray) -> ControlVector:
    values[0] = [c.start for c in problem.channels]
    values[-1] = [c.end for c in problem.channels]
    return problem.control_from_values(values)


def random_seed(problem: ProblemSpec, rng: np.random.Generator) -> ControlVector:
    """Independent uniform draw within bounds at every step; endpoints pinned."""
    vals = np.column_stack([rng.uniform(c.lo, c.hi, problem.n_t)
                            for c in problem.channels])
    return _pin_endpoints(problem, vals)


def binned_random_seed(problem: ProblemSpec, n_b: int,
                       rng: np.random.Generator) -> ControlVector:
    """One uniform draw per bin, constant within each of n_b equal-width bins."""
    if not 1 <= n_b <= problem.n_t:
        raise ValueError("n_b must be in [1, n_t]")
    vals = np.empty((problem.n_t, len(problem.channels)))
    pieces = np.array_split(np.arange(problem.n_t), n_b)
    for p, ch in enumerate(problem.channels):
        draws = rng.uniform(ch.lo, ch.hi, n_b)
        for b, idx in enumerate(pieces):
            vals[idx, p] = draws[b]
    return _pin_endpoints(problem, vals)


def frequency_random_seed(problem: ProblemSpec, rng: np.random.Generator,
                          n_modes: int = 8) -> ControlVector:
    """Random smooth seed from low-frequency cosine modes.

    Experimental alternative parametrization; not part of the benchmarked
    seeding strategies.
    """
    t = np.linspace(0.0, 1.0, problem.n_t)
    vals = np.empty((problem.n_t, len(problem.channels)))
    for p, ch in enumerate(problem.channels):
        amps = rng.standard_normal(n_modes) / np.arange(1, n_modes + 1)
        sig = sum(a * np.cos(np.pi * k * t) for k, a in enumerate(amps, start=1))
        mid = 0.5 * (ch.lo + ch.hi)
        vals[:, p] = np.clip(mid + 0.5 * ch.span * sig, ch.lo, ch.hi)
    return _pin_endpoints(problem, vals)


def preselect(seeds: Sequence[ControlVector], n: int,
              problem: Optional[ProblemSpec] = None,
              fidelities: Optional[Sequence[float]] = None) -> list:
    """The n seeds with the highest initial fidelity, descending, stable ties.

    Either pass precomputed fidelities or a problem to evaluate them (one
    propagation per seed).
    """
    if fidelities is None:
        if problem is None:
            raise ValueError("need a problem or precomputed fidelities")
        fidelities = [evaluate_fidelity(problem, s) for s in seeds]
    if len(fidelities) != len(seeds):
        raise ValueError("one fidelity per seed required")
    order = sorted(range(len(seeds)), key=lambda i: (-fidelities[i], i))
    return [seeds[i] for i in order[:max(0, n)]]


def trace_to_control(trace: CursorTrace, problem: ProblemSpec) -> ControlVector:
    """Map a cursor trace onto the control grid.

    Each channel reads its cursor axis through the level's linear map from
    screen coordinates to control bounds, then gets resampled onto the dt
    grid by linear interpolation, clamped, and endpoint-pinned.
    """
    if trace.level != problem.level:
        raise ValueError(f"trace is for {trace.level!r}, problem is {problem.level!r}")
    span_ms = trace.ts[-1] - trace.ts[0]
    if abs(span_ms - problem.T_ms) > 0.01 * problem.T_ms:
        raise ValueError(f"trace covers {span_ms:.4f} ms, level lasts {problem.T_ms:.4f} ms")
    step_ms = problem.T_ms / (problem.n_t - 1)
    t_grid = trace.ts[0] + step_ms * np.arange(problem.n_t)
    t_grid = np.clip(t_grid, trace.ts[0], trace.ts[-1])
    vals = np.empty((problem.n_t, len(problem.channels)))
    for p, ch in enumerate(problem.channels):
        screen = trace.x if ch.cursor_axis == "x" else trace.y
        mapped = ch.lo + screen * ch.span
        vals[:, p] = np.clip(np.interp(t_grid, trace.ts, mapped), ch.lo, ch.hi)
    return _pin_endpoints(problem, vals)
