"""Post-hoc analysis of solution sets.

Solution densities in log-infidelity, monotone-best curves, control
clustering, exponential fidelity/duration fits, cosine-mode decomposition,
and the random-sampling speed-limit estimator.  Durations are in
milliseconds throughout; infidelities of perfect records are floored at
1e-6 before entering log space.
"""

import uuid
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from sklearn.cluster import DBSCAN

from .problems import ControlVector, ProblemSpec
from .seeding import SeedProvenance

INFIDELITY_FLOOR = 1e-6


def log_infidelity(f) -> np.ndarray:
    return np.log10(np.maximum(1.0 - np.asarray(f, dtype=float), INFIDELITY_FLOOR))


@dataclass
class SolutionRecord:
    """One stored solution: control, score, and optimization provenance."""

    level: str
    T_ms: float
    dt_ms: float
    fidelity: float
    method: str
    provenance: SeedProvenance
    controls: dict                      # channel name -> np.ndarray of values
    iterations: int = 0
    wall_s: float = 0.0
    termination: str = ""
    record_id: str = field(default_factory=lambda: uuid.uuid4().hex)
    history: Optional[list] = None      # [(iteration, wall_s, fidelity), ...]

    def __post_init__(self):
        if not 0.0 <= self.fidelity <= 1.0:
            raise ValueError("fidelity must lie in [0, 1]")
        self.controls = {k: np.asarray(v, dtype=np.float64)
                         for k, v in self.controls.items()}

    @property
    def n_t(self) -> int:
        return len(next(iter(self.controls.values())))

    def to_control(self, problem: ProblemSpec) -> ControlVector:
        vals = np.column_stack([self.controls[c.name] for c in problem.channels])
        return problem.control_from_values(vals)

    def to_dict(self) -> dict:
        d = {"level": self.level, "T_ms": self.T_ms, "dt_ms": self.dt_ms,
             "fidelity": self.fidelity, "method": self.method,
             "provenance": self.provenance.to_dict(),
             "controls": {k: v.tolist() for k, v in self.controls.items()},
             "iterations": self.iterations, "wall_s": self.wall_s,
             "termination": self.termination, "record_id": self.record_id}
        if self.history is not None:
            d["history"] = [[int(i), float(w), float(f)] for i, w, f in self.history]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SolutionRecord":
        return cls(level=d["level"], T_ms=d["T_ms"], dt_ms=d["dt_ms"],
                   fidelity=d["fidelity"], method=d["method"],
                   provenance=SeedProvenance.from_dict(d["provenance"]),
                   controls=d["controls"], iterations=d.get("iterations", 0),
                   wall_s=d.get("wall_s", 0.0), termination=d.get("termination", ""),
                   record_id=d.get("record_id", uuid.uuid4().hex),
                   history=d.get("history"))


@dataclass
class DensityMap:
    """Per-duration-column normalized density in log10(1 - F)."""

    t_edges: np.ndarray        # (n_cols + 1,)
    y_grid: np.ndarray         # (n_y,)
    density: np.ndarray        # (n_y, n_cols); empty columns stay zero
    counts: np.ndarray         # records per column


@dataclass
class QslEstimate:
    mean_t_fit: float
    success_probability: float
    n_samples: int
    n_trials: int
    interval: tuple
    n_discarded: int = 0


def kde_density(records: Sequence[SolutionRecord], bandwidth: float = 0.08,
                n_t_bins: int = 40, y_min: float = -6.0, y_max: float = 0.0,
                n_y: int = 241) -> DensityMap:
    """Epanechnikov density of log-infidelity, column-normalized per T bin."""
    if not records:
        raise ValueError("no records to estimate a density from")
    t = np.array([r.T_ms for r in records])
    y = log_infidelity([r.fidelity for r in records])
    lo, hi = float(t.min()), float(t.max())
    if hi == lo:
        hi = lo + 1e-9
    edges = np.linspace(lo, hi, n_t_bins + 1)
    y_grid = np.linspace(y_min, y_max, n_y)
    dy = y_grid[1] - y_grid[0]
    density = np.zeros((n_y, n_t_bins))
    counts = np.zeros(n_t_bins, dtype=int)
    cols = np.clip(np.searchsorted(edges, t, side="right") - 1, 0, n_t_bins - 1)
    for col, yi in zip(cols, y):
        v = (y_grid - yi) / bandwidth
        density[:, col] += np.where(np.abs(v) <= 1.0, 0.75 * (1.0 - v**2), 0.0) / bandwidth
        counts[col] += 1
    for col in range(n_t_bins):
        total = density[:, col].sum() * dy
        if total > 0:
            density[:, col] /= total
    return DensityMap(t_edges=edges, y_grid=y_grid, density=density, counts=counts)


def epanechnikov(v: np.ndarray) -> np.ndarray:
    """The parabolic kernel, unit integral on [-1, 1]."""
    v = np.asarray(v, dtype=float)
    return np.where(np.abs(v) <= 1.0, 0.75 * (1.0 - v**2), 0.0)


def monotone_best(records: Sequence[SolutionRecord]):
    """Running best infidelity over ascending duration: (T_ms, 1 - best F)."""
    if not records:
        return np.empty(0), np.empty(0)
    t = np.array([r.T_ms for r in records])
    f = np.array([r.fidelity for r in records])
    order = np.argsort(t, kind="stable")
    t, f = t[order], f[order]
    best = np.maximum.accumulate(f)
    t_out, idx = np.unique(t, return_index=True)
    # last entry of each duration group carries that group's running best
    group_best = np.array([best[end - 1] for end in
                           np.append(idx[1:], len(t))])
    return t_out, 1.0 - group_best


def crossing_duration(t: np.ndarray, infidelity: np.ndarray, f_threshold: float):
    """First duration where the monotone-best curve reaches the threshold."""
    hit = np.nonzero(infidelity <= 1.0 - f_threshold)[0]
    return float(t[hit[0]]) if hit.size else None


def dbscan(points: np.ndarray, eps: float, min_samples: int) -> np.ndarray:
    """Euclidean density clustering; labels >= 0, noise = -1.

    Input rows are sorted before clustering so border-point ties resolve
    identically under any permutation of the input.
    """
    points = np.asarray(points, dtype=float)
    if points.ndim != 2:
        raise ValueError("points must be a 2D array")
    if not np.all(np.isfinite(points)):
        raise ValueError("points must be finite")
    order = np.lexsort(points.T[::-1])
    labels_sorted = DBSCAN(eps=eps, min_samples=min_samples).fit(points[order]).labels_
    labels = np.empty(len(points), dtype=int)
    labels[order] = labels_sorted
    return labels


# Clustering presets matching the published analyses.
CLUSTER_PRESETS = {
    "bhw_paper": {"eps": 3.0, "min_samples": 5},
    "shakeup_paper": {"eps": 0.1, "min_samples": 250},
}


def prepare_bhw_clustering(records: Sequence[SolutionRecord],
                           f_range=(0.95, 0.999), t_range_ms=(0.093, 0.124),
                           n_points: int = 1000):
    """Duration-normalized, delay-stripped tweezer positions on a fixed grid.

    Returns (vectors, kept_records); controls that never reach u1 >= 0 are
    excluded with a warning.
    """
    vectors, kept = [], []
    for rec in records:
        if not (f_range[0] <= rec.fidelity <= f_range[1]):
            continue
        if not (t_range_ms[0] <= rec.T_ms <= t_range_ms[1]):
            continue
        u1 = rec.controls["u1"]
        above = np.nonzero(u1 >= 0.0)[0]
        if above.size == 0:
            warnings.warn(f"record {rec.record_id}: u1 never reaches 0, skipped")
            continue
        tail = u1[above[0]:]
        if tail.size < 2:
            warnings.warn(f"record {rec.record_id}: too short after delay strip")
            continue
        s = np.linspace(0.0, 1.0, tail.size)
        vectors.append(np.interp(np.linspace(0.0, 1.0, n_points), s, tail))
        kept.append(rec)
    return np.array(vectors), kept


def exp_gap_fit(records: Sequence[SolutionRecord], t_ref_ms: float = 0.0929):
    """(a, b) of the model log10(1 - F) = a + b (T_ms - t_ref_ms)."""
    if len(records) < 3:
        raise ValueError("need at least 3 records for a trade-off fit")
    t = np.array([r.T_ms for r in records]) - t_ref_ms
    y = log_infidelity([r.fidelity for r in records])
    if np.ptp(t) == 0:
        raise ValueError("degenerate fit: all records share one duration")
    b, a = np.polyfit(t, y, 1)
    return float(a), float(b)


def cosine_decompose(u: np.ndarray, x_expect: np.ndarray, dt_ms: float,
                     k_max: int = 5) -> np.ndarray:
    """Trapezoidal c_k = (1/T) integral (u - <x>) cos(pi k t / T) dt, k = 0..k_max.

    k half-oscillations over [0, T]; the oscillation count is k / 2.
    """
    u = np.asarray(u, dtype=float)
    x_expect = np.asarray(x_expect, dtype=float)
    if u.shape != x_expect.shape:
        raise ValueError("control and expectation series must share a length")
    n_t = len(u)
    t = np.arange(n_t) * dt_ms
    T = t[-1]
    rel = u - x_expect
    return np.array([np.trapz(rel * np.cos(np.pi * k * t / T), t) / T
                     for k in range(k_max + 1)])


def qsl_sampling(records: Sequence[SolutionRecord], t_ref_ms: float,
                 n_samples: int, rng: np.random.Generator,
                 n_trials: int = 1000, f_threshold: float = 0.99,
                 n_sub: int = 15) -> QslEstimate:
    """Random-sampling speed-limit estimation over [0.8, 1.2] * t_ref_ms.

    Each trial samples n_samples solutions, keeps the per-sub-interval best,
    fits log10(1 - F) linearly in T, and reads off the duration where the
    fit crosses the fidelity threshold.  Success means the crossing lands
    inside the interval; trials whose fit is degenerate are discarded
    (counted, never successful).
    """
    lo, hi = 0.8 * t_ref_ms, 1.2 * t_ref_ms
    t_all = np.array([r.T_ms for r in records])
    f_all = np.array([r.fidelity for r in records])
    inside = (t_all >= lo) & (t_all <= hi)
    t_all, f_all = t_all[inside], f_all[inside]
    if t_all.size == 0:
        raise ValueError("no records inside the sampling interval")
    edges = np.linspace(lo, hi, n_sub + 1)
    y_target = np.log10(1.0 - f_threshold)
    successes, fits, discarded = 0, [], 0
    for _ in range(n_trials):
        take = rng.choice(t_all.size, size=min(n_samples, t_all.size),
                          replace=n_samples > t_all.size)
        t_s, f_s = t_all[take], f_all[take]
        cols = np.clip(np.searchsorted(edges, t_s, side="right") - 1, 0, n_sub - 1)
        t_pts, y_pts = [], []
        for c in range(n_sub):
            mask = cols == c
            if not np.any(mask):
                continue
            best = np.argmax(f_s[mask])
            t_pts.append(t_s[mask][best])
            y_pts.append(log_infidelity(f_s[mask][best]))
        if len(t_pts) < 2 or np.ptp(t_pts) == 0:
            discarded += 1
            continue
        slope, intercept = np.polyfit(t_pts, y_pts, 1)
        if slope == 0:
            discarded += 1
            continue
        t_fit = (y_target - intercept) / slope
        if lo <= t_fit <= hi:
            successes += 1
            fits.append(t_fit)
    mean_fit = float(np.mean(fits)) if fits else float("nan")
    return QslEstimate(mean_t_fit=mean_fit,
                       success_probability=successes / n_trials,
                       n_samples=n_samples, n_trials=n_trials,
                       interval=(lo, hi), n_discarded=discarded)


def quantile_trajectories(records: Sequence[SolutionRecord], time_grid: np.ndarray,
                          qs=(0.25, 0.5, 0.75), carry_final: bool = True) -> np.ndarray:
    """Fidelity quantiles across runs as a function of wall time.

    Uses each record's per-iteration telemetry.  With carry_final a
    terminated run keeps contributing its final fidelity; otherwise only
    runs still active at t enter the quantile (empty slices give NaN).
    """
    time_grid = np.asarray(time_grid, dtype=float)
    out = np.full((len(qs), time_grid.size), np.nan)
    walls, fids, ends = [], [], []
    for rec in records:
        if not rec.history:
            continue
        h = np.asarray(rec.history, dtype=float)
        walls.append(h[:, 1])
        fids.append(h[:, 2])
        ends.append(rec.wall_s if rec.wall_s > 0 else h[-1, 1])
    for j, t in enumerate(time_grid):
        vals = []
        for w, f, end in zip(walls, fids, ends):
            if t > end and not carry_final:
                continue
            i = np.searchsorted(w, min(t, end), side="right") - 1
            if i >= 0:
                vals.append(f[i])
        if vals:
            out[:, j] = np.quantile(vals, qs)
    return out


def mean_iteration_seconds(records: Sequence[SolutionRecord]) -> float:
    """Average wall time per completed optimizer iteration across records."""
    totals = [(rec.history[-1][1], rec.history[-1][0])
              for rec in records if rec.history and rec.history[-1][0] > 0]
    if not totals:
        return float("nan")
    return float(np.mean([w / i for w, i in totals]))
