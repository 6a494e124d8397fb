"""The three state-transfer levels: potentials, bounds, units, endpoints.

Level ids are the strings "bhw", "splitting", "shakeup" everywhere (file
formats, service messages, CLI).  All potentials are evaluated in simulation
units on the level's fixed grid.
"""

import math
from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np

from .wave import (HamiltonianSpec, SimUnits, SpatialGrid, Wavefunction,
                   excited_state, fidelity, ground_state, kinetic_half_phase,
                   propagate)

LEVELS = ("bhw", "splitting", "shakeup")

# Reference durations T_QSL^{F=0.99} in ms, used by the play service's graph
# view and the run-time comparisons.
T_QSL99_MS = {"bhw": 0.0973, "splitting": 0.92, "shakeup": 0.939}

# Bring Home Water: a single atom in a static tweezer, picked up and shuttled
# by a second, movable tweezer.
BHW_SIGMA = 0.5
BHW_X0 = 1.0
BHW_A = -130.0

# Shake Up: anharmonic atom-chip well, displaced horizontally.
SHAKEUP_P2 = 65.8392
SHAKEUP_P4 = 97.6349
SHAKEUP_P6 = -15.3850

# Splitting: atom-chip single-to-double well, barrier raised via u2.
SPLIT_P = 8794.1
SPLIT_B_OMEGA = 0.9
SPLIT_GR = 0.2
SPLIT_B_I = 1.0
MU_MAGNETIC = 1e-4  # tesla per sim magnetic unit (1 G)

G_1D = 1.8299


@dataclass(frozen=True)
class ControlChannel:
    """One bounded control parameter with pinned endpoint values."""

    name: str            # "u1" or "u2"
    lo: float
    hi: float
    start: float
    end: float
    cursor_axis: str     # which cursor axis drives it in the play view

    @property
    def span(self) -> float:
        return self.hi - self.lo


@dataclass(frozen=True)
class ControlVector:
    """Per-time-step control values with fixed endpoints.

    values has shape (n_t, n_params); row 0 and row -1 must equal the channel
    endpoint values exactly and every entry must lie within bounds.
    """

    dt: float
    values: np.ndarray
    channels: tuple

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.ndim != 2 or vals.shape[1] != len(self.channels):
            raise ValueError("values must have shape (n_t, n_params)")
        if vals.shape[0] < 2:
            raise ValueError("a control needs at least its two endpoint rows")
        vals = vals.copy()
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)
        self.check_bounds()
        start = np.array([c.start for c in self.channels])
        end = np.array([c.end for c in self.channels])
        if not (np.array_equal(vals[0], start) and np.array_equal(vals[-1], end)):
            raise ValueError("control endpoints do not match the fixed endpoint values")

    def check_bounds(self):
        for p, ch in enumerate(self.channels):
            col = self.values[:, p]
            if col.min() < ch.lo or col.max() > ch.hi:
                raise ValueError(f"control {ch.name} leaves bounds [{ch.lo}, {ch.hi}]")

    @property
    def n_t(self) -> int:
        return self.values.shape[0]

    @property
    def n_params(self) -> int:
        return len(self.channels)

    @property
    def T(self) -> float:
        return (self.n_t - 1) * self.dt

    def with_values(self, values: np.ndarray) -> "ControlVector":
        return ControlVector(self.dt, values, self.channels)

    def to_unit(self) -> np.ndarray:
        """Map each channel linearly onto [0, 1]."""
        lo = np.array([c.lo for c in self.channels])
        span = np.array([c.span for c in self.channels])
        return (self.values - lo) / span

    def from_unit(self, unit_values: np.ndarray) -> "ControlVector":
        lo = np.array([c.lo for c in self.channels])
        span = np.array([c.span for c in self.channels])
        return self.with_values(unit_values * span + lo)


class ProblemSpec:
    """A level at a fixed duration: grid, units, endpoints, and potentials.

    n_x defaults to the levels' production resolution; tests may reduce it.
    """

    def __init__(self, level: str, n_t: int, n_x: int = 256):
        if level not in LEVELS:
            raise ValueError(f"unknown level {level!r}")
        if n_t < 2:
            raise ValueError("n_t must be at least 2")
        self.level = level
        self.n_t = n_t
        if level == "bhw":
            self.grid = SpatialGrid(-3.0, 3.0, n_x)
            self.dt = 3.5e-4
            self.g = 0.0
            self.units = SimUnits.from_kappa_length(0.5, 532e-9)
            self.channels = (
                ControlChannel("u1", -2.0, 2.0, -1.0, -1.0, "x"),
                ControlChannel("u2", -150.0, 0.0, BHW_A, BHW_A, "y"),
            )
        elif level == "shakeup":
            self.grid = SpatialGrid(-2.0, 2.0, n_x)
            self.dt = 1e-3
            self.g = G_1D
            self.units = SimUnits(mu_length=1e-6, mu_time=1e-3)
            self.channels = (ControlChannel("u1", -1.0, 1.0, 0.0, 0.0, "x"),)
        else:  # splitting
            self.grid = SpatialGrid(-3.5, 3.5, n_x)
            self.dt = 1e-3
            self.g = G_1D
            self.units = SimUnits(mu_length=1e-6, mu_time=1e-3)
            self.channels = (ControlChannel("u2", 0.0, 1.0, 0.0, 1.0, "y"),)
        self.kappa = self.units.kappa
        self.psi0, self.psi_tgt = _stationary_states(level, n_x)

    @property
    def T(self) -> float:
        return (self.n_t - 1) * self.dt

    @property
    def T_ms(self) -> float:
        return self.T * self.units.mu_time * 1e3

    @cached_property
    def khalf(self) -> np.ndarray:
        return kinetic_half_phase(self.grid, self.kappa, self.dt)

    # -- potentials ---------------------------------------------------------

    @cached_property
    def _bhw_static(self) -> np.ndarray:
        x = self.grid.x
        return BHW_A * np.exp(-2.0 * (x - BHW_X0) ** 2 / BHW_SIGMA**2)

    @cached_property
    def _split_c1(self) -> np.ndarray:
        b_s = np.sqrt((SPLIT_GR * self.grid.x) ** 2 + SPLIT_B_I**2)
        return (b_s - SPLIT_B_OMEGA) ** 2

    @cached_property
    def _split_c2(self) -> np.ndarray:
        b_s = np.sqrt((SPLIT_GR * self.grid.x) ** 2 + SPLIT_B_I**2)
        return (SPLIT_B_I / (2.0 * b_s)) ** 2

    def potential_rows(self, values: np.ndarray) -> np.ndarray:
        """Potentials for a stack of control rows; shape (m, n_x)."""
        values = np.atleast_2d(np.asarray(values, dtype=np.float64))
        x = self.grid.x
        if self.level == "bhw":
            u1 = values[:, 0][:, None]
            u2 = values[:, 1][:, None]
            return u2 * np.exp(-2.0 * (x - u1) ** 2 / BHW_SIGMA**2) + self._bhw_static
        if self.level == "shakeup":
            d = x - values[:, 0][:, None]
            d2 = d * d
            return d2 * (SHAKEUP_P2 + d2 * (SHAKEUP_P4 + d2 * SHAKEUP_P6))
        s = 0.5 + 0.3 * values[:, 0][:, None]
        return SPLIT_P * np.sqrt(self._split_c1 + self._split_c2 * s**2)

    def potential(self, values) -> np.ndarray:
        return self.potential_rows(np.asarray(values))[0]

    def potential_deriv_rows(self, values: np.ndarray) -> np.ndarray:
        """dV/du_p for a stack of control rows; shape (n_params, m, n_x)."""
        return self.potential_and_deriv_rows(values)[1]

    def potential_and_deriv_rows(self, values: np.ndarray):
        """(V rows, dV/du_p rows) sharing the expensive intermediates."""
        values = np.atleast_2d(np.asarray(values, dtype=np.float64))
        x = self.grid.x
        if self.level == "bhw":
            u1 = values[:, 0][:, None]
            u2 = values[:, 1][:, None]
            e = np.exp(-2.0 * (x - u1) ** 2 / BHW_SIGMA**2)
            pot = u2 * e + self._bhw_static
            dv1 = u2 * e * (4.0 / BHW_SIGMA**2) * (x - u1)
            return pot, np.stack([dv1, e])
        if self.level == "shakeup":
            d = x - values[:, 0][:, None]
            d2 = d * d
            pot = d2 * (SHAKEUP_P2 + d2 * (SHAKEUP_P4 + d2 * SHAKEUP_P6))
            dv = -(d * (2.0 * SHAKEUP_P2 + d2 * (4.0 * SHAKEUP_P4 + d2 * 6.0 * SHAKEUP_P6)))
            return pot, dv[None]
        s = 0.5 + 0.3 * values[:, 0][:, None]
        root = np.sqrt(self._split_c1 + self._split_c2 * s**2)
        return SPLIT_P * root, (SPLIT_P * 0.3 * self._split_c2 * s / root)[None]

    # -- controls -----------------------------------------------------------

    def endpoint_control(self) -> ControlVector:
        """Control holding every channel at its start value (end row pinned)."""
        vals = np.tile([c.start for c in self.channels], (self.n_t, 1))
        vals[-1] = [c.end for c in self.channels]
        return ControlVector(self.dt, vals, self.channels)

    def control_from_values(self, values: np.ndarray) -> ControlVector:
        return ControlVector(self.dt, values, self.channels)


def bhw_potential(u1: float, u2: float, grid: SpatialGrid) -> np.ndarray:
    """Movable tweezer at (u1, depth u2) plus the static tweezer at x0."""
    if not (-2.0 <= u1 <= 2.0 and -150.0 <= u2 <= 0.0):
        raise ValueError("bhw control values out of bounds")
    x = grid.x
    return (u2 * np.exp(-2.0 * (x - u1) ** 2 / BHW_SIGMA**2)
            + BHW_A * np.exp(-2.0 * (x - BHW_X0) ** 2 / BHW_SIGMA**2))


def shakeup_potential(u1: float, grid: SpatialGrid) -> np.ndarray:
    """Anharmonic chip well displaced to u1: sum of even powers of (x - u1)."""
    if not -1.0 <= u1 <= 1.0:
        raise ValueError("shakeup control value out of bounds")
    d2 = (grid.x - u1) ** 2
    return d2 * (SHAKEUP_P2 + d2 * (SHAKEUP_P4 + d2 * SHAKEUP_P6))


def splitting_potential(u2: float, grid: SpatialGrid) -> np.ndarray:
    """Chip double-well; u2 in [0, 1] raises the central barrier."""
    if not 0.0 <= u2 <= 1.0:
        raise ValueError("splitting control value out of bounds")
    b_s = np.sqrt((SPLIT_GR * grid.x) ** 2 + SPLIT_B_I**2)
    return SPLIT_P * np.sqrt((b_s - SPLIT_B_OMEGA) ** 2
                             + ((0.5 + 0.3 * u2) / (2.0 * b_s) * SPLIT_B_I) ** 2)


@lru_cache(maxsize=None)
def _stationary_states(level: str, n_x: int = 256):
    """(psi0, psi_tgt) for a level; independent of the duration."""
    if level == "bhw":
        grid = SpatialGrid(-3.0, 3.0, n_x)
        kappa = 0.5
        dt = 3.5e-4
        x = grid.x
        static = HamiltonianSpec(kappa, BHW_A * np.exp(-2.0 * (x - BHW_X0) ** 2 / BHW_SIGMA**2))
        movable = HamiltonianSpec(kappa, BHW_A * np.exp(-2.0 * (x + 1.0) ** 2 / BHW_SIGMA**2))
        return ground_state(static, grid, dt=dt), ground_state(movable, grid, dt=dt)
    if level == "shakeup":
        grid = SpatialGrid(-2.0, 2.0, n_x)
        kappa = SimUnits(mu_length=1e-6, mu_time=1e-3).kappa
        ham = HamiltonianSpec(kappa, shakeup_potential(0.0, grid), g=G_1D)
        return ground_state(ham, grid), excited_state(ham, grid)
    grid = SpatialGrid(-3.5, 3.5, n_x)
    kappa = SimUnits(mu_length=1e-6, mu_time=1e-3).kappa
    single = HamiltonianSpec(kappa, splitting_potential(0.0, grid), g=G_1D)
    double = HamiltonianSpec(kappa, splitting_potential(1.0, grid), g=G_1D)
    return ground_state(single, grid), ground_state(double, grid)


@lru_cache(maxsize=64)
def make_problem(level: str, T: float, n_x: int = 256) -> ProblemSpec:
    """Build a level at duration T (simulation units); n_t = round(T/dt) + 1."""
    if not T > 0:
        raise ValueError("T must be positive")
    dt = 3.5e-4 if level == "bhw" else 1e-3
    n_t = int(round(T / dt)) + 1
    return ProblemSpec(level, n_t, n_x)


def make_problem_ms(level: str, T_ms: float, n_x: int = 256) -> ProblemSpec:
    """Build a level at a duration given in milliseconds."""
    mu_time = SimUnits.from_kappa_length(0.5, 532e-9).mu_time if level == "bhw" else 1e-3
    return make_problem(level, T_ms * 1e-3 / mu_time, n_x)


def duration_ms(level: str, T_sim: float) -> float:
    mu_time = SimUnits.from_kappa_length(0.5, 532e-9).mu_time if level == "bhw" else 1e-3
    return T_sim * mu_time * 1e3


def evaluate_fidelity(problem: ProblemSpec, control: ControlVector) -> float:
    """Propagate psi0 under the control and score against psi_tgt."""
    final = propagate(problem.psi0, control, problem)
    return fidelity(final, problem.psi_tgt)
