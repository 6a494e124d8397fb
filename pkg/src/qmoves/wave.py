"""Spatial grids, wavefunctions, and split-step Fourier propagation.

Everything in here works in dimensionless simulation units where
hbar = m = 1 and the dynamics reads

    i dpsi/dt = -kappa d^2psi/dx^2 + V psi + g |psi|^2 psi.

Real-time propagation uses symmetric (Strang) splitting with kinetic
half-steps in momentum space; stationary states come from imaginary-time
propagation with per-step renormalization.
"""

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Optional, TYPE_CHECKING

import numpy as np
from . import fastfft as _fft

if TYPE_CHECKING:
    from .problems import ControlVector, ProblemSpec

HBAR = 1.054571817e-34        # J s
AMU = 1.66053906660e-27       # kg
M_RB87 = 86.909180527 * AMU   # kg, the atomic species used by all levels


class GridMismatchError(ValueError):
    """Two wavefunctions on different spatial grids were combined."""


class ConvergenceError(RuntimeError):
    """A stationary-state solve exhausted its iteration cap."""


@dataclass(frozen=True)
class SpatialGrid:
    """Uniform 1D grid with endpoint-inclusive spacing.

    n_x must be a power of two; dx = (x_max - x_min) / (n_x - 1).
    """

    x_min: float
    x_max: float
    n_x: int

    def __post_init__(self):
        if self.n_x < 2 or (self.n_x & (self.n_x - 1)) != 0:
            raise ValueError(f"n_x must be a power of two >= 2, got {self.n_x}")
        if not self.x_max > self.x_min:
            raise ValueError("x_max must exceed x_min")

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / (self.n_x - 1)

    @cached_property
    def x(self) -> np.ndarray:
        x = self.x_min + self.dx * np.arange(self.n_x)
        x.flags.writeable = False
        return x

    @cached_property
    def k(self) -> np.ndarray:
        """Angular wavenumbers in standard FFT ordering, symmetric about 0."""
        k = 2.0 * np.pi * np.fft.fftfreq(self.n_x, d=self.dx)
        k.flags.writeable = False
        return k

    @property
    def is_symmetric(self) -> bool:
        return math.isclose(self.x_min, -self.x_max, rel_tol=0.0, abs_tol=1e-12)


@dataclass(frozen=True)
class Wavefunction:
    """Complex amplitudes on a spatial grid."""

    grid: SpatialGrid
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=np.complex128)
        if amps.shape != (self.grid.n_x,):
            raise ValueError(f"amplitudes must have shape ({self.grid.n_x},)")
        amps = amps.copy()
        amps.flags.writeable = False
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def normalized(cls, grid: SpatialGrid, amplitudes: np.ndarray) -> "Wavefunction":
        amps = np.asarray(amplitudes, dtype=np.complex128)
        nrm = math.sqrt(float(np.sum(np.abs(amps) ** 2)) * grid.dx)
        if nrm == 0.0:
            raise ValueError("cannot normalize the zero state")
        return cls(grid, amps / nrm)

    @classmethod
    def gaussian(cls, grid: SpatialGrid, center: float, width: float,
                 momentum: float = 0.0) -> "Wavefunction":
        x = grid.x
        amps = np.exp(-((x - center) ** 2) / (2.0 * width**2) + 1j * momentum * x)
        return cls.normalized(grid, amps)

    def norm(self) -> float:
        return math.sqrt(float(np.sum(np.abs(self.amplitudes) ** 2)) * self.grid.dx)

    def density(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def position_expectation(self) -> float:
        return float(np.sum(self.grid.x * self.density()) * self.grid.dx)


@dataclass(frozen=True)
class HamiltonianSpec:
    """Kinetic prefactor, sampled potential, and mean-field coupling."""

    kappa: float
    potential: np.ndarray
    g: float = 0.0

    def __post_init__(self):
        if not self.kappa > 0:
            raise ValueError("kappa must be positive")
        if self.g < 0:
            raise ValueError("g must be non-negative")
        pot = np.asarray(self.potential, dtype=np.float64)
        if not np.all(np.isfinite(pot)):
            raise ValueError("potential must be finite everywhere")
        pot = pot.copy()
        pot.flags.writeable = False
        object.__setattr__(self, "potential", pot)


@dataclass(frozen=True)
class SimUnits:
    """Conversion factors between SI and simulation units.

    Fixing two of {kappa, mu_length, mu_time} determines the third through
    kappa = hbar * mu_time / (2 * mu_mass * mu_length^2).
    """

    mu_length: float                  # meters per sim length unit
    mu_time: float                    # seconds per sim time unit
    mu_mass: float = M_RB87           # kg

    @property
    def mu_energy(self) -> float:
        return HBAR / self.mu_time

    @property
    def kappa(self) -> float:
        return HBAR * self.mu_time / (2.0 * self.mu_mass * self.mu_length**2)

    @classmethod
    def from_kappa_length(cls, kappa: float, mu_length: float,
                          mu_mass: float = M_RB87) -> "SimUnits":
        mu_time = 2.0 * mu_mass * kappa * mu_length**2 / HBAR
        return cls(mu_length=mu_length, mu_time=mu_time, mu_mass=mu_mass)

    def time_to_si(self, t_sim: float) -> float:
        return t_sim * self.mu_time

    def time_from_si(self, t_si: float) -> float:
        return t_si / self.mu_time

    def length_to_si(self, x_sim: float) -> float:
        return x_sim * self.mu_length

    def length_from_si(self, x_si: float) -> float:
        return x_si / self.mu_length


def inner_product(a: Wavefunction, b: Wavefunction) -> complex:
    """<a|b> = sum conj(a_i) b_i dx."""
    if a.grid != b.grid:
        raise GridMismatchError("wavefunctions live on different grids")
    return complex(np.vdot(a.amplitudes, b.amplitudes) * a.grid.dx)


def fidelity(a: Wavefunction, b: Wavefunction) -> float:
    """|<a|b>|^2; invariant under global phases of either state."""
    return abs(inner_product(a, b)) ** 2


def energy(psi: Wavefunction, ham: HamiltonianSpec) -> float:
    """<psi| -kappa d^2/dx^2 + V + g|psi|^2 |psi>.

    For g != 0 this is the chemical potential of the mean-field state.
    """
    amps = psi.amplitudes
    grid = psi.grid
    phi = _fft.fft(amps)
    e_kin = float(np.sum(ham.kappa * grid.k**2 * np.abs(phi) ** 2)) * grid.dx / grid.n_x
    dens = np.abs(amps) ** 2
    e_pot = float(np.sum((ham.potential + ham.g * dens) * dens)) * grid.dx
    return e_kin + e_pot


# ---------------------------------------------------------------------------
# Split-step kernels.  States flow through the time loop in momentum space so
# each step costs a single FFT pair; `khalf` is exp(-i kappa k^2 dt / 2).
# ---------------------------------------------------------------------------

def kinetic_half_phase(grid: SpatialGrid, kappa: float, dt: float) -> np.ndarray:
    return np.exp(-0.5j * kappa * grid.k**2 * dt)


def step_split_fourier(psi: Wavefunction, ham: HamiltonianSpec, dt: float) -> Wavefunction:
    """One symmetric split step: half kinetic, potential + nonlinear, half kinetic."""
    if ham.potential.shape != (psi.grid.n_x,):
        raise ValueError("potential is not sampled on the wavefunction's grid")
    khalf = kinetic_half_phase(psi.grid, ham.kappa, dt)
    m = _fft.ifft(khalf * _fft.fft(psi.amplitudes))
    if ham.g != 0.0:
        m = m * np.exp(-1j * dt * (ham.potential + ham.g * np.abs(m) ** 2))
    else:
        m = m * np.exp(-1j * dt * ham.potential)
    out = _fft.ifft(khalf * _fft.fft(m))
    if not np.all(np.isfinite(out)):
        raise FloatingPointError("non-finite amplitudes after split step")
    return Wavefunction(psi.grid, out)


def run_steps(amps: np.ndarray, pot_rows: np.ndarray, g: float, dt: float,
              khalf: np.ndarray,
              store_mid: Optional[np.ndarray] = None,
              x_series: Optional[np.ndarray] = None,
              x_weights: Optional[np.ndarray] = None,
              dx: float = 0.0,
              frame_hook: Optional[Callable[[int, np.ndarray], None]] = None) -> np.ndarray:
    """Apply len(pot_rows) split steps to `amps` and return the final state.

    pot_rows[j] is the potential for step j.  If `store_mid` is given it
    receives the post-potential mid-step states (used by the adjoint pass).
    If `x_series` is given, x_series[j] gets <x> of the state *before* step j
    and one extra trailing entry gets <x> of the final state.
    """
    fft, ifft = _fft.fft, _fft.ifft
    n_steps = len(pot_rows)
    phases = None
    if g == 0.0 and n_steps:
        phases = np.exp(-1j * dt * pot_rows)
    phi = fft(amps)
    for j in range(n_steps):
        if x_series is not None:
            psi_j = ifft(phi)
            x_series[j] = np.real(np.vdot(psi_j, x_weights * psi_j)) * dx
        m = ifft(khalf * phi)
        if g != 0.0:
            m *= np.exp(-1j * dt * (pot_rows[j] + g * (m.real**2 + m.imag**2)))
        else:
            m *= phases[j]
        if store_mid is not None:
            store_mid[j] = m
        phi = khalf * fft(m)
        if frame_hook is not None:
            frame_hook(j, ifft(phi))
    out = ifft(phi)
    if x_series is not None:
        x_series[n_steps] = np.real(np.vdot(out, x_weights * out)) * dx
    return out


def run_steps_batch(amps: np.ndarray, pot_rows_per_step, g: float, dt: float,
                    khalf: np.ndarray) -> np.ndarray:
    """Propagate a batch of states (rows of `amps`) through shared steps.

    pot_rows_per_step yields, for each step, either a (n_x,) potential shared
    by the whole batch or a (batch, n_x) per-row potential.
    """
    fft, ifft = _fft.fft, _fft.ifft
    phi = fft(amps)
    for pot in pot_rows_per_step:
        m = ifft(khalf * phi)
        if g != 0.0:
            m *= np.exp(-1j * dt * (pot + g * (m.real**2 + m.imag**2)))
        else:
            m *= np.exp(-1j * dt * pot)
        phi = khalf * fft(m)
    return ifft(phi)


def propagate(psi0: Wavefunction, control: "ControlVector", problem: "ProblemSpec",
              record_expectation: bool = False):
    """Evolve psi0 under a control, one split step per control point.

    The potential is rebuilt from the control values at every step; the final
    control point only pins the endpoint and drives no step.  Returns the
    final state, or (final state, <x> series of length n_t) when
    record_expectation is set.
    """
    if control.n_t != problem.n_t:
        raise ValueError(f"control has {control.n_t} points, problem wants {problem.n_t}")
    if abs(control.dt - problem.dt) > 1e-15:
        raise ValueError("control and problem time steps differ")
    control.check_bounds()
    pot_rows = problem.potential_rows(control.values[:-1])
    khalf = kinetic_half_phase(problem.grid, problem.kappa, problem.dt)
    x_series = np.empty(problem.n_t) if record_expectation else None
    out = run_steps(psi0.amplitudes.copy(), pot_rows, problem.g, problem.dt, khalf,
                    x_series=x_series,
                    x_weights=problem.grid.x if record_expectation else None,
                    dx=problem.grid.dx)
    if not np.all(np.isfinite(out)):
        raise FloatingPointError("non-finite amplitudes during propagation")
    final = Wavefunction(psi0.grid, out)
    if record_expectation:
        return final, x_series
    return final


# ---------------------------------------------------------------------------
# Stationary states by imaginary-time propagation.
# ---------------------------------------------------------------------------

def _imaginary_time(ham: HamiltonianSpec, grid: SpatialGrid, seed: np.ndarray,
                    dt: float, tol: float, max_steps: int,
                    project: Optional[Callable[[np.ndarray], np.ndarray]] = None,
                    refinements: int = 2) -> Wavefunction:
    # The finite-dt split step biases the fixed point at O(dt^2); after
    # converging at the nominal dt the step is annealed down (dt/4 per stage)
    # to push that bias well below the eigensolver cross-check tolerance.
    pot = ham.potential
    g = ham.g
    dx = grid.dx
    psi = seed / math.sqrt(float(np.sum(np.abs(seed) ** 2)) * dx)
    stage = 0
    khalf = np.exp(-0.5 * ham.kappa * grid.k**2 * dt)
    e_prev = math.inf
    for _ in range(max_steps):
        m = _fft.ifft(khalf * _fft.fft(psi))
        m *= np.exp(-dt * (pot + g * (m.real**2 + m.imag**2)))
        psi = _fft.ifft(khalf * _fft.fft(m))
        if project is not None:
            psi = project(psi)
        psi /= math.sqrt(float(np.sum(np.abs(psi) ** 2)) * dx)
        phi = _fft.fft(psi)
        dens = psi.real**2 + psi.imag**2
        e = float(np.sum(ham.kappa * grid.k**2 * (phi.real**2 + phi.imag**2))) * dx / grid.n_x \
            + float(np.sum((pot + g * dens) * dens)) * dx
        if abs(e - e_prev) < tol:
            if stage == refinements:
                return Wavefunction.normalized(grid, psi)
            stage += 1
            dt /= 4.0
            khalf = np.exp(-0.5 * ham.kappa * grid.k**2 * dt)
        e_prev = e
    raise ConvergenceError(f"imaginary time did not converge within {max_steps} steps")


def _potential_minimum(grid: SpatialGrid, potential: np.ndarray) -> float:
    """Sub-grid minimum location via parabolic interpolation around argmin."""
    i0 = int(np.argmin(potential))
    if i0 == 0 or i0 == grid.n_x - 1:
        return float(grid.x[i0])
    vm, v0, vp = potential[i0 - 1], potential[i0], potential[i0 + 1]
    denom = vp - 2.0 * v0 + vm
    if denom <= 0:
        return float(grid.x[i0])
    return float(grid.x[i0]) - 0.5 * grid.dx * (vp - vm) / denom


def _is_symmetric_potential(grid: SpatialGrid, potential: np.ndarray) -> bool:
    if not grid.is_symmetric:
        return False
    scale = max(1.0, float(np.max(np.abs(potential))))
    return float(np.max(np.abs(potential - potential[::-1]))) < 1e-9 * scale


def ground_state(ham: HamiltonianSpec, grid: SpatialGrid, dt: float = 1e-3,
                 tol: float = 1e-12, max_steps: int = 200_000) -> Wavefunction:
    """Ground state of the (possibly nonlinear) Hamiltonian on `grid`.

    Imaginary-time propagation until the energy change per step drops below
    `tol`; the nonlinear term always uses the current iterate.  Symmetric
    potentials keep even parity exactly via per-step projection.
    """
    x = grid.x
    x_c = _potential_minimum(grid, ham.potential)
    width = (grid.x_max - grid.x_min) / 16.0
    seed = np.exp(-((x - x_c) ** 2) / (2.0 * width**2)).astype(np.complex128)
    project = None
    if _is_symmetric_potential(grid, ham.potential):
        def project(psi: np.ndarray) -> np.ndarray:
            return 0.5 * (psi + psi[::-1])
    return _imaginary_time(ham, grid, seed, dt, tol, max_steps, project=project)


def excited_state(ham: HamiltonianSpec, grid: SpatialGrid, k: int = 1, dt: float = 1e-3,
                  tol: float = 1e-12, max_steps: int = 200_000) -> Wavefunction:
    """First excited state of a potential symmetric about the grid center.

    Imaginary-time propagation restricted to odd-parity states: the iterate
    is antisymmetrized after every step.
    """
    if k != 1:
        raise NotImplementedError("only the first excited state is supported")
    if not _is_symmetric_potential(grid, ham.potential):
        raise ValueError("potential is not symmetric; excited_state is unsupported here")
    x = grid.x
    width = (grid.x_max - grid.x_min) / 16.0
    seed = (x * np.exp(-(x**2) / (2.0 * width**2))).astype(np.complex128)

    def antisymmetrize(psi: np.ndarray) -> np.ndarray:
        return 0.5 * (psi - psi[::-1])

    return _imaginary_time(ham, grid, seed, dt, tol, max_steps, project=antisymmetrize)
