"""Derivative-free discrete coordinate ascent over binned controls.

One control channel is optimized (for bhw the tweezer depth is frozen
maximally deep); the time axis is segmented into bins of equal width and
each bin update exhaustively sweeps a fixed candidate set, keeping the best.

For g = 0 a sweep costs one cached bin-propagator application per candidate:
forward/backward vectors are cached at bin boundaries and only re-rolled
across the distance between successively updated bins.  For g != 0 every
candidate is re-propagated from the bin to the end.  `prop_steps` counts
each elementary propagator application (a cached bin map counts as one).
"""

import time
from dataclasses import dataclass
from typing import Optional

import numpy as np
from . import fastfft as _fft

from .grape import OptimizationResult, Termination
from .problems import ControlVector, ProblemSpec

_BIN_MAP_CACHE: dict = {}


@dataclass(frozen=True)
class SaConfig:
    n_b: Optional[int] = None     # bin count; None means one bin per step
    n_d: int = 128                # candidate count
    wall_budget: float = 780.0
    f_stop: float = 0.999

    def __post_init__(self):
        if self.n_d < 2:
            raise ValueError("need at least the two boundary candidates")
        if self.n_b is not None and self.n_b < 1:
            raise ValueError("n_b must be positive")


def candidate_set(lo: float, hi: float, n_d: int) -> np.ndarray:
    """n_d values linearly spaced from lo to hi inclusive."""
    if n_d < 2:
        raise ValueError("need at least the two boundary candidates")
    return np.linspace(lo, hi, n_d)


@dataclass(frozen=True)
class BinnedControl:
    """Piecewise-constant view of one control channel."""

    bin_values: np.ndarray
    width: int                    # steps per bin (last bin may be shorter)
    bins: tuple                   # index arrays into the control rows

    def expand(self, n_t: int, start: float, end: float) -> np.ndarray:
        out = np.empty(n_t)
        out[0], out[-1] = start, end
        for value, idx in zip(self.bin_values, self.bins):
            out[idx] = value
        return out


class SaState:
    """Mutable optimizer state: control, caches, and step accounting."""

    def __init__(self, problem: ProblemSpec, seed: ControlVector, config: SaConfig):
        self.problem = problem
        self.config = config
        self.channel = 0  # the swept channel is always the level's first
        ch = problem.channels[self.channel]
        self.omega = candidate_set(ch.lo, ch.hi, config.n_d)

        n_free = problem.n_t - 2
        n_b = min(config.n_b or n_free, n_free)
        self.width = max(1, round(n_free / n_b))
        edges = list(range(1, problem.n_t - 1, self.width)) + [problem.n_t - 1]
        self.bins = [np.arange(a, b) for a, b in zip(edges[:-1], edges[1:])]
        self.n_b = len(self.bins)

        # full per-step values of the swept channel, seeded by per-bin means
        self.u = np.empty(problem.n_t)
        self.u[0], self.u[-1] = ch.start, ch.end
        seed_col = seed.values[:, self.channel]
        for idx in self.bins:
            self.u[idx] = float(np.mean(seed_col[idx]))

        # frozen values of the remaining channels (bhw: tweezer at full depth)
        self.frozen = {}
        for p, other in enumerate(problem.channels):
            if p == self.channel:
                continue
            col = np.full(problem.n_t, other.lo)
            col[0], col[-1] = other.start, other.end
            self.frozen[p] = col

        self.khalf = problem.khalf
        self.khalf_c = np.conj(problem.khalf)
        n_x = problem.grid.n_x
        self.psi_fwd = np.empty((self.n_b + 1, n_x), dtype=np.complex128)
        self.chi_bwd = np.empty((self.n_b + 1, n_x), dtype=np.complex128)
        self.prop_steps = 0
        self.changed = 0

        # cached per-step potential phases for the current control (g = 0);
        # only the rows of an accepted bin are refreshed on update
        if problem.g == 0.0:
            all_rows = np.arange(problem.n_t - 1)
            self.phase_rows = np.exp(
                -1j * problem.dt * problem.potential_rows(self._rows_values(all_rows)))
        else:
            self.phase_rows = None
        self.psi_fwd[0] = self._apply_rows(problem.psi0.amplitudes,
                                           np.array([0]), forward=True)
        self.fwd_valid = 0
        self.chi_bwd[self.n_b] = problem.psi_tgt.amplitudes
        self.bwd_valid = self.n_b
        # candidate potentials and phases, shared by sweeps and bin maps
        self.cand_pots = self._pots_for_channel_values(self.omega)
        if problem.g == 0.0:
            self.cand_phases = np.exp(-1j * problem.dt * self.cand_pots)
        self.fidelity = self._full_fidelity()

    # -- potentials -----------------------------------------------------------

    def _rows_values(self, idx: np.ndarray) -> np.ndarray:
        vals = np.empty((len(idx), len(self.problem.channels)))
        vals[:, self.channel] = self.u[idx]
        for p, col in self.frozen.items():
            vals[:, p] = col[idx]
        return vals

    def _pots_for_channel_values(self, values: np.ndarray) -> np.ndarray:
        vals = np.empty((len(values), len(self.problem.channels)))
        vals[:, self.channel] = values
        for p, col in self.frozen.items():
            vals[:, p] = col[1]  # interior frozen value
        return self.problem.potential_rows(vals)

    # -- elementary propagation ----------------------------------------------

    def _apply_rows(self, amps: np.ndarray, idx: np.ndarray, forward: bool) -> np.ndarray:
        """Apply the split steps of control rows idx (ascending) to `amps`.

        The backward direction applies the adjoint steps in reverse; it is
        only meaningful for g = 0 and never taken otherwise.
        """
        fft, ifft = _fft.fft, _fft.ifft
        if self.phase_rows is not None:
            if forward:
                kh = self.khalf
                rows = self.phase_rows[idx]
            else:
                kh = self.khalf_c
                rows = np.conj(self.phase_rows[idx[::-1]])
            phi = fft(amps)
            for ph in rows:
                m = ifft(kh * phi)
                m *= ph
                phi = kh * fft(m)
            self.prop_steps += len(idx)
            return ifft(phi)
        assert forward, "backward cache rolls are a g = 0 code path"
        problem = self.problem
        pots = problem.potential_rows(self._rows_values(idx))
        dt, g = problem.dt, problem.g
        phi = fft(amps)
        for j in range(len(idx)):
            m = ifft(self.khalf * phi)
            m *= np.exp(-1j * dt * (pots[j] + g * (m.real**2 + m.imag**2)))
            phi = self.khalf * fft(m)
            self.prop_steps += 1
        return ifft(phi)

    def _full_fidelity(self) -> float:
        """Naive full propagation; used once at startup."""
        steps = np.arange(1, self.problem.n_t - 1)
        final = self._apply_rows(self.psi_fwd[0], steps, forward=True)
        ov = np.vdot(self.problem.psi_tgt.amplitudes, final) * self.problem.grid.dx
        return abs(ov) ** 2

    # -- caches ---------------------------------------------------------------

    def _ensure_fwd(self, k: int):
        while self.fwd_valid < k:
            b = self.fwd_valid
            self.psi_fwd[b + 1] = self._apply_rows(self.psi_fwd[b], self.bins[b],
                                                   forward=True)
            self.fwd_valid += 1

    def _ensure_bwd(self, k: int):
        while self.bwd_valid > k:
            b = self.bwd_valid
            self.chi_bwd[b - 1] = self._apply_rows(self.chi_bwd[b], self.bins[b - 1],
                                                   forward=False)
            self.bwd_valid -= 1

    def _bin_maps(self, w: int) -> np.ndarray:
        """Per-candidate propagators over one w-step bin, as (n_d, n_x, n_x)."""
        key = (self.problem.level, self.problem.grid.n_x, w, self.config.n_d)
        maps = _BIN_MAP_CACHE.get(key)
        if maps is None:
            n_x = self.problem.grid.n_x
            dt = self.problem.dt
            maps = np.empty((self.config.n_d, n_x, n_x), dtype=np.complex128)
            for d in range(self.config.n_d):
                basis = np.eye(n_x, dtype=np.complex128)
                ph = np.exp(-1j * dt * self.cand_pots[d])
                for _ in range(w):
                    m = _fft.ifft(self.khalf * _fft.fft(basis))
                    m *= ph
                    basis = _fft.ifft(self.khalf * _fft.fft(m))
                maps[d] = basis
            while len(_BIN_MAP_CACHE) >= 2:
                _BIN_MAP_CACHE.pop(next(iter(_BIN_MAP_CACHE)))
            _BIN_MAP_CACHE[key] = maps
        return maps

    # -- candidate sweeps ------------------------------------------------------

    def _sweep_linear(self, k: int):
        """(fidelities, post-bin states) for all candidates; g = 0 path."""
        psi = self.psi_fwd[k]
        w = len(self.bins[k])
        if w == 1:
            m = _fft.ifft(self.khalf * _fft.fft(psi))
            rows = m * self.cand_phases
            out = _fft.ifft(self.khalf * _fft.fft(rows))
        else:
            out = np.tensordot(psi, self._bin_maps(w), axes=([0], [1]))
        self.prop_steps += self.config.n_d
        ov = out @ np.conj(self.chi_bwd[k + 1]) * self.problem.grid.dx
        return np.abs(ov) ** 2, out

    def _sweep_nonlinear(self, k: int):
        """Candidates re-propagated from bin k to the end; g != 0 path."""
        problem = self.problem
        dt, g = problem.dt, problem.g
        idx = self.bins[k]
        rows = np.broadcast_to(self.psi_fwd[k], (self.config.n_d, problem.grid.n_x)).copy()
        for _ in range(len(idx)):
            m = _fft.ifft(self.khalf * _fft.fft(rows))
            m *= np.exp(-1j * dt * (self.cand_pots + g * (m.real**2 + m.imag**2)))
            rows = _fft.ifft(self.khalf * _fft.fft(m))
        post_bin = rows.copy()
        tail = np.arange(idx[-1] + 1, problem.n_t - 1)
        if tail.size:
            pots = problem.potential_rows(self._rows_values(tail))
            for j in range(tail.size):
                m = _fft.ifft(self.khalf * _fft.fft(rows))
                m *= np.exp(-1j * dt * (pots[j] + g * (m.real**2 + m.imag**2)))
                rows = _fft.ifft(self.khalf * _fft.fft(m))
        self.prop_steps += self.config.n_d * (len(idx) + tail.size)
        ov = rows @ np.conj(problem.psi_tgt.amplitudes) * problem.grid.dx
        return np.abs(ov) ** 2, post_bin

    # -- control views ----------------------------------------------------------

    def binned_control(self) -> BinnedControl:
        return BinnedControl(
            bin_values=np.array([self.u[idx[0]] for idx in self.bins]),
            width=self.width, bins=tuple(self.bins))

    def control(self) -> ControlVector:
        vals = np.empty((self.problem.n_t, len(self.problem.channels)))
        vals[:, self.channel] = self.u
        for p, col in self.frozen.items():
            vals[:, p] = col
        return self.problem.control_from_values(vals)


def update_bin(state: SaState, k: int) -> SaState:
    """Set bin k to the best candidate with every other bin fixed.

    Ties keep the incumbent value whenever it attains the maximum (the sweep
    must strictly improve the running fidelity to change anything).
    """
    state._ensure_fwd(k)
    if state.problem.g == 0.0:
        state._ensure_bwd(k + 1)
        fids, post = state._sweep_linear(k)
    else:
        fids, post = state._sweep_nonlinear(k)
    best = int(np.argmax(fids))
    # strict improvement beyond float-path noise; exact ties keep the incumbent
    if fids[best] > state.fidelity + 1e-14:
        state.u[state.bins[k]] = state.omega[best]
        if state.phase_rows is not None:
            state.phase_rows[state.bins[k]] = state.cand_phases[best]
        state.psi_fwd[k + 1] = post[best]
        state.fwd_valid = k + 1
        state.bwd_valid = max(state.bwd_valid, k + 1)
        state.fidelity = float(fids[best])
        state.changed += 1
    return state


def iterate(state: SaState, rng: np.random.Generator,
            on_update=None) -> SaState:
    """Visit every bin once in a fresh uniform random permutation."""
    for k in rng.permutation(state.n_b):
        update_bin(state, int(k))
        if on_update is not None and on_update(state):
            break
    return state


def optimize(problem: ProblemSpec, seed: ControlVector, config: SaConfig,
             rng: np.random.Generator, stop_signal=None,
             budget_override=None) -> OptimizationResult:
    """Repeat sweeps until the budget, the fidelity threshold, or a full
    iteration with zero accepted changes."""
    t0 = time.perf_counter()
    state = SaState(problem, seed, config)

    def budget() -> float:
        return budget_override() if budget_override is not None else config.wall_budget

    history = [(0, time.perf_counter() - t0, state.fidelity, 1.0 - state.fidelity, 0.0)]
    iteration = 0
    termination = None
    last_sample = t0

    def mid_iteration_stop(st: SaState) -> bool:
        nonlocal termination, last_sample
        now = time.perf_counter()
        if now - last_sample >= 0.25:
            history.append((iteration + 1, now - t0, st.fidelity,
                            1.0 - st.fidelity, 0.0))
            last_sample = now
        if st.fidelity >= config.f_stop:
            termination = Termination.FIDELITY_REACHED
        elif now - t0 >= budget():
            termination = Termination.BUDGET_EXHAUSTED
        elif stop_signal is not None and stop_signal.is_set():
            termination = Termination.USER_STOPPED
        return termination is not None

    if state.fidelity >= config.f_stop:
        termination = Termination.FIDELITY_REACHED
    while termination is None:
        state.changed = 0
        iterate(state, rng, on_update=mid_iteration_stop)
        iteration += 1
        history.append((iteration, time.perf_counter() - t0, state.fidelity,
                        1.0 - state.fidelity, 0.0))
        if termination is None and state.changed == 0:
            # no gain in fidelity by changing any of the control values
            termination = Termination.STEP_CONVERGED

    return OptimizationResult(
        control=state.control(), fidelity=state.fidelity,
        cost=1.0 - state.fidelity, iterations=iteration,
        wall_s=time.perf_counter() - t0, termination=termination,
        history=history, prop_steps=state.prop_steps)
