"""Gradient-based local control optimization (quasi-Newton + line search).

The fidelity gradient is the exact discrete adjoint of the split-step
propagation: a forward pass stores the post-potential mid-step states, the
backward pass propagates the costate seeded by <psi_tgt|psi(T)> psi_tgt and
contracts with dV/du per step.  For g != 0 the backward map is the exact
linearization of the nonlinear step, which couples the costate to its
conjugate.  Everything runs in normalized control coordinates (each channel
mapped onto [0, 1]).
"""

import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional

import numpy as np
from . import fastfft as _fft

from .problems import ControlVector, ProblemSpec

ARMIJO_C1 = 1e-4
# A run whose fidelity gains less than this across the trailing window of
# accepted iterations counts as converged (dead or fully polished basin).
STAGNATION_WINDOW = 80
STAGNATION_MIN_GAIN = 3e-8


class Termination(str, Enum):
    FIDELITY_REACHED = "fidelity_reached"
    STEP_CONVERGED = "step_converged"
    BUDGET_EXHAUSTED = "budget_exhausted"
    USER_STOPPED = "user_stopped"
    ZERO_GAIN = "zero_gain"  # stochastic ascent: a full sweep changed nothing


@dataclass(frozen=True)
class GrapeConfig:
    gamma: float = 1e-6           # derivative-regularization weight
    sigma_bound: float = 2e3      # boundary-cost weight
    f_stop: float = 0.999
    step_stop: float = 1e-7       # minimum backtracking step
    wall_budget: float = 780.0    # seconds
    memory: int = 10              # quasi-Newton history length

    def __post_init__(self):
        if self.gamma < 0 or self.sigma_bound < 0:
            raise ValueError("cost weights must be non-negative")
        if not 0.0 < self.f_stop <= 1.0:
            raise ValueError("f_stop must be in (0, 1]")
        if self.wall_budget <= 0:
            raise ValueError("wall_budget must be positive")


@dataclass
class OptimizationResult:
    """Outcome of one optimizer run, with per-iteration telemetry."""

    control: ControlVector
    fidelity: float
    cost: float
    iterations: int
    wall_s: float
    termination: Termination
    history: list = field(default_factory=list)   # (iter, wall_s, F, cost, step)
    prop_steps: int = 0                           # split steps consumed

    @property
    def fidelity_history(self) -> np.ndarray:
        return np.array([h[2] for h in self.history])

    @property
    def cost_history(self) -> np.ndarray:
        return np.array([h[3] for h in self.history])


def _unit_transform(problem: ProblemSpec):
    lo = np.array([c.lo for c in problem.channels])
    span = np.array([c.span for c in problem.channels])
    return lo, span


def _forward(problem: ProblemSpec, phys: np.ndarray, store: bool,
             pot: np.ndarray = None):
    """Propagate psi0 under physical control rows.

    Returns (overlap o, mid-states, step phases); the last two are None
    unless `store` is set.
    """
    dt, g = problem.dt, problem.g
    khalf = problem.khalf
    fft, ifft = _fft.fft, _fft.ifft
    if pot is None:
        pot = problem.potential_rows(phys[:-1])
    n_steps = pot.shape[0]
    mtilde = np.empty((n_steps, problem.grid.n_x), dtype=np.complex128) if store else None
    phases = np.empty_like(mtilde) if (store and g != 0.0) else None
    if g == 0.0:
        lin_phases = np.exp(-1j * dt * pot)
        if store:
            phases = lin_phases
    n_x = problem.grid.n_x
    buf = np.empty(n_x, dtype=np.complex128)
    m = np.empty(n_x, dtype=np.complex128)
    phi = fft(problem.psi0.amplitudes)
    for j in range(n_steps):
        np.multiply(khalf, phi, out=buf)
        _fft.ifft_into(buf, m)
        if g != 0.0:
            ph = np.exp(-1j * dt * (pot[j] + g * (m.real**2 + m.imag**2)))
            if store:
                phases[j] = ph
        else:
            ph = lin_phases[j]
        m *= ph
        if store:
            mtilde[j] = m
        _fft.fft_into(m, buf)
        np.multiply(khalf, buf, out=phi)
    psi_final = ifft(phi)
    o = np.vdot(problem.psi_tgt.amplitudes, psi_final) * problem.grid.dx
    return o, mtilde, phases


def _fidelity_gradient(problem: ProblemSpec, phys: np.ndarray):
    """Exact dF/du_{p,j} (physical units), shape (n_t, n_params)."""
    dt, g = problem.dt, problem.g
    dx = problem.grid.dx
    khalf_c = np.conj(problem.khalf)
    fft, ifft = _fft.fft, _fft.ifft
    pot, dv = problem.potential_and_deriv_rows(phys[:-1])  # dv: (n_p, n_steps, n_x)
    o, mtilde, phases = _forward(problem, phys, store=True, pot=pot)
    n_steps = mtilde.shape[0]
    grad = np.zeros((phys.shape[0], phys.shape[1]))
    n_x = problem.grid.n_x
    buf = np.empty(n_x, dtype=np.complex128)
    xi = np.empty(n_x, dtype=np.complex128)
    chihat = fft(o * problem.psi_tgt.amplitudes)
    for j in range(n_steps - 1, -1, -1):
        np.multiply(khalf_c, chihat, out=buf)
        _fft.ifft_into(buf, xi)
        w_im = (np.conj(xi) * mtilde[j]).imag
        for p in range(dv.shape[0]):
            grad[j, p] = 2.0 * dt * dx * float(np.dot(dv[p, j], w_im))
        if g != 0.0:
            msq = mtilde[j].real**2 + mtilde[j].imag**2
            ph_c = np.conj(phases[j])
            eta = ph_c * (1.0 + 1j * g * dt * msq) * xi \
                - 1j * g * dt * (mtilde[j] ** 2 * ph_c) * np.conj(xi)
        else:
            eta = np.conj(phases[j]) * xi
        _fft.fft_into(eta, buf)
        np.multiply(khalf_c, buf, out=chihat)
    return grad, abs(o) ** 2


def _penalties(unit: np.ndarray, dt: float, config: GrapeConfig):
    """Regularization + boundary cost and gradient in normalized coords."""
    jumps = np.diff(unit, axis=0) / dt
    reg = 0.5 * config.gamma * float(np.sum(jumps**2)) * dt
    grad = np.zeros_like(unit)
    grad[:-1] -= config.gamma * jumps
    grad[1:] += config.gamma * jumps
    over = np.clip(unit - 1.0, 0.0, None) + np.clip(unit, None, 0.0)
    bound = 0.5 * config.sigma_bound * float(np.sum(over**2)) * dt
    grad += config.sigma_bound * over * dt
    return reg + bound, grad


def cost_at_unit(problem: ProblemSpec, unit: np.ndarray, config: GrapeConfig):
    """(J, F) at a raw normalized control array; no endpoint handling."""
    lo, span = _unit_transform(problem)
    o, _, _ = _forward(problem, unit * span + lo, store=False)
    f = abs(o) ** 2
    pen, _ = _penalties(unit, problem.dt, config)
    return (1.0 - f) + pen, f


def gradient_at_unit(problem: ProblemSpec, unit: np.ndarray, config: GrapeConfig):
    """(dJ/d_unit, F) via the adjoint pass plus analytic penalty gradients."""
    lo, span = _unit_transform(problem)
    grad_f, f = _fidelity_gradient(problem, unit * span + lo)
    _, pen_grad = _penalties(unit, problem.dt, config)
    return -grad_f * span + pen_grad, f


def cost(problem: ProblemSpec, control: ControlVector, config: GrapeConfig = GrapeConfig()) -> float:
    """J = (1 - F) + derivative regularization + boundary overshoot cost."""
    return cost_at_unit(problem, control.to_unit(), config)[0]


def gradient(problem: ProblemSpec, control: ControlVector,
             config: GrapeConfig = GrapeConfig()) -> np.ndarray:
    """Gradient of J in normalized coordinates, shape (n_t, n_params)."""
    return gradient_at_unit(problem, control.to_unit(), config)[0]


def _two_loop(g: np.ndarray, pairs: list) -> np.ndarray:
    """L-BFGS two-loop recursion; returns an approximation of H^-1 g."""
    q = g.copy()
    alphas = []
    for s, y, rho in reversed(pairs):
        a = rho * np.dot(s, q)
        q -= a * y
        alphas.append(a)
    if pairs:
        s, y, _ = pairs[-1]
        q *= np.dot(s, y) / np.dot(y, y)
    for (s, y, rho), a in zip(pairs, reversed(alphas)):
        b = rho * np.dot(y, q)
        q += (a - b) * s
    return q


def _result_control(problem: ProblemSpec, seed: ControlVector, unit: np.ndarray) -> ControlVector:
    lo, span = _unit_transform(problem)
    phys = unit * span + lo
    np.clip(phys, lo, np.array([c.hi for c in problem.channels]), out=phys)
    phys[0] = seed.values[0]
    phys[-1] = seed.values[-1]
    return seed.with_values(phys)


def optimize(problem: ProblemSpec, seed: ControlVector, config: GrapeConfig = GrapeConfig(),
             stop_signal=None,
             budget_override: Optional[Callable[[], float]] = None,
             on_iteration: Optional[Callable] = None) -> OptimizationResult:
    """Quasi-Newton ascent from `seed` until a termination rule fires.

    stop_signal implements in-game start/stop: any object with is_set()
    (e.g. threading.Event), polled between line-search trials.
    on_iteration(iteration, wall_s, fidelity, cost, step) fires after every
    accepted update.
    """
    t0 = time.perf_counter()
    n_steps = problem.n_t - 1
    prop_steps = 0

    def stopped():
        return stop_signal is not None and stop_signal.is_set()

    def budget() -> float:
        return budget_override() if budget_override is not None else config.wall_budget

    x = seed.to_unit().ravel()
    shape = (problem.n_t, len(problem.channels))

    def eval_cost(vec):
        nonlocal prop_steps
        prop_steps += n_steps
        return cost_at_unit(problem, vec.reshape(shape), config)

    def eval_grad(vec):
        nonlocal prop_steps
        prop_steps += 2 * n_steps
        g2d, f = gradient_at_unit(problem, vec.reshape(shape), config)
        g2d[0] = 0.0
        g2d[-1] = 0.0
        return g2d.ravel(), f

    j_cur, f_cur = eval_cost(x)
    history = [(0, time.perf_counter() - t0, f_cur, j_cur, 0.0)]
    pairs: list = []
    iterations = 0
    alpha_accept = 1.0
    active = (x <= 0.0) | (x >= 1.0)
    fid_trail: list = [f_cur]  # trailing fidelities for stagnation detection

    def finish(reason: Termination) -> OptimizationResult:
        return OptimizationResult(
            control=_result_control(problem, seed, x.reshape(shape)),
            fidelity=f_cur, cost=j_cur, iterations=iterations,
            wall_s=time.perf_counter() - t0, termination=reason,
            history=history, prop_steps=prop_steps)

    if f_cur >= config.f_stop:
        return finish(Termination.FIDELITY_REACHED)
    g_cur, _ = eval_grad(x)

    while True:
        if stopped():
            return finish(Termination.USER_STOPPED)
        if time.perf_counter() - t0 >= budget():
            return finish(Termination.BUDGET_EXHAUSTED)

        d = -_two_loop(g_cur, pairs)
        if np.dot(d, g_cur) >= 0.0:
            pairs.clear()
            d = -g_cur
        if iterations == 0:
            alpha = min(1.0, 0.05 / max(1e-12, float(np.max(np.abs(d)))))
        else:
            alpha = min(1.0, 2.0 * alpha_accept)

        accepted = False
        while alpha >= config.step_stop:
            x_t = np.clip(x + alpha * d, 0.0, 1.0)
            j_t, f_t = eval_cost(x_t)
            pred = ARMIJO_C1 * np.dot(g_cur, x_t - x)
            # sufficient decrease, and one that is measurable at float
            # precision (flat-landscape dust must not count as progress)
            if j_t <= j_cur + pred and pred < -1e-15 * max(1.0, abs(j_cur)):
                accepted = True
                break
            alpha *= 0.5
            if stopped():
                return finish(Termination.USER_STOPPED)
            if time.perf_counter() - t0 >= budget():
                return finish(Termination.BUDGET_EXHAUSTED)
        # converged when backtracking exhausts itself, the accepted move no
        # longer changes the control appreciably, or the fidelity has been
        # flat across the trailing window (dead or fully polished landscape)
        if not accepted or float(np.max(np.abs(x_t - x))) < config.step_stop:
            return finish(Termination.STEP_CONVERGED)
        fid_trail.append(f_t)
        if len(fid_trail) > STAGNATION_WINDOW:
            fid_trail.pop(0)
            if f_t - fid_trail[0] < STAGNATION_MIN_GAIN:
                x, j_cur, f_cur = x_t, j_t, f_t
                return finish(Termination.STEP_CONVERGED)

        g_new, _ = eval_grad(x_t)
        active_new = (x_t <= 0.0) | (x_t >= 1.0)
        if not np.array_equal(active_new, active):
            pairs.clear()  # the clamped set changed: curvature pairs invalid
        else:
            # curvature restricted to the free coordinates
            s = np.where(active_new, 0.0, x_t - x)
            y = np.where(active_new, 0.0, g_new - g_cur)
            sy = np.dot(s, y)
            if sy > 1e-14 * float(np.linalg.norm(s)) * float(np.linalg.norm(y)):
                pairs.append((s, y, 1.0 / sy))
                if len(pairs) > config.memory:
                    pairs.pop(0)
        active = active_new
        x, j_cur, f_cur, g_cur = x_t, j_t, f_t, g_new
        alpha_accept = alpha
        iterations += 1
        history.append((iterations, time.perf_counter() - t0, f_cur, j_cur, alpha))
        if on_iteration is not None:
            on_iteration(*history[-1])
        if f_cur >= config.f_stop:
            return finish(Termination.FIDELITY_REACHED)
