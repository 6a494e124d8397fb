"""Quantum state-transfer control playground.

Three 1D transfer levels (bhw, splitting, shakeup), gradient and
derivative-free optimizers over bounded control functions, landscape
analysis tools, solution archives, and a live play session service.
"""

from .analysis import SolutionRecord
from .grape import GrapeConfig, OptimizationResult, Termination
from .grape import optimize as grape_optimize
from .problems import (ControlVector, ProblemSpec, T_QSL99_MS,
                       evaluate_fidelity, make_problem, make_problem_ms)
from .seeding import (CursorTrace, SeedProvenance, binned_random_seed,
                      preselect, random_seed, trace_to_control)
from .stochastic import SaConfig
from .stochastic import optimize as sa_optimize
from .store import Archive, BudgetLedger, run_batch
from .wave import (HamiltonianSpec, SimUnits, SpatialGrid, Wavefunction,
                   energy, excited_state, fidelity, ground_state,
                   inner_product, propagate, step_split_fourier)

__all__ = [
    "SolutionRecord", "GrapeConfig", "OptimizationResult", "Termination",
    "grape_optimize", "ControlVector", "ProblemSpec", "T_QSL99_MS",
    "evaluate_fidelity", "make_problem", "make_problem_ms", "CursorTrace",
    "SeedProvenance", "binned_random_seed", "preselect", "random_seed",
    "trace_to_control", "SaConfig", "sa_optimize", "Archive", "BudgetLedger",
    "run_batch", "HamiltonianSpec", "SimUnits", "SpatialGrid", "Wavefunction",
    "energy", "excited_state", "fidelity", "ground_state", "inner_product",
    "propagate", "step_split_fourier",
]

__version__ = "0.1.0"
