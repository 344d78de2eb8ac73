"""Riemannian manifold Hamiltonian Monte Carlo with implicitly-defined
integrators, convergence-threshold diagnostics, and adaptive threshold
tuning."""

from .hamiltonian import (
    grad_p_hamiltonian,
    grad_q_hamiltonian,
    riemannian_hamiltonian,
    sample_momentum,
)
from .integrators import (
    IntegratorConfig,
    IntegratorKind,
    Solver,
    StepStats,
    TrajectoryResult,
    glf_momentum_newton,
    glf_position_newton,
    glf_step,
    implicit_midpoint_step,
    integrate_trajectory,
    leapfrog_step,
)
from .phase import (
    DivergenceError,
    EvaluationError,
    MetricBundle,
    PhasePoint,
    TargetModel,
    momentum_flip,
)
from .rng import RandomStream
from .samplers import (
    ChainTrace,
    TransitionRecord,
    gibbs_logistic_step,
    hmc_transition,
    hmc_transition_driven,
    run_chain,
    run_multi_chain,
)
from .tuner import TunerConfig, TunerTrace, digits_of_similarity, monte_carlo_B, tune_threshold

__version__ = "0.1.0"

__all__ = [
    "ChainTrace",
    "DivergenceError",
    "EvaluationError",
    "IntegratorConfig",
    "IntegratorKind",
    "MetricBundle",
    "PhasePoint",
    "RandomStream",
    "Solver",
    "StepStats",
    "TargetModel",
    "TrajectoryResult",
    "TransitionRecord",
    "TunerConfig",
    "TunerTrace",
    "digits_of_similarity",
    "gibbs_logistic_step",
    "glf_momentum_newton",
    "glf_position_newton",
    "glf_step",
    "grad_p_hamiltonian",
    "grad_q_hamiltonian",
    "hmc_transition",
    "hmc_transition_driven",
    "implicit_midpoint_step",
    "integrate_trajectory",
    "leapfrog_step",
    "momentum_flip",
    "monte_carlo_B",
    "riemannian_hamiltonian",
    "run_chain",
    "run_multi_chain",
    "sample_momentum",
    "tune_threshold",
]
