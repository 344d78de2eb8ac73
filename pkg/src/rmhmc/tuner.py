"""Stochastic approximation of the convergence threshold.

The tuned quantity is the number of decimal digits by which a thresholded
integrator endpoint differs from a near-exact baseline endpoint. A
Robbins-Monro recursion in log threshold space drives the expected digits
gap to a prescribed target, and Ruppert averaging of the iterates supplies
the final estimate.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .hamiltonian import sample_momentum
from .integrators import IntegratorConfig, integrate_trajectory
from .phase import DivergenceError, PhasePoint, TargetModel
from .rng import RandomStream
from .samplers import hmc_transition

CLAMPED_DIGITS = -16.0
_LOG_DELTA_MIN = math.log(1e-16)
_LOG_DELTA_MAX = 0.0


@dataclass
class TunerConfig:
    """Targets and gains for the threshold tuner.

    ``kappa`` is the desired decimal digits of similarity against the
    baseline threshold; the step sizes gamma_n = gain * n^{-omega} satisfy
    the Robbins-Monro summability conditions exactly when omega lies in
    (1/2, 1), which is validated at construction.
    """

    kappa: float
    omega: float = 0.75
    gain: float = 1.0
    baseline_delta: float = 1e-10
    n_max: int = 1000
    initial_delta: float = 1e-3

    def __post_init__(self):
        if self.kappa <= 0.0:
            raise ValueError("kappa must be positive")
        if not 0.5 < self.omega < 1.0:
            raise ValueError("omega must lie in (1/2, 1) for Robbins-Monro summability")
        if self.gain <= 0.0:
            raise ValueError("gain must be positive")
        if not self.baseline_delta < self.initial_delta:
            raise ValueError("the baseline threshold must be smaller than the initial threshold")
        if self.n_max < 1:
            raise ValueError("n_max must be at least 1")


@dataclass
class TunerTrace:
    """Per-iteration record of the primal and averaged sequences."""

    delta: np.ndarray
    delta_bar: np.ndarray
    loss: np.ndarray
    loss_bar: np.ndarray
    clamped: np.ndarray

    @property
    def final_delta(self) -> float:
        return float(self.delta_bar[-1])

    def write_csv(self, path):
        with open(path, "w") as fh:
            fh.write("n,delta_n,delta_bar_n,L_n,L_bar_n\n")
            for i in range(self.delta.size):
                fh.write(
                    f"{i + 1},{self.delta[i]:.17g},{self.delta_bar[i]:.17g},"
                    f"{self.loss[i]:.17g},{self.loss_bar[i]:.17g}\n"
                )


def digits_of_similarity(
    model: TargetModel, z: PhasePoint, cfg: IntegratorConfig, cfg_baseline: IntegratorConfig
) -> float:
    """Negative decimal digits of similarity between two integrator runs.

    Returns log10 of the phase-space 2-norm gap between the endpoints of the
    thresholded and baseline integrations. Thresholds at or below the
    baseline are treated as equivalent and clamp to -16, as does an exactly
    zero gap.
    """
    if cfg.step_size != cfg_baseline.step_size or cfg.num_steps != cfg_baseline.num_steps:
        raise ValueError("similarity comparisons require matching step size and step count")
    if cfg.threshold <= cfg_baseline.threshold:
        return CLAMPED_DIGITS
    end = integrate_trajectory(model, z, cfg).end.flatten()
    end_base = integrate_trajectory(model, z, cfg_baseline).end.flatten()
    distance = float(np.linalg.norm(end - end_base))
    if distance == 0.0:
        return CLAMPED_DIGITS
    return float(np.log10(distance))


def mcmc_chain_source(model: TargetModel, q0: np.ndarray, cfg: IntegratorConfig, rng: RandomStream):
    """Generator yielding chain states, advancing one transition per draw."""
    q = np.asarray(q0, dtype=float)
    while True:
        record = hmc_transition(model, q, cfg, rng)
        q = record.next_position(q)
        yield q


def tune_threshold(
    model: TargetModel,
    chain_source,
    cfg: TunerConfig,
    base_cfg: IntegratorConfig,
    rng: RandomStream,
    digits_fn=None,
) -> TunerTrace:
    """Robbins-Monro threshold adaptation with Ruppert averaging.

    At each iteration a position comes from ``chain_source``, a momentum is
    drawn fresh at that position, and the digits gap between the current
    threshold and the baseline is measured. The log-threshold moves against
    the gap's excess over the target, and the running log-space average of
    the iterates is the tuned answer.

    Args:
        model: Target model.
        chain_source: Iterator of positions (see ``mcmc_chain_source``).
        cfg: Tuner configuration.
        base_cfg: Integrator configuration shared by both integrations; its
            threshold field is overridden per evaluation.
        rng: Stream for the per-iteration momentum draws.
        digits_fn: Override for the digits measurement, used by synthetic
            convergence tests; receives (model, z, cfg_delta, cfg_baseline).

    Returns:
        A TunerTrace of length ``cfg.n_max``.
    """
    measure = digits_of_similarity if digits_fn is None else digits_fn
    cfg_baseline = base_cfg.with_threshold(cfg.baseline_delta)
    log_delta = math.log(cfg.initial_delta)
    log_delta_bar = log_delta
    loss_sum = 0.0
    trace = TunerTrace(
        delta=np.empty(cfg.n_max),
        delta_bar=np.empty(cfg.n_max),
        loss=np.empty(cfg.n_max),
        loss_bar=np.empty(cfg.n_max),
        clamped=np.zeros(cfg.n_max, dtype=bool),
    )
    measured = 0
    for n in range(1, cfg.n_max + 1):
        q = np.asarray(next(chain_source), dtype=float)
        p = sample_momentum(model, q, rng)
        idx = n - 1
        trace.delta[idx] = math.exp(log_delta)
        trace.delta_bar[idx] = math.exp(log_delta_bar)
        try:
            digits = measure(
                model, PhasePoint(q, p), base_cfg.with_threshold(math.exp(log_delta)), cfg_baseline
            )
        except DivergenceError:
            # Rare phase points make the fixed-point maps expansive; the
            # measurement carries no usable signal there, so the primal
            # iterate holds still for this n.
            trace.loss[idx] = np.nan
            trace.loss_bar[idx] = loss_sum / measured if measured else np.nan
            log_delta_bar = (n / (n + 1)) * log_delta_bar + (1.0 / (n + 1)) * log_delta
            continue
        loss = digits + cfg.kappa
        loss_sum += loss
        measured += 1
        trace.loss[idx] = loss
        trace.loss_bar[idx] = loss_sum / measured

        # The average sequence absorbs the evaluated iterate delta_n before
        # the primal update produces delta_{n+1}.
        log_delta_bar = (n / (n + 1)) * log_delta_bar + (1.0 / (n + 1)) * log_delta
        gamma = cfg.gain * n**-cfg.omega
        log_delta = log_delta - gamma * loss
        if log_delta < _LOG_DELTA_MIN or log_delta > _LOG_DELTA_MAX:
            log_delta = min(max(log_delta, _LOG_DELTA_MIN), _LOG_DELTA_MAX)
            trace.clamped[idx] = True
    return trace


def monte_carlo_B(
    model: TargetModel,
    delta_grid: np.ndarray,
    positions: np.ndarray,
    base_cfg: IntegratorConfig,
    kappa: float,
    rng: RandomStream,
    baseline_delta: float = 1e-10,
) -> np.ndarray:
    """Monte Carlo estimate of the tuner's regression function on a grid.

    Momenta are drawn once per position and the same phase-space points are
    reused across the grid, so the estimated curve inherits the common
    random numbers and is smooth enough to check for monotonicity and to
    locate the root.

    Args:
        model: Target model.
        delta_grid: Thresholds at which to estimate the expected loss.
        positions: Array of positions to average over.
        base_cfg: Shared integrator configuration.
        kappa: Digits target entering the loss.
        rng: Stream for the momentum draws.
        baseline_delta: Baseline threshold.

    Returns:
        Array of expected-loss estimates, one per grid value.
    """
    positions = np.atleast_2d(np.asarray(positions, dtype=float))
    cfg_baseline = base_cfg.with_threshold(baseline_delta)
    points = []
    baseline_ends = []
    for q in positions:
        z = PhasePoint(q, sample_momentum(model, q, rng))
        try:
            baseline_ends.append(integrate_trajectory(model, z, cfg_baseline).end.flatten())
        except DivergenceError:
            continue
        points.append(z)
    if not points:
        raise DivergenceError("every supplied point diverged under the baseline", "position")
    curve = np.empty(len(delta_grid))
    for g, delta in enumerate(delta_grid):
        if delta <= baseline_delta:
            curve[g] = CLAMPED_DIGITS + kappa
            continue
        cfg_delta = base_cfg.with_threshold(float(delta))
        total = 0.0
        used = 0
        for z, base_end in zip(points, baseline_ends):
            try:
                end = integrate_trajectory(model, z, cfg_delta).end.flatten()
            except DivergenceError:
                continue
            distance = float(np.linalg.norm(end - base_end))
            digits = CLAMPED_DIGITS if distance == 0.0 else float(np.log10(distance))
            total += digits + kappa
            used += 1
        curve[g] = total / used if used else np.nan
    return curve


def default_delta_grid(num: int = 100) -> np.ndarray:
    """The hundred logarithmically spaced thresholds in [1e-10, 1e-1]."""
    return np.logspace(-10, -1, num)
