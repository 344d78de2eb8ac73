"""Metropolis-Hastings transition kernel over integrator proposals, chain
execution, Gibbs alternation for the hierarchical logistic model, and
multi-chain orchestration with replayable randomness."""

from dataclasses import dataclass, field

import numpy as np

from .hamiltonian import riemannian_hamiltonian, sample_momentum
from .integrators import IntegratorConfig, StepStats, transition_trajectory
from .phase import DivergenceError, EvaluationError, PhasePoint, TargetModel, momentum_flip
from .rng import RandomStream


@dataclass
class TransitionRecord:
    """Everything one Metropolis-Hastings transition did.

    ``proposal`` is the momentum-flipped integrator output (or the flipped
    start when integration diverged, with ``energy_end`` infinite), ``u`` is
    the single uniform draw that decided acceptance, and ``stats`` aggregates
    the solver effort over the trajectory's steps.
    """

    proposal: PhasePoint
    accepted: bool
    uniform_draw: float
    energy_start: float
    energy_end: float
    stats: StepStats
    diverged: bool = False

    def next_position(self, current: np.ndarray) -> np.ndarray:
        return self.proposal.q if self.accepted else current


@dataclass
class ChainTrace:
    """Ordered positions of a chain plus the per-transition records."""

    positions: np.ndarray
    records: list[TransitionRecord] = field(default_factory=list)

    @property
    def acceptance_rate(self) -> float:
        if not self.records:
            return 0.0
        return float(np.mean([r.accepted for r in self.records]))


def _drive_transition(model, q, cfg, p, u):
    """Shared transition body: integrate, flip, accept or reject."""
    q = np.asarray(q, dtype=float)
    start = PhasePoint(q, p)
    # Failures at the current state are fatal; failures along the proposal
    # trajectory are rejections.
    energy_start = riemannian_hamiltonian(model, start)
    try:
        end, stats, _, energy_end = transition_trajectory(model, start, cfg)
    except (DivergenceError, EvaluationError):
        return TransitionRecord(
            proposal=momentum_flip(start),
            accepted=False,
            uniform_draw=u,
            energy_start=energy_start,
            energy_end=np.inf,
            stats=StepStats(),
            diverged=True,
        )
    proposal = momentum_flip(end)
    if np.isfinite(energy_end):
        accept_prob = np.exp(min(0.0, energy_start - energy_end))
        accepted = u < accept_prob
    else:
        accepted = False
    return TransitionRecord(
        proposal=proposal,
        accepted=bool(accepted),
        uniform_draw=u,
        energy_start=energy_start,
        energy_end=float(energy_end),
        stats=stats,
    )


def hmc_transition(model: TargetModel, q: np.ndarray, cfg: IntegratorConfig, rng: RandomStream) -> TransitionRecord:
    """One transition of (Riemannian) HMC from position q.

    Samples p ~ Normal(0, G(q)), integrates ``cfg.num_steps`` steps, applies
    the momentum flip, and accepts with probability
    min{1, exp(H_start - H_end)} using a single uniform draw. A diverged
    trajectory is a rejection, not a crash.

    Args:
        model: Target model.
        q: Current position.
        cfg: Integrator configuration.
        rng: Stream supplying the momentum and the accept-reject uniform.

    Returns:
        The TransitionRecord for this step.
    """
    q = np.asarray(q, dtype=float)
    bundle = model.metric_bundle(q)
    p = sample_momentum(model, q, rng, bundle=bundle)
    u = float(rng.uniform())
    return _drive_transition(model, q, cfg, p, u)


def hmc_transition_driven(
    model: TargetModel, q: np.ndarray, cfg: IntegratorConfig, p: np.ndarray, u: float
) -> TransitionRecord:
    """An HMC transition with externally supplied momentum and uniform draw.

    Feeding two configurations the same (q, p, u) isolates the causal effect
    of the configuration difference, which is how threshold-paired kernels
    are compared.
    """
    return _drive_transition(model, q, cfg, np.asarray(p, dtype=float), u)


def run_chain(model: TargetModel, q0: np.ndarray, cfg: IntegratorConfig, n: int, rng: RandomStream) -> ChainTrace:
    """Runs n sequential HMC transitions with fresh momentum each step.

    Args:
        model: Target model.
        q0: Initial position.
        cfg: Integrator configuration.
        n: Number of transitions; must be at least 1.
        rng: Stream owned by this chain.

    Returns:
        A ChainTrace whose positions array has shape (n, m).
    """
    if n < 1:
        raise ValueError("a chain requires at least one transition")
    q = np.asarray(q0, dtype=float)
    positions = np.empty((n, model.dim))
    records = []
    for i in range(n):
        try:
            record = hmc_transition(model, q, cfg, rng)
        except EvaluationError as exc:
            raise EvaluationError(f"chain failed at transition {i}: {exc}", exc.q) from exc
        q = record.next_position(q)
        positions[i] = q
        records.append(record)
    return ChainTrace(positions=positions, records=records)


def sample_precision(beta: np.ndarray, shape_k: float, scale_theta: float, rng: RandomStream) -> float:
    """Exact conjugate draw of the prior precision given the coefficients.

    The conditional is Gamma with shape k + p/2 and scale
    1 / (beta'beta / 2 + 1/theta).
    """
    beta = np.asarray(beta, dtype=float)
    shape = shape_k + 0.5 * beta.size
    scale = 1.0 / (0.5 * float(beta @ beta) + 1.0 / scale_theta)
    alpha = float(rng.gamma(shape, scale=scale))
    if not np.isfinite(alpha) or alpha <= 0.0:
        raise EvaluationError("precision draw underflowed to a non-positive value")
    return alpha


def gibbs_logistic_step(state, model, cfg: IntegratorConfig, rng: RandomStream):
    """One Gibbs sweep of the hierarchical logistic model.

    Updates the coefficients by a single RMHMC transition conditional on the
    current precision, then redraws the precision from its conjugate Gamma
    conditional.

    Args:
        state: Pair (beta, alpha) with alpha > 0.
        model: A LogisticModel; its stored precision is replaced by alpha.
        cfg: Integrator configuration for the coefficient update.
        rng: Stream for both the RMHMC transition and the Gamma draw.

    Returns:
        The updated (beta, alpha) pair.
    """
    beta, alpha = state
    if alpha <= 0.0:
        raise ValueError("precision must be positive")
    conditional = model.with_alpha(alpha)
    record = hmc_transition(conditional, beta, cfg, rng)
    beta = record.next_position(np.asarray(beta, dtype=float))
    alpha = sample_precision(beta, model.shape_k, model.scale_theta, rng)
    return beta, alpha


def run_multi_chain(
    model: TargetModel,
    q0: np.ndarray,
    cfg: IntegratorConfig,
    r: int,
    n: int,
    coordinate: int,
    seed: int,
) -> np.ndarray:
    """Runs r independent chains from a shared start and returns one
    coordinate's trajectory matrix.

    Column j holds the chains' coordinate values at step j, with column 0
    equal to the shared initial value, so row-wise distributions track the
    convergence speed of the sampler in that coordinate.

    Args:
        model: Target model.
        q0: Shared initial position.
        cfg: Integrator configuration.
        r: Number of chains; at least 2.
        n: Number of recorded steps per chain (including step 0).
        coordinate: Index of the tracked dimension.
        seed: Master seed; chains use deterministic child streams.

    Returns:
        An (r, n) array of coordinate values.
    """
    if r < 2:
        raise ValueError("multi-chain diagnostics require at least two chains")
    q0 = np.asarray(q0, dtype=float)
    streams = RandomStream(seed).split(r)
    out = np.empty((r, n))
    for i, stream in enumerate(streams):
        q = q0
        out[i, 0] = q0[coordinate]
        for j in range(1, n):
            try:
                record = hmc_transition(model, q, cfg, stream)
            except EvaluationError as exc:
                raise EvaluationError(f"chain {i} failed at step {j}: {exc}", exc.q) from exc
            q = record.next_position(q)
            out[i, j] = q[coordinate]
    return out
