"""Numerical integrators for Hamiltonian dynamics: the explicit leapfrog for
separable Hamiltonians, the generalized leapfrog with implicitly-defined
sub-steps resolved by fixed-point iteration or Newton's method, and the
implicit midpoint rule. Every implicit loop reports its iteration count so
the computational effort of a convergence threshold is observable.
"""

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .hamiltonian import (
    grad_q_hamiltonian,
    metric_quadratic_term,
    metric_trace_term,
    riemannian_hamiltonian,
)
from .phase import DivergenceError, EvaluationError, MetricBundle, PhasePoint, TargetModel

DEFAULT_FIXED_POINT_MAX_ITERS = 100
DEFAULT_NEWTON_MAX_ITERS = 25


class Solver(enum.Enum):
    FIXED_POINT = "fixed-point"
    NEWTON = "newton"


class IntegratorKind(enum.Enum):
    LEAPFROG = "leapfrog"
    GENERALIZED_LEAPFROG = "glf"
    IMPLICIT_MIDPOINT = "midpoint"


@dataclass
class IntegratorConfig:
    """Step size, trajectory length, and implicit-solver settings.

    ``max_iters`` of None resolves to 100 for fixed-point loops and 25 for
    Newton loops. A loop that exhausts its iteration cap is not an error; the
    step proceeds with the last iterate and the convergence flag records the
    shortfall.
    """

    step_size: float
    num_steps: int = 20
    threshold: float = 1e-9
    max_iters: int | None = None
    momentum_solver: Solver = Solver.FIXED_POINT
    position_solver: Solver = Solver.FIXED_POINT
    kind: IntegratorKind = IntegratorKind.GENERALIZED_LEAPFROG

    def __post_init__(self):
        if not np.isfinite(self.step_size):
            raise ValueError("step_size must be finite")
        # num_steps == 0 denotes the identity trajectory, used by the
        # finite-difference volume diagnostics.
        if self.num_steps < 0:
            raise ValueError("num_steps must be non-negative")
        if self.threshold <= 0.0:
            raise ValueError("threshold must be positive")
        if self.max_iters is not None and self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")

    def _cap(self, solver: Solver) -> int:
        if self.max_iters is not None:
            return self.max_iters
        if solver is Solver.NEWTON:
            return DEFAULT_NEWTON_MAX_ITERS
        return DEFAULT_FIXED_POINT_MAX_ITERS

    @property
    def momentum_max_iters(self) -> int:
        return self._cap(self.momentum_solver)

    @property
    def position_max_iters(self) -> int:
        return self._cap(self.position_solver)

    def with_threshold(self, threshold: float) -> "IntegratorConfig":
        return replace(self, threshold=threshold)

    @classmethod
    def exact_regime(cls, step_size: float, num_steps: int) -> "IntegratorConfig":
        """Newton solvers at threshold 1e-13: the closest floating-point
        realization of the exactly-solved generalized leapfrog."""
        return cls(
            step_size=step_size,
            num_steps=num_steps,
            threshold=1e-13,
            momentum_solver=Solver.NEWTON,
            position_solver=Solver.NEWTON,
        )


@dataclass
class StepStats:
    """Solver effort for one integrator step.

    ``l_p`` and ``l_q`` count the iterations spent resolving the implicit
    momentum and position updates; a convergence flag is False exactly when
    the corresponding loop exited on its iteration cap.
    """

    l_p: int = 0
    l_q: int = 0
    momentum_converged: bool = True
    position_converged: bool = True

    @classmethod
    def aggregate(cls, stats: list["StepStats"]) -> "StepStats":
        return cls(
            l_p=sum(s.l_p for s in stats),
            l_q=sum(s.l_q for s in stats),
            momentum_converged=all(s.momentum_converged for s in stats),
            position_converged=all(s.position_converged for s in stats),
        )


@dataclass
class TrajectoryResult:
    """End point of a composed trajectory plus per-step effort and energies.

    ``energies[0]`` is the Hamiltonian at the initial point, so the list has
    one more entry than there are steps.
    """

    end: PhasePoint
    stats: list[StepStats] = field(default_factory=list)
    energies: list[float] = field(default_factory=list)

    @property
    def total_stats(self) -> StepStats:
        return StepStats.aggregate(self.stats) if self.stats else StepStats()


def _check_finite(vec: np.ndarray, update: str):
    if not np.isfinite(vec).all():
        raise DivergenceError(f"non-finite iterate in {update} update", update)


def _guard_delta(delta: float, update: str) -> float:
    # A finite iterate difference keeps the new iterate finite by induction,
    # so a scalar check per iteration suffices inside the solver loops.
    if not math.isfinite(delta):
        raise DivergenceError(f"non-finite iterate in {update} update", update)
    return delta


def leapfrog_step(model: TargetModel, z: PhasePoint, step_size: float) -> PhasePoint:
    """One explicit half-kick / drift / half-kick step for a separable
    Hamiltonian.

    Args:
        model: Target model; must have a constant metric, otherwise the
            explicit scheme is neither reversible nor volume preserving.
        z: Starting phase-space point.
        step_size: Integrator step size.

    Returns:
        The next phase-space point.
    """
    if not model.constant_metric:
        raise ValueError("leapfrog requires a constant-metric (separable) model")
    bundle = model.metric_bundle(z.q)
    half = 0.5 * step_size
    # With a constant metric the trace and quadratic terms of grad_q H vanish.
    p_half = z.p + half * model.grad_log_density(z.q)
    q_next = z.q + step_size * (bundle.inverse @ p_half)
    _check_finite(q_next, "leapfrog")
    p_next = p_half + half * model.grad_log_density(q_next)
    _check_finite(p_next, "leapfrog")
    return PhasePoint(q_next, p_next)


def _fixed_point_momentum(model, z, cfg, bundle, fixed):
    """Implicit momentum half-step by fixed-point iteration, initialized at
    the previous momentum value. ``fixed`` is the p-independent part of
    grad_q H at z.q, cached by the caller."""
    base = z.p - 0.5 * cfg.step_size * fixed
    quarter = 0.25 * cfg.step_size
    grads = bundle.grads
    inverse = bundle.inverse
    p_cur = z.p
    delta = np.inf
    iters = 0
    cap = cfg.momentum_max_iters
    threshold = cfg.threshold
    while delta > threshold and iters < cap:
        v = inverse @ p_cur
        p_new = base + quarter * ((grads @ v) @ v)
        delta = _guard_delta(float(np.abs(p_new - p_cur).max()), "momentum")
        p_cur = p_new
        iters += 1
    return p_cur, iters, delta <= threshold


def _momentum_jacobian(bundle, p_bar, half):
    # d g / d p_bar = Id - (eps/2) T G^{-1} with rows T_k = (dG/dq_k) G^{-1} p_bar
    v = bundle.inverse @ p_bar
    rows = np.einsum("kij,j->ki", bundle.grads, v)
    return np.eye(p_bar.size) - half * (rows @ bundle.inverse)


def _newton_momentum(model, z, cfg, bundle, fixed):
    """Implicit momentum half-step by Newton iterations on the root of
    g(p) = p - p_n + (eps/2) grad_q H(q_n, p). ``fixed`` is the
    p-independent part of grad_q H at z.q."""
    half = 0.5 * cfg.step_size
    cap = cfg.momentum_max_iters

    def residual(p_bar):
        return p_bar - z.p + half * (fixed - 0.5 * metric_quadratic_term(bundle, p_bar))

    p_cur = z.p.copy()
    iters = 0
    converged = False
    res = residual(p_cur)
    while iters < cap:
        jac = _momentum_jacobian(bundle, p_cur, half)
        try:
            step = np.linalg.solve(jac, res)
        except np.linalg.LinAlgError as exc:
            raise EvaluationError("singular Newton Jacobian in momentum update", z.q) from exc
        p_cur = p_cur - step
        iters += 1
        res = residual(p_cur)
        res_norm = _guard_delta(float(np.abs(res).max()), "momentum")
        if res_norm <= cfg.threshold:
            converged = True
            break
    return p_cur, iters, converged


def glf_momentum_newton(model, q, p, step_size, threshold, max_iters):
    """Solves the generalized leapfrog's implicit momentum half-step with
    Newton's method.

    Args:
        model: Target model.
        q: Position at which the half-step is taken.
        p: Momentum being advanced.
        step_size: Integrator step size.
        threshold: Infinity-norm convergence threshold.
        max_iters: Iteration cap; reaching it is not an error.

    Returns:
        The solved half-step momentum and the number of Newton iterations.
    """
    cfg = IntegratorConfig(
        step_size=step_size,
        threshold=threshold,
        max_iters=max_iters,
        momentum_solver=Solver.NEWTON,
        position_solver=Solver.NEWTON,
    )
    bundle = model.metric_bundle(np.asarray(q, dtype=float))
    grad_log = model.grad_log_density(np.asarray(q, dtype=float))
    fixed = -grad_log + 0.5 * metric_trace_term(bundle)
    z = PhasePoint(q, p)
    with np.errstate(over="ignore", invalid="ignore"):
        p_half, iters, _ = _newton_momentum(model, z, cfg, bundle, fixed)
    return p_half, iters


def _fixed_point_position(model, z, cfg, bundle, p_half):
    """Implicit position full-step by fixed-point iteration, initialized at
    the previous position. Returns the final iterate together with the
    freshly computed bundle there, so the explicit half-step and the next
    integrator step can reuse it."""
    half = 0.5 * cfg.step_size
    v_start = bundle.inverse @ p_half
    base = z.q + half * v_start
    q_cur = z.q
    v_cur = v_start
    delta = np.inf
    iters = 0
    cap = cfg.position_max_iters
    threshold = cfg.threshold
    apply_inverse = model.metric_inverse_apply
    while delta > threshold and iters < cap:
        q_new = base + half * v_cur
        delta = _guard_delta(float(np.abs(q_new - q_cur).max()), "position")
        q_cur = q_new
        iters += 1
        if delta > threshold and iters < cap:
            v_cur = apply_inverse(q_cur, p_half)
    end_bundle = model.metric_bundle(q_cur)
    return q_cur, iters, delta <= threshold, end_bundle


def _position_jacobian(bundle, p_bar, half):
    # d g / d q' = Id + (eps/2) G^{-1} T' with columns indexed by the
    # differentiated coordinate; T'_k = (dG/dq_k) G^{-1} p_bar.
    v = bundle.inverse @ p_bar
    rows = np.einsum("kij,j->ki", bundle.grads, v)
    return np.eye(p_bar.size) + half * (bundle.inverse @ rows.T)


def _newton_position(model, z, cfg, bundle, p_half):
    half = 0.5 * cfg.step_size
    v_start = bundle.inverse @ p_half
    cap = cfg.position_max_iters

    q_cur = z.q.copy()
    bundle_cur = bundle
    res = -cfg.step_size * v_start  # residual at q' = q_n
    iters = 0
    converged = False
    while iters < cap:
        jac = _position_jacobian(bundle_cur, p_half, half)
        try:
            step = np.linalg.solve(jac, res)
        except np.linalg.LinAlgError as exc:
            raise EvaluationError("singular Newton Jacobian in position update", q_cur) from exc
        q_cur = q_cur - step
        _check_finite(q_cur, "position")
        iters += 1
        bundle_cur = model.metric_bundle(q_cur)
        res = q_cur - z.q - half * (v_start + bundle_cur.inverse @ p_half)
        res_norm = _guard_delta(float(np.abs(res).max()), "position")
        if res_norm <= cfg.threshold:
            converged = True
            break
    return q_cur, iters, converged, bundle_cur


def glf_position_newton(model, q, p_half, step_size, threshold, max_iters):
    """Solves the generalized leapfrog's implicit position full-step with
    Newton's method, returning the new position and the iteration count."""
    cfg = IntegratorConfig(
        step_size=step_size,
        threshold=threshold,
        max_iters=max_iters,
        momentum_solver=Solver.NEWTON,
        position_solver=Solver.NEWTON,
    )
    q = np.asarray(q, dtype=float)
    bundle = model.metric_bundle(q)
    z = PhasePoint(q, p_half)
    with np.errstate(over="ignore", invalid="ignore"):
        q_next, iters, _, _ = _newton_position(model, z, cfg, bundle, np.asarray(p_half, dtype=float))
    return q_next, iters


def _glf_step(model, z, cfg, bundle, fixed=None):
    """One generalized leapfrog step.

    ``fixed`` is the p-independent part of grad_q H at z.q when the caller
    already has it (it equals the previous step's closing value). Returns the
    new point, the step stats, the bundle at the new position, and the new
    position's p-independent gradient part, the latter two for reuse by the
    following step.
    """
    if fixed is None:
        fixed = -model.grad_log_density(z.q) + 0.5 * metric_trace_term(bundle)
    if cfg.momentum_solver is Solver.NEWTON:
        p_half, l_p, mom_ok = _newton_momentum(model, z, cfg, bundle, fixed)
    else:
        p_half, l_p, mom_ok = _fixed_point_momentum(model, z, cfg, bundle, fixed)

    if cfg.position_solver is Solver.NEWTON:
        q_next, l_q, pos_ok, end_bundle = _newton_position(model, z, cfg, bundle, p_half)
    else:
        q_next, l_q, pos_ok, end_bundle = _fixed_point_position(model, z, cfg, bundle, p_half)

    half = 0.5 * cfg.step_size
    fixed_next = -model.grad_log_density(q_next) + 0.5 * metric_trace_term(end_bundle)
    p_next = p_half - half * (fixed_next - 0.5 * metric_quadratic_term(end_bundle, p_half))
    _check_finite(p_next, "momentum")
    stats = StepStats(l_p=l_p, l_q=l_q, momentum_converged=mom_ok, position_converged=pos_ok)
    return PhasePoint(q_next, p_next), stats, end_bundle, fixed_next


def glf_step(model: TargetModel, z: PhasePoint, cfg: IntegratorConfig):
    """One step of the generalized leapfrog integrator.

    The implicit momentum half-step and position full-step are each resolved
    by the configured solver to the infinity-norm threshold in ``cfg``; the
    closing momentum half-step is explicit. Fixed-point loops initialize at
    the previous value of their variable.

    Args:
        model: Target model.
        z: Starting phase-space point.
        cfg: Integrator configuration with kind GENERALIZED_LEAPFROG.

    Returns:
        Tuple of the next phase-space point and the step's StepStats.
    """
    with np.errstate(over="ignore", invalid="ignore"):
        point, stats, _, _ = _glf_step(model, z, cfg, model.metric_bundle(z.q))
    return point, stats


def _midpoint_step(model, z, cfg):
    """One implicit midpoint step, solved by fixed-point iteration on the
    concatenated phase-space state."""
    eps = cfg.step_size
    z0 = z.flatten()
    m = z.dim
    z_cur = z0
    delta = np.inf
    iters = 0
    cap = cfg.position_max_iters
    while delta > cfg.threshold and iters < cap:
        mid = 0.5 * (z0 + z_cur)
        q_mid, p_mid = mid[:m], mid[m:]
        bundle_mid = model.metric_bundle(q_mid)
        z_mid = PhasePoint(q_mid, p_mid)
        dq = bundle_mid.inverse @ p_mid
        dp = -grad_q_hamiltonian(model, z_mid, bundle=bundle_mid)
        z_new = z0 + eps * np.concatenate((dq, dp))
        delta = _guard_delta(float(np.abs(z_new - z_cur).max()), "midpoint")
        z_cur = z_new
        iters += 1
    stats = StepStats(l_p=0, l_q=iters, momentum_converged=True, position_converged=delta <= cfg.threshold)
    return PhasePoint.from_flat(z_cur), stats


def implicit_midpoint_step(model: TargetModel, z: PhasePoint, cfg: IntegratorConfig):
    """One step of the implicit midpoint integrator.

    The joint 2m-dimensional implicit equation is solved by plain fixed-point
    iteration; the iteration count is reported in ``l_q`` with ``l_p`` zero.
    """
    with np.errstate(over="ignore", invalid="ignore"):
        return _midpoint_step(model, z, cfg)


def transition_trajectory(model: TargetModel, z: PhasePoint, cfg: IntegratorConfig):
    """Trajectory driver for Metropolis-Hastings transitions.

    Identical composition to ``integrate_trajectory`` but evaluates the
    Hamiltonian only at the two endpoints, which is all the accept-reject
    decision needs.

    Returns:
        Tuple (end point, aggregated StepStats, start energy, end energy).
    """
    is_glf = cfg.kind is IntegratorKind.GENERALIZED_LEAPFROG
    bundle = model.metric_bundle(z.q)
    energy_start = riemannian_hamiltonian(model, z, bundle=bundle)
    stats: list[StepStats] = []
    current = z
    fixed = None
    with np.errstate(over="ignore", invalid="ignore"):
        for step_index in range(cfg.num_steps):
            try:
                if is_glf:
                    current, step_stats, bundle, fixed = _glf_step(model, current, cfg, bundle, fixed)
                elif cfg.kind is IntegratorKind.LEAPFROG:
                    current = leapfrog_step(model, current, cfg.step_size)
                    step_stats = StepStats()
                    bundle = None
                else:
                    current, step_stats = _midpoint_step(model, current, cfg)
                    bundle = None
            except DivergenceError as exc:
                exc.step_index = step_index
                raise
            stats.append(step_stats)
        try:
            energy_end = riemannian_hamiltonian(model, current, bundle=bundle)
        except EvaluationError:
            energy_end = np.inf
    return current, StepStats.aggregate(stats), energy_start, energy_end


def integrate_trajectory(model: TargetModel, z: PhasePoint, cfg: IntegratorConfig) -> TrajectoryResult:
    """Composes ``cfg.num_steps`` steps of the configured integrator.

    Records per-step solver statistics and the Hamiltonian before and after
    every step. Divergence errors are re-raised with the failing step index
    attached.

    Args:
        model: Target model.
        z: Initial phase-space point.
        cfg: Integrator configuration; ``cfg.kind`` selects the scheme.

    Returns:
        A TrajectoryResult with the final point, k StepStats, and k+1
        energies.
    """
    is_glf = cfg.kind is IntegratorKind.GENERALIZED_LEAPFROG
    bundle = model.metric_bundle(z.q)
    energies = [riemannian_hamiltonian(model, z, bundle=bundle)]
    stats: list[StepStats] = []
    current = z
    fixed = None
    with np.errstate(over="ignore", invalid="ignore"):
        for step_index in range(cfg.num_steps):
            try:
                if is_glf:
                    current, step_stats, bundle, fixed = _glf_step(model, current, cfg, bundle, fixed)
                elif cfg.kind is IntegratorKind.LEAPFROG:
                    current = leapfrog_step(model, current, cfg.step_size)
                    step_stats = StepStats()
                    bundle = model.metric_bundle(current.q)
                else:
                    current, step_stats = _midpoint_step(model, current, cfg)
                    bundle = model.metric_bundle(current.q)
            except DivergenceError as exc:
                exc.step_index = step_index
                raise
            stats.append(step_stats)
            energies.append(riemannian_hamiltonian(model, current, bundle=bundle))
    return TrajectoryResult(end=current, stats=stats, energies=energies)
